#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jasgan/error.hpp"

namespace jasgan {

struct Dims {
    std::int64_t depth = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;

    std::int64_t count() const { return depth * height * width; }
    std::int64_t slice_count() const { return height * width; }
    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Physical voxel size in millimetres, ordered (z, y, x) like Dims.
struct Spacing {
    double z = 1.0;
    double y = 1.0;
    double x = 1.0;

    double voxel_volume() const { return z * y * x; }
    bool valid() const { return z > 0.0 && y > 0.0 && x > 0.0; }
    friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Dense rank-3 grid stored z-major (x fastest).
template <typename T>
class Grid3 {
public:
    using value_type = T;

    Grid3() = default;
    explicit Grid3(Dims dims, T fill = T{})
        : dims_(dims), data_(static_cast<std::size_t>(dims.count()), fill) {
        if (dims.depth <= 0 || dims.height <= 0 || dims.width <= 0)
            throw ShapeError("grid dimensions must be positive");
    }

    const Dims& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(std::int64_t z, std::int64_t y, std::int64_t x) const {
        return static_cast<std::size_t>((z * dims_.height + y) * dims_.width + x);
    }
    bool contains(std::int64_t z, std::int64_t y, std::int64_t x) const {
        return z >= 0 && y >= 0 && x >= 0 && z < dims_.depth && y < dims_.height && x < dims_.width;
    }

    T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) { return data_[index(z, y, x)]; }
    const T& operator()(std::int64_t z, std::int64_t y, std::int64_t x) const { return data_[index(z, y, x)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    std::span<const T> slice(std::int64_t z) const {
        return std::span<const T>(data_).subspan(static_cast<std::size_t>(z * dims_.slice_count()),
                                                  static_cast<std::size_t>(dims_.slice_count()));
    }

    friend bool operator==(const Grid3&, const Grid3&) = default;

private:
    Dims dims_{};
    std::vector<T> data_;
};

using Mask = Grid3<std::uint8_t>;

/// Network input: a scalar image grid with physical spacing.
struct Volume {
    Grid3<float> data;
    Spacing spacing;
    std::string id;

    friend bool operator==(const Volume&, const Volume&) = default;
};

/// Co-registered ground truth. Invariant: scar ⊆ wall ⊆ atrium.
struct LabelPair {
    Mask atrium;
    Mask scar;
    Mask wall;

    friend bool operator==(const LabelPair&, const LabelPair&) = default;
};

inline std::int64_t count_nonzero(const Mask& m) {
    return std::count_if(m.values().begin(), m.values().end(), [](std::uint8_t v) { return v != 0; });
}

/// True when every set voxel of `inner` is also set in `outer`.
inline bool is_subset(const Mask& inner, const Mask& outer) {
    if (inner.dims() != outer.dims()) throw ShapeError("mask grids differ");
    for (std::size_t i = 0; i < inner.size(); ++i)
        if (inner[i] && !outer[i]) return false;
    return true;
}

inline void require_same_grid(const Dims& a, const Dims& b, const char* what) {
    if (!(a == b)) throw ShapeError(std::string(what) + ": grids differ");
}

/// Binarize a probability grid at `threshold` (inclusive lower bound is excluded: p > t).
inline Mask binarize(const Grid3<float>& prob, float threshold = 0.5f) {
    Mask out(prob.dims());
    for (std::size_t i = 0; i < prob.size(); ++i) out[i] = prob[i] > threshold ? 1 : 0;
    return out;
}

} // namespace jasgan
