#pragma once

// Raw little-endian arrays with JSON sidecars, plus the corpus manifest.
//
//   <stem>.raw   float32 or uint8, z-major (x fastest), little-endian
//   <stem>.json  {"dims": [D,H,W], "spacing": [z,y,x], "dtype": "float32"|"uint8", "role": ..., "id": ...}

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "jasgan/grid.hpp"

namespace jasgan::io {

namespace fs = std::filesystem;
using nlohmann::json;

template <typename T>
constexpr const char* dtype_name() {
    if constexpr (std::is_same_v<T, float>) return "float32";
    else if constexpr (std::is_same_v<T, std::uint8_t>) return "uint8";
    else static_assert(sizeof(T) == 0, "unsupported dtype");
}

inline json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

template <typename T>
void write_grid(const fs::path& stem, const Grid3<T>& grid, const Spacing& spacing, const std::string& role,
                const std::string& id) {
    fs::create_directories(stem.parent_path());
    std::vector<T> buf(grid.values().begin(), grid.values().end());
    if constexpr (sizeof(T) > 1 && std::endian::native == std::endian::big) {
        for (auto& v : buf) {
            auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
            std::reverse(bytes.begin(), bytes.end());
            v = std::bit_cast<T>(bytes);
        }
    }
    std::ofstream out(fs::path(stem).concat(".raw"), std::ios::binary);
    if (!out) throw IoError("cannot write " + stem.string() + ".raw");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(T)));
    const Dims d = grid.dims();
    write_json(fs::path(stem).concat(".json"), json{{"dims", {d.depth, d.height, d.width}},
                                                    {"spacing", {spacing.z, spacing.y, spacing.x}},
                                                    {"dtype", dtype_name<T>()},
                                                    {"role", role},
                                                    {"id", id}});
}

struct GridHeader {
    Dims dims;
    Spacing spacing;
    std::string dtype;
    std::string role;
    std::string id;
};

inline GridHeader read_header(const fs::path& stem) {
    const json j = read_json(fs::path(stem).concat(".json"));
    try {
        GridHeader h;
        h.dims = {j.at("dims").at(0).get<std::int64_t>(), j.at("dims").at(1).get<std::int64_t>(),
                  j.at("dims").at(2).get<std::int64_t>()};
        h.spacing = {j.at("spacing").at(0).get<double>(), j.at("spacing").at(1).get<double>(), j.at("spacing").at(2).get<double>()};
        h.dtype = j.at("dtype").get<std::string>();
        h.role = j.value("role", "");
        h.id = j.value("id", "");
        return h;
    } catch (const json::exception& e) {
        throw ConfigError("malformed sidecar " + stem.string() + ".json: " + e.what());
    }
}

template <typename T>
Grid3<T> read_grid(const fs::path& stem, GridHeader* header_out = nullptr) {
    const GridHeader h = read_header(stem);
    if (h.dtype != dtype_name<T>()) throw ConfigError(stem.string() + ": expected dtype " + dtype_name<T>() + ", got " + h.dtype);
    Grid3<T> grid(h.dims);
    std::ifstream in(fs::path(stem).concat(".raw"), std::ios::binary);
    if (!in) throw MissingInputError("cannot open " + stem.string() + ".raw");
    in.read(reinterpret_cast<char*>(grid.storage().data()), static_cast<std::streamsize>(grid.size() * sizeof(T)));
    if (in.gcount() != static_cast<std::streamsize>(grid.size() * sizeof(T)))
        throw IoError(stem.string() + ".raw is shorter than its sidecar declares");
    if constexpr (sizeof(T) > 1 && std::endian::native == std::endian::big) {
        for (auto& v : grid.values()) {
            auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
            std::reverse(bytes.begin(), bytes.end());
            v = std::bit_cast<T>(bytes);
        }
    }
    if (header_out) *header_out = h;
    return grid;
}

inline void write_volume(const fs::path& stem, const Volume& v, const std::string& role = "image") {
    write_grid(stem, v.data, v.spacing, role, v.id);
}

inline Volume read_volume(const fs::path& stem) {
    GridHeader h;
    auto data = read_grid<float>(stem, &h);
    return Volume{std::move(data), h.spacing, h.id};
}

inline Mask read_mask(const fs::path& stem) { return read_grid<std::uint8_t>(stem); }

/// One corpus entry; paths are relative to the corpus root.
struct SampleRecord {
    std::string id;
    std::string split;  // "train" | "test"
    std::uint64_t seed = 0;
};

inline void write_sample(const fs::path& root, const SampleRecord& rec, const Volume& v, const LabelPair& labels) {
    const fs::path dir = root / rec.id;
    write_volume(dir / "image", v);
    write_grid(dir / "atrium", labels.atrium, v.spacing, "atrium", rec.id);
    write_grid(dir / "scar", labels.scar, v.spacing, "scar", rec.id);
    write_grid(dir / "wall", labels.wall, v.spacing, "wall", rec.id);
}

struct LoadedSample {
    SampleRecord record;
    Volume volume;
    LabelPair labels;
};

inline LoadedSample read_sample(const fs::path& root, const SampleRecord& rec) {
    const fs::path dir = root / rec.id;
    LoadedSample s;
    s.record = rec;
    s.volume = read_volume(dir / "image");
    s.labels = LabelPair{read_mask(dir / "atrium"), read_mask(dir / "scar"), read_mask(dir / "wall")};
    return s;
}

inline json manifest_json(const std::vector<SampleRecord>& samples, const std::string& config_hash) {
    json list = json::array();
    for (const auto& s : samples)
        list.push_back({{"id", s.id},
                        {"split", s.split},
                        {"seed", s.seed},
                        {"image", s.id + "/image.raw"},
                        {"atrium", s.id + "/atrium.raw"},
                        {"scar", s.id + "/scar.raw"},
                        {"wall", s.id + "/wall.raw"}});
    return json{{"config_hash", config_hash}, {"samples", list}};
}

inline std::vector<SampleRecord> read_manifest(const fs::path& root, std::string* config_hash = nullptr) {
    const json j = read_json(root / "manifest.json");
    std::vector<SampleRecord> out;
    try {
        for (const auto& s : j.at("samples"))
            out.push_back({s.at("id").get<std::string>(), s.at("split").get<std::string>(), s.value("seed", std::uint64_t{0})});
        if (config_hash) *config_hash = j.value("config_hash", "");
    } catch (const json::exception& e) {
        throw ConfigError("malformed manifest: " + std::string(e.what()));
    }
    return out;
}

} // namespace jasgan::io
