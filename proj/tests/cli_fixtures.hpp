#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jasgan/cli.hpp"

namespace jasgan::testutil {

namespace fs = std::filesystem;

/// A small corpus and narrow networks so every subcommand finishes in seconds.
inline nlohmann::json tiny_experiment() {
    return {{"corpus",
             {{"phantom",
               {{"dims", {10, 32, 32}},
                {"atrium_radius_mm", {8.0, 11.0}},
                {"atrium_radius_z_mm", {2.5, 3.5}},
                {"wall_thickness_vox", {1, 1}},
                {"scar_count", {2, 4}},
                {"scar_radius_mm", {1.5, 2.5}},
                {"distractor_count", 2}}},
              {"samples", 6},
              {"test_samples", 3}}},
            {"net", {{"patch", 32}, {"edn_base_width", 4}, {"rn_width", 4}, {"lstm_hidden", 4}, {"disc_base_width", 4}}},
            {"train", {{"epochs", 1}, {"batch_size", 4}}},
            {"seed", 5},
            {"epoch_validation", false}};
}

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

inline CliResult cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run_command(args, out, err);
    return {code, out.str(), err.str()};
}

inline fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("jasgan_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

} // namespace jasgan::testutil
