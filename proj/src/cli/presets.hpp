#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace oppsched::cli {

/// Horizon is fluid time for trajectory presets and slots for cost presets.
struct PresetOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> horizon;
    std::optional<double> r;
    std::optional<int> reps;
    std::optional<std::int64_t> warmup;

    nlohmann::json to_json() const;
};

struct PresetResult {
    std::vector<std::filesystem::path> files;
    nlohmann::json manifest;
};

const std::vector<std::string>& preset_names();

/// Writes the preset's CSV files and manifest.json into `dir`.
/// Throws std::invalid_argument for an unknown name or a bad override.
PresetResult run_preset(const std::string& name, const std::filesystem::path& dir, const PresetOverrides& ov,
                        std::ostream& log);

}  // namespace oppsched::cli
