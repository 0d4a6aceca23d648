#pragma once

#include "graspfield/bridge.hpp"
#include "graspfield/core.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace graspfield {

struct FieldTemplate {
    std::vector<double> scales{0.2, 0.05};  // sigma per stage, strictly decreasing
    std::vector<double> strengths{1.0, 1.0};
    double cutoff = 6.0;
    bool normalize = true;
};

struct MaskParams {
    std::string method = "nearest";  // nearest | ray | external
    double tau = 0.01;               // meters
    double softness = 0.005;         // meters; nearest-mask shoulder width
    double max_range = 0.05;         // meters; ray casting range
};

struct MetricsParams {
    int iv_resolution = 128;
};

struct IoParams {
    std::string input;
    std::string output;
    std::uint64_t seed = 0;
};

/// Every numeric parameter of every command lives here; the CLI only ever
/// overrides individual keys via dotted paths.
struct RunConfig {
    BridgeConfig bridge = BridgeConfig::defaults();
    FieldTemplate field;
    MaskParams mask;
    MetricsParams metrics;
    IoParams io;

    static RunConfig defaults();
    /// Re-derives the per-stage field parameters from the field template and
    /// validates everything.
    void resolve();
    void validate() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);

/// Strict parse: unknown keys anywhere are rejected.
RunConfig config_from_json(const nlohmann::json& doc);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

/// Applies "a.b.c=value" into the JSON document; values parse as JSON with a
/// string fallback. Numeric segments index arrays.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// FNV-1a over the canonical serialization; stable across runs.
std::string config_hash(const RunConfig& cfg);

}  // namespace graspfield
