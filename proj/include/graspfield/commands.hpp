#pragma once

#include "graspfield/config.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace graspfield::cmd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the bridge on a scene directory; writes refined.ply (and refined.obj
/// when the input hand had connectivity), trace.csv and manifest.json into
/// out_dir. Exit 0/2/3 per the error contract; messages go to stderr.
int refine(const std::filesystem::path& scene_dir, const std::filesystem::path& out_dir,
           const RunConfig& cfg);

/// Evaluates the metric suite for a scene (optionally against a refined hand
/// file); writes <out_base>.json and <out_base>.csv.
int metrics(const std::filesystem::path& scene_dir,
            const std::optional<std::filesystem::path>& refined_path,
            const std::filesystem::path& out_base, const RunConfig& cfg);

/// Computes or re-exports a contact mask (method: nearest | ray | external).
int contact(const std::filesystem::path& scene_dir, const std::string& method,
            const std::filesystem::path& out_path, const RunConfig& cfg);

/// Generates a synthetic grasp scene directory.
int gen(const std::string& kind, const std::string& defect, double magnitude,
        std::uint64_t seed, const std::filesystem::path& out_dir, std::size_t points);

/// Runs the built-in verification suite in a scratch directory; prints one
/// line per criterion. Returns 0 iff everything passed.
int verify(const std::filesystem::path& scratch_dir);

}  // namespace graspfield::cmd
