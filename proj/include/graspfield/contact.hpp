#pragma once

#include "graspfield/core.hpp"
#include "graspfield/surface.hpp"

#include <filesystem>

namespace graspfield {

enum class MaskProvenance { External, NearestPoint, RayBased, GroundTruth };

const char* mask_provenance_name(MaskProvenance provenance);
MaskProvenance mask_provenance_from_name(const std::string& name);

/// Per-point contact weights in [0, 1] for a hand/object cloud pair.
/// Optional per-scale rows override the object weights for individual field
/// scales; by default one shared row is broadcast to every scale.
struct ContactMask {
    std::vector<double> hand_weights;
    std::vector<double> object_weights;
    std::vector<std::vector<double>> object_weights_per_scale;
    MaskProvenance provenance = MaskProvenance::External;
    std::size_t clamped_entries = 0;  // inputs outside [0,1] clamped on load

    void validate(std::size_t hand_count, std::size_t object_count) const;

    const std::vector<double>& object_weights_for_scale(std::size_t scale) const {
        if (scale < object_weights_per_scale.size() && !object_weights_per_scale[scale].empty()) {
            return object_weights_per_scale[scale];
        }
        return object_weights;
    }
};

/// Reads an externally produced mask: either CSV "index,weight" per cloud
/// (path and path with ".object" inserted), or one JSON file
/// {"hand": [...], "object": [...]}. Out-of-range weights clamp to [0, 1]
/// and are counted in clamped_entries.
ContactMask load_external_mask(const std::filesystem::path& path,
                               const OrientedPointCloud& hand,
                               const OrientedPointCloud& object_points);

void save_mask_json(const std::filesystem::path& path, const ContactMask& mask);
ContactMask load_mask_json(const std::filesystem::path& path, std::size_t hand_count,
                           std::size_t object_count);

/// Proximity mask: weight 1 inside tau, Gaussian shoulder
/// exp(-((d - tau) / softness)^2) beyond it. Object weights take the max
/// over hand points assigned to their nearest object sample point.
ContactMask nearest_point_mask(const OrientedPointCloud& hand, const SurfaceModel& object,
                               const OrientedPointCloud& object_points, double tau,
                               double softness);

/// Casts rays along -normal from every hand point; a hit inside max_range
/// marks the hand point, and object sample points within one average point
/// spacing of the hit mark the object side.
ContactMask ray_based_mask(const OrientedPointCloud& hand, const SurfaceModel& object,
                           const OrientedPointCloud& object_points, double max_range);

/// Mean nearest-neighbor spacing of a cloud (sampled for large clouds).
double average_point_spacing(const OrientedPointCloud& cloud);

}  // namespace graspfield
