#pragma once

#include "graspfield/core.hpp"
#include "graspfield/surface.hpp"

#include <filesystem>
#include <optional>

namespace graspfield {

/// Interaction quality summary. Lengths in mm, volumes in cm^3 (geometry is
/// metric internally; conversion happens here at the reporting boundary).
/// Error metrics are absent when no ground truth exists; IV is absent when
/// either shape lacks a watertight mesh.
struct InteractionReport {
    std::optional<double> mpjpe_mm;
    std::optional<double> mpvpe_mm;
    std::optional<double> pa_mpjpe_mm;
    std::optional<double> pa_mpvpe_mm;
    std::optional<double> iv_cm3;
    double pd_mm = 0.0;
    double pd_mean_mm = 0.0;  // mean depth over penetrating points (diagnostic)
    std::optional<double> pe_mm;
    std::vector<double> per_point_signed_distances;  // meters, diagnostic

    void write_json(const std::filesystem::path& path) const;
    /// One row matching the usual table column order:
    /// MPJPE, MPVPE, IV, PD, PE (empty cells when absent).
    void write_csv(const std::filesystem::path& path) const;
};

/// Mean per-vertex position error in mm; with align=true the prediction is
/// Procrustes-aligned to the ground truth first.
double mpvpe(const OrientedPointCloud& pred, const OrientedPointCloud& gt, bool align);

/// Mean distance between per-label centroid pairs ("joints"), mm. Labels
/// partition a subset of points; points with negative labels are ignored.
double mpjpe(const OrientedPointCloud& pred, const OrientedPointCloud& gt);

/// Voxel-counting volume of the overlap of two watertight meshes, cm^3.
/// resolution is the voxel count along each axis of the bounding-box
/// intersection.
double intersection_volume(const SurfaceModel& hand_mesh, const SurfaceModel& object,
                           int resolution);

struct PenetrationStats {
    double max_mm = 0.0;
    double mean_mm = 0.0;  // over penetrating points; 0 when none
    std::vector<double> signed_distances;  // meters, one per hand point
};

/// Deepest hand-point incursion into the object, mm (0 when disjoint).
double penetration_depth(const OrientedPointCloud& hand, const SurfaceModel& object);
PenetrationStats penetration_stats(const OrientedPointCloud& hand, const SurfaceModel& object);

/// Mean |d(pred_i, object) - d(gt_i, object)| over corresponding points,
/// using unsigned distance to the surface; mm.
double proximity_error(const OrientedPointCloud& pred, const OrientedPointCloud& gt,
                       const SurfaceModel& object);

struct ReportInputs {
    const OrientedPointCloud& hand;
    const SurfaceModel& object;
    const OrientedPointCloud* gt_hand = nullptr;              // enables error metrics
    const std::vector<std::array<int, 3>>* hand_faces = nullptr;  // enables IV
    int iv_resolution = 128;
};

InteractionReport make_report(const ReportInputs& inputs);

}  // namespace graspfield
