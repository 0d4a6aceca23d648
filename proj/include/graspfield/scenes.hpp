#pragma once

#include "graspfield/bridge.hpp"
#include "graspfield/contact.hpp"
#include "graspfield/core.hpp"
#include "graspfield/surface.hpp"

#include <filesystem>
#include <optional>

namespace graspfield {

enum class PrimitiveKind { Sphere, Box, Cylinder };
enum class DefectKind { Penetration, Gap, None };

const char* primitive_kind_name(PrimitiveKind kind);
PrimitiveKind primitive_kind_from_name(const std::string& name);
const char* defect_kind_name(DefectKind kind);
DefectKind defect_kind_from_name(const std::string& name);

/// Everything one refinement run needs. Immutable after construction or
/// load.
struct Scene {
    std::string name;
    std::uint64_t seed = 0;
    OrientedPointCloud hand;
    std::vector<std::array<int, 3>> hand_faces;  // connectivity when the input had one
    SurfaceModel object;
    OrientedPointCloud object_points;  // the cloud itself, or mesh surface samples
    ContactMask mask;
    TemplatePrior prior;
    std::optional<OrientedPointCloud> gt_hand;

    void validate() const;
};

struct PrimitiveObject {
    SurfaceModel surface;
    OrientedPointCloud points;  // point_count oriented surface samples
};

/// Watertight primitive mesh plus uniform oriented surface samples.
/// dims: sphere {radius}, box {lx, ly, lz}, cylinder {radius, height}.
PrimitiveObject make_primitive_object(PrimitiveKind kind, const std::vector<double>& dims,
                                      std::size_t point_count, std::uint64_t seed = 0x5eed);

/// Synthetic grasp: five finger-pad patches plus a palm patch wrapped onto
/// the object at known contact sites (the ground truth), then displaced
/// inward (penetration) or outward (gap) along the surface normals by
/// `magnitude`. The mask marks the contact sites; the prior references the
/// ground truth. Point labels carry the patch index (for joint metrics).
Scene make_grasp_scene(PrimitiveKind kind, DefectKind defect, double magnitude,
                       std::uint64_t seed, std::size_t hand_points = 8192,
                       std::size_t object_samples = 2048);

/// Directory layout: hand.ply, object.ply|object.obj, optional
/// object_points.ply, gt_hand.ply, mask.json, scene.json manifest (name,
/// seed, units, file roles). Millimeter/centimeter inputs are converted to
/// meters. A missing mask falls back to nearest_point_mask defaults.
Scene load_scene(const std::filesystem::path& dir);

void save_scene(const Scene& scene, const std::filesystem::path& dir);

}  // namespace graspfield
