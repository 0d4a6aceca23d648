#pragma once

#include "graspfield/core.hpp"
#include "graspfield/surface.hpp"

#include <filesystem>

namespace graspfield::io {

/// Vertex data plus optional connectivity, as read from disk.
struct LoadedGeometry {
    OrientedPointCloud cloud;
    std::vector<std::array<int, 3>> faces;

    bool has_faces() const { return !faces.empty(); }

    TriangleMesh mesh() const { return TriangleMesh{cloud.points, faces}; }
};

// Dispatches on extension (.ply or .obj).
LoadedGeometry load_geometry(const std::filesystem::path& path);

// PLY: ascii and binary_little_endian, properties x y z [nx ny nz] [label],
// optional face element. All-zero normals are treated as absent.
LoadedGeometry load_ply(const std::filesystem::path& path);

// OBJ: v / vn / f records; polygons are fan-triangulated.
LoadedGeometry load_obj(const std::filesystem::path& path);

// Writes binary_little_endian PLY with float32 x y z nx ny nz (zeros when the
// cloud has no normals), int32 label when labels are present, and faces when
// given.
void save_ply(const std::filesystem::path& path, const OrientedPointCloud& cloud,
              const std::vector<std::array<int, 3>>* faces = nullptr);

void save_obj(const std::filesystem::path& path, const OrientedPointCloud& cloud,
              const std::vector<std::array<int, 3>>* faces = nullptr);

}  // namespace graspfield::io
