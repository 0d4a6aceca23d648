#pragma once

#include "graspfield/core.hpp"

#include <array>
#include <limits>
#include <optional>

namespace graspfield {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
};

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 max = Vec3::Constant(std::numeric_limits<double>::lowest());

    void expand(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    void expand(const Aabb& other) {
        min = min.cwiseMin(other.min);
        max = max.cwiseMax(other.max);
    }
    bool valid() const { return (max.array() >= min.array()).all(); }
    Vec3 extent() const { return max - min; }

    // Squared distance from x to the box (0 inside).
    double dist2(const Vec3& x) const {
        const Vec3 d = (min - x).cwiseMax(0.0).cwiseMax(x - max);
        return d.squaredNorm();
    }

    bool intersects(const Aabb& other) const {
        return (min.array() <= other.max.array()).all() &&
               (max.array() >= other.min.array()).all();
    }
};

struct NearestResult {
    Vec3 point = Vec3::Zero();   // closest point on the surface
    Vec3 normal = Vec3::Zero();  // face normal (mesh) or stored normal (cloud)
    double distance = 0.0;
    int primitive = -1;          // face index or point index
};

struct RayHit {
    double t = 0.0;
    int primitive = -1;
    double u = 0.0;  // barycentric coordinates on the face (mesh only)
    double v = 0.0;
};

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct RayTriangleHit {
    bool hit = false;
    double t = 0.0;
    double u = 0.0;
    double v = 0.0;
    bool marginal = false;  // grazes an edge/vertex or is near-parallel
};

RayTriangleHit ray_triangle(const Vec3& origin, const Vec3& dir,
                            const Vec3& a, const Vec3& b, const Vec3& c);

/// Immutable surface carrier: a triangle mesh or an oriented point cloud,
/// with a BVH over its primitives. Nearest queries are exact: they minimize
/// (distance, primitive index) lexicographically, so equidistant primitives
/// resolve to the lowest index. Safe for concurrent queries after build.
class SurfaceModel {
public:
    enum class Kind { Mesh, Cloud };

    static SurfaceModel from_mesh(TriangleMesh mesh);
    static SurfaceModel from_cloud(OrientedPointCloud cloud);

    Kind kind() const { return kind_; }
    bool is_mesh() const { return kind_ == Kind::Mesh; }

    const TriangleMesh& mesh() const { return mesh_; }
    const OrientedPointCloud& cloud() const { return cloud_; }

    std::size_t primitive_count() const;
    const Aabb& bounds() const { return bounds_; }

    NearestResult nearest(const Vec3& x) const;
    double unsigned_distance(const Vec3& x) const { return nearest(x).distance; }

    /// Negative inside. Mesh surfaces must be watertight; point clouds must
    /// carry outward normals (sign from dot(x - p, n) at the nearest point).
    double signed_distance(const Vec3& x) const;
    bool inside(const Vec3& x) const;

    /// Generalized winding number (mesh only); ~1 inside, ~0 outside.
    double winding_number(const Vec3& x) const;

    /// All ray intersections with t in (0, t_max], sorted by (t, face).
    std::vector<RayHit> ray_hits(const Vec3& origin, const Vec3& dir, double t_max) const;
    std::optional<RayHit> ray_first_hit(const Vec3& origin, const Vec3& dir, double t_max) const;

    bool watertight() const { return open_edge_count_ == 0; }
    std::size_t open_edge_count() const { return open_edge_count_; }

    Vec3 face_normal(int face) const { return face_normals_[static_cast<std::size_t>(face)]; }
    double total_area() const;
    double enclosed_volume() const;  // signed divergence-theorem volume

    /// Area-weighted surface samples with face normals (mesh only).
    OrientedPointCloud sample_surface(std::size_t count, std::uint64_t seed) const;

private:
    struct Node {
        Aabb box;
        int left = -1;
        int right = -1;
        int first = 0;
        int count = 0;  // > 0 for leaves
    };

    SurfaceModel() = default;
    void build_bvh();
    void compute_edges();
    bool inside_mesh(const Vec3& x) const;

    Kind kind_ = Kind::Cloud;
    TriangleMesh mesh_;
    std::vector<Vec3> face_normals_;
    OrientedPointCloud cloud_;

    std::vector<Node> nodes_;
    std::vector<int> prim_order_;
    Aabb bounds_;
    std::size_t open_edge_count_ = 0;
};

/// Dispatches on the payload: mesh when faces are present, cloud otherwise.
SurfaceModel build_surface(const TriangleMesh& mesh);
SurfaceModel build_surface(const OrientedPointCloud& cloud);

}  // namespace graspfield
