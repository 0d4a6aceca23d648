#include "graspfield/surface.hpp"

#include "graspfield/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace graspfield {

// Ericson, Real-Time Collision Detection, 5.1.5. Shared by the BVH and the
// brute-force oracles so both paths produce bit-identical candidates.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;

    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return a + v * ab;
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return a + w * ac;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return a + ab * v + ac * w;
}

RayTriangleHit ray_triangle(const Vec3& origin, const Vec3& dir,
                            const Vec3& a, const Vec3& b, const Vec3& c) {
    constexpr double kEdgeEps = 1e-10;
    RayTriangleHit out;

    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 pvec = dir.cross(e2);
    const double det = e1.dot(pvec);
    const double scale = e1.norm() * e2.norm();
    if (std::abs(det) <= 1e-14 * std::max(scale, 1e-300)) {
        // Near-parallel; caller retries with another direction if it matters.
        out.marginal = std::abs(det) > 0.0;
        return out;
    }

    const double inv_det = 1.0 / det;
    const Vec3 tvec = origin - a;
    const double u = tvec.dot(pvec) * inv_det;
    if (u < 0.0 || u > 1.0) return out;

    const Vec3 qvec = tvec.cross(e1);
    const double v = dir.dot(qvec) * inv_det;
    if (v < 0.0 || u + v > 1.0) return out;

    const double t = e2.dot(qvec) * inv_det;
    if (t <= 0.0) return out;

    out.hit = true;
    out.t = t;
    out.u = u;
    out.v = v;
    out.marginal = u < kEdgeEps || v < kEdgeEps || (1.0 - u - v) < kEdgeEps || t < 1e-12;
    return out;
}

SurfaceModel SurfaceModel::from_mesh(TriangleMesh mesh) {
    if (mesh.vertices.empty() || mesh.faces.empty()) {
        throw_error(ErrorCode::EmptyGeometry, "mesh has no vertices or faces");
    }
    for (const Vec3& v : mesh.vertices) {
        if (!finite(v)) throw_error(ErrorCode::NonFiniteCoordinate, "mesh vertex is NaN/Inf");
    }
    const int nv = static_cast<int>(mesh.vertices.size());
    for (const auto& f : mesh.faces) {
        for (int idx : f) {
            if (idx < 0 || idx >= nv) {
                throw_error(ErrorCode::InvalidFaceIndex,
                            "face references vertex " + std::to_string(idx) + " of " +
                                std::to_string(nv));
            }
        }
    }

    // Drop zero-area faces (repeated indices, coincident vertices).
    std::vector<std::array<int, 3>> kept;
    kept.reserve(mesh.faces.size());
    for (const auto& f : mesh.faces) {
        const Vec3 n = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                           .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
        if (n.squaredNorm() > 0.0) kept.push_back(f);
    }
    if (kept.empty()) {
        throw_error(ErrorCode::EmptyGeometry, "mesh has only degenerate faces");
    }
    mesh.faces = std::move(kept);

    SurfaceModel s;
    s.kind_ = Kind::Mesh;
    s.mesh_ = std::move(mesh);
    s.face_normals_.reserve(s.mesh_.faces.size());
    for (const auto& f : s.mesh_.faces) {
        const Vec3 n = (s.mesh_.vertices[f[1]] - s.mesh_.vertices[f[0]])
                           .cross(s.mesh_.vertices[f[2]] - s.mesh_.vertices[f[0]]);
        s.face_normals_.push_back(n.normalized());
    }
    s.compute_edges();
    s.build_bvh();
    return s;
}

SurfaceModel SurfaceModel::from_cloud(OrientedPointCloud cloud) {
    cloud.validate();
    SurfaceModel s;
    s.kind_ = Kind::Cloud;
    s.cloud_ = std::move(cloud);
    s.build_bvh();
    return s;
}

SurfaceModel build_surface(const TriangleMesh& mesh) { return SurfaceModel::from_mesh(mesh); }
SurfaceModel build_surface(const OrientedPointCloud& cloud) {
    return SurfaceModel::from_cloud(cloud);
}

std::size_t SurfaceModel::primitive_count() const {
    return is_mesh() ? mesh_.faces.size() : cloud_.points.size();
}

void SurfaceModel::compute_edges() {
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& f : mesh_.faces) {
        for (int k = 0; k < 3; ++k) {
            int a = f[k];
            int b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            ++edge_count[{a, b}];
        }
    }
    open_edge_count_ = 0;
    for (const auto& [edge, count] : edge_count) {
        (void)edge;
        if (count == 1) ++open_edge_count_;
    }
}

void SurfaceModel::build_bvh() {
    const std::size_t n = primitive_count();
    std::vector<Aabb> boxes(n);
    std::vector<Vec3> centers(n);
    if (is_mesh()) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& f = mesh_.faces[i];
            for (int k = 0; k < 3; ++k) boxes[i].expand(mesh_.vertices[f[k]]);
            centers[i] =
                (mesh_.vertices[f[0]] + mesh_.vertices[f[1]] + mesh_.vertices[f[2]]) / 3.0;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            boxes[i].expand(cloud_.points[i]);
            centers[i] = cloud_.points[i];
        }
    }

    prim_order_.resize(n);
    std::iota(prim_order_.begin(), prim_order_.end(), 0);
    nodes_.clear();
    nodes_.reserve(2 * n);

    constexpr int kLeafSize = 8;

    // Iterative median-split build over [first, last) ranges of prim_order_.
    struct Task {
        int node;
        int first;
        int last;
    };
    nodes_.push_back({});
    std::vector<Task> stack{{0, 0, static_cast<int>(n)}};
    while (!stack.empty()) {
        const Task task = stack.back();
        stack.pop_back();

        Aabb box;
        Aabb cbox;
        for (int i = task.first; i < task.last; ++i) {
            box.expand(boxes[prim_order_[i]]);
            cbox.expand(centers[prim_order_[i]]);
        }
        Node& node = nodes_[task.node];
        node.box = box;

        const int count = task.last - task.first;
        if (count <= kLeafSize) {
            node.first = task.first;
            node.count = count;
            continue;
        }

        int axis = 0;
        const Vec3 ext = cbox.extent();
        if (ext.y() > ext.x()) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;

        const int mid = task.first + count / 2;
        std::nth_element(prim_order_.begin() + task.first, prim_order_.begin() + mid,
                         prim_order_.begin() + task.last, [&](int a, int b) {
                             if (centers[a][axis] != centers[b][axis]) {
                                 return centers[a][axis] < centers[b][axis];
                             }
                             return a < b;
                         });

        const int left = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        nodes_.push_back({});
        nodes_[task.node].left = left;
        nodes_[task.node].right = left + 1;
        stack.push_back({left, task.first, mid});
        stack.push_back({left + 1, mid, task.last});
    }

    bounds_ = nodes_[0].box;
}

NearestResult SurfaceModel::nearest(const Vec3& x) const {
    double best_d2 = std::numeric_limits<double>::max();
    int best_prim = -1;
    Vec3 best_point = Vec3::Zero();

    // Minimizes (d2, primitive index) lexicographically. Nodes are only
    // pruned when strictly farther than the incumbent so that equidistant
    // primitives with lower indices are still visited.
    std::vector<int> stack{0};
    stack.reserve(64);
    while (!stack.empty()) {
        const int ni = stack.back();
        stack.pop_back();
        const Node& node = nodes_[ni];
        if (node.box.dist2(x) > best_d2) continue;

        if (node.count > 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const int prim = prim_order_[i];
                Vec3 q;
                if (is_mesh()) {
                    const auto& f = mesh_.faces[prim];
                    q = closest_point_on_triangle(x, mesh_.vertices[f[0]], mesh_.vertices[f[1]],
                                                  mesh_.vertices[f[2]]);
                } else {
                    q = cloud_.points[prim];
                }
                const double d2 = (x - q).squaredNorm();
                if (d2 < best_d2 || (d2 == best_d2 && prim < best_prim)) {
                    best_d2 = d2;
                    best_prim = prim;
                    best_point = q;
                }
            }
        } else {
            const double dl = nodes_[node.left].box.dist2(x);
            const double dr = nodes_[node.right].box.dist2(x);
            // Push the farther child first so the nearer one is explored next.
            if (dl <= dr) {
                if (dr <= best_d2) stack.push_back(node.right);
                if (dl <= best_d2) stack.push_back(node.left);
            } else {
                if (dl <= best_d2) stack.push_back(node.left);
                if (dr <= best_d2) stack.push_back(node.right);
            }
        }
    }

    NearestResult out;
    out.point = best_point;
    out.distance = std::sqrt(best_d2);
    out.primitive = best_prim;
    if (is_mesh()) {
        out.normal = face_normals_[best_prim];
    } else if (cloud_.has_normals()) {
        out.normal = cloud_.normals[best_prim];
    }
    return out;
}

std::vector<RayHit> SurfaceModel::ray_hits(const Vec3& origin, const Vec3& dir,
                                           double t_max) const {
    std::vector<RayHit> hits;
    if (!is_mesh()) return hits;

    const Vec3 inv = dir.cwiseInverse();
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int ni = stack.back();
        stack.pop_back();
        const Node& node = nodes_[ni];

        // Slab test.
        double t0 = 0.0;
        double t1 = t_max;
        bool miss = false;
        for (int a = 0; a < 3; ++a) {
            double lo = (node.box.min[a] - origin[a]) * inv[a];
            double hi = (node.box.max[a] - origin[a]) * inv[a];
            if (std::isnan(lo) || std::isnan(hi)) continue;  // ray parallel, origin inside slab
            if (lo > hi) std::swap(lo, hi);
            t0 = std::max(t0, lo);
            t1 = std::min(t1, hi);
            if (t0 > t1) {
                miss = true;
                break;
            }
        }
        if (miss) continue;

        if (node.count > 0) {
            for (int i = node.first; i < node.first + node.count; ++i) {
                const int prim = prim_order_[i];
                const auto& f = mesh_.faces[prim];
                const RayTriangleHit h = ray_triangle(origin, dir, mesh_.vertices[f[0]],
                                                      mesh_.vertices[f[1]], mesh_.vertices[f[2]]);
                if (h.hit && h.t <= t_max) {
                    hits.push_back({h.t, prim, h.u, h.v});
                }
            }
        } else {
            stack.push_back(node.right);
            stack.push_back(node.left);
        }
    }

    std::sort(hits.begin(), hits.end(), [](const RayHit& a, const RayHit& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.primitive < b.primitive;
    });
    return hits;
}

std::optional<RayHit> SurfaceModel::ray_first_hit(const Vec3& origin, const Vec3& dir,
                                                  double t_max) const {
    auto hits = ray_hits(origin, dir, t_max);
    if (hits.empty()) return std::nullopt;
    return hits.front();
}

bool SurfaceModel::inside_mesh(const Vec3& x) const {
    // Parity of ray crossings. Fixed fallback directions handle rays that
    // graze an edge or vertex (which would double-count a crossing).
    static const Vec3 kDirs[3] = {
        Vec3(0.5773502691896258, 0.33219280948873624, 0.7462424197367604).normalized(),
        Vec3(-0.2912280664334905, 0.8501586255170534, 0.4383392992804021).normalized(),
        Vec3(0.1072783619821763, -0.5302873963298397, 0.8410147419528219).normalized(),
    };
    const double t_max = std::numeric_limits<double>::max();
    std::size_t crossings = 0;
    for (const Vec3& dir : kDirs) {
        const auto hits = ray_hits(x, dir, t_max);
        bool marginal = false;
        for (const RayHit& h : hits) {
            const auto& f = mesh_.faces[h.primitive];
            const RayTriangleHit rt = ray_triangle(x, dir, mesh_.vertices[f[0]],
                                                   mesh_.vertices[f[1]], mesh_.vertices[f[2]]);
            if (rt.marginal) {
                marginal = true;
                break;
            }
        }
        crossings = hits.size();
        if (!marginal) break;
    }
    return (crossings % 2) == 1;
}

bool SurfaceModel::inside(const Vec3& x) const {
    if (is_mesh()) {
        if (!watertight()) {
            throw_error(ErrorCode::NotWatertight,
                        "mesh has " + std::to_string(open_edge_count_) + " open edges");
        }
        return inside_mesh(x);
    }
    if (!cloud_.has_normals()) {
        throw_error(ErrorCode::MissingNormals, "cloud surface has no normals for inside test");
    }
    const NearestResult nr = nearest(x);
    return (x - nr.point).dot(nr.normal) < 0.0;
}

double SurfaceModel::signed_distance(const Vec3& x) const {
    const NearestResult nr = nearest(x);
    return inside(x) ? -nr.distance : nr.distance;
}

double SurfaceModel::winding_number(const Vec3& x) const {
    if (!is_mesh()) {
        throw_error(ErrorCode::SchemaError, "winding number is defined for meshes only");
    }
    // van Oosterom & Strackee solid angle, summed over faces.
    double total = 0.0;
    for (const auto& f : mesh_.faces) {
        const Vec3 a = mesh_.vertices[f[0]] - x;
        const Vec3 b = mesh_.vertices[f[1]] - x;
        const Vec3 c = mesh_.vertices[f[2]] - x;
        const double la = a.norm();
        const double lb = b.norm();
        const double lc = c.norm();
        const double num = a.dot(b.cross(c));
        const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        total += 2.0 * std::atan2(num, den);
    }
    return total / (4.0 * M_PI);
}

double SurfaceModel::total_area() const {
    if (!is_mesh()) return 0.0;
    double area = 0.0;
    for (const auto& f : mesh_.faces) {
        area += 0.5 * (mesh_.vertices[f[1]] - mesh_.vertices[f[0]])
                          .cross(mesh_.vertices[f[2]] - mesh_.vertices[f[0]])
                          .norm();
    }
    return area;
}

double SurfaceModel::enclosed_volume() const {
    if (!is_mesh()) return 0.0;
    double vol = 0.0;
    for (const auto& f : mesh_.faces) {
        vol += mesh_.vertices[f[0]].dot(mesh_.vertices[f[1]].cross(mesh_.vertices[f[2]])) / 6.0;
    }
    return vol;
}

OrientedPointCloud SurfaceModel::sample_surface(std::size_t count, std::uint64_t seed) const {
    if (!is_mesh()) {
        throw_error(ErrorCode::SchemaError, "surface sampling requires a mesh");
    }
    std::vector<double> cumulative(mesh_.faces.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < mesh_.faces.size(); ++i) {
        const auto& f = mesh_.faces[i];
        acc += 0.5 * (mesh_.vertices[f[1]] - mesh_.vertices[f[0]])
                         .cross(mesh_.vertices[f[2]] - mesh_.vertices[f[0]])
                         .norm();
        cumulative[i] = acc;
    }

    OrientedPointCloud out;
    out.points.reserve(count);
    out.normals.reserve(count);
    rng::Sequence seq(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const double pick = seq.next_unit() * acc;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
        const std::size_t fi = std::min<std::size_t>(
            static_cast<std::size_t>(it - cumulative.begin()), mesh_.faces.size() - 1);
        const auto& f = mesh_.faces[fi];
        // sqrt trick for uniform barycentric sampling
        const double r1 = std::sqrt(seq.next_unit());
        const double r2 = seq.next_unit();
        const double wa = 1.0 - r1;
        const double wb = r1 * (1.0 - r2);
        const double wc = r1 * r2;
        out.points.push_back(wa * mesh_.vertices[f[0]] + wb * mesh_.vertices[f[1]] +
                             wc * mesh_.vertices[f[2]]);
        out.normals.push_back(face_normals_[fi]);
    }
    return out;
}

}  // namespace graspfield
