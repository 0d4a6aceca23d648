#include "graspfield/scenes.hpp"

#include "graspfield/io.hpp"
#include "graspfield/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace graspfield {

using nlohmann::json;

const char* primitive_kind_name(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::Sphere: return "sphere";
        case PrimitiveKind::Box: return "box";
        case PrimitiveKind::Cylinder: return "cylinder";
    }
    return "sphere";
}

PrimitiveKind primitive_kind_from_name(const std::string& name) {
    if (name == "sphere") return PrimitiveKind::Sphere;
    if (name == "box") return PrimitiveKind::Box;
    if (name == "cylinder") return PrimitiveKind::Cylinder;
    throw_error(ErrorCode::SchemaError, "unknown primitive kind '" + name + "'");
}

const char* defect_kind_name(DefectKind kind) {
    switch (kind) {
        case DefectKind::Penetration: return "penetration";
        case DefectKind::Gap: return "gap";
        case DefectKind::None: return "none";
    }
    return "none";
}

DefectKind defect_kind_from_name(const std::string& name) {
    if (name == "penetration") return DefectKind::Penetration;
    if (name == "gap") return DefectKind::Gap;
    if (name == "none") return DefectKind::None;
    throw_error(ErrorCode::SchemaError, "unknown defect kind '" + name + "'");
}

void Scene::validate() const {
    hand.validate();
    object_points.validate();
    if (prior.reference.size() != hand.size()) {
        throw_error(ErrorCode::CountMismatch, "prior reference count differs from hand");
    }
    if (gt_hand && gt_hand->size() != hand.size()) {
        throw_error(ErrorCode::CountMismatch, "gt hand count differs from hand");
    }
    mask.validate(hand.size(), object_points.size());
    for (const auto& f : hand_faces) {
        for (int idx : f) {
            if (idx < 0 || idx >= static_cast<int>(hand.size())) {
                throw_error(ErrorCode::InvalidFaceIndex, "hand face index out of range");
            }
        }
    }
}

namespace {

TriangleMesh make_icosphere(double radius, int subdivisions) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    TriangleMesh mesh;
    mesh.vertices = {
        {-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1},
    };
    mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                  {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                  {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            const auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            mesh.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
            const int idx = static_cast<int>(mesh.vertices.size()) - 1;
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(mesh.faces.size() * 4);
        for (const auto& f : mesh.faces) {
            const int ab = mid(f[0], f[1]);
            const int bc = mid(f[1], f[2]);
            const int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        mesh.faces = std::move(next);
    }
    for (Vec3& v : mesh.vertices) v = radius * v.normalized();
    return mesh;
}

TriangleMesh make_box(double lx, double ly, double lz) {
    const double x = lx / 2.0, y = ly / 2.0, z = lz / 2.0;
    TriangleMesh mesh;
    mesh.vertices = {{-x, -y, -z}, {x, -y, -z}, {x, y, -z}, {-x, y, -z},
                     {-x, -y, z},  {x, -y, z},  {x, y, z},  {-x, y, z}};
    mesh.faces = {
        {0, 2, 1}, {0, 3, 2},  // -z
        {4, 5, 6}, {4, 6, 7},  // +z
        {0, 1, 5}, {0, 5, 4},  // -y
        {2, 3, 7}, {2, 7, 6},  // +y
        {1, 2, 6}, {1, 6, 5},  // +x
        {3, 0, 4}, {3, 4, 7},  // -x
    };
    return mesh;
}

TriangleMesh make_cylinder(double radius, double height, int segments) {
    TriangleMesh mesh;
    const double hz = height / 2.0;
    for (int i = 0; i < segments; ++i) {
        const double a = 2.0 * M_PI * i / segments;
        mesh.vertices.push_back({radius * std::cos(a), radius * std::sin(a), -hz});
        mesh.vertices.push_back({radius * std::cos(a), radius * std::sin(a), hz});
    }
    const int bottom_center = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back({0, 0, -hz});
    const int top_center = bottom_center + 1;
    mesh.vertices.push_back({0, 0, hz});

    for (int i = 0; i < segments; ++i) {
        const int j = (i + 1) % segments;
        const int b0 = 2 * i, t0 = 2 * i + 1, b1 = 2 * j, t1 = 2 * j + 1;
        mesh.faces.push_back({b0, b1, t1});
        mesh.faces.push_back({b0, t1, t0});
        mesh.faces.push_back({bottom_center, b1, b0});
        mesh.faces.push_back({top_center, t0, t1});
    }
    return mesh;
}

}  // namespace

PrimitiveObject make_primitive_object(PrimitiveKind kind, const std::vector<double>& dims,
                                      std::size_t point_count, std::uint64_t seed) {
    if (point_count < 100) {
        throw_error(ErrorCode::InvalidDims, "point_count must be >= 100");
    }
    for (double d : dims) {
        if (!(d > 0.0)) throw_error(ErrorCode::InvalidDims, "dims must be positive");
    }

    TriangleMesh mesh;
    switch (kind) {
        case PrimitiveKind::Sphere:
            if (dims.size() != 1) throw_error(ErrorCode::InvalidDims, "sphere needs {radius}");
            mesh = make_icosphere(dims[0], 4);
            break;
        case PrimitiveKind::Box:
            if (dims.size() != 3) throw_error(ErrorCode::InvalidDims, "box needs {lx, ly, lz}");
            mesh = make_box(dims[0], dims[1], dims[2]);
            break;
        case PrimitiveKind::Cylinder:
            if (dims.size() != 2) {
                throw_error(ErrorCode::InvalidDims, "cylinder needs {radius, height}");
            }
            mesh = make_cylinder(dims[0], dims[1], 64);
            break;
    }

    PrimitiveObject out{SurfaceModel::from_mesh(std::move(mesh)), {}};
    out.points = out.surface.sample_surface(point_count, seed);
    return out;
}

namespace {

// Orthonormal tangent basis for a unit normal.
std::pair<Vec3, Vec3> tangent_basis(const Vec3& n) {
    const Vec3 helper = std::abs(n.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0);
    const Vec3 t1 = n.cross(helper).normalized();
    return {t1, n.cross(t1).normalized()};
}

struct SiteSpec {
    Vec3 anchor;  // pre-projection site position
};

std::vector<SiteSpec> grasp_sites(PrimitiveKind kind, const std::vector<double>& dims,
                                  rng::Sequence& seq) {
    std::vector<SiteSpec> sites;
    switch (kind) {
        case PrimitiveKind::Sphere: {
            const double r = dims[0];
            const double jitter = seq.uniform(-0.15, 0.15);
            // Five finger pads on an upper ring, palm on the lower hemisphere.
            for (int k = 0; k < 5; ++k) {
                const double az = jitter + M_PI * k / 4.0;
                const double lat = 35.0 * M_PI / 180.0;
                sites.push_back({r * Vec3(std::cos(lat) * std::cos(az),
                                          std::cos(lat) * std::sin(az), std::sin(lat))});
            }
            const double palm_az = jitter + M_PI / 2.0;
            const double palm_lat = -35.0 * M_PI / 180.0;
            sites.push_back({r * Vec3(std::cos(palm_lat) * std::cos(palm_az),
                                      std::cos(palm_lat) * std::sin(palm_az),
                                      std::sin(palm_lat))});
            break;
        }
        case PrimitiveKind::Box: {
            const double x = dims[0] / 2.0, y = dims[1] / 2.0, z = dims[2] / 2.0;
            auto jit = [&seq](double half) { return seq.uniform(-0.2, 0.2) * half; };
            sites.push_back({{x, jit(y), jit(z)}});
            sites.push_back({{-x, jit(y), jit(z)}});
            sites.push_back({{jit(x), y, jit(z)}});
            sites.push_back({{jit(x), -y, jit(z)}});
            sites.push_back({{jit(x), jit(y), z}});
            sites.push_back({{jit(x), jit(y), -z}});
            break;
        }
        case PrimitiveKind::Cylinder: {
            const double r = dims[0], h = dims[1];
            const double jitter = seq.uniform(-0.2, 0.2);
            for (int k = 0; k < 6; ++k) {
                const double az = jitter + M_PI * k / 3.0;
                const double zk = (k % 3 - 1) * 0.22 * h;
                sites.push_back({{r * std::cos(az), r * std::sin(az), zk}});
            }
            break;
        }
    }
    return sites;
}

std::vector<double> default_dims(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::Sphere: return {0.05};
        case PrimitiveKind::Box: return {0.08, 0.08, 0.08};
        case PrimitiveKind::Cylinder: return {0.04, 0.12};
    }
    return {0.05};
}

}  // namespace

Scene make_grasp_scene(PrimitiveKind kind, DefectKind defect, double magnitude,
                       std::uint64_t seed, std::size_t hand_points,
                       std::size_t object_samples) {
    if (!(magnitude >= 0.0)) {
        throw_error(ErrorCode::InvalidDims, "defect magnitude must be >= 0");
    }
    if (hand_points < 60) {
        throw_error(ErrorCode::InvalidDims, "need at least 60 hand points");
    }

    const std::vector<double> dims = default_dims(kind);
    PrimitiveObject object = make_primitive_object(kind, dims, object_samples, seed);

    rng::Sequence seq(rng::mix(seed ^ 0x9ca5c3));
    const std::vector<SiteSpec> sites = grasp_sites(kind, dims, seq);
    const double patch_radius = 0.012;

    OrientedPointCloud gt;
    gt.points.reserve(hand_points);
    gt.normals.reserve(hand_points);
    gt.labels.reserve(hand_points);

    const std::size_t per_site = hand_points / sites.size();
    const double golden = M_PI * (3.0 - std::sqrt(5.0));

    std::vector<Vec3> site_centers;
    for (std::size_t s = 0; s < sites.size(); ++s) {
        const std::size_t count =
            (s + 1 == sites.size()) ? hand_points - per_site * (sites.size() - 1) : per_site;
        const NearestResult site = object.surface.nearest(sites[s].anchor);
        site_centers.push_back(site.point);
        const auto [t1, t2] = tangent_basis(site.normal);
        const double spin = seq.uniform(0.0, 2.0 * M_PI);
        for (std::size_t k = 0; k < count; ++k) {
            // Sunflower layout on the tangent disk, projected to the surface.
            const double rr =
                patch_radius * std::sqrt((static_cast<double>(k) + 0.5) / count);
            const double th = spin + golden * static_cast<double>(k);
            const Vec3 raw = site.point + rr * (std::cos(th) * t1 + std::sin(th) * t2);
            const NearestResult on_surface = object.surface.nearest(raw);
            gt.points.push_back(on_surface.point);
            gt.normals.push_back(on_surface.normal);
            gt.labels.push_back(static_cast<int>(s));
        }
    }

    OrientedPointCloud hand = gt;
    const double offset =
        defect == DefectKind::Penetration ? -magnitude : (defect == DefectKind::Gap ? magnitude : 0.0);
    if (offset != 0.0) {
        for (std::size_t i = 0; i < hand.size(); ++i) {
            hand.points[i] += offset * hand.normals[i];
        }
    }

    ContactMask mask;
    mask.provenance = MaskProvenance::GroundTruth;
    mask.hand_weights.assign(hand.size(), 1.0);
    mask.object_weights.assign(object.points.size(), 0.0);
    for (std::size_t j = 0; j < object.points.size(); ++j) {
        for (const Vec3& c : site_centers) {
            if ((object.points.points[j] - c).squaredNorm() <= patch_radius * patch_radius) {
                mask.object_weights[j] = 1.0;
                break;
            }
        }
    }

    Scene scene;
    scene.name = std::string(primitive_kind_name(kind)) + "_" + defect_kind_name(defect) + "_" +
                 std::to_string(seed);
    scene.seed = seed;
    scene.hand = std::move(hand);
    scene.object = std::move(object.surface);
    scene.object_points = std::move(object.points);
    scene.mask = std::move(mask);
    scene.prior.reference = gt;
    scene.gt_hand = std::move(gt);
    scene.validate();
    return scene;
}

namespace {

double unit_scale_from_name(const std::string& units) {
    if (units == "m") return 1.0;
    if (units == "mm") return 1e-3;
    if (units == "cm") return 1e-2;
    throw_error(ErrorCode::SchemaError, "unknown units '" + units + "' (use m, mm or cm)");
}

void scale_cloud(OrientedPointCloud& cloud, double scale) {
    if (scale == 1.0) return;
    for (Vec3& p : cloud.points) p *= scale;
}

}  // namespace

Scene load_scene(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw_error(ErrorCode::MissingFile, "scene directory " + dir.string());
    }

    json manifest;
    double scale = 1.0;
    const auto manifest_path = dir / "scene.json";
    if (std::filesystem::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        try {
            in >> manifest;
        } catch (const json::exception& e) {
            throw_error(ErrorCode::SchemaError, manifest_path.string() + ": " + e.what());
        }
        if (!manifest.is_object()) {
            throw_error(ErrorCode::SchemaError, manifest_path.string() + ": not an object");
        }
        if (manifest.contains("units")) {
            scale = unit_scale_from_name(manifest.at("units").get<std::string>());
        }
    }

    auto file_role = [&](const char* role, const char* fallback) {
        if (manifest.contains("files") && manifest.at("files").contains(role)) {
            return dir / manifest.at("files").at(role).get<std::string>();
        }
        return dir / fallback;
    };

    Scene scene;
    scene.name = manifest.value("name", dir.filename().string());
    scene.seed = manifest.value("seed", 0ULL);

    const auto hand_path = file_role("hand", "hand.ply");
    if (!std::filesystem::exists(hand_path)) {
        throw_error(ErrorCode::MissingFile, hand_path.string());
    }
    io::LoadedGeometry hand_geo = io::load_geometry(hand_path);
    scale_cloud(hand_geo.cloud, scale);
    scene.hand = std::move(hand_geo.cloud);
    scene.hand_faces = std::move(hand_geo.faces);

    std::filesystem::path object_path = file_role("object", "object.ply");
    if (!std::filesystem::exists(object_path)) {
        const auto obj_alt = dir / "object.obj";
        if (!std::filesystem::exists(obj_alt)) {
            throw_error(ErrorCode::MissingFile, object_path.string());
        }
        object_path = obj_alt;
    }
    io::LoadedGeometry object_geo = io::load_geometry(object_path);
    scale_cloud(object_geo.cloud, scale);
    if (object_geo.has_faces()) {
        scene.object = SurfaceModel::from_mesh(object_geo.mesh());
    } else {
        scene.object = SurfaceModel::from_cloud(object_geo.cloud);
    }

    const auto object_points_path = file_role("object_points", "object_points.ply");
    if (std::filesystem::exists(object_points_path)) {
        io::LoadedGeometry samples = io::load_geometry(object_points_path);
        scale_cloud(samples.cloud, scale);
        scene.object_points = std::move(samples.cloud);
    } else if (!object_geo.has_faces()) {
        scene.object_points = object_geo.cloud;
    } else {
        scene.object_points = scene.object.sample_surface(2048, scene.seed);
    }

    const auto gt_path = file_role("gt_hand", "gt_hand.ply");
    if (std::filesystem::exists(gt_path)) {
        io::LoadedGeometry gt = io::load_geometry(gt_path);
        scale_cloud(gt.cloud, scale);
        scene.gt_hand = std::move(gt.cloud);
    }

    const auto prior_path = file_role("prior", "prior.ply");
    if (std::filesystem::exists(prior_path)) {
        io::LoadedGeometry prior = io::load_geometry(prior_path);
        scale_cloud(prior.cloud, scale);
        scene.prior.reference = std::move(prior.cloud);
    } else if (scene.gt_hand) {
        scene.prior.reference = *scene.gt_hand;
    } else {
        scene.prior.reference = scene.hand;
    }

    const auto mask_path = file_role("mask", "mask.json");
    if (std::filesystem::exists(mask_path)) {
        scene.mask = load_external_mask(mask_path, scene.hand, scene.object_points);
        if (manifest.contains("mask_provenance")) {
            scene.mask.provenance =
                mask_provenance_from_name(manifest.at("mask_provenance").get<std::string>());
        }
    } else {
        scene.mask = nearest_point_mask(scene.hand, scene.object, scene.object_points, 0.01,
                                        0.005);
    }

    scene.validate();
    return scene;
}

void save_scene(const Scene& scene, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    io::save_ply(dir / "hand.ply", scene.hand,
                 scene.hand_faces.empty() ? nullptr : &scene.hand_faces);
    if (scene.object.is_mesh()) {
        OrientedPointCloud vertices;
        vertices.points = scene.object.mesh().vertices;
        io::save_ply(dir / "object.ply", vertices, &scene.object.mesh().faces);
    } else {
        io::save_ply(dir / "object.ply", scene.object.cloud());
    }
    io::save_ply(dir / "object_points.ply", scene.object_points);
    if (scene.gt_hand) io::save_ply(dir / "gt_hand.ply", *scene.gt_hand);
    if (scene.prior.reference.size() == scene.hand.size()) {
        io::save_ply(dir / "prior.ply", scene.prior.reference);
    }
    save_mask_json(dir / "mask.json", scene.mask);

    json manifest;
    manifest["name"] = scene.name;
    manifest["seed"] = scene.seed;
    manifest["units"] = "m";
    manifest["files"] = {
        {"hand", "hand.ply"},           {"object", "object.ply"},
        {"object_points", "object_points.ply"}, {"mask", "mask.json"},
    };
    if (scene.gt_hand) manifest["files"]["gt_hand"] = "gt_hand.ply";
    if (scene.prior.reference.size() == scene.hand.size()) {
        manifest["files"]["prior"] = "prior.ply";
    }
    manifest["mask_provenance"] = mask_provenance_name(scene.mask.provenance);
    std::ofstream outs(dir / "scene.json");
    outs << manifest.dump(2) << "\n";
}

}  // namespace graspfield
