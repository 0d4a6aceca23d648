#include "graspfield/contact.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace graspfield {

using nlohmann::json;

const char* mask_provenance_name(MaskProvenance provenance) {
    switch (provenance) {
        case MaskProvenance::External: return "external";
        case MaskProvenance::NearestPoint: return "nearest_point";
        case MaskProvenance::RayBased: return "ray_based";
        case MaskProvenance::GroundTruth: return "ground_truth";
    }
    return "external";
}

MaskProvenance mask_provenance_from_name(const std::string& name) {
    if (name == "external") return MaskProvenance::External;
    if (name == "nearest_point") return MaskProvenance::NearestPoint;
    if (name == "ray_based") return MaskProvenance::RayBased;
    if (name == "ground_truth") return MaskProvenance::GroundTruth;
    throw_error(ErrorCode::SchemaError, "unknown mask provenance '" + name + "'");
}

void ContactMask::validate(std::size_t hand_count, std::size_t object_count) const {
    if (hand_weights.size() != hand_count) {
        throw_error(ErrorCode::CountMismatch, "hand mask length differs from hand cloud");
    }
    if (object_weights.size() != object_count) {
        throw_error(ErrorCode::CountMismatch, "object mask length differs from object cloud");
    }
    auto check_range = [](const std::vector<double>& row) {
        for (double w : row) {
            if (!(w >= 0.0 && w <= 1.0)) {
                throw_error(ErrorCode::SchemaError, "mask weight outside [0, 1]");
            }
        }
    };
    check_range(hand_weights);
    check_range(object_weights);
    for (const auto& row : object_weights_per_scale) {
        if (!row.empty() && row.size() != object_count) {
            throw_error(ErrorCode::CountMismatch, "per-scale mask length differs from object");
        }
        check_range(row);
    }
}

namespace {

double clamp_weight(double w, std::size_t& clamped) {
    if (w < 0.0) {
        ++clamped;
        return 0.0;
    }
    if (w > 1.0) {
        ++clamped;
        return 1.0;
    }
    return w;
}

std::vector<double> read_weight_csv(const std::filesystem::path& path, std::size_t expected,
                                    std::size_t& clamped) {
    std::ifstream in(path);
    if (!in) throw_error(ErrorCode::MissingFile, path.string());
    std::vector<double> weights(expected, 0.0);
    std::string line;
    if (!std::getline(in, line)) {
        throw_error(ErrorCode::ParseError, path.string() + ": empty mask file");
    }
    // header: index,weight
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string idx_tok, w_tok;
        if (!std::getline(ls, idx_tok, ',') || !std::getline(ls, w_tok)) {
            throw_error(ErrorCode::ParseError, path.string() + ": bad row '" + line + "'");
        }
        std::size_t idx = 0;
        double w = 0.0;
        try {
            idx = static_cast<std::size_t>(std::stoull(idx_tok));
            w = std::stod(w_tok);
        } catch (const std::exception&) {
            throw_error(ErrorCode::ParseError, path.string() + ": bad row '" + line + "'");
        }
        if (idx >= expected) {
            throw_error(ErrorCode::CountMismatch,
                        path.string() + ": index " + std::to_string(idx) + " out of range");
        }
        weights[idx] = clamp_weight(w, clamped);
        ++rows;
    }
    if (rows != expected) {
        throw_error(ErrorCode::CountMismatch, path.string() + ": expected " +
                                                  std::to_string(expected) + " rows, got " +
                                                  std::to_string(rows));
    }
    return weights;
}

}  // namespace

ContactMask load_mask_json(const std::filesystem::path& path, std::size_t hand_count,
                           std::size_t object_count) {
    std::ifstream in(path);
    if (!in) throw_error(ErrorCode::MissingFile, path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw_error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("hand") || !doc.contains("object")) {
        throw_error(ErrorCode::SchemaError, path.string() + ": expected {hand:[], object:[]}");
    }

    ContactMask mask;
    auto read_row = [&mask](const json& arr) {
        std::vector<double> row;
        row.reserve(arr.size());
        for (const auto& v : arr) {
            if (!v.is_number()) {
                throw_error(ErrorCode::ParseError, "mask weight is not a number");
            }
            row.push_back(clamp_weight(v.get<double>(), mask.clamped_entries));
        }
        return row;
    };
    mask.hand_weights = read_row(doc.at("hand"));
    mask.object_weights = read_row(doc.at("object"));
    if (doc.contains("provenance")) {
        mask.provenance = mask_provenance_from_name(doc.at("provenance").get<std::string>());
    }
    if (doc.contains("object_per_scale")) {
        for (const auto& arr : doc.at("object_per_scale")) {
            mask.object_weights_per_scale.push_back(read_row(arr));
        }
    }
    if (mask.hand_weights.size() != hand_count || mask.object_weights.size() != object_count) {
        throw_error(ErrorCode::CountMismatch,
                    path.string() + ": mask lengths do not match the clouds");
    }
    mask.validate(hand_count, object_count);
    return mask;
}

void save_mask_json(const std::filesystem::path& path, const ContactMask& mask) {
    json doc;
    doc["hand"] = mask.hand_weights;
    doc["object"] = mask.object_weights;
    doc["provenance"] = mask_provenance_name(mask.provenance);
    if (!mask.object_weights_per_scale.empty()) {
        doc["object_per_scale"] = mask.object_weights_per_scale;
    }
    std::ofstream outs(path);
    if (!outs) throw_error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
    outs << doc.dump(2) << "\n";
}

ContactMask load_external_mask(const std::filesystem::path& path, const OrientedPointCloud& hand,
                               const OrientedPointCloud& object_points) {
    ContactMask mask;
    if (path.extension() == ".json") {
        mask = load_mask_json(path, hand.size(), object_points.size());
    } else {
        // CSV pair: <stem>.csv for the hand, <stem>.object.csv for the object.
        std::filesystem::path object_path = path;
        object_path.replace_extension(".object.csv");
        mask.hand_weights = read_weight_csv(path, hand.size(), mask.clamped_entries);
        mask.object_weights =
            read_weight_csv(object_path, object_points.size(), mask.clamped_entries);
    }
    mask.provenance = MaskProvenance::External;
    mask.validate(hand.size(), object_points.size());
    return mask;
}

ContactMask nearest_point_mask(const OrientedPointCloud& hand, const SurfaceModel& object,
                               const OrientedPointCloud& object_points, double tau,
                               double softness) {
    if (!(tau > 0.0)) throw_error(ErrorCode::SchemaError, "tau must be > 0");
    if (!(softness > 0.0)) throw_error(ErrorCode::SchemaError, "softness must be > 0");

    ContactMask mask;
    mask.provenance = MaskProvenance::NearestPoint;
    mask.hand_weights.assign(hand.size(), 0.0);
    mask.object_weights.assign(object_points.size(), 0.0);

    const SurfaceModel object_index = SurfaceModel::from_cloud(object_points);

    for (std::size_t i = 0; i < hand.size(); ++i) {
        const double d = object.unsigned_distance(hand.points[i]);
        double w = 1.0;
        if (d > tau) {
            const double shoulder = (d - tau) / softness;
            w = std::exp(-shoulder * shoulder);
        }
        mask.hand_weights[i] = w;
        // Assign the hand weight to the nearest object sample point.
        const int j = object_index.nearest(hand.points[i]).primitive;
        mask.object_weights[j] = std::max(mask.object_weights[j], w);
    }
    return mask;
}

double average_point_spacing(const OrientedPointCloud& cloud) {
    const std::size_t n = cloud.size();
    if (n < 2) return 0.0;
    const std::size_t samples = std::min<std::size_t>(n, 256);
    const std::size_t stride = std::max<std::size_t>(n / samples, 1);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; i += stride) {
        double best = std::numeric_limits<double>::max();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            best = std::min(best, (cloud.points[i] - cloud.points[j]).squaredNorm());
        }
        sum += std::sqrt(best);
        ++count;
    }
    return sum / static_cast<double>(count);
}

ContactMask ray_based_mask(const OrientedPointCloud& hand, const SurfaceModel& object,
                           const OrientedPointCloud& object_points, double max_range) {
    if (!hand.has_normals()) {
        throw_error(ErrorCode::MissingNormals, "ray mask needs hand normals");
    }
    ContactMask mask;
    mask.provenance = MaskProvenance::RayBased;
    mask.hand_weights.assign(hand.size(), 0.0);
    mask.object_weights.assign(object_points.size(), 0.0);

    const double spacing = average_point_spacing(object_points);

    for (std::size_t i = 0; i < hand.size(); ++i) {
        const Vec3 dir = -hand.normals[i];  // cast into the hand's palm side
        std::optional<RayHit> hit;
        if (object.is_mesh()) {
            hit = object.ray_first_hit(hand.points[i], dir, max_range);
        } else {
            // Cloud-backed object: accept the nearest sample along the ray
            // within half a point spacing of it.
            double best_t = std::numeric_limits<double>::max();
            int best_idx = -1;
            for (std::size_t j = 0; j < object_points.size(); ++j) {
                const Vec3 rel = object_points.points[j] - hand.points[i];
                const double t = rel.dot(dir);
                if (t <= 0.0 || t > max_range) continue;
                const double perp2 = (rel - t * dir).squaredNorm();
                if (perp2 <= 0.25 * spacing * spacing &&
                    (t < best_t || (t == best_t && static_cast<int>(j) < best_idx))) {
                    best_t = t;
                    best_idx = static_cast<int>(j);
                }
            }
            if (best_idx >= 0) hit = RayHit{best_t, best_idx, 0.0, 0.0};
        }
        if (!hit) continue;

        mask.hand_weights[i] = 1.0;
        const Vec3 hit_point = hand.points[i] + hit->t * dir;
        // Mark object samples within one average spacing of the hit.
        for (std::size_t j = 0; j < object_points.size(); ++j) {
            if ((object_points.points[j] - hit_point).squaredNorm() <= spacing * spacing) {
                mask.object_weights[j] = 1.0;
            }
        }
    }
    return mask;
}

}  // namespace graspfield
