#include "graspfield/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace graspfield {

using nlohmann::json;

double mpvpe(const OrientedPointCloud& pred, const OrientedPointCloud& gt, bool align) {
    if (pred.size() != gt.size()) {
        throw_error(ErrorCode::CountMismatch, "prediction and ground truth counts differ");
    }
    OrientedPointCloud adjusted;
    const OrientedPointCloud* p = &pred;
    if (align) {
        const RigidTransform t = procrustes_align(pred, gt);
        adjusted = t.apply(pred);
        p = &adjusted;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < p->size(); ++i) {
        sum += (p->points[i] - gt.points[i]).norm();
    }
    return 1000.0 * sum / static_cast<double>(p->size());
}

namespace {

std::map<int, Vec3> label_centroids(const OrientedPointCloud& cloud) {
    std::map<int, std::pair<Vec3, std::size_t>> acc;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const int label = cloud.labels[i];
        if (label < 0) continue;
        auto& slot = acc[label];
        slot.first += cloud.points[i];
        ++slot.second;
    }
    std::map<int, Vec3> out;
    for (const auto& [label, slot] : acc) {
        out[label] = slot.first / static_cast<double>(slot.second);
    }
    return out;
}

}  // namespace

double mpjpe(const OrientedPointCloud& pred, const OrientedPointCloud& gt) {
    if (!pred.has_labels() || !gt.has_labels()) {
        throw_error(ErrorCode::NoJointLabels, "both clouds need joint labels");
    }
    const auto pred_joints = label_centroids(pred);
    const auto gt_joints = label_centroids(gt);
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [label, centroid] : pred_joints) {
        const auto it = gt_joints.find(label);
        if (it == gt_joints.end()) continue;
        sum += (centroid - it->second).norm();
        ++count;
    }
    if (count == 0) {
        throw_error(ErrorCode::NoJointLabels, "no joint group present in both clouds");
    }
    return 1000.0 * sum / static_cast<double>(count);
}

double intersection_volume(const SurfaceModel& hand_mesh, const SurfaceModel& object,
                           int resolution) {
    if (resolution < 16) throw_error(ErrorCode::SchemaError, "resolution must be >= 16");
    if (!hand_mesh.is_mesh() || !hand_mesh.watertight() || !object.is_mesh() ||
        !object.watertight()) {
        throw_error(ErrorCode::NotWatertight, "intersection volume needs watertight meshes");
    }

    Aabb box;
    box.min = hand_mesh.bounds().min.cwiseMax(object.bounds().min);
    box.max = hand_mesh.bounds().max.cwiseMin(object.bounds().max);
    if (!box.valid()) return 0.0;

    const Vec3 ext = box.extent();
    const int n = resolution;
    const Vec3 cell = ext / static_cast<double>(n);
    const double cell_volume = cell.x() * cell.y() * cell.z();
    if (cell_volume <= 0.0) return 0.0;

    // One +x scanline per (y, z) row of voxel centers; the parity intervals
    // along the row classify every center on it at once.
    const Vec3 x_dir(1.0, 0.0, 0.0);
    std::vector<std::size_t> row_counts(static_cast<std::size_t>(n) * n, 0);

    parallel_for(static_cast<std::size_t>(n) * n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> cuts_a, cuts_b;
        for (std::size_t row = begin; row < end; ++row) {
            const int iy = static_cast<int>(row % n);
            const int iz = static_cast<int>(row / n);
            const Vec3 origin(box.min.x() - 1e-7 * std::max(ext.x(), 1e-9),
                              box.min.y() + (iy + 0.5) * cell.y(),
                              box.min.z() + (iz + 0.5) * cell.z());
            auto collect = [&](const SurfaceModel& s, std::vector<double>& cuts) {
                cuts.clear();
                for (const RayHit& h :
                     s.ray_hits(origin, x_dir, std::numeric_limits<double>::max())) {
                    cuts.push_back(h.t);
                }
            };
            collect(hand_mesh, cuts_a);
            collect(object, cuts_b);

            auto inside_at = [](const std::vector<double>& cuts, double t) {
                // number of crossings beyond t odd -> inside
                const auto it = std::upper_bound(cuts.begin(), cuts.end(), t);
                return ((cuts.end() - it) % 2) == 1;
            };

            std::size_t count = 0;
            for (int ix = 0; ix < n; ++ix) {
                const double t =
                    (box.min.x() + (ix + 0.5) * cell.x()) - origin.x();
                if (inside_at(cuts_a, t) && inside_at(cuts_b, t)) ++count;
            }
            row_counts[row] = count;
        }
    });

    std::size_t total = 0;
    for (std::size_t c : row_counts) total += c;
    return static_cast<double>(total) * cell_volume * 1e6;  // m^3 -> cm^3
}

PenetrationStats penetration_stats(const OrientedPointCloud& hand, const SurfaceModel& object) {
    PenetrationStats stats;
    stats.signed_distances.resize(hand.size());
    parallel_for(hand.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            stats.signed_distances[i] = object.signed_distance(hand.points[i]);
        }
    });
    double sum = 0.0;
    std::size_t inside = 0;
    for (double sd : stats.signed_distances) {
        const double depth = std::max(0.0, -sd);
        stats.max_mm = std::max(stats.max_mm, 1000.0 * depth);
        if (depth > 0.0) {
            sum += 1000.0 * depth;
            ++inside;
        }
    }
    stats.mean_mm = inside > 0 ? sum / static_cast<double>(inside) : 0.0;
    return stats;
}

double penetration_depth(const OrientedPointCloud& hand, const SurfaceModel& object) {
    return penetration_stats(hand, object).max_mm;
}

double proximity_error(const OrientedPointCloud& pred, const OrientedPointCloud& gt,
                       const SurfaceModel& object) {
    if (pred.size() != gt.size()) {
        throw_error(ErrorCode::CountMismatch, "prediction and ground truth counts differ");
    }
    std::vector<double> diff(pred.size());
    parallel_for(pred.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            diff[i] = std::abs(object.unsigned_distance(pred.points[i]) -
                               object.unsigned_distance(gt.points[i]));
        }
    });
    double sum = 0.0;
    for (double d : diff) sum += d;
    return 1000.0 * sum / static_cast<double>(pred.size());
}

InteractionReport make_report(const ReportInputs& inputs) {
    InteractionReport report;

    const PenetrationStats stats = penetration_stats(inputs.hand, inputs.object);
    report.pd_mm = stats.max_mm;
    report.pd_mean_mm = stats.mean_mm;
    report.per_point_signed_distances = stats.signed_distances;

    if (inputs.gt_hand != nullptr) {
        report.mpvpe_mm = mpvpe(inputs.hand, *inputs.gt_hand, false);
        report.pa_mpvpe_mm = mpvpe(inputs.hand, *inputs.gt_hand, true);
        report.pe_mm = proximity_error(inputs.hand, *inputs.gt_hand, inputs.object);
        if (inputs.hand.has_labels() && inputs.gt_hand->has_labels()) {
            report.mpjpe_mm = mpjpe(inputs.hand, *inputs.gt_hand);
            const RigidTransform t = procrustes_align(inputs.hand, *inputs.gt_hand);
            report.pa_mpjpe_mm = mpjpe(t.apply(inputs.hand), *inputs.gt_hand);
        }
    }

    if (inputs.hand_faces != nullptr && !inputs.hand_faces->empty()) {
        TriangleMesh hand_mesh{inputs.hand.points, *inputs.hand_faces};
        const SurfaceModel hand_surface = SurfaceModel::from_mesh(hand_mesh);
        if (hand_surface.watertight() && inputs.object.is_mesh() &&
            inputs.object.watertight()) {
            report.iv_cm3 =
                intersection_volume(hand_surface, inputs.object, inputs.iv_resolution);
        }
    }
    return report;
}

namespace {

json optional_to_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

void csv_cell(std::string& row, const std::optional<double>& v) {
    char buf[64];
    if (v) {
        std::snprintf(buf, sizeof(buf), "%.17g", *v);
        row += buf;
    }
    row += ',';
}

}  // namespace

void InteractionReport::write_json(const std::filesystem::path& path) const {
    json doc;
    doc["mpjpe_mm"] = optional_to_json(mpjpe_mm);
    doc["mpvpe_mm"] = optional_to_json(mpvpe_mm);
    doc["pa_mpjpe_mm"] = optional_to_json(pa_mpjpe_mm);
    doc["pa_mpvpe_mm"] = optional_to_json(pa_mpvpe_mm);
    doc["iv_cm3"] = optional_to_json(iv_cm3);
    doc["pd_mm"] = pd_mm;
    doc["pd_mean_mm"] = pd_mean_mm;
    doc["pe_mm"] = optional_to_json(pe_mm);
    doc["per_point_signed_distances_m"] = per_point_signed_distances;
    std::ofstream outs(path);
    if (!outs) throw_error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
    outs << doc.dump(2) << "\n";
}

void InteractionReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream outs(path);
    if (!outs) throw_error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
    outs << "mpjpe_mm,mpvpe_mm,iv_cm3,pd_mm,pe_mm\n";
    std::string row;
    csv_cell(row, mpjpe_mm);
    csv_cell(row, mpvpe_mm);
    csv_cell(row, iv_cm3);
    csv_cell(row, pd_mm);
    csv_cell(row, pe_mm);
    row.pop_back();  // trailing comma
    outs << row << "\n";
}

}  // namespace graspfield
