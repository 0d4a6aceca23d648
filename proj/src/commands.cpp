#include "graspfield/commands.hpp"

#include "graspfield/bridge.hpp"
#include "graspfield/io.hpp"
#include "graspfield/metrics.hpp"
#include "graspfield/scenes.hpp"
#include "graspfield/verify.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace graspfield::cmd {

using nlohmann::json;

namespace {

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::NonFiniteUpdate ? kExitNumerical : kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}

}  // namespace

int refine(const std::filesystem::path& scene_dir, const std::filesystem::path& out_dir,
           const RunConfig& cfg) {
    return guarded([&] {
        cfg.validate();
        const Scene scene = load_scene(scene_dir);
        auto [refined, trace] = run_bridge(scene, cfg.bridge, cfg.io.seed);

        std::filesystem::create_directories(out_dir);
        io::save_ply(out_dir / "refined.ply", refined,
                     scene.hand_faces.empty() ? nullptr : &scene.hand_faces);
        if (!scene.hand_faces.empty()) {
            io::save_obj(out_dir / "refined.obj", refined, &scene.hand_faces);
        }
        trace.write_csv(out_dir / "trace.csv");

        json manifest;
        manifest["scene"] = scene.name;
        manifest["config_hash"] = config_hash(cfg);
        manifest["seed"] = cfg.io.seed;
        manifest["stop_reason"] = stop_reason_name(trace.stop_reason);
        manifest["iterations"] = trace.iterations.size();
        manifest["stage_end_iterations"] = trace.stage_end_iterations;
        std::ofstream outs(out_dir / "manifest.json");
        outs << manifest.dump(2) << "\n";
        return kExitOk;
    });
}

int metrics(const std::filesystem::path& scene_dir,
            const std::optional<std::filesystem::path>& refined_path,
            const std::filesystem::path& out_base, const RunConfig& cfg) {
    return guarded([&] {
        cfg.validate();
        Scene scene = load_scene(scene_dir);
        if (refined_path) {
            io::LoadedGeometry refined = io::load_geometry(*refined_path);
            if (refined.cloud.size() != scene.hand.size()) {
                throw_error(ErrorCode::CountMismatch,
                            "refined hand count differs from scene hand");
            }
            // labels travel with the scene hand when the refined file has none
            if (!refined.cloud.has_labels() && scene.hand.has_labels()) {
                refined.cloud.labels = scene.hand.labels;
            }
            scene.hand = std::move(refined.cloud);
        }

        ReportInputs inputs{scene.hand, scene.object,
                            scene.gt_hand ? &*scene.gt_hand : nullptr,
                            scene.hand_faces.empty() ? nullptr : &scene.hand_faces,
                            cfg.metrics.iv_resolution};
        const InteractionReport report = make_report(inputs);

        std::filesystem::path json_path = out_base;
        json_path.replace_extension(".json");
        std::filesystem::path csv_path = out_base;
        csv_path.replace_extension(".csv");
        if (json_path.has_parent_path()) {
            std::filesystem::create_directories(json_path.parent_path());
        }
        report.write_json(json_path);
        report.write_csv(csv_path);
        return kExitOk;
    });
}

int contact(const std::filesystem::path& scene_dir, const std::string& method,
            const std::filesystem::path& out_path, const RunConfig& cfg) {
    return guarded([&] {
        cfg.validate();
        const Scene scene = load_scene(scene_dir);
        ContactMask mask;
        if (method == "nearest") {
            mask = nearest_point_mask(scene.hand, scene.object, scene.object_points,
                                      cfg.mask.tau, cfg.mask.softness);
        } else if (method == "ray") {
            mask = ray_based_mask(scene.hand, scene.object, scene.object_points,
                                  cfg.mask.max_range);
        } else if (method == "external") {
            mask = scene.mask;  // re-export the scene's mask unchanged
        } else {
            throw_error(ErrorCode::SchemaError,
                        "method must be nearest, ray or external (got '" + method + "')");
        }
        if (out_path.has_parent_path()) {
            std::filesystem::create_directories(out_path.parent_path());
        }
        save_mask_json(out_path, mask);
        return kExitOk;
    });
}

int gen(const std::string& kind, const std::string& defect, double magnitude,
        std::uint64_t seed, const std::filesystem::path& out_dir, std::size_t points) {
    return guarded([&] {
        const Scene scene = make_grasp_scene(primitive_kind_from_name(kind),
                                             defect_kind_from_name(defect), magnitude, seed,
                                             points);
        save_scene(scene, out_dir);
        return kExitOk;
    });
}

int verify(const std::filesystem::path& scratch_dir) {
    return guarded([&] { return verify::run_and_print(scratch_dir); });
}

}  // namespace graspfield::cmd
