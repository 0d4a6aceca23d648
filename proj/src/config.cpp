#include "graspfield/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace graspfield {

using nlohmann::json;

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    cfg.resolve();
    return cfg;
}

void RunConfig::resolve() {
    if (field.scales.empty()) {
        throw_error(ErrorCode::SchemaError, "field.scales must not be empty");
    }
    if (field.strengths.size() != field.scales.size()) {
        throw_error(ErrorCode::SchemaError, "field.k must match field.scales in length");
    }
    if (bridge.stages.size() != field.scales.size()) {
        // Stage multipliers default per position: earlier stages relax the
        // priors, later stages tighten them and damp the noise.
        std::vector<StageSpec> stages(field.scales.size());
        const int per_stage =
            std::max(1, bridge.t_max / static_cast<int>(field.scales.size()));
        for (std::size_t s = 0; s < stages.size(); ++s) {
            const bool last = s + 1 == stages.size();
            stages[s].lambda1_mult = last ? 1.0 : 0.5;
            stages[s].lambda2_mult = last ? 1.0 : 0.5;
            stages[s].noise_mult = last ? 0.5 : 1.0;
            stages[s].max_iters = per_stage;
        }
        bridge.stages = std::move(stages);
    }
    for (std::size_t s = 0; s < bridge.stages.size(); ++s) {
        bridge.stages[s].sigma_scale = field.scales[s];
        bridge.stages[s].strength = field.strengths[s];
    }
    bridge.cutoff = field.cutoff;
    bridge.normalize_field = field.normalize;
    validate();
}

void RunConfig::validate() const {
    bridge.validate();
    if (mask.method != "nearest" && mask.method != "ray" && mask.method != "external") {
        throw_error(ErrorCode::SchemaError, "mask.method must be nearest, ray or external");
    }
    if (!(mask.tau > 0.0)) throw_error(ErrorCode::SchemaError, "mask.tau must be > 0");
    if (!(mask.softness > 0.0)) throw_error(ErrorCode::SchemaError, "mask.softness must be > 0");
    if (!(mask.max_range > 0.0)) {
        throw_error(ErrorCode::SchemaError, "mask.max_range must be > 0");
    }
    if (metrics.iv_resolution < 16) {
        throw_error(ErrorCode::SchemaError, "metrics.iv_resolution must be >= 16");
    }
}

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.contains(key)) {
            throw_error(ErrorCode::SchemaError, "unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read_into(const json& obj, const char* key, T& target) {
    if (!obj.contains(key)) return;
    try {
        target = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw_error(ErrorCode::SchemaError, std::string("bad value for '") + key + "': " +
                                                e.what());
    }
}

}  // namespace

json config_to_json(const RunConfig& cfg) {
    json stages = json::array();
    for (const StageSpec& s : cfg.bridge.stages) {
        stages.push_back({{"lambda1_mult", s.lambda1_mult},
                          {"lambda2_mult", s.lambda2_mult},
                          {"noise_mult", s.noise_mult},
                          {"max_iters", s.max_iters}});
    }
    return json{
        {"bridge",
         {{"alpha", cfg.bridge.alpha},
          {"lambda1", cfg.bridge.lambda1},
          {"lambda2", cfg.bridge.lambda2},
          {"dt", cfg.bridge.dt},
          {"epsilon", cfg.bridge.epsilon},
          {"t_max", cfg.bridge.t_max},
          {"validity_tol", cfg.bridge.validity_tol},
          {"noise",
           {{"g0", cfg.bridge.noise.g0},
            {"anneal", noise_anneal_name(cfg.bridge.noise.anneal)},
            {"adaptive", cfg.bridge.noise.adaptive}}},
          {"stages", stages}}},
        {"field",
         {{"scales", cfg.field.scales},
          {"k", cfg.field.strengths},
          {"cutoff", cfg.field.cutoff},
          {"normalize", cfg.field.normalize}}},
        {"mask",
         {{"method", cfg.mask.method},
          {"tau", cfg.mask.tau},
          {"softness", cfg.mask.softness},
          {"max_range", cfg.mask.max_range}}},
        {"metrics", {{"iv_resolution", cfg.metrics.iv_resolution}}},
        {"io", {{"input", cfg.io.input}, {"output", cfg.io.output}, {"seed", cfg.io.seed}}},
    };
}

RunConfig config_from_json(const json& doc) {
    if (!doc.is_object()) throw_error(ErrorCode::SchemaError, "config root must be an object");
    reject_unknown_keys(doc, {"bridge", "field", "mask", "metrics", "io"}, "config root");

    RunConfig cfg;
    if (doc.contains("bridge")) {
        const json& b = doc.at("bridge");
        reject_unknown_keys(b,
                            {"alpha", "lambda1", "lambda2", "dt", "epsilon", "t_max",
                             "validity_tol", "noise", "stages"},
                            "bridge");
        read_into(b, "alpha", cfg.bridge.alpha);
        read_into(b, "lambda1", cfg.bridge.lambda1);
        read_into(b, "lambda2", cfg.bridge.lambda2);
        read_into(b, "dt", cfg.bridge.dt);
        read_into(b, "epsilon", cfg.bridge.epsilon);
        read_into(b, "t_max", cfg.bridge.t_max);
        read_into(b, "validity_tol", cfg.bridge.validity_tol);
        if (b.contains("noise")) {
            const json& n = b.at("noise");
            reject_unknown_keys(n, {"g0", "anneal", "adaptive"}, "bridge.noise");
            read_into(n, "g0", cfg.bridge.noise.g0);
            if (n.contains("anneal")) {
                cfg.bridge.noise.anneal =
                    noise_anneal_from_name(n.at("anneal").get<std::string>());
            }
            read_into(n, "adaptive", cfg.bridge.noise.adaptive);
        }
        if (b.contains("stages")) {
            if (!b.at("stages").is_array() || b.at("stages").empty()) {
                throw_error(ErrorCode::SchemaError, "bridge.stages must be a non-empty array");
            }
            cfg.bridge.stages.clear();
            for (const json& s : b.at("stages")) {
                reject_unknown_keys(
                    s, {"lambda1_mult", "lambda2_mult", "noise_mult", "max_iters"},
                    "bridge.stages[]");
                StageSpec stage;
                read_into(s, "lambda1_mult", stage.lambda1_mult);
                read_into(s, "lambda2_mult", stage.lambda2_mult);
                read_into(s, "noise_mult", stage.noise_mult);
                read_into(s, "max_iters", stage.max_iters);
                cfg.bridge.stages.push_back(stage);
            }
        }
    }
    if (doc.contains("field")) {
        const json& f = doc.at("field");
        reject_unknown_keys(f, {"scales", "k", "cutoff", "normalize"}, "field");
        read_into(f, "scales", cfg.field.scales);
        read_into(f, "k", cfg.field.strengths);
        read_into(f, "cutoff", cfg.field.cutoff);
        read_into(f, "normalize", cfg.field.normalize);
    }
    if (doc.contains("mask")) {
        const json& m = doc.at("mask");
        reject_unknown_keys(m, {"method", "tau", "softness", "max_range"}, "mask");
        read_into(m, "method", cfg.mask.method);
        read_into(m, "tau", cfg.mask.tau);
        read_into(m, "softness", cfg.mask.softness);
        read_into(m, "max_range", cfg.mask.max_range);
    }
    if (doc.contains("metrics")) {
        const json& m = doc.at("metrics");
        reject_unknown_keys(m, {"iv_resolution"}, "metrics");
        read_into(m, "iv_resolution", cfg.metrics.iv_resolution);
    }
    if (doc.contains("io")) {
        const json& io = doc.at("io");
        reject_unknown_keys(io, {"input", "output", "seed"}, "io");
        read_into(io, "input", cfg.io.input);
        read_into(io, "output", cfg.io.output);
        read_into(io, "seed", cfg.io.seed);
    }

    // Stage count follows the field template unless stages were given; a
    // mismatch between explicit stages and scales is an error.
    if (doc.contains("bridge") && doc.at("bridge").contains("stages") &&
        cfg.bridge.stages.size() != cfg.field.scales.size()) {
        throw_error(ErrorCode::SchemaError,
                    "bridge.stages and field.scales must have the same length");
    }
    cfg.resolve();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw_error(ErrorCode::MissingFile, path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw_error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
    std::ofstream outs(path);
    if (!outs) throw_error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
    outs << config_to_json(cfg).dump(2) << "\n";
}

void apply_override(json& doc, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw_error(ErrorCode::SchemaError, "override must look like key.path=value: '" +
                                                assignment + "'");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw_value = assignment.substr(eq + 1);

    json value;
    try {
        value = json::parse(raw_value);
    } catch (const json::exception&) {
        value = raw_value;  // plain string
    }

    std::vector<std::string> segments;
    std::stringstream ss(path);
    std::string seg;
    while (std::getline(ss, seg, '.')) {
        if (seg.empty()) {
            throw_error(ErrorCode::SchemaError, "empty segment in override path '" + path + "'");
        }
        segments.push_back(seg);
    }

    json* cursor = &doc;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const std::string& s = segments[i];
        const bool last = i + 1 == segments.size();
        const bool is_index = std::all_of(s.begin(), s.end(),
                                          [](unsigned char c) { return std::isdigit(c); });
        if (is_index && cursor->is_array()) {
            const std::size_t idx = std::stoull(s);
            if (idx >= cursor->size()) {
                throw_error(ErrorCode::SchemaError,
                            "override index " + s + " out of range in '" + path + "'");
            }
            cursor = &(*cursor)[idx];
        } else {
            if (!cursor->is_object()) {
                throw_error(ErrorCode::SchemaError,
                            "override path '" + path + "' does not address an object");
            }
            if (last) {
                (*cursor)[s] = value;
                return;
            }
            if (!cursor->contains(s)) {
                (*cursor)[s] = json::object();
            }
            cursor = &(*cursor)[s];
        }
        if (last && is_index) {
            *cursor = value;
            return;
        }
    }
}

std::string config_hash(const RunConfig& cfg) {
    const std::string canonical = config_to_json(cfg).dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace graspfield
