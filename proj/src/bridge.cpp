#include "graspfield/bridge.hpp"

#include "graspfield/rng.hpp"
#include "graspfield/scenes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace graspfield {

const char* stop_reason_name(StopReason reason) {
    switch (reason) {
        case StopReason::GradientBelowEpsilon: return "gradient_below_epsilon";
        case StopReason::MaxIterations: return "max_iterations";
        case StopReason::ContactValid: return "contact_valid";
    }
    return "max_iterations";
}

const char* noise_anneal_name(NoiseAnneal anneal) {
    switch (anneal) {
        case NoiseAnneal::Constant: return "constant";
        case NoiseAnneal::LinearDecay: return "linear-decay";
        case NoiseAnneal::CosineDecay: return "cosine-decay";
    }
    return "constant";
}

NoiseAnneal noise_anneal_from_name(const std::string& name) {
    if (name == "constant") return NoiseAnneal::Constant;
    if (name == "linear-decay") return NoiseAnneal::LinearDecay;
    if (name == "cosine-decay") return NoiseAnneal::CosineDecay;
    throw_error(ErrorCode::SchemaError, "unknown noise anneal '" + name + "'");
}

double NoiseSchedule::amplitude(double progress) const {
    const double u = std::clamp(progress, 0.0, 1.0);
    switch (anneal) {
        case NoiseAnneal::Constant: return g0;
        case NoiseAnneal::LinearDecay: return g0 * (1.0 - u);
        case NoiseAnneal::CosineDecay: return g0 * 0.5 * (1.0 + std::cos(M_PI * u));
    }
    return g0;
}

BridgeConfig BridgeConfig::defaults() {
    BridgeConfig cfg;
    cfg.stages = {
        {0.2, 1.0, 0.5, 0.5, 1.0, 50},   // coarse guidance, relaxed priors
        {0.05, 1.0, 1.0, 1.0, 0.5, 100}, // fine refinement, full priors
    };
    return cfg;
}

void BridgeConfig::validate() const {
    if (!(alpha > 0.0)) throw_error(ErrorCode::SchemaError, "alpha must be > 0");
    if (!(dt > 0.0)) throw_error(ErrorCode::SchemaError, "dt must be > 0");
    if (!(epsilon > 0.0)) throw_error(ErrorCode::SchemaError, "epsilon must be > 0");
    if (!(lambda1 >= 0.0)) throw_error(ErrorCode::SchemaError, "lambda1 must be >= 0");
    if (!(lambda2 >= 0.0)) throw_error(ErrorCode::SchemaError, "lambda2 must be >= 0");
    if (t_max < 1) throw_error(ErrorCode::SchemaError, "t_max must be >= 1");
    if (!(noise.g0 >= 0.0)) throw_error(ErrorCode::SchemaError, "noise g0 must be >= 0");
    if (!(cutoff >= 3.0)) throw_error(ErrorCode::SchemaError, "cutoff must be >= 3 sigma");
    if (!(validity_tol > 0.0)) throw_error(ErrorCode::SchemaError, "validity_tol must be > 0");
    if (stages.empty()) throw_error(ErrorCode::SchemaError, "at least one stage required");
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const StageSpec& st = stages[s];
        if (!(st.sigma_scale > 0.0)) {
            throw_error(ErrorCode::SchemaError, "stage sigma_scale must be > 0");
        }
        if (!(st.strength >= 0.0) || !(st.lambda1_mult >= 0.0) || !(st.lambda2_mult >= 0.0) ||
            !(st.noise_mult >= 0.0)) {
            throw_error(ErrorCode::SchemaError, "stage multipliers must be >= 0");
        }
        if (st.max_iters < 1) throw_error(ErrorCode::SchemaError, "stage max_iters must be >= 1");
        if (s > 0 && !(st.sigma_scale < stages[s - 1].sigma_scale)) {
            throw_error(ErrorCode::SchemaError,
                        "stage scale radii must be strictly decreasing");
        }
    }
}

double shape_prior_loss(const OrientedPointCloud& hand, const TemplatePrior& prior) {
    if (hand.size() != prior.reference.size()) {
        throw_error(ErrorCode::CountMismatch, "prior reference count differs from hand");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < hand.size(); ++i) {
        loss += (hand.points[i] - prior.reference.points[i]).squaredNorm();
    }
    return loss;
}

std::vector<Vec3> shape_prior_gradient(const OrientedPointCloud& hand,
                                       const TemplatePrior& prior) {
    if (hand.size() != prior.reference.size()) {
        throw_error(ErrorCode::CountMismatch, "prior reference count differs from hand");
    }
    std::vector<Vec3> grad(hand.size());
    for (std::size_t i = 0; i < hand.size(); ++i) {
        grad[i] = 2.0 * (hand.points[i] - prior.reference.points[i]);
    }
    return grad;
}

namespace {

constexpr double kDirectionEps = 1e-9;

struct Correspondence {
    std::size_t index;
    Vec3 point;
    Vec3 normal;
};

std::vector<Correspondence> contact_correspondences(const std::vector<Vec3>& points,
                                                    const ContactMask& mask,
                                                    const SurfaceModel& object) {
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (mask.hand_weights[i] > 0.0) selected.push_back(i);
    }
    std::vector<Correspondence> corr(selected.size());
    parallel_for(selected.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const std::size_t i = selected[k];
            const NearestResult nr = object.nearest(points[i]);
            corr[k] = {i, nr.point, nr.normal};
        }
    });
    return corr;
}

struct NormalParts {
    double loss = 0.0;
    int skipped = 0;
};

// Loss and (optionally) gradients with p, n frozen to the given
// correspondences.
NormalParts normal_terms(const std::vector<Vec3>& points,
                         const std::vector<Correspondence>& corr, std::vector<Vec3>* gradients) {
    NormalParts parts;
    for (const Correspondence& c : corr) {
        const Vec3 r = points[c.index] - c.point;
        const double len = r.norm();
        if (len <= kDirectionEps) {
            ++parts.skipped;
            continue;
        }
        const Vec3 u = r / len;
        const double cosine = c.normal.dot(u);
        const double miss = 1.0 - cosine;
        parts.loss += miss * miss;
        if (gradients != nullptr) {
            (*gradients)[c.index] += -2.0 * miss * (c.normal - cosine * u) / len;
        }
    }
    return parts;
}

struct EnergyParts {
    double phi = 0.0;
    double shape = 0.0;
    double normal = 0.0;
    int skipped = 0;

    double energy(double l1, double l2) const { return -phi + l1 * shape + l2 * normal; }
};

EnergyParts evaluate_energy(const std::vector<Vec3>& points, const GravityFieldSpec& field,
                            const OrientedPointCloud& reference,
                            const std::vector<Correspondence>& corr) {
    EnergyParts parts;
    std::vector<double> phi(points.size(), 0.0);
    parallel_for(points.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            phi[i] = potential(field, points[i]);
        }
    });
    // Sequential reductions keep results independent of the thread count.
    for (std::size_t i = 0; i < points.size(); ++i) {
        parts.phi += phi[i];
        parts.shape += (points[i] - reference.points[i]).squaredNorm();
    }
    const NormalParts np = normal_terms(points, corr, nullptr);
    parts.normal = np.loss;
    parts.skipped = np.skipped;
    return parts;
}

struct StepContext {
    const GravityFieldSpec& field;
    const TemplatePrior& prior;
    const ContactMask& mask;
    const BridgeConfig& cfg;
    const StageSpec& stage;
    std::uint64_t seed;
    int iteration;
    int stage_index;
    std::optional<double> descent_anchor;
};

StepResult step_impl(const OrientedPointCloud& hand, const StepContext& ctx,
                     const std::vector<Correspondence>& corr, const std::vector<Vec3>& forces) {
    const std::size_t n = hand.size();
    const double l1 = ctx.cfg.lambda1 * ctx.stage.lambda1_mult;
    const double l2 = ctx.cfg.lambda2 * ctx.stage.lambda2_mult;
    const double progress = static_cast<double>(ctx.iteration) / ctx.cfg.t_max;
    const double amplitude = ctx.cfg.noise.amplitude(progress) * ctx.stage.noise_mult;

    std::vector<Vec3> drift(n, Vec3::Zero());
    std::vector<Vec3> normal_grad(n, Vec3::Zero());
    normal_terms(hand.points, corr, &normal_grad);

    double grad_norm = 0.0;
    double drift_norm = 0.0;
    double max_force = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 shape_grad = 2.0 * (hand.points[i] - ctx.prior.reference.points[i]);
        drift[i] = ctx.cfg.alpha * forces[i] - l1 * shape_grad - l2 * normal_grad[i];
        grad_norm += forces[i].norm();
        drift_norm += drift[i].norm();
        max_force = std::max(max_force, forces[i].norm());
    }
    grad_norm /= static_cast<double>(n);
    drift_norm /= static_cast<double>(n);

    const EnergyParts pre = evaluate_energy(hand.points, ctx.field, ctx.prior.reference, corr);
    const double u_pre = pre.energy(l1, l2);

    IterationRecord rec;
    rec.iteration = ctx.iteration;
    rec.stage = ctx.stage_index;
    rec.energy_pre = u_pre;
    rec.noise_amp = amplitude;
    rec.drift_norm = drift_norm;
    rec.grad_norm = grad_norm;

    StepResult out{hand, rec};

    auto check_finite = [&](const std::vector<Vec3>& pts) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (!finite(pts[i])) {
                throw_error(ErrorCode::NonFiniteUpdate,
                            "iteration " + std::to_string(ctx.iteration) + ", point " +
                                std::to_string(i));
            }
        }
    };

    if (amplitude == 0.0) {
        // Deterministic mode: backtracking line search on dt. The candidate
        // must not raise U above the step start nor above the last accepted
        // energy of this stage (the descent anchor).
        const double target =
            std::min(u_pre, ctx.descent_anchor.value_or(std::numeric_limits<double>::max()));
        std::vector<Vec3> candidate(n);
        double dt = ctx.cfg.dt;
        for (int attempt = 0; attempt <= 20; ++attempt) {
            for (std::size_t i = 0; i < n; ++i) {
                candidate[i] = hand.points[i] + drift[i] * dt;
            }
            check_finite(candidate);
            const EnergyParts post =
                evaluate_energy(candidate, ctx.field, ctx.prior.reference, corr);
            const double u_post = post.energy(l1, l2);
            if (u_post <= target) {
                out.hand.points = candidate;
                out.record.energy = u_post;
                out.record.phi_total = post.phi;
                out.record.shape_loss = post.shape;
                out.record.normal_loss = post.normal;
                out.record.skipped_normal_terms = post.skipped;
                out.record.accepted = true;
                out.record.backtracks = attempt;
                return out;
            }
            dt *= 0.5;
        }
        // No candidate descends: keep the state unchanged.
        out.record.energy = u_pre;
        out.record.phi_total = pre.phi;
        out.record.shape_loss = pre.shape;
        out.record.normal_loss = pre.normal;
        out.record.skipped_normal_terms = pre.skipped;
        out.record.accepted = false;
        out.record.backtracks = 21;
        return out;
    }

    // Stochastic mode: fixed dt, counter-based noise.
    const double sqrt_dt = std::sqrt(ctx.cfg.dt);
    std::vector<Vec3> next(n);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double amp_i = amplitude;
            if (ctx.cfg.noise.adaptive) {
                amp_i = max_force > 0.0 ? amplitude * forces[i].norm() / max_force : 0.0;
            }
            const Vec3 noise(rng::normal(ctx.seed, ctx.iteration, i, 0),
                             rng::normal(ctx.seed, ctx.iteration, i, 1),
                             rng::normal(ctx.seed, ctx.iteration, i, 2));
            next[i] = hand.points[i] + drift[i] * ctx.cfg.dt + amp_i * sqrt_dt * noise;
        }
    });
    check_finite(next);
    const EnergyParts post = evaluate_energy(next, ctx.field, ctx.prior.reference, corr);
    out.hand.points = std::move(next);
    out.record.energy = post.energy(l1, l2);
    out.record.phi_total = post.phi;
    out.record.shape_loss = post.shape;
    out.record.normal_loss = post.normal;
    out.record.skipped_normal_terms = post.skipped;
    out.record.accepted = true;
    return out;
}

double mean_force_norm(const std::vector<Vec3>& forces) {
    if (forces.empty()) return 0.0;
    double sum = 0.0;
    for (const Vec3& f : forces) sum += f.norm();
    return sum / static_cast<double>(forces.size());
}

}  // namespace

NormalAlignmentResult normal_alignment(const OrientedPointCloud& hand_contact,
                                       const SurfaceModel& object, const ContactMask& mask) {
    if (mask.hand_weights.size() != hand_contact.size()) {
        throw_error(ErrorCode::CountMismatch, "mask length differs from hand cloud");
    }
    const auto corr = contact_correspondences(hand_contact.points, mask, object);
    NormalAlignmentResult result;
    result.gradients.assign(hand_contact.size(), Vec3::Zero());
    const NormalParts parts = normal_terms(hand_contact.points, corr, &result.gradients);
    result.loss = parts.loss;
    result.skipped = parts.skipped;
    result.evaluated = static_cast<int>(corr.size()) - parts.skipped;
    return result;
}

StepResult euler_maruyama_step(const OrientedPointCloud& hand, const GravityFieldSpec& field,
                               const TemplatePrior& prior, const SurfaceModel& object,
                               const ContactMask& mask, const BridgeConfig& cfg,
                               const StageSpec& stage, std::uint64_t seed, int iteration,
                               int stage_index, std::optional<double> descent_anchor) {
    cfg.validate();
    if (hand.size() != prior.reference.size()) {
        throw_error(ErrorCode::CountMismatch, "prior reference count differs from hand");
    }
    if (mask.hand_weights.size() != hand.size()) {
        throw_error(ErrorCode::CountMismatch, "mask length differs from hand cloud");
    }
    const auto corr = contact_correspondences(hand.points, mask, object);
    const auto forces = batch_force(field, hand.points, cfg.cutoff);
    const StepContext ctx{field, prior, mask,       cfg,
                          stage, seed,  iteration,  stage_index,
                          descent_anchor};
    return step_impl(hand, ctx, corr, forces);
}

bool contact_validity(const OrientedPointCloud& hand, const SurfaceModel& object,
                      const OrientedPointCloud& object_points, const ContactMask& mask,
                      double tol) {
    mask.validate(hand.size(), object_points.size());

    // (a) No hand point deeper than tol. A point with unsigned distance
    // within tol cannot violate this regardless of sign.
    std::atomic<bool> ok{true};
    parallel_for(hand.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end && ok.load(std::memory_order_relaxed); ++i) {
            const double d = object.unsigned_distance(hand.points[i]);
            if (d > tol && object.inside(hand.points[i])) {
                ok.store(false, std::memory_order_relaxed);
            }
        }
    });
    if (!ok.load()) return false;

    // (b) Every attractor is covered by a masked hand point within tol.
    OrientedPointCloud masked;
    for (std::size_t i = 0; i < hand.size(); ++i) {
        if (mask.hand_weights[i] > 0.0) masked.points.push_back(hand.points[i]);
    }
    bool any_attractor = false;
    for (double w : mask.object_weights) {
        if (w > 0.0) {
            any_attractor = true;
            break;
        }
    }
    if (!any_attractor) return true;
    if (masked.points.empty()) return false;

    const SurfaceModel masked_index = SurfaceModel::from_cloud(masked);
    for (std::size_t j = 0; j < object_points.size(); ++j) {
        if (mask.object_weights[j] <= 0.0) continue;
        if (masked_index.nearest(object_points.points[j]).distance > tol) return false;
    }
    return true;
}

GravityFieldSpec stage_field(const Scene& scene, const BridgeConfig& cfg, const StageSpec& stage,
                             int stage_index) {
    const auto& weights =
        scene.mask.object_weights_for_scale(static_cast<std::size_t>(stage_index));
    double strength = stage.strength;
    if (cfg.normalize_field) {
        double total = 0.0;
        for (double w : weights) total += w;
        strength = total > 0.0
                       ? stage.strength * stage.sigma_scale * stage.sigma_scale / (2.0 * total)
                       : 0.0;
    }
    return GravityFieldSpec::broadcast({{stage.sigma_scale, strength}},
                                       scene.object_points.points, weights);
}

std::pair<OrientedPointCloud, BridgeTrace> run_bridge(const Scene& scene, const BridgeConfig& cfg,
                                                      std::uint64_t seed) {
    cfg.validate();
    scene.validate();

    OrientedPointCloud hand = scene.hand;
    BridgeTrace trace;

    // Condition (iii) needs signed distances and a non-vacuous assignment;
    // without either it can never fire.
    bool has_attractors = false;
    for (double w : scene.mask.object_weights) {
        if (w > 0.0) {
            has_attractors = true;
            break;
        }
    }
    const bool signed_distance_ok =
        scene.object.is_mesh() ? scene.object.watertight() : scene.object.cloud().has_normals();
    const bool validity_applicable = has_attractors && signed_distance_ok;

    // Per-iteration stage lookup from the per-stage budgets; iterations past
    // the combined budget stay in the final stage until t_max.
    auto stage_of = [&cfg](int t) {
        int consumed = 0;
        for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
            consumed += cfg.stages[s].max_iters;
            if (t <= consumed) return static_cast<int>(s);
        }
        return static_cast<int>(cfg.stages.size()) - 1;
    };

    GravityFieldSpec field;
    int current_stage = -1;
    std::optional<double> anchor;

    for (int t = 1; t <= cfg.t_max; ++t) {
        const int s = stage_of(t);
        if (s != current_stage) {
            if (current_stage >= 0) {
                trace.stage_end_iterations.push_back(t - 1);
                trace.stage_end_hands.push_back(hand);
            }
            field = stage_field(scene, cfg, cfg.stages[s], s);
            current_stage = s;
            anchor.reset();
        }

        const auto corr = contact_correspondences(hand.points, scene.mask, scene.object);
        const auto forces = batch_force(field, hand.points, cfg.cutoff);
        const double grad = mean_force_norm(forces);

        // (i) gravity gradient below epsilon; only meaningful with a live field.
        if (field.active() && grad < cfg.epsilon) {
            const double l1 = cfg.lambda1 * cfg.stages[s].lambda1_mult;
            const double l2 = cfg.lambda2 * cfg.stages[s].lambda2_mult;
            const EnergyParts parts =
                evaluate_energy(hand.points, field, scene.prior.reference, corr);
            IterationRecord rec;
            rec.iteration = t;
            rec.stage = s;
            rec.energy = parts.energy(l1, l2);
            rec.energy_pre = rec.energy;
            rec.phi_total = parts.phi;
            rec.shape_loss = parts.shape;
            rec.normal_loss = parts.normal;
            rec.skipped_normal_terms = parts.skipped;
            rec.grad_norm = grad;
            rec.noise_amp =
                cfg.noise.amplitude(static_cast<double>(t) / cfg.t_max) *
                cfg.stages[s].noise_mult;
            trace.iterations.push_back(rec);
            trace.stop_reason = StopReason::GradientBelowEpsilon;
            trace.stage_end_iterations.push_back(t);
            trace.stage_end_hands.push_back(hand);
            return {hand, trace};
        }

        const StepContext ctx{field, scene.prior, scene.mask, cfg,   cfg.stages[s],
                              seed,  t,           s,          anchor};
        StepResult step = step_impl(hand, ctx, corr, forces);
        hand = std::move(step.hand);
        trace.iterations.push_back(step.record);
        if (step.record.accepted && step.record.noise_amp == 0.0) {
            anchor = step.record.energy;
        }

        // (iii) contact validity.
        if (validity_applicable &&
            contact_validity(hand, scene.object, scene.object_points, scene.mask,
                             cfg.validity_tol)) {
            trace.stop_reason = StopReason::ContactValid;
            trace.stage_end_iterations.push_back(t);
            trace.stage_end_hands.push_back(hand);
            return {hand, trace};
        }
    }

    trace.stop_reason = StopReason::MaxIterations;
    trace.stage_end_iterations.push_back(cfg.t_max);
    trace.stage_end_hands.push_back(hand);
    return {hand, trace};
}

void BridgeTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream outs(path);
    if (!outs) throw_error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
    outs << "iteration,U,phi_total,L_shape,L_normal,noise_amp,stage,drift_norm,grad_norm,"
            "accepted\n";
    char buf[512];
    for (const IterationRecord& r : iterations) {
        std::snprintf(buf, sizeof(buf),
                      "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%d\n", r.iteration,
                      r.energy, r.phi_total, r.shape_loss, r.normal_loss, r.noise_amp, r.stage,
                      r.drift_norm, r.grad_norm, r.accepted ? 1 : 0);
        outs << buf;
    }
}

}  // namespace graspfield
