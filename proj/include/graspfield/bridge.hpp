#pragma once

#include "graspfield/contact.hpp"
#include "graspfield/core.hpp"
#include "graspfield/field.hpp"
#include "graspfield/surface.hpp"

#include <filesystem>
#include <optional>

namespace graspfield {

struct Scene;  // scenes.hpp

enum class StopReason { GradientBelowEpsilon, MaxIterations, ContactValid };

const char* stop_reason_name(StopReason reason);

enum class NoiseAnneal { Constant, LinearDecay, CosineDecay };

const char* noise_anneal_name(NoiseAnneal anneal);
NoiseAnneal noise_anneal_from_name(const std::string& name);

/// Base amplitude g0 shaped by a non-increasing anneal over normalized
/// progress t / t_max. An amplitude of zero switches the integrator into
/// deterministic mode (backtracking line search active).
struct NoiseSchedule {
    double g0 = 1e-4;  // meters / sqrt(time)
    NoiseAnneal anneal = NoiseAnneal::LinearDecay;
    // Per-point amplitude scaled by local field strength relative to the
    // strongest point (noise follows the attraction landscape).
    bool adaptive = false;

    double amplitude(double progress) const;
};

struct StageSpec {
    double sigma_scale = 0.2;   // field receptive radius for this stage, meters
    double strength = 1.0;      // field k for this stage
    double lambda1_mult = 1.0;  // shape-prior weight multiplier
    double lambda2_mult = 1.0;  // normal-alignment weight multiplier
    double noise_mult = 1.0;
    int max_iters = 50;
};

struct BridgeConfig {
    double alpha = 0.01;    // gravitational step coefficient
    double lambda1 = 0.5;   // shape-prior weight
    double lambda2 = 0.2;   // normal-alignment weight
    double dt = 1.0;
    double epsilon = 1e-4;  // gradient-norm stopping threshold
    int t_max = 150;
    NoiseSchedule noise;
    std::vector<StageSpec> stages;
    double cutoff = 6.0;  // far-field truncation, units of sigma
    // Scale each stage's field strength by sigma^2 / (2 * total weight),
    // turning the drift into a weighted mean attraction displacement. The
    // raw sum grows with the attractor count and makes alpha scene-size
    // dependent.
    bool normalize_field = true;
    double validity_tol = 0.002;  // contact validity tolerance, meters

    static BridgeConfig defaults();
    void validate() const;
};

/// Reference target for the shape prior: one anchor position per hand
/// point. Parametric pose/shape metadata is carried through untouched for
/// externally fitted templates.
struct TemplatePrior {
    OrientedPointCloud reference;
    std::vector<double> pose_params;   // unused by the static prior
    std::vector<double> shape_params;  // unused by the static prior
};

struct IterationRecord {
    int iteration = 0;  // 1-based, global across stages
    int stage = 0;
    double energy = 0.0;      // U after the step (frozen correspondences)
    double energy_pre = 0.0;  // U before the step, same objective
    double phi_total = 0.0;
    double shape_loss = 0.0;
    double normal_loss = 0.0;
    double noise_amp = 0.0;
    double drift_norm = 0.0;  // mean per-point drift magnitude
    double grad_norm = 0.0;   // mean per-point gravity force magnitude
    bool accepted = false;
    int backtracks = 0;
    int skipped_normal_terms = 0;
};

struct BridgeTrace {
    std::vector<IterationRecord> iterations;
    StopReason stop_reason = StopReason::MaxIterations;
    // Global iteration index of the last iteration run in each stage.
    std::vector<int> stage_end_iterations;
    // Hand state at each stage boundary (same order), ending with the final
    // state.
    std::vector<OrientedPointCloud> stage_end_hands;

    void write_csv(const std::filesystem::path& path) const;
};

// --- individual drift terms -------------------------------------------------

double shape_prior_loss(const OrientedPointCloud& hand, const TemplatePrior& prior);

/// Gradient of sum ||X_i - ref_i||^2, i.e. 2 (X_i - ref_i) per point.
std::vector<Vec3> shape_prior_gradient(const OrientedPointCloud& hand,
                                       const TemplatePrior& prior);

struct NormalAlignmentResult {
    double loss = 0.0;
    std::vector<Vec3> gradients;  // one per hand point; zero off the mask
    int evaluated = 0;            // mask-selected points with defined direction
    int skipped = 0;              // degenerate (coincident with surface) terms
};

/// Loss sum_(masked i) (1 - <n_i, (X_i - p_i)/|X_i - p_i|>)^2 with nearest
/// points p_i and normals n_i held fixed within the evaluation.
NormalAlignmentResult normal_alignment(const OrientedPointCloud& hand_contact,
                                       const SurfaceModel& object, const ContactMask& mask);

// --- integrator ---------------------------------------------------------------

struct StepResult {
    OrientedPointCloud hand;
    IterationRecord record;
};

/// One Euler-Maruyama update:
///   X' = X + alpha F(X) dt - l1 grad(shape) dt - l2 grad(normal) dt
///        + g sqrt(dt) * N(0, I)
/// with l1/l2/noise scaled by the stage multipliers. When the amplitude is
/// zero the step backtracks (halving dt up to 20 times) until the composite
/// energy U = -phi + l1 L_shape + l2 L_normal does not increase; if no
/// candidate passes, the hand is returned unchanged with accepted=false.
/// Noise is drawn from a counter-based stream on (seed, iteration, point).
StepResult euler_maruyama_step(const OrientedPointCloud& hand, const GravityFieldSpec& field,
                               const TemplatePrior& prior, const SurfaceModel& object,
                               const ContactMask& mask, const BridgeConfig& cfg,
                               const StageSpec& stage, std::uint64_t seed, int iteration,
                               int stage_index = 0,
                               std::optional<double> descent_anchor = std::nullopt);

/// True iff no hand point penetrates deeper than tol and every attractor
/// (object point with positive mask weight) has a masked hand point within
/// tol.
bool contact_validity(const OrientedPointCloud& hand, const SurfaceModel& object,
                      const OrientedPointCloud& object_points, const ContactMask& mask,
                      double tol);

/// Field the bridge runs during one stage: a single scale at the stage's
/// radius over the masked object points, with the strength normalized per
/// BridgeConfig::normalize_field.
GravityFieldSpec stage_field(const Scene& scene, const BridgeConfig& cfg, const StageSpec& stage,
                             int stage_index);

/// Runs the staged bridge to the first satisfied stopping condition:
/// (i) mean gravity force norm below epsilon (active field only),
/// (ii) iteration count reaching t_max,
/// (iii) contact validity (only when the mask assigns attractors).
std::pair<OrientedPointCloud, BridgeTrace> run_bridge(const Scene& scene,
                                                      const BridgeConfig& cfg,
                                                      std::uint64_t seed);

}  // namespace graspfield
