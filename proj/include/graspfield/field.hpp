#pragma once

#include "graspfield/core.hpp"

namespace graspfield {

struct FieldScale {
    double sigma = 0.0;     // receptive radius, meters
    double strength = 1.0;  // attraction strength k
};

/// Multi-scale Gaussian attraction field over a set of attractor points.
/// Each scale l contributes w_p * k_l * exp(-|x - p|^2 / sigma_l^2) per
/// attractor p. Immutable once built; evaluation is pure.
struct GravityFieldSpec {
    std::vector<FieldScale> scales;
    std::vector<Vec3> attractors;
    // weights[l][p] in [0, 1]; one row per scale.
    std::vector<std::vector<double>> weights;

    // Broadcasts a single per-point weight row to every scale.
    static GravityFieldSpec broadcast(std::vector<FieldScale> scales, std::vector<Vec3> attractors,
                                      std::vector<double> shared_weights);

    void validate() const;

    bool active() const;

    double total_weight(std::size_t scale) const;
};

/// phi(x): non-negative, bounded by sum_l k_l * sum_p w_p^(l).
double potential(const GravityFieldSpec& spec, const Vec3& x);

/// Attraction force, the gradient of the potential. Points toward the
/// attractors; zero at an isolated attractor.
Vec3 force(const GravityFieldSpec& spec, const Vec3& x);

/// Per-point force with far-field truncation: attractor terms beyond
/// cutoff * sigma_l are dropped. cutoff is dimensionless (units of sigma);
/// pass infinity for the exact sum. Evaluated in parallel over xs.
std::vector<Vec3> batch_force(const GravityFieldSpec& spec, std::span<const Vec3> xs,
                              double cutoff);

}  // namespace graspfield
