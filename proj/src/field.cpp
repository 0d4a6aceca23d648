#include "graspfield/field.hpp"

#include <cmath>
#include <limits>

namespace graspfield {

GravityFieldSpec GravityFieldSpec::broadcast(std::vector<FieldScale> scales,
                                             std::vector<Vec3> attractors,
                                             std::vector<double> shared_weights) {
    GravityFieldSpec spec;
    spec.scales = std::move(scales);
    spec.attractors = std::move(attractors);
    spec.weights.assign(spec.scales.size(), shared_weights);
    spec.validate();
    return spec;
}

void GravityFieldSpec::validate() const {
    if (scales.empty()) {
        throw_error(ErrorCode::SchemaError, "gravity field needs at least one scale");
    }
    for (const FieldScale& s : scales) {
        if (!(s.sigma > 0.0)) {
            throw_error(ErrorCode::SchemaError, "field sigma must be > 0");
        }
        if (!(s.strength >= 0.0)) {
            throw_error(ErrorCode::SchemaError, "field strength must be >= 0");
        }
    }
    if (weights.size() != scales.size()) {
        throw_error(ErrorCode::CountMismatch, "one weight row per scale required");
    }
    for (const auto& row : weights) {
        if (row.size() != attractors.size()) {
            throw_error(ErrorCode::CountMismatch, "weight row length differs from attractors");
        }
        for (double w : row) {
            if (!(w >= 0.0 && w <= 1.0)) {
                throw_error(ErrorCode::SchemaError, "field weights must lie in [0, 1]");
            }
        }
    }
    for (const Vec3& p : attractors) {
        if (!finite(p)) {
            throw_error(ErrorCode::NonFiniteCoordinate, "attractor point is NaN/Inf");
        }
    }
}

bool GravityFieldSpec::active() const {
    if (attractors.empty()) return false;
    for (std::size_t l = 0; l < scales.size(); ++l) {
        if (scales[l].strength <= 0.0) continue;
        for (double w : weights[l]) {
            if (w > 0.0) return true;
        }
    }
    return false;
}

double GravityFieldSpec::total_weight(std::size_t scale) const {
    double sum = 0.0;
    for (double w : weights[scale]) sum += w;
    return sum;
}

double potential(const GravityFieldSpec& spec, const Vec3& x) {
    double phi = 0.0;
    for (std::size_t l = 0; l < spec.scales.size(); ++l) {
        const double inv_sigma2 = 1.0 / (spec.scales[l].sigma * spec.scales[l].sigma);
        const double k = spec.scales[l].strength;
        if (k == 0.0) continue;
        const auto& row = spec.weights[l];
        for (std::size_t p = 0; p < spec.attractors.size(); ++p) {
            if (row[p] == 0.0) continue;
            const double d2 = (x - spec.attractors[p]).squaredNorm();
            phi += row[p] * k * std::exp(-d2 * inv_sigma2);
        }
    }
    return phi;
}

Vec3 force(const GravityFieldSpec& spec, const Vec3& x) {
    Vec3 f = Vec3::Zero();
    for (std::size_t l = 0; l < spec.scales.size(); ++l) {
        const double inv_sigma2 = 1.0 / (spec.scales[l].sigma * spec.scales[l].sigma);
        const double k = spec.scales[l].strength;
        if (k == 0.0) continue;
        const auto& row = spec.weights[l];
        for (std::size_t p = 0; p < spec.attractors.size(); ++p) {
            if (row[p] == 0.0) continue;
            const Vec3 toward = spec.attractors[p] - x;
            const double d2 = toward.squaredNorm();
            f += (2.0 * row[p] * k * inv_sigma2) * std::exp(-d2 * inv_sigma2) * toward;
        }
    }
    return f;
}

std::vector<Vec3> batch_force(const GravityFieldSpec& spec, std::span<const Vec3> xs,
                              double cutoff) {
    std::vector<Vec3> out(xs.size(), Vec3::Zero());
    const bool truncate = std::isfinite(cutoff);

    parallel_for(xs.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Vec3& x = xs[i];
            Vec3 f = Vec3::Zero();
            for (std::size_t l = 0; l < spec.scales.size(); ++l) {
                const double sigma = spec.scales[l].sigma;
                const double inv_sigma2 = 1.0 / (sigma * sigma);
                const double k = spec.scales[l].strength;
                if (k == 0.0) continue;
                const double max_d2 =
                    truncate ? cutoff * cutoff * sigma * sigma : std::numeric_limits<double>::max();
                const auto& row = spec.weights[l];
                for (std::size_t p = 0; p < spec.attractors.size(); ++p) {
                    if (row[p] == 0.0) continue;
                    const Vec3 toward = spec.attractors[p] - x;
                    const double d2 = toward.squaredNorm();
                    if (d2 > max_d2) continue;
                    f += (2.0 * row[p] * k * inv_sigma2) * std::exp(-d2 * inv_sigma2) * toward;
                }
            }
            out[i] = f;
        }
    });
    return out;
}

}  // namespace graspfield
