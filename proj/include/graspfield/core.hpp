#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace graspfield {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class ErrorCode {
    EmptyGeometry,
    NonFiniteCoordinate,
    InvalidFaceIndex,
    NotWatertight,
    CountMismatch,
    DegenerateConfiguration,
    DegenerateDirection,
    ParseError,
    MissingNormals,
    NoJointLabels,
    MissingFile,
    SchemaError,
    NonFiniteUpdate,
    InvalidDims,
};

const char* error_code_name(ErrorCode code);

/// Library error carrying one of the fixed error codes. The CLI maps
/// NonFiniteUpdate to exit 3 and everything else to exit 2.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

/// Point cloud with optional unit normals and optional per-point integer
/// labels (joint/region ids). Empty `normals`/`labels` means absent.
/// All coordinates are meters.
struct OrientedPointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<int> labels;

    std::size_t size() const { return points.size(); }
    bool has_normals() const { return !normals.empty(); }
    bool has_labels() const { return !labels.empty(); }

    // Throws on violated invariants: empty points, non-finite coordinates,
    // length mismatches, non-unit normals (tolerance 1e-6).
    void validate() const;
};

/// Similarity transform y = scale * rotation * x + translation.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double scale = 1.0;

    Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }

    OrientedPointCloud apply(const OrientedPointCloud& cloud) const;
};

/// Closed-form similarity alignment minimizing sum ||s*R*x_i + t - y_i||^2.
/// Requires equal counts and at least 3 non-collinear points.
RigidTransform procrustes_align(const OrientedPointCloud& source,
                                const OrientedPointCloud& target);

bool finite(const Vec3& v);

/// Runs fn(begin, end) over chunks of [0, count) on the worker pool.
/// Chunks write to disjoint output slots, so results do not depend on the
/// thread count. Thread count comes from GRASPFIELD_THREADS (default: all
/// hardware threads).
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn);

std::size_t thread_count();

}  // namespace graspfield
