#include "graspfield/core.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace graspfield {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyGeometry: return "EmptyGeometry";
        case ErrorCode::NonFiniteCoordinate: return "NonFiniteCoordinate";
        case ErrorCode::InvalidFaceIndex: return "InvalidFaceIndex";
        case ErrorCode::NotWatertight: return "NotWatertight";
        case ErrorCode::CountMismatch: return "CountMismatch";
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::DegenerateDirection: return "DegenerateDirection";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingNormals: return "MissingNormals";
        case ErrorCode::NoJointLabels: return "NoJointLabels";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::NonFiniteUpdate: return "NonFiniteUpdate";
        case ErrorCode::InvalidDims: return "InvalidDims";
    }
    return "UnknownError";
}

bool finite(const Vec3& v) {
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

void OrientedPointCloud::validate() const {
    if (points.empty()) {
        throw_error(ErrorCode::EmptyGeometry, "point cloud has no points");
    }
    for (const Vec3& p : points) {
        if (!finite(p)) {
            throw_error(ErrorCode::NonFiniteCoordinate, "point cloud contains NaN/Inf");
        }
    }
    if (!normals.empty()) {
        if (normals.size() != points.size()) {
            throw_error(ErrorCode::CountMismatch, "normals length differs from points");
        }
        for (const Vec3& n : normals) {
            if (!finite(n)) {
                throw_error(ErrorCode::NonFiniteCoordinate, "normal contains NaN/Inf");
            }
            if (std::abs(n.norm() - 1.0) > 1e-6) {
                throw_error(ErrorCode::SchemaError,
                            "normal is not unit length (|n| = " + std::to_string(n.norm()) + ")");
            }
        }
    }
    if (!labels.empty() && labels.size() != points.size()) {
        throw_error(ErrorCode::CountMismatch, "labels length differs from points");
    }
}

OrientedPointCloud RigidTransform::apply(const OrientedPointCloud& cloud) const {
    OrientedPointCloud out = cloud;
    for (Vec3& p : out.points) p = apply(p);
    for (Vec3& n : out.normals) n = (rotation * n).normalized();
    return out;
}

RigidTransform procrustes_align(const OrientedPointCloud& source,
                                const OrientedPointCloud& target) {
    const std::size_t n = source.size();
    if (n != target.size()) {
        throw_error(ErrorCode::CountMismatch, "source and target point counts differ");
    }
    if (n < 3) {
        throw_error(ErrorCode::DegenerateConfiguration, "need at least 3 points");
    }

    Vec3 centroid_src = Vec3::Zero();
    Vec3 centroid_tgt = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        centroid_src += source.points[i];
        centroid_tgt += target.points[i];
    }
    centroid_src /= static_cast<double>(n);
    centroid_tgt /= static_cast<double>(n);

    Mat3 cov = Mat3::Zero();
    double src_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 a = source.points[i] - centroid_src;
        const Vec3 b = target.points[i] - centroid_tgt;
        cov += b * a.transpose();
        src_var += a.squaredNorm();
    }
    cov /= static_cast<double>(n);
    src_var /= static_cast<double>(n);

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    // Collinear or coincident input leaves the covariance rank-deficient and
    // the rotation underdetermined.
    Eigen::Vector3d sv = svd.singularValues();
    const double sv_scale = std::max(sv(0), 1e-300);
    int rank = 0;
    for (int i = 0; i < 3; ++i) {
        if (sv(i) > 1e-9 * sv_scale && sv(i) > 0.0) ++rank;
    }
    if (rank < 2) {
        throw_error(ErrorCode::DegenerateConfiguration,
                    "covariance rank < 2 (collinear or coincident points)");
    }

    Mat3 d = Mat3::Identity();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
        d(2, 2) = -1.0;
    }

    RigidTransform t;
    t.rotation = svd.matrixU() * d * svd.matrixV().transpose();
    if (src_var <= 0.0) {
        throw_error(ErrorCode::DegenerateConfiguration, "source points are coincident");
    }
    t.scale = (sv.asDiagonal().toDenseMatrix() * d).trace() / src_var;
    t.translation = centroid_tgt - t.scale * (t.rotation * centroid_src);
    return t;
}

std::size_t thread_count() {
    static const std::size_t cached = [] {
        if (const char* env = std::getenv("GRASPFIELD_THREADS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v >= 1) return std::min<std::size_t>(static_cast<std::size_t>(v), 256);
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return static_cast<std::size_t>(hw == 0 ? 1 : hw);
    }();
    return cached;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t workers = std::min(thread_count(), std::max<std::size_t>(count / 256, 1));
    if (workers <= 1 || count < 512) {
        fn(0, count);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(begin + chunk, count);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace graspfield
