#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "lrfield/covariance.hpp"
#include "lrfield/errors.hpp"
#include "lrfield/rng.hpp"
#include "lrfield/surface.hpp"

namespace lrf {

// Replicate k draws its normals from the stream keyed by
// (master_seed, radius_index, role, k); results are therefore a pure
// function of those indices, independent of batching or worker count.
struct SeedPolicy {
    std::uint64_t master_seed = 0;
    std::uint64_t radius_index = 0;
    std::uint64_t role = 0;
};

struct FieldRealization {
    std::vector<double> values;
    std::uint64_t seed = 0; // master seed; stream also keyed by replicate below
    std::uint64_t replicate = 0;
    const SurfaceCloud* cloud = nullptr;
};

inline Eigen::MatrixXd covariance_matrix(const CovarianceModel& model,
                                         const SurfaceCloud& cloud) {
    validate(model);
    const auto n = static_cast<Eigen::Index>(cloud.size());
    Eigen::MatrixXd mat(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mat(i, i) = 1.0;
        const auto& a = cloud.points[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < i; ++j) {
            const auto& b = cloud.points[static_cast<std::size_t>(j)];
            const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
            const double v = cov(model, std::sqrt(dx * dx + dy * dy + dz * dz));
            mat(i, j) = v;
            mat(j, i) = v;
        }
    }
    return mat;
}

struct CloudFactor {
    Eigen::MatrixXd chol; // lower triangular
    double jitter = 0.0;  // diagonal shift that made the factorization succeed
};

inline double jitter_ladder_step(int idx) {
    constexpr double ladder[4] = {0.0, 1e-12, 1e-10, 1e-8};
    return ladder[idx];
}

inline CloudFactor factor_covariance(const CovarianceModel& model, const SurfaceCloud& cloud) {
    const Eigen::MatrixXd base = covariance_matrix(model, cloud);
    for (int step = 0; step < 4; ++step) {
        const double delta = jitter_ladder_step(step);
        Eigen::MatrixXd shifted = base;
        shifted.diagonal().array() += delta;
        Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() == Eigen::Success) {
            return {Eigen::MatrixXd(llt.matrixL()), delta};
        }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(base);
    const double pivot = ldlt.vectorD().minCoeff();
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "factor_covariance: Cholesky failed for n = %lld after jitter ladder "
                  "{0, 1e-12, 1e-10, 1e-8}; smallest pivot = %.6e",
                  static_cast<long long>(base.rows()), pivot);
    throw numeric_error(buf);
}

// n x n_reps matrix of field values, one replicate per column.
inline Eigen::MatrixXd simulate_matrix(const CloudFactor& factor, const SeedPolicy& seeds,
                                       int n_reps) {
    if (n_reps < 1) throw config_error("simulate_matrix: n_reps must be >= 1");
    const Eigen::Index n = factor.chol.rows();
    Eigen::MatrixXd out(n, n_reps);
    Eigen::VectorXd z(n);
    for (int k = 0; k < n_reps; ++k) {
        NormalStream stream(derive_stream_key(
            seeds.master_seed,
            {seeds.radius_index, seeds.role, static_cast<std::uint64_t>(k)}));
        for (Eigen::Index i = 0; i < n; ++i) z[i] = stream.next();
        out.col(k).noalias() = factor.chol.triangularView<Eigen::Lower>() * z;
    }
    return out;
}

inline std::vector<FieldRealization> simulate(const CovarianceModel& model,
                                              const SurfaceCloud& cloud,
                                              const SeedPolicy& seeds, int n_reps) {
    const CloudFactor factor = factor_covariance(model, cloud);
    const Eigen::MatrixXd values = simulate_matrix(factor, seeds, n_reps);
    std::vector<FieldRealization> out;
    out.reserve(static_cast<std::size_t>(n_reps));
    for (int k = 0; k < n_reps; ++k) {
        FieldRealization rep;
        rep.values.assign(values.col(k).data(), values.col(k).data() + values.rows());
        rep.seed = seeds.master_seed;
        rep.replicate = static_cast<std::uint64_t>(k);
        rep.cloud = &cloud;
        out.push_back(std::move(rep));
    }
    return out;
}

// Binary block: magic "LRF1", u64 point count, u64 replicate count, then
// replicate-major float64 values. Little-endian throughout.
inline void write_fields_binary(std::ostream& out, const Eigen::MatrixXd& fields) {
    out.write("LRF1", 4);
    const std::uint64_t n = static_cast<std::uint64_t>(fields.rows());
    const std::uint64_t reps = static_cast<std::uint64_t>(fields.cols());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&reps), 8);
    std::vector<double> row(fields.rows());
    for (Eigen::Index k = 0; k < fields.cols(); ++k) {
        for (Eigen::Index i = 0; i < fields.rows(); ++i) row[static_cast<std::size_t>(i)] = fields(i, k);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
}

inline Eigen::MatrixXd read_fields_binary(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "LRF1", 4) != 0)
        throw domain_error("read_fields_binary: missing LRF1 magic");
    std::uint64_t n = 0, reps = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&reps), 8);
    if (!in) throw domain_error("read_fields_binary: truncated header");
    Eigen::MatrixXd fields(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(reps));
    std::vector<double> row(n);
    for (std::uint64_t k = 0; k < reps; ++k) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) throw domain_error("read_fields_binary: truncated payload");
        for (std::uint64_t i = 0; i < n; ++i)
            fields(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                row[static_cast<std::size_t>(i)];
    }
    return fields;
}

// CSV: one row per replicate, one column per point.
inline void write_fields_csv(std::ostream& out, const Eigen::MatrixXd& fields) {
    char buf[32];
    for (Eigen::Index k = 0; k < fields.cols(); ++k) {
        for (Eigen::Index i = 0; i < fields.rows(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", fields(i, k));
            out << (i ? "," : "") << buf;
        }
        out << "\n";
    }
}

} // namespace lrf
