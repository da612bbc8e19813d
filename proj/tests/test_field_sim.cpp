#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "lrfield/field_sim.hpp"
#include "lrfield/rng.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("philox4x64-10 known-answer vectors and block sequencing", "[fieldsim]") {
    // vectors frozen from an independent Philox4x64-10 implementation
    const lrf::philox_key key1{0x0123456789abcdefULL, 0xfedcba9876543210ULL};
    const auto b0 = lrf::philox4x64_block(key1, {0, 0, 0, 0});
    CHECK(b0[0] == 0xad7a3aeef4f85615ULL);
    CHECK(b0[1] == 0x0f4c00ede0eae81eULL);
    CHECK(b0[2] == 0x35ef4ae97f8ebd0bULL);
    CHECK(b0[3] == 0x406b099ce1041e74ULL);
    const auto b1 = lrf::philox4x64_block(key1, {1, 0, 0, 0});
    CHECK(b1[0] == 0x2d2e7c09c193c5faULL);
    CHECK(b1[1] == 0xd56c6aa2d11f06aaULL);
    CHECK(b1[2] == 0x184fcdf7f5474a23ULL);
    CHECK(b1[3] == 0x367832d087008054ULL);
    // engine emits the block at the start counter, then increments word 0
    const std::uint64_t seq1[8] = {
        0xad7a3aeef4f85615ULL, 0x0f4c00ede0eae81eULL, 0x35ef4ae97f8ebd0bULL,
        0x406b099ce1041e74ULL, 0x2d2e7c09c193c5faULL, 0xd56c6aa2d11f06aaULL,
        0x184fcdf7f5474a23ULL, 0x367832d087008054ULL,
    };
    lrf::PhiloxEngine eng1(key1);
    for (const std::uint64_t expect : seq1) CHECK(eng1.next_u64() == expect);

    const lrf::philox_key key2{0xdeadbeefcafebabeULL, 0x0f0f0f0f0f0f0f0fULL};
    const lrf::philox_ctr ctr2{0x1111111111111111ULL, 0x2222222222222222ULL,
                               0x3333333333333333ULL, 0x4444444444444444ULL};
    const std::uint64_t seq2[8] = {
        0xe573aabacbbe2aa6ULL, 0xaf7959e8aaa5ede1ULL, 0xaedab787c7d93febULL,
        0x0fc88839c68176abULL, 0xc923572cfbe163c0ULL, 0x4637cb0af57a9536ULL,
        0x5b8afabe6abf0882ULL, 0xb4629158e6587185ULL,
    };
    lrf::PhiloxEngine eng2(key2, ctr2);
    for (const std::uint64_t expect : seq2) CHECK(eng2.next_u64() == expect);

    // counter overflow carries into word 1
    const std::uint64_t carry[4] = {
        0x94e126b9d939a2dbULL, 0x0f18574f7838bed5ULL, 0x8cc7d206d8e3270fULL,
        0xe8751fc4c7ad8ac6ULL,
    };
    lrf::PhiloxEngine eng3({0x1ULL, 0x2ULL}, {0xffffffffffffffffULL, 0x5ULL, 0x0ULL, 0x0ULL});
    for (int i = 0; i < 4; ++i) (void)eng3.next_u64();
    for (const std::uint64_t expect : carry) CHECK(eng3.next_u64() == expect);
}

TEST_CASE("stream key derivation is deterministic and collision-averse", "[fieldsim]") {
    const auto a = lrf::derive_stream_key(42, {1, 2, 3});
    const auto b = lrf::derive_stream_key(42, {1, 2, 3});
    CHECK(a == b);
    std::vector<lrf::philox_key> keys;
    for (std::uint64_t master : {0ULL, 42ULL}) {
        for (std::uint64_t i = 0; i < 8; ++i) {
            for (std::uint64_t j = 0; j < 8; ++j) {
                for (std::uint64_t k = 0; k < 8; ++k) {
                    keys.push_back(lrf::derive_stream_key(master, {i, j, k}));
                }
            }
        }
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
        for (std::size_t j = i + 1; j < keys.size(); ++j) {
            CHECK(keys[i] != keys[j]);
        }
    }
    // path structure matters: (1,2) and (2,1) must not collide
    CHECK(lrf::derive_stream_key(7, {1, 2}) != lrf::derive_stream_key(7, {2, 1}));
}

TEST_CASE("normal quantile matches high-precision references", "[fieldsim]") {
    // reference values from a 40-digit arbitrary-precision evaluation
    CHECK_THAT(lrf::inverse_normal_cdf(1e-15), WithinRel(-7.941345326170996780966744, 1e-14));
    CHECK_THAT(lrf::inverse_normal_cdf(1e-12), WithinRel(-7.034483825301131929809515, 1e-14));
    CHECK_THAT(lrf::inverse_normal_cdf(1e-9), WithinRel(-5.99780701500768687156231, 1e-14));
    CHECK_THAT(lrf::inverse_normal_cdf(0.001), WithinRel(-3.0902323061678135415404, 1e-14));
    CHECK_THAT(lrf::inverse_normal_cdf(0.1), WithinRel(-1.281551565544600466965103, 1e-14));
    CHECK_THAT(lrf::inverse_normal_cdf(0.3), WithinRel(-0.5244005127080407840382893, 1e-14));
    CHECK(lrf::inverse_normal_cdf(0.5) == 0.0);
    CHECK_THAT(lrf::inverse_normal_cdf(0.975), WithinRel(1.959963984540054235524594, 1e-14));
    CHECK_THAT(lrf::inverse_normal_cdf(0.9999999), WithinRel(5.199337582290661093657356, 1e-14));
    // reference evaluated at the represented double just below 1
    CHECK_THAT(lrf::inverse_normal_cdf(1.0 - 1e-13), WithinRel(7.348754540300042538673184, 1e-13));
    CHECK_THROWS_AS(lrf::inverse_normal_cdf(0.0), lrf::domain_error);
    CHECK_THROWS_AS(lrf::inverse_normal_cdf(1.0), lrf::domain_error);
    CHECK_THROWS_AS(lrf::inverse_normal_cdf(-0.25), lrf::domain_error);
}

TEST_CASE("normal quantile inverts the library normal CDF", "[fieldsim]") {
    // independent route: libm erfc gives Phi(z) = erfc(-z/sqrt 2)/2
    for (int i = 0; i <= 140; ++i) {
        const double u = std::pow(10.0, -15.0 + 14.7 * i / 140.0) * 0.5 / 0.5;
        const double z = lrf::inverse_normal_cdf(u);
        const double phi = 0.5 * std::erfc(-z / std::sqrt(2.0));
        CHECK_THAT(phi, WithinRel(u, 1e-12));
    }
    for (double u : {0.001, 0.05, 0.2, 0.35, 0.49}) {
        CHECK_THAT(lrf::inverse_normal_cdf(1.0 - u), WithinAbs(-lrf::inverse_normal_cdf(u), 1e-12));
    }
}

TEST_CASE("covariance matrix construction", "[fieldsim]") {
    const lrf::CovarianceModel m{lrf::covariance_family::cauchy, 2.0 / 3.0, 3};
    lrf::SurfaceCloud cloud;
    cloud.spec = {lrf::surface_kind::sphere, 1.0, 3};
    cloud.points = {{0.0, 0.0, 1.0}, {0.0, 0.0, -1.0}, {1.0, 0.0, 0.0}};
    cloud.area = 4.0 * 3.14159265358979323846;
    cloud.cell_weight = cloud.area / 3.0;
    const auto mat = lrf::covariance_matrix(m, cloud);
    for (int i = 0; i < 3; ++i) CHECK(mat(i, i) == 1.0);
    // antipodal pair at distance 2: (1+4)^{-1/3}
    CHECK_THAT(mat(0, 1), WithinRel(std::pow(5.0, -1.0 / 3.0), 1e-14));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(mat(i, j) == mat(j, i));
        }
    }
    const auto big = lrf::covariance_matrix(m, lrf::sphere_points(5.0, 64));
    for (int i = 0; i < 64; ++i) CHECK(big(i, i) == 1.0);
}

TEST_CASE("simulation is deterministic and replicate-pure", "[fieldsim]") {
    const lrf::CovarianceModel m{lrf::covariance_family::cauchy, 2.0 / 3.0, 3};
    const auto cloud = lrf::sphere_points(2.0, 40);
    const lrf::SeedPolicy seeds{20260815ULL, 3, 1};
    const auto run1 = lrf::simulate(m, cloud, seeds, 3);
    const auto run2 = lrf::simulate(m, cloud, seeds, 3);
    REQUIRE(run1.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        REQUIRE(run1[k].values.size() == cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            CHECK(run1[k].values[i] == run2[k].values[i]);
            CHECK(std::isfinite(run1[k].values[i]));
        }
    }
    // replicate k depends only on its index, not on the batch size
    const auto run5 = lrf::simulate(m, cloud, seeds, 5);
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            CHECK(run1[k].values[i] == run5[k].values[i]);
        }
    }
    // a different role gives a fresh stream
    const auto other = lrf::simulate(m, cloud, {20260815ULL, 3, 2}, 1);
    CHECK(other[0].values != run1[0].values);
    CHECK_THROWS_AS(lrf::simulate_matrix(lrf::factor_covariance(m, cloud), seeds, 0),
                    lrf::config_error);
}

TEST_CASE("single-point marginal variance", "[fieldsim]") {
    const lrf::CovarianceModel m{lrf::covariance_family::cauchy, 2.0 / 3.0, 3};
    lrf::SurfaceCloud cloud;
    cloud.spec = {lrf::surface_kind::sphere, 1.0, 3};
    cloud.points = {{0.0, 0.0, 1.0}};
    cloud.area = 4.0 * 3.14159265358979323846;
    cloud.cell_weight = cloud.area;
    const auto factor = lrf::factor_covariance(m, cloud);
    CHECK(factor.jitter == 0.0);
    const auto values = lrf::simulate_matrix(factor, {911ULL, 0, 0}, 100000);
    double sum = 0.0, sumsq = 0.0;
    for (int k = 0; k < values.cols(); ++k) {
        sum += values(0, k);
        sumsq += values(0, k) * values(0, k);
    }
    const double mean = sum / values.cols();
    const double var = sumsq / values.cols() - mean * mean;
    CHECK_THAT(var, WithinAbs(1.0, 0.02));
}

TEST_CASE("two-point empirical correlation matches the model", "[fieldsim]") {
    const lrf::CovarianceModel m{lrf::covariance_family::cauchy, 2.0 / 3.0, 3};
    lrf::SurfaceCloud cloud;
    cloud.spec = {lrf::surface_kind::sphere, 1.0, 3};
    cloud.points = {{0.0, 0.0, 0.0}, {std::sqrt(3.0), 0.0, 0.0}};
    cloud.area = 1.0;
    cloud.cell_weight = 0.5;
    const auto values =
        lrf::simulate_matrix(lrf::factor_covariance(m, cloud), {77ULL, 0, 0}, 100000);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int k = 0; k < values.cols(); ++k) {
        sxx += values(0, k) * values(0, k);
        syy += values(1, k) * values(1, k);
        sxy += values(0, k) * values(1, k);
    }
    const double corr = sxy / std::sqrt(sxx * syy);
    CHECK_THAT(corr, WithinAbs(std::pow(4.0, -1.0 / 3.0), 0.01));
}

TEST_CASE("pooled marginals over a cloud", "[fieldsim]") {
    const lrf::CovarianceModel m{lrf::covariance_family::cauchy, 2.0 / 3.0, 3};
    const auto cloud = lrf::sphere_points(200.0, 16);
    const int reps = 10000;
    const auto values =
        lrf::simulate_matrix(lrf::factor_covariance(m, cloud), {5150ULL, 1, 0}, reps);
    const double count = static_cast<double>(values.size());
    const double mean = values.sum() / count;
    const double var = values.array().square().sum() / count - mean * mean;
    CHECK(std::fabs(mean) < 4.0 / std::sqrt(count));
    CHECK(std::fabs(var - 1.0) < 3.0 * std::sqrt(2.0 / count));
}

TEST_CASE("pairwise empirical covariances track cov at 1e5 replicates", "[fieldsim]") {
    const lrf::CovarianceModel m{lrf::covariance_family::cauchy, 2.0 / 3.0, 3};
    const auto cloud = lrf::sphere_points(2.0, 5);
    const int reps = 100000;
    const auto values =
        lrf::simulate_matrix(lrf::factor_covariance(m, cloud), {31337ULL, 0, 0}, reps);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < i; ++j) {
            const auto& a = cloud.points[static_cast<std::size_t>(i)];
            const auto& b = cloud.points[static_cast<std::size_t>(j)];
            const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
            const double expect = lrf::cov(m, std::sqrt(dx * dx + dy * dy + dz * dz));
            const double est = (values.row(i).array() * values.row(j).array()).sum() / reps;
            const double se = std::sqrt((1.0 + expect * expect) / reps);
            CHECK_THAT(est, WithinAbs(expect, 3.0 * se));
        }
    }
}

TEST_CASE("field block round-trips through the binary format", "[fieldsim]") {
    const lrf::CovarianceModel m{lrf::covariance_family::cauchy, 1.5, 3};
    const auto cloud = lrf::sphere_points(1.0, 7);
    const auto values =
        lrf::simulate_matrix(lrf::factor_covariance(m, cloud), {8ULL, 0, 0}, 4);
    std::stringstream buf;
    lrf::write_fields_binary(buf, values);
    const std::string blob = buf.str();
    REQUIRE(blob.size() == 4 + 8 + 8 + 7 * 4 * 8);
    CHECK(blob.compare(0, 4, "LRF1") == 0);
    std::stringstream in(blob);
    const auto round = lrf::read_fields_binary(in);
    REQUIRE(round.rows() == 7);
    REQUIRE(round.cols() == 4);
    for (int i = 0; i < 7; ++i) {
        for (int k = 0; k < 4; ++k) {
            CHECK(round(i, k) == values(i, k));
        }
    }
    std::stringstream bad("XXXX                      ");
    CHECK_THROWS_AS(lrf::read_fields_binary(bad), lrf::domain_error);

    std::ostringstream csv;
    lrf::write_fields_csv(csv, values);
    std::istringstream lines(csv.str());
    std::string line;
    int rows = 0;
    while (std::getline(lines, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 6);
        ++rows;
    }
    CHECK(rows == 4);
}
