#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "lrfield/ks_study.hpp"
#include "lrfield/rng.hpp"
#include "lrfield/stats.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

lrf::StudyConfig small_study() {
    lrf::StudyConfig cfg;
    cfg.radii = {20.0, 30.0};
    cfg.reference_radius = 60.0;
    cfg.replicates = 50;
    cfg.repeats = 3;
    cfg.points_density = 0.005;
    cfg.master_seed = 71;
    return cfg;
}

} // namespace

TEST_CASE("two-sample Kolmogorov distance by merged sweep", "[study]") {
    CHECK(lrf::ks_statistic({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(lrf::ks_statistic({1.0, 2.0}, {3.0, 4.0}) == 1.0);
    CHECK(lrf::ks_statistic({1.0, 3.0}, {2.0, 4.0}) == 0.5);

    // ties advance both counts before the gap is read
    CHECK_THAT(lrf::ks_statistic({1.0, 1.0, 2.0}, {1.0, 2.0, 2.0}), WithinAbs(1.0 / 3.0, 1e-15));
    CHECK(lrf::ks_statistic({5.0}, {5.0}) == 0.0);

    // order of the inputs is irrelevant
    const std::vector<double> a{0.3, -1.2, 4.0, 0.7, 0.7};
    const std::vector<double> b{0.1, 2.2, -0.4};
    std::vector<double> ar(a.rbegin(), a.rend()), br(b.rbegin(), b.rend());
    CHECK(lrf::ks_statistic(a, b) == lrf::ks_statistic(ar, br));
    CHECK(lrf::ks_statistic(a, b) == lrf::ks_statistic(b, a));

    // different sample sizes: {1,2,3} vs {4}: sup at z=3 is |1 - 0| = 1
    CHECK(lrf::ks_statistic({1.0, 2.0, 3.0}, {4.0}) == 1.0);

    lrf::NormalStream stream(lrf::derive_stream_key(5, {0}));
    std::vector<double> u(40), v(60);
    for (auto& x : u) x = stream.next();
    for (auto& x : v) x = stream.next();
    const double d = lrf::ks_statistic(u, v);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);

    CHECK_THROWS_AS(lrf::ks_statistic({}, {1.0}), lrf::domain_error);
    CHECK_THROWS_AS(lrf::ks_statistic({1.0}, {}), lrf::domain_error);
}

TEST_CASE("five-number summary with interpolated quartiles", "[study]") {
    const auto b = lrf::boxplot_summary({5.0, 1.0, 4.0, 2.0, 3.0});
    CHECK(b.min == 1.0);
    CHECK(b.q1 == 2.0);
    CHECK(b.median == 3.0);
    CHECK(b.q3 == 4.0);
    CHECK(b.max == 5.0);

    const auto e = lrf::boxplot_summary({2.5, 2.5, 2.5});
    CHECK(e.min == 2.5);
    CHECK(e.q1 == 2.5);
    CHECK(e.median == 2.5);
    CHECK(e.q3 == 2.5);
    CHECK(e.max == 2.5);

    const auto q = lrf::boxplot_summary({1.0, 2.0, 3.0, 4.0});
    CHECK_THAT(q.q1, WithinAbs(1.75, 1e-15));
    CHECK_THAT(q.median, WithinAbs(2.5, 1e-15));
    CHECK_THAT(q.q3, WithinAbs(3.25, 1e-15));

    const auto s = lrf::boxplot_summary({7.0});
    CHECK(s.min == 7.0);
    CHECK(s.q3 == 7.0);

    CHECK_THROWS_AS(lrf::boxplot_summary({}), lrf::domain_error);
}

TEST_CASE("log-distance rate regression", "[study]") {
    const std::vector<double> grid{20.0, 40.0, 60.0, 80.0, 100.0, 120.0};

    // noiseless synthetic decay is recovered to machine precision
    std::vector<double> xs, ys;
    for (int m = 0; m < 20; ++m) {
        for (double r : grid) {
            xs.push_back(r);
            ys.push_back(std::exp(-1.512 - 0.000576 * r));
        }
    }
    const auto fit = lrf::fit_log_rate(xs, ys);
    CHECK_THAT(fit.intercept, WithinAbs(-1.512, 1e-10));
    CHECK_THAT(fit.slope, WithinAbs(-0.000576, 1e-10));
    CHECK(fit.slope_se <= 1e-12);
    CHECK(fit.n_points == 120);
    CHECK(fit.excluded_zeros == 0);

    // permutation of the pooled points cannot change the result
    std::vector<double> xr(xs.rbegin(), xs.rend()), yr(ys.rbegin(), ys.rend());
    const auto fit_rev = lrf::fit_log_rate(xr, yr);
    CHECK(fit_rev.intercept == fit.intercept);
    CHECK(fit_rev.slope == fit.slope);
    CHECK(fit_rev.slope_se == fit.slope_se);

    // constant distances give slope zero
    const auto flat = lrf::fit_log_rate({10.0, 20.0, 30.0, 40.0}, {0.25, 0.25, 0.25, 0.25});
    CHECK_THAT(flat.slope, WithinAbs(0.0, 1e-15));

    // noisy synthetic: recovered slope within 3 reported standard errors
    lrf::NormalStream noise(lrf::derive_stream_key(31, {7}));
    std::vector<double> xn, yn;
    for (int i = 0; i < 200; ++i) {
        const double r = 100.0 + 100.0 * (i % 10);
        xn.push_back(r);
        yn.push_back(std::exp(-0.0006 * r + 0.1 * noise.next()));
    }
    const auto nf = lrf::fit_log_rate(xn, yn);
    CHECK(std::fabs(nf.slope - (-0.0006)) <= 3.0 * nf.slope_se);

    // zeros are excluded and counted
    const auto fz = lrf::fit_log_rate({1.0, 2.0, 3.0, 4.0, 5.0}, {0.5, 0.0, 0.25, 0.0, 0.125});
    CHECK(fz.excluded_zeros == 2);
    CHECK(fz.n_points == 3);

    CHECK_THROWS_AS(lrf::fit_log_rate({1.0, 2.0, 3.0}, {0.0, 0.0, 0.5}), lrf::domain_error);
    CHECK_THROWS_AS(lrf::fit_log_rate({1.0, 2.0}, {0.5, 0.5}), lrf::domain_error);
    CHECK_THROWS_AS(lrf::fit_log_rate({1.0, 2.0}, {0.5}), lrf::domain_error);
    CHECK_THROWS_AS(lrf::fit_log_rate({2.0, 2.0, 2.0}, {0.5, 0.4, 0.3}), lrf::domain_error);
}

TEST_CASE("rank correlation and sign-test helpers", "[study]") {
    const std::vector<double> up{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    std::vector<double> down(up.rbegin(), up.rend());
    CHECK_THAT(lrf::spearman_rho(up, down), WithinAbs(-1.0, 1e-14));
    CHECK_THAT(lrf::spearman_rho(up, up), WithinAbs(1.0, 1e-14));

    // exact permutation tail for n = 6: only the full reversal reaches -1
    CHECK_THAT(lrf::spearman_pvalue_negative(up, down), WithinRel(1.0 / 720.0, 1e-12));
    // one transposition off the reversal: rho = -0.942857...; 6 of 720 at or below
    std::vector<double> near{6.0, 5.0, 4.0, 3.0, 1.0, 2.0};
    CHECK_THAT(lrf::spearman_pvalue_negative(up, near), WithinRel(6.0 / 720.0, 1e-12));

    // ties get averaged ranks
    CHECK_THAT(lrf::spearman_rho({1.0, 2.0, 3.0, 4.0}, {10.0, 10.0, 20.0, 30.0}),
               WithinRel(0.9486832980505138, 1e-12));

    CHECK_THROWS_AS(lrf::spearman_rho({1.0}, {2.0}), lrf::domain_error);
    CHECK_THROWS_AS(lrf::spearman_rho({1.0, 2.0}, {3.0, 3.0}), lrf::domain_error);

    CHECK_THAT(lrf::binomial_tail_geq(20, 15), WithinRel(21700.0 / 1048576.0, 1e-12));
    CHECK(lrf::binomial_tail_geq(20, 0) == 1.0);
    CHECK_THAT(lrf::binomial_tail_geq(20, 20), WithinRel(1.0 / 1048576.0, 1e-12));
    CHECK_THROWS_AS(lrf::binomial_tail_geq(10, 11), lrf::domain_error);
}

TEST_CASE("g id parsing", "[study]") {
    CHECK(lrf::g_from_id("hermite2").kind == lrf::g_kind::hermite_k);
    CHECK(lrf::g_from_id("hermite2").order == 2);
    CHECK(lrf::g_from_id("hermite6").order == 6);
    CHECK(lrf::g_from_id("square").kind == lrf::g_kind::square);
    CHECK(lrf::g_from_id("abs").kind == lrf::g_kind::abs_value);
    const auto ind = lrf::g_from_id("indicator:0.7");
    CHECK(ind.kind == lrf::g_kind::indicator);
    CHECK(ind.threshold == 0.7);

    CHECK_THROWS_AS(lrf::g_from_id("hermite9"), lrf::config_error); // catalog stops at 6
    CHECK_THROWS_AS(lrf::g_from_id("hermiteX"), lrf::config_error);
    CHECK_THROWS_AS(lrf::g_from_id("cube"), lrf::config_error);
    CHECK_THROWS_AS(lrf::g_from_id("indicator:"), lrf::config_error);
    CHECK_THROWS_AS(lrf::g_from_id(""), lrf::config_error);
}

TEST_CASE("study configuration validation", "[study]") {
    auto cfg = small_study();
    CHECK_NOTHROW(lrf::validate_study(cfg));

    auto bad = cfg;
    bad.reference_radius = 30.0; // not above the grid
    CHECK_THROWS_AS(lrf::validate_study(bad), lrf::config_error);
    bad = cfg;
    bad.replicates = 49;
    CHECK_THROWS_AS(lrf::validate_study(bad), lrf::config_error);
    bad = cfg;
    bad.radii = {30.0, 20.0};
    CHECK_THROWS_AS(lrf::validate_study(bad), lrf::config_error);
    bad = cfg;
    bad.radii = {20.0, 20.0};
    CHECK_THROWS_AS(lrf::validate_study(bad), lrf::config_error);
    bad = cfg;
    bad.radii.clear();
    CHECK_THROWS_AS(lrf::validate_study(bad), lrf::config_error);
    bad = cfg;
    bad.d = 2;
    CHECK_THROWS_AS(lrf::validate_study(bad), lrf::config_error);
    bad = cfg;
    bad.self_test = true; // needs one radius equal to the reference
    CHECK_THROWS_AS(lrf::validate_study(bad), lrf::config_error);

    // kappa must be the Hermite rank of g
    auto mism = cfg;
    mism.kappa = 1;
    CHECK_THROWS_AS(lrf::run_study(mism), lrf::config_error);

    // out of the admissible regime: kappa alpha >= d - 1
    auto steep = cfg;
    steep.alpha = 1.5;
    CHECK_THROWS_AS(lrf::run_study(steep), lrf::config_error);

    // feasibility check fires before any simulation
    auto huge = cfg;
    huge.mem_budget_bytes = 1024;
    CHECK_THROWS_AS(lrf::run_study(huge), lrf::resource_error);
}

TEST_CASE("self-test study yields zero distances", "[study]") {
    lrf::StudyConfig cfg;
    cfg.radii = {20.0};
    cfg.reference_radius = 20.0;
    cfg.self_test = true;
    cfg.replicates = 50;
    cfg.repeats = 3;
    cfg.master_seed = 12;

    const auto result = lrf::run_study(cfg);
    REQUIRE(result.distances.size() == 3);
    for (const auto& row : result.distances) {
        REQUIRE(row.size() == 1);
        CHECK(row[0] == 0.0);
    }
    CHECK_FALSE(result.fit_valid);
    CHECK(result.boxes[0].max == 0.0);
    CHECK(std::isnan(result.log_boxes[0].median));
    CHECK(result.point_counts.size() == 1); // reference cloud is the grid cloud
}

TEST_CASE("study determinism across reruns and worker counts", "[study]") {
    auto cfg = small_study();
    std::vector<std::pair<int, int>> progress;
    const auto r1 = lrf::run_study(
        cfg, [&](int done, int total) { progress.emplace_back(done, total); });

    REQUIRE(r1.distances.size() == 3);
    REQUIRE(r1.distances[0].size() == 2);
    for (const auto& row : r1.distances) {
        for (double d : row) {
            CHECK(d >= 0.0);
            CHECK(d <= 1.0);
            CHECK(d > 0.0); // distinct continuous samples cannot tie everywhere
        }
    }
    for (const auto& b : r1.boxes) {
        CHECK(b.min <= b.q1);
        CHECK(b.q1 <= b.median);
        CHECK(b.median <= b.q3);
        CHECK(b.q3 <= b.max);
    }
    CHECK(r1.fit_valid);
    CHECK(r1.point_counts == std::vector<int>{25, 57, 226});
    REQUIRE(r1.jitters.size() == 3);
    for (double j : r1.jitters) CHECK(j == 0.0);
    CHECK(r1.wall_seconds > 0.0);

    // one progress tick per (repeat, radius) task
    REQUIRE(progress.size() == 6);
    for (std::size_t i = 0; i < progress.size(); ++i) {
        CHECK(progress[i].first == static_cast<int>(i) + 1);
        CHECK(progress[i].second == 6);
    }

    const auto r2 = lrf::run_study(cfg);
    CHECK(r2.distances == r1.distances);

    auto threaded = cfg;
    threaded.workers = 3;
    const auto r3 = lrf::run_study(threaded);
    CHECK(r3.distances == r1.distances);
    CHECK(r3.point_counts == r1.point_counts);

    // a different master seed moves every cell
    auto reseeded = cfg;
    reseeded.master_seed = 72;
    const auto r4 = lrf::run_study(reseeded);
    for (std::size_t m = 0; m < r1.distances.size(); ++m) {
        for (std::size_t i = 0; i < r1.distances[m].size(); ++i) {
            CHECK(r4.distances[m][i] != r1.distances[m][i]);
        }
    }
}

TEST_CASE("field stream sharing across weights", "[study]") {
    auto cfg = small_study();
    cfg.weight = lrf::weight_kind::constant_one;
    CHECK(lrf::study_weight_component(cfg) == 1);
    cfg.weight = lrf::weight_kind::sphere_weight;
    CHECK(lrf::study_weight_component(cfg) == 2);

    // with sharing on, the stream prefix no longer depends on the weight
    cfg.share_fields = true;
    CHECK(lrf::study_weight_component(cfg) == 0);
    cfg.weight = lrf::weight_kind::constant_one;
    CHECK(lrf::study_weight_component(cfg) == 0);
}

TEST_CASE("study output files", "[study]") {
    lrf::StudyConfig cfg;
    cfg.surface = lrf::surface_kind::cube;
    cfg.weight = lrf::weight_kind::cube_weight;
    cfg.radii = {2.0};
    cfg.reference_radius = 4.0;
    cfg.replicates = 50;
    cfg.repeats = 2;
    cfg.master_seed = 77;

    lrf::StudyResult result;
    result.radii = {2.0};
    result.distances = {{0.5}, {0.25}};
    result.boxes = {lrf::BoxSummary{0.125, 0.25, 0.5, 0.75, 0.875}};
    result.log_boxes = {lrf::BoxSummary{-2.3, -1.6, -0.9, -0.5, -0.1}};
    result.point_counts = {24, 96};
    result.jitters = {0.0, 1e-12};
    result.fit = {-1.5, -0.125, 0.0625, 2, 0};
    result.fit_valid = true;
    result.wall_seconds = 1.5;

    std::ostringstream dist;
    lrf::write_distances_csv(dist, cfg, result);
    CHECK(dist.str() ==
          "surface,weight,r,repeat,ks_distance\n"
          "cube,cube_weight,2,0,0.5\n"
          "cube,cube_weight,2,1,0.25\n");

    std::ostringstream boxes;
    lrf::write_boxes_csv(boxes, result);
    char expected[160];
    std::snprintf(expected, sizeof expected,
                  "r,min,q1,median,q3,max,log_median\n2,0.125,0.25,0.5,0.75,0.875,%.17g\n",
                  std::log(0.5));
    CHECK(boxes.str() == expected);

    std::ostringstream rate;
    lrf::write_rate_fit_csv(rate, result);
    CHECK(rate.str() ==
          "intercept,slope,slope_se,n_points,excluded_zeros\n-1.5,-0.125,0.0625,2,0\n");

    std::ostringstream meta;
    lrf::write_study_meta(meta, cfg, result);
    const std::string m = meta.str();
    CHECK(m.find("master_seed = 77") != std::string::npos);
    CHECK(m.find("surface = cube") != std::string::npos);
    CHECK(m.find("weight = cube_weight") != std::string::npos);
    CHECK(m.find("point_count[2] = 24") != std::string::npos);
    CHECK(m.find("point_count[4] = 96") != std::string::npos);
    CHECK(m.find("jitter[4] = 9.9999999999999998e-13") != std::string::npos);
    CHECK(m.find("wall_seconds = 1.5") != std::string::npos);
    CHECK(m.find("g = hermite2") != std::string::npos);

    // invalid fit writes a nan row but keeps the exclusion count
    lrf::StudyResult degenerate = result;
    degenerate.fit_valid = false;
    degenerate.fit.excluded_zeros = 2;
    std::ostringstream rate2;
    lrf::write_rate_fit_csv(rate2, degenerate);
    CHECK(rate2.str() == "intercept,slope,slope_se,n_points,excluded_zeros\nnan,nan,nan,0,2\n");
}

TEST_CASE("box plot rendering", "[study]") {
    const std::vector<double> radii{20.0, 40.0};
    const std::vector<lrf::BoxSummary> boxes{{0.1, 0.2, 0.3, 0.4, 0.5},
                                             {0.05, 0.1, 0.15, 0.2, 0.25}};
    const std::string svg = lrf::render_box_svg(radii, boxes, "KS distance");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    std::size_t rects = 0, pos = 0;
    while ((pos = svg.find("<rect", pos)) != std::string::npos) {
        ++rects;
        pos += 5;
    }
    CHECK(rects == 3); // background plus one per radius
    CHECK(svg.find("KS distance") != std::string::npos);

    // NaN boxes are labeled but not drawn
    const double nan = std::nan("");
    const std::string sparse =
        lrf::render_box_svg({20.0}, {lrf::BoxSummary{nan, nan, nan, nan, nan}}, "log KS");
    std::size_t rects2 = 0;
    pos = 0;
    while ((pos = sparse.find("<rect", pos)) != std::string::npos) {
        ++rects2;
        pos += 5;
    }
    CHECK(rects2 == 1);

    CHECK_THROWS_AS(lrf::render_box_svg({1.0}, {}, "y"), lrf::domain_error);
}

// full desk-scale run; kept out of [study] so the quick tag stays quick
TEST_CASE("desk-scale sphere medians shrink across the grid", "[study_desk]") {
    lrf::StudyConfig cfg;
    cfg.radii = {20.0, 40.0, 60.0, 80.0, 100.0, 120.0};
    cfg.reference_radius = 200.0;
    cfg.replicates = 500;
    cfg.repeats = 20;
    cfg.points_density = 0.005;
    cfg.master_seed = 2026;
    cfg.workers = 2;

    const auto res = lrf::run_study(cfg);
    REQUIRE(res.distances.size() == 20);
    REQUIRE(res.boxes.size() == 6);

    CHECK(res.boxes.back().median < res.boxes.front().median);

    // one-sided sign test at the 5% level on per-repeat improvement
    int improved = 0;
    for (const auto& row : res.distances) {
        if (row.back() < row.front()) ++improved;
    }
    CHECK(lrf::binomial_tail_geq(20, improved) < 0.05);
}
