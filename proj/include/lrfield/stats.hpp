#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lrfield/errors.hpp"

namespace lrf {

// sup_z |F1(z) - F2(z)| by a merged sweep over the pooled order statistics;
// exact for ties because both ECDFs are advanced through a tie run before
// the gap is measured.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw domain_error("ks_statistic: samples must be nonempty");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double sup = 0.0;
    while (i < a.size() || j < b.size()) {
        const double z = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
        while (i < a.size() && a[i] == z) ++i;
        while (j < b.size() && b[j] == z) ++j;
        sup = std::max(sup, std::fabs(i / na - j / nb));
    }
    return sup;
}

struct BoxSummary {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

// Quantile by linear interpolation of order statistics: at probability p the
// value is sorted[h] interpolated toward sorted[h+1] with h = (n-1)p.
inline double quantile_interp(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    const double h = (static_cast<double>(n) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline BoxSummary boxplot_summary(std::vector<double> values) {
    if (values.empty()) throw domain_error("boxplot_summary: values must be nonempty");
    std::sort(values.begin(), values.end());
    return {values.front(), quantile_interp(values, 0.25), quantile_interp(values, 0.5),
            quantile_interp(values, 0.75), values.back()};
}

struct RateFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    int n_points = 0;
    int excluded_zeros = 0;
};

// OLS of log(distance) on r, pooled over repeats. Zero distances are
// excluded (log undefined) and counted. Pairs are sorted first so the result
// is bit-identical under any permutation of the inputs.
inline RateFit fit_log_rate(const std::vector<double>& r, const std::vector<double>& dist) {
    if (r.size() != dist.size())
        throw domain_error("fit_log_rate: radii and distances differ in length");
    std::vector<std::pair<double, double>> pts;
    pts.reserve(r.size());
    RateFit fit;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (dist[i] < 0.0) throw domain_error("fit_log_rate: negative distance");
        if (dist[i] == 0.0) {
            ++fit.excluded_zeros;
            continue;
        }
        pts.emplace_back(r[i], std::log(dist[i]));
    }
    if (pts.size() < 3)
        throw domain_error("fit_log_rate: need at least 3 nonzero distances, have " +
                           std::to_string(pts.size()));
    std::sort(pts.begin(), pts.end());
    const double n = static_cast<double>(pts.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& p : pts) {
        sx += p.first;
        sy += p.second;
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        sxx += (p.first - mx) * (p.first - mx);
        sxy += (p.first - mx) * (p.second - my);
    }
    if (sxx == 0.0) throw domain_error("fit_log_rate: all radii identical");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (const auto& p : pts) {
        const double e = p.second - fit.intercept - fit.slope * p.first;
        rss += e * e;
    }
    fit.slope_se = pts.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
    fit.n_points = static_cast<int>(pts.size());
    return fit;
}

namespace detail {

inline std::vector<double> ranks_with_ties(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
        i = j + 1;
    }
    return rank;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw domain_error("correlation undefined for a constant sequence");
    return sxy / std::sqrt(sxx * syy);
}

} // namespace detail

inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw domain_error("spearman_rho: need two sequences of equal length >= 2");
    return detail::pearson(detail::ranks_with_ties(x), detail::ranks_with_ties(y));
}

// One-sided P(rho_perm <= rho_obs) under the permutation null. Exact by full
// enumeration for n <= 8 (40320 permutations at most), Gaussian
// approximation with sd 1/sqrt(n-1) beyond that.
inline double spearman_pvalue_negative(const std::vector<double>& x, const std::vector<double>& y) {
    const double rho_obs = spearman_rho(x, y);
    const std::size_t n = x.size();
    if (n <= 8) {
        const auto rx = detail::ranks_with_ties(x);
        auto ry = detail::ranks_with_ties(y);
        std::sort(ry.begin(), ry.end());
        long total = 0, at_or_below = 0;
        do {
            ++total;
            if (detail::pearson(rx, ry) <= rho_obs + 1e-12) ++at_or_below;
        } while (std::next_permutation(ry.begin(), ry.end()));
        return static_cast<double>(at_or_below) / static_cast<double>(total);
    }
    const double z = rho_obs * std::sqrt(static_cast<double>(n) - 1.0);
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// One-sided sign test: P(Bin(n, 1/2) >= k).
inline double binomial_tail_geq(int n, int k) {
    if (n < 1 || k < 0 || k > n) throw domain_error("binomial_tail_geq: need 0 <= k <= n");
    double choose = 1.0; // C(n, k)
    for (int j = 1; j <= k; ++j) choose *= static_cast<double>(n - k + j) / j;
    double sum = 0.0;
    for (int j = k; j <= n; ++j) {
        sum += choose;
        choose *= static_cast<double>(n - j) / (j + 1);
    }
    return sum * std::pow(0.5, n);
}

} // namespace lrf
