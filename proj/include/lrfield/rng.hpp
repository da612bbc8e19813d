#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>

#include "lrfield/errors.hpp"

namespace lrf {

// Philox4x64-10 counter-based generator. A (key, counter) pair maps to a
// 4-word block; streams never overlap when keys differ.
using philox_key = std::array<std::uint64_t, 2>;
using philox_ctr = std::array<std::uint64_t, 4>;

namespace detail {

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
}

} // namespace detail

inline philox_ctr philox4x64_block(philox_key key, philox_ctr ctr) {
    constexpr std::uint64_t m0 = 0xD2E7470EE14C6C93ULL;
    constexpr std::uint64_t m1 = 0xCA5A826395121157ULL;
    constexpr std::uint64_t w0 = 0x9E3779B97F4A7C15ULL;
    constexpr std::uint64_t w1 = 0xBB67AE8584CAA73BULL;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += w0;
            key[1] += w1;
        }
        std::uint64_t hi0, lo0, hi1, lo1;
        detail::mulhilo64(m0, ctr[0], hi0, lo0);
        detail::mulhilo64(m1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Hashes (master seed, path of indices) into a Philox key. Distinct paths
// give distinct streams independent of worker scheduling.
inline philox_key derive_stream_key(std::uint64_t master,
                                    std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix64(master + 0x9E3779B97F4A7C15ULL);
    for (const std::uint64_t v : path) s = mix64(s ^ (v + 0x9E3779B97F4A7C15ULL));
    return {mix64(s + 1), mix64(s + 2)};
}

class PhiloxEngine {
  public:
    explicit PhiloxEngine(philox_key key, philox_ctr start = {0, 0, 0, 0})
        : key_(key), ctr_(start) {
        refill();
    }

    std::uint64_t next_u64() {
        if (idx_ == 4) {
            increment();
            refill();
        }
        return block_[idx_++];
    }

    // uniform in the open interval (0, 1) with 53-bit resolution
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
    }

  private:
    void refill() {
        block_ = philox4x64_block(key_, ctr_);
        idx_ = 0;
    }

    void increment() {
        for (int i = 0; i < 4; ++i) {
            if (++ctr_[i] != 0) break;
        }
    }

    philox_key key_;
    philox_ctr ctr_;
    philox_ctr block_{};
    int idx_ = 0;
};

// Wichura's PPND16 rational approximations for the standard normal quantile,
// accurate to about 1e-16 relative over (0, 1).
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw domain_error("inverse_normal_cdf: p must be in (0, 1)");
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) *
                        r +
                    4.5921953931549871457e4) *
                       r +
                   1.3731693765509461125e4) *
                      r +
                  1.9715909503065514427e3) *
                     r +
                 1.3314166789178437745e2) *
                    r +
                3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) *
                        r +
                    2.1213794301586595867e4) *
                       r +
                   5.3941960214247511077e3) *
                      r +
                  6.8718700749205790830e2) *
                     r +
                 4.2313330701600911252e1) *
                    r +
                1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) *
                       r +
                   1.27045825245236838258e0) *
                      r +
                  3.64784832476320460504e0) *
                     r +
                 5.76949722146069140550e0) *
                    r +
                4.63033784615654529590e0) *
                   r +
               1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) *
                       r +
                   1.48103976427480074590e-1) *
                      r +
                  6.89767334985100004550e-1) *
                     r +
                 1.67638483018380384940e0) *
                    r +
                2.05319162663775882187e0) *
                   r +
               1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) *
                       r +
                   2.65321895265761230930e-2) *
                      r +
                  2.96560571828504891230e-1) *
                     r +
                 1.78482653991729133580e0) *
                    r +
                5.46378491116411436990e0) *
                   r +
               6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) *
                       r +
                   7.86869131145613259100e-4) *
                      r +
                  1.48753612908506148525e-2) *
                     r +
                 1.36929880922735805310e-1) *
                    r +
                5.99832206555887937690e-1) *
                   r +
               1.0);
    }
    return q < 0.0 ? -val : val;
}

// Stream of independent standard normals via the inverse-CDF transform.
class NormalStream {
  public:
    explicit NormalStream(philox_key key) : eng_(key) {}

    double next() { return inverse_normal_cdf(eng_.next_uniform()); }

  private:
    PhiloxEngine eng_;
};

} // namespace lrf
