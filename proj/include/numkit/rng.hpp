#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace numkit {

namespace detail {

// SplitMix64 finalizer; full-avalanche 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Acklam's rational approximation of the standard normal quantile, refined
// with one Halley step; accurate to ~1e-15 over (0,1).
inline double normal_quantile(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

}  // namespace detail

// Counter-based stream keyed by (seed, path, step). Draws depend only on the
// key and counter, so simulation output is independent of thread layout.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t step)
        : key_(detail::mix64(detail::mix64(detail::mix64(seed) + path) + step)) {}

    std::uint64_t next_u64() { return detail::mix64(key_ + (ctr_++) * 0x9E3779B97F4A7C15ull); }

    // Uniform in (0,1), never exactly 0 or 1.
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double next_normal() { return detail::normal_quantile(next_unit()); }

    // Inversion sampling; means here are small (intensity times delta_a).
    std::uint64_t next_poisson(double mean) {
        if (mean < 0.0) throw std::invalid_argument("negative Poisson mean");
        if (mean == 0.0) return 0;
        if (mean > 50.0) {
            // Normal approximation tail guard; not hit by sane clock grids.
            double v = mean + std::sqrt(mean) * next_normal();
            return v <= 0.0 ? 0 : static_cast<std::uint64_t>(v + 0.5);
        }
        double u = next_unit();
        double p = std::exp(-mean);
        double cum = p;
        std::uint64_t n = 0;
        while (u > cum && n < 1000) {
            ++n;
            p *= mean / static_cast<double>(n);
            cum += p;
        }
        return n;
    }

    // Bernoulli trial / categorical pick from a uniform draw.
    double pick() { return next_unit(); }

  private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

}  // namespace numkit
