#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace numkit {

// Worker count: NUMKIT_THREADS caps, default hardware concurrency.
inline unsigned thread_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("NUMKIT_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return std::min<unsigned>(hw, static_cast<unsigned>(v));
    }
    return hw;
}

// Static block partition; each index writes only its own outputs, so results
// do not depend on the number of workers.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    unsigned workers = thread_count();
    if (workers <= 1 || n < 2) {
        body(0, n);
        return;
    }
    workers = std::min<unsigned>(workers, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

// Fixed-order pairwise summation, independent of thread count.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    std::size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

struct SampleStats {
    double mean = 0.0;
    double stddev = 0.0;
    double se = 0.0;
};

inline SampleStats sample_stats(std::span<const double> v) {
    SampleStats s;
    if (v.empty()) return s;
    double n = static_cast<double>(v.size());
    s.mean = pairwise_sum(v) / n;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double d = v[i] - s.mean;
        sq[i] = d * d;
    }
    double var = v.size() > 1 ? pairwise_sum(sq) / (n - 1.0) : 0.0;
    s.stddev = std::sqrt(std::max(0.0, var));
    s.se = s.stddev / std::sqrt(n);
    return s;
}

// Empirical quantile with linear interpolation; q in [0,1].
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// FNV-1a, used to stamp reports with the model file they came from.
inline std::uint64_t fnv1a(std::span<const char> data) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace numkit
