#pragma once

// Shared basics: error type, log levels, deterministic RNG.

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <complex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace wpmr {

using cxd = std::complex<double>;
using RVec = std::vector<double>;
using CVec = std::vector<cxd>;

// Thrown on contract violations: bad input domains, malformed files, misuse of
// an object's state. Numerical non-convergence is reported through result
// structs instead, never thrown.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel& log_level() {
    static LogLevel level = LogLevel::warn;
    return level;
}

inline void logf(LogLevel at, const char* fmt, ...) {
    if (static_cast<int>(at) > static_cast<int>(log_level())) return;
    std::va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fputc('\n', stderr);
}

// Deterministic RNG. mt19937_64 has a fully specified output sequence and the
// Gaussian transform is done by hand (polar Box-Muller) because the standard
// distributions are implementation-defined; this keeps CSV outputs
// byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {
        // 53-bit mantissa double in [0,1).
        return (gen_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    // Circularly-symmetric complex Gaussian with E|z|^2 = var.
    cxd cnormal(double var) {
        const double sd = std::sqrt(var / 2.0);
        const double re = sd * normal();
        const double im = sd * normal();
        return {re, im};
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Splits independent deterministic streams off a base seed, e.g. one per sweep
// point. SplitMix64 finalizer: distinct inputs give well-separated seeds.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace wpmr
