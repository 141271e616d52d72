#pragma once

#include <cmath>
#include <cstdint>

// Deterministic random streams.  splitmix64 keeps record files
// byte-identical across reruns of the same seed regardless of the
// standard library in use.

namespace ca50::rng {

class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in (0, 1)
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    double next_gaussian(double sigma) {
        const double u1 = next_unit();
        const double u2 = next_unit();
        return sigma * std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * M_PI * u2);
    }

    // Derive an independent stream for a subsystem.
    SplitMix64 fork(std::uint64_t salt) {
        return SplitMix64(next_u64() ^ (salt * 0x9e3779b97f4a7c15ULL));
    }

  private:
    std::uint64_t state_;
};

// Zero-mean Gaussian truncated by rejection at +/- bound.
class TruncatedGaussian {
  public:
    TruncatedGaussian(double sigma, double bound)
        : sigma_(sigma), bound_(bound) {}

    double draw(SplitMix64& rng) const {
        if (sigma_ <= 0.0) return 0.0;
        for (;;) {
            const double x = rng.next_gaussian(sigma_);
            if (std::abs(x) <= bound_) return x;
        }
    }

    // Standard deviation of the truncated distribution.
    double stddev() const {
        if (sigma_ <= 0.0) return 0.0;
        const double a = bound_ / sigma_;
        const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
        const double mass = std::erf(a / std::sqrt(2.0));
        return sigma_ * std::sqrt(1.0 - 2.0 * a * phi / mass);
    }

    double sigma() const { return sigma_; }
    double bound() const { return bound_; }

  private:
    double sigma_;
    double bound_;
};

}  // namespace ca50::rng
