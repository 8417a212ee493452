#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace gwnet {

// Deterministic random source. All randomness in the library flows through
// this wrapper so that a fixed seed reproduces every draw bit-for-bit.
// std::mt19937_64 has a standardized output sequence; the distributions are
// hand rolled because the std ones are implementation defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection-free modulo is fine here: n is
    // tiny compared to 2^64 and reproducibility matters more than the
    // sub-ulp bias.
    std::size_t bounded(std::size_t n) {
        return static_cast<std::size_t>(engine_() % n);
    }

    // Fisher-Yates, deterministic across platforms (std::shuffle is not).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = bounded(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Derives an independent stream, e.g. one per cross-validation fold.
    Rng fork(std::uint64_t salt) {
        std::uint64_t s = engine_() ^ (salt * 0x9e3779b97f4a7c15ULL);
        return Rng(s);
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace gwnet
