#ifndef TIDECAL_RNG_HPP
#define TIDECAL_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tidecal {

/// Seeded random stream. mt19937_64 supplies the raw bits; the
/// distributions are implemented here rather than with <random>'s
/// distribution templates, whose output is implementation-defined.
/// Identical seeds therefore give identical streams on any platform,
/// which the workbench determinism contract depends on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0,1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    /// Box-Muller, cosine branch only. Two uniforms per draw, no cached
    /// state, so call sequences map 1:1 onto the underlying stream.
    double normal(double mean = 0.0, double sd = 1.0);

    /// Unbiased integer in [0, n), n >= 1. Rejection sampling.
    std::uint64_t below(std::uint64_t n);

    /// Fisher-Yates.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

/// Stable per-stage seed derivation: hash of (master seed, stage name).
/// Stages can be rerun independently without stream correlation.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

}  // namespace tidecal

#endif
