#include "tidecal/rng.hpp"

#include <cmath>

namespace tidecal {

double Rng::normal(double mean, double sd) {
    // u1 in (0,1]: flip the open side so log() stays finite
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + sd * z;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n <= 1) return 0;
    // rejection on the top multiple of n
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = gen_();
    } while (r >= limit);
    return r % n;
}

namespace {
// FNV-1a 64-bit, then a splitmix64 finalizer to decorrelate nearby masters.
std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) {
    return splitmix64(master ^ fnv1a(stage));
}

}  // namespace tidecal
