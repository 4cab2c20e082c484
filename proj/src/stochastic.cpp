#include "twoscale/stochastic.hpp"

#include <cmath>
#include <numbers>

namespace twoscale {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace

std::uint64_t derive_seed(const StreamKey& key) {
    std::uint64_t h = splitmix64(key.master_seed);
    h = splitmix64(h ^ key.run_index);
    h = splitmix64(h ^ static_cast<std::uint64_t>(key.role));
    return h;
}

double uniform01(Stream& stream) { return to_unit(stream.next_u64()); }

double uniform_sym(Stream& stream) { return 2.0 * uniform01(stream) - 1.0; }

double standard_normal(Stream& stream) {
    // 1 - u lies in (0, 1], so the log is finite.
    const double u1 = 1.0 - uniform01(stream);
    const double u2 = uniform01(stream);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace twoscale
