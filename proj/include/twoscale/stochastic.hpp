#pragma once

#include <cstdint>
#include <random>

namespace twoscale {

enum class StreamRole : std::uint32_t {
    ValueDraws = 0,
    FluctuationDraws = 1,
    Auxiliary = 2,
};

// Identifies one random substream. Every (master_seed, run_index, role)
// triple maps to its own generator state, so ensembles can be evaluated in
// any order or on any number of threads and still see the same draws.
struct StreamKey {
    std::uint64_t master_seed = 0;
    std::uint64_t run_index = 0;
    StreamRole role = StreamRole::ValueDraws;
};

// SplitMix64 finalizer applied to each key component in turn.
std::uint64_t derive_seed(const StreamKey& key);

/// Single-owner random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard; seeds come from derive_seed(). Conversions to reals are done
/// here rather than through <random> distributions, which are
/// implementation-defined, so the same key produces the same doubles on
/// every platform.
class Stream {
public:
    explicit Stream(const StreamKey& key) : engine_(derive_seed(key)) {}

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Uniform on [0, 1) with 53 random bits.
double uniform01(Stream& stream);

/// Uniform on [-1, 1); exactly 2 * uniform01 - 1 for the same raw draw.
double uniform_sym(Stream& stream);

/// Standard normal via Box-Muller (consumes two raw draws per call).
double standard_normal(Stream& stream);

}  // namespace twoscale
