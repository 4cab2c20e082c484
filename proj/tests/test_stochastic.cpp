#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "twoscale/ensemble.hpp"
#include "twoscale/model.hpp"
#include "twoscale/stochastic.hpp"

using namespace twoscale;

namespace {

std::vector<double> draws(StreamKey key, std::size_t n, double (*fn)(Stream&)) {
    Stream s(key);
    std::vector<double> v(n);
    for (auto& x : v) x = fn(s);
    return v;
}

}  // namespace

TEST_CASE("uniform01 moments over a million draws") {
    const auto v = draws({11, 0, StreamRole::ValueDraws}, 1'000'000, uniform01);
    CHECK(std::abs(oracle::mean(v) - 0.5) < 0.002);
    CHECK(std::abs(oracle::population_variance(v) - 1.0 / 12.0) < 0.001);
    CHECK(*std::min_element(v.begin(), v.end()) >= 0.0);
    CHECK(*std::max_element(v.begin(), v.end()) < 1.0);
}

TEST_CASE("uniform_sym moments over a million draws") {
    const auto v = draws({12, 3, StreamRole::FluctuationDraws}, 1'000'000, uniform_sym);
    CHECK(std::abs(oracle::mean(v)) < 0.003);
    CHECK(std::abs(oracle::population_variance(v) - 1.0 / 3.0) < 0.002);
    CHECK(*std::min_element(v.begin(), v.end()) >= -1.0);
    CHECK(*std::max_element(v.begin(), v.end()) < 1.0);
}

TEST_CASE("the same key replays the same draws") {
    const StreamKey key{99, 7, StreamRole::ValueDraws};
    const auto first = draws(key, 1000, uniform01);
    const auto second = draws(key, 1000, uniform01);
    CHECK(first == second);
    const auto other = draws({99, 8, StreamRole::ValueDraws}, 1000, uniform01);
    CHECK(first != other);
}

TEST_CASE("uniform_sym is the affine image of uniform01 on the same raw stream") {
    Stream a({5, 1, StreamRole::Auxiliary});
    Stream b({5, 1, StreamRole::Auxiliary});
    for (int i = 0; i < 10000; ++i) {
        const double u = uniform01(a);
        CHECK(uniform_sym(b) == 2.0 * u - 1.0);
    }
}

TEST_CASE("uniform01 is (raw >> 11) * 2^-53") {
    Stream raw({3, 0, StreamRole::ValueDraws});
    Stream s({3, 0, StreamRole::ValueDraws});
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t u = raw.next_u64();
        CHECK(uniform01(s) == std::ldexp(static_cast<double>(u >> 11), -53));
    }
}

TEST_CASE("value and fluctuation substreams are uncorrelated") {
    for (std::uint64_t run : {0u, 1u, 17u}) {
        const auto v = draws({2024, run, StreamRole::ValueDraws}, 100'000, uniform01);
        const auto f = draws({2024, run, StreamRole::FluctuationDraws}, 100'000, uniform01);
        CHECK(std::abs(oracle::pearson(v, f)) < 0.01);
    }
}

TEST_CASE("uniform01 passes a chi-square equidistribution test") {
    const auto v = draws({77, 0, StreamRole::ValueDraws}, 200'000, uniform01);
    const int bins = 100;
    std::vector<double> counts(bins, 0.0);
    for (double x : v) counts[static_cast<int>(x * bins)] += 1.0;
    const double expected = static_cast<double>(v.size()) / bins;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 99.9% quantile of chi-square with 99 degrees of freedom is about 148.2.
    CHECK(chi2 < 148.2);
}

TEST_CASE("standard_normal has unit variance and zero kurtosis") {
    const auto v = draws({8, 0, StreamRole::Auxiliary}, 400'000, standard_normal);
    const double m = oracle::mean(v);
    const double var = oracle::population_variance(v);
    double m4 = 0;
    for (double x : v) m4 += std::pow(x - m, 4);
    m4 /= v.size();
    CHECK(std::abs(m) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.01);
    CHECK(std::abs(m4 / (var * var) - 3.0) < 0.05);
}

TEST_CASE("derive_seed separates every key component") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t m = 0; m < 4; ++m) {
        for (std::uint64_t r = 0; r < 64; ++r) {
            for (auto role : {StreamRole::ValueDraws, StreamRole::FluctuationDraws, StreamRole::Auxiliary}) {
                seen.insert(derive_seed({m, r, role}));
            }
        }
    }
    CHECK(seen.size() == 4u * 64u * 3u);
}

TEST_CASE("trails are the same multiset whether run serially or in parallel") {
    SimulationConfig cfg;
    cfg.strategies = {0.45, 0.45};
    cfg.trail_length = 500;
    const std::size_t n = 24;
    std::vector<std::vector<double>> serial(n);
    std::vector<std::vector<double>> parallel(n);
    parallel_for(n, 1, [&](std::size_t i) { serial[i] = simulate_trail(cfg, 42, i).s1; });
    parallel_for(n, 8, [&](std::size_t i) { parallel[i] = simulate_trail(cfg, 42, i).s1; });
    CHECK(serial == parallel);
}
