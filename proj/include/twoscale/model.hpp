#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "twoscale/stochastic.hpp"

namespace twoscale {

using Vec2 = std::array<double, 2>;

/// Parameters of the two market components.
///
/// The slow component holds the constant strategy (a, 1 - a). The fast one
/// holds (1/2 + b x / 2, 1/2 - b x / 2) for a fluctuation draw x in [-1, 1].
struct StrategyPair {
    double a = 0.4;
    double b = 0.45;

    Vec2 slow() const { return {a, 1.0 - a}; }
    Vec2 fast(double x) const { return {0.5 + 0.5 * b * x, 0.5 - 0.5 * b * x}; }
};

enum class ParameterRange {
    // 0 < a < 1/2 and 0 < b <= 1: the range used for stylized-fact runs.
    Production,
    // 0 < a < 1 and 0 <= b <= 1: admits the convergent settings a = 1/2, b = 0.
    Extended,
};

void validate(const StrategyPair& strategies, ParameterRange range);

enum class ValueDistribution { UniformSimplex };

// Stationary law of the value vector d_t = (delta, 1 - delta).
struct ValueProcess {
    ValueDistribution kind = ValueDistribution::UniformSimplex;

    Vec2 draw(Stream& stream) const;
    Vec2 mean() const;
};

struct SimulationConfig {
    StrategyPair strategies;
    double rb0 = 0.5;
    std::size_t trail_length = 5000;  // recorded prices; returns = length - 1
    std::size_t burn_in = 0;
    std::uint64_t seed = 0;
    double epsilon_floor = 1e-9;
    ValueProcess value_process;

    // Stable text form of every field except the seed.
    std::string canonical() const;
    std::uint64_t hash() const;
};

void validate(const SimulationConfig& cfg, ParameterRange range);

struct MarketState {
    std::size_t t = 0;
    double rb = 0.5;  // relative wealth of the fast component; r^a = 1 - rb
    double x = 0.0;
    Vec2 price{0.5, 0.5};
};

enum class TrailSource { Simulated, Ingested };

struct TrailMeta {
    TrailSource source = TrailSource::Simulated;
    std::uint64_t seed = 0;
    std::uint64_t run_index = 0;
    std::string config_hash;  // simulated trails
    std::string origin;       // file name for ingested trails
    std::size_t length = 0;
    std::size_t burn_in = 0;
};

/// A price series with its log returns. Simulated trails carry both price
/// components and ln r^b_t; ingested ones only S^1.
struct Trail {
    std::vector<double> s1;
    std::vector<double> s2;
    std::vector<double> log_rb;
    std::vector<double> returns;  // returns[t] = ln(s1[t+1] / s1[t])
    TrailMeta meta;
};

struct Holding {
    double weight = 0.0;
    Vec2 strategy{};
};

/// Market-clearing relative price: the wealth-weighted mean of strategies.
Vec2 market_price(std::span<const Holding> holdings);

/// Two-component special case: lambda^a + (lambda^b - lambda^a) * rb.
Vec2 price_from_wealth(const Vec2& slow, const Vec2& fast, double rb);

/// Units of each asset bought for `wealth` at `price`.
Vec2 portfolio_units(double wealth, const Vec2& strategy, const Vec2& price);

/// (d / S) . lambda: one-period growth factor of relative wealth.
double growth_rate(const Vec2& d_next, const Vec2& price, const Vec2& strategy,
                   double epsilon_floor = 1e-9);

/// rb * beta, rejected when the result leaves [0, 1] by more than 1e-12.
double wealth_step(double rb, double beta);

// Largest deviations seen while stepping a market.
struct ClosureAudit {
    double max_simplex_error = 0.0;  // |S^1 + S^2 - 1|
    double max_closure_error = 0.0;  // |r^a + r^b - 1|, each share advanced by its own beta
    double min_s1 = 1.0;
    double max_s1 = 0.0;
};

/// Stepwise two-component market.
///
/// One period is quote(x_t) followed by settle(d_{t+1}): the fluctuation draw
/// fixes lambda^b_t and the price S_t, then the value draw pays out and both
/// wealth shares grow by their own factors.
class MarketDynamics {
public:
    MarketDynamics(const StrategyPair& strategies, double rb0, double epsilon_floor = 1e-9);

    const MarketState& quote(double x);
    void settle(const Vec2& d_next);

    const MarketState& state() const { return state_; }
    const ClosureAudit& audit() const { return audit_; }
    double ra_independent() const { return ra_; }

private:
    StrategyPair strategies_;
    Vec2 slow_;
    Vec2 fast_{0.5, 0.5};
    double floor_;
    double ra_;
    MarketState state_;
    bool quoted_ = false;
    ClosureAudit audit_;
};

/// Runs burn_in + trail_length periods and records the last trail_length.
/// Draws come from StreamKey{seed, run_index, FluctuationDraws / ValueDraws}.
Trail simulate_trail(const SimulationConfig& cfg, std::uint64_t seed, std::uint64_t run_index = 0,
                     ClosureAudit* audit = nullptr);

struct EntropyEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
};

/// Monte Carlo estimate of E ln[(d / lambda^a) . lambda^b] with fresh d and x
/// draws: the exponential growth rate of a fast component that is small
/// against an incumbent holding strategy_a.
EntropyEstimate entropy_growth_rate(const Vec2& strategy_a, double b, const ValueProcess& vp,
                                    std::size_t n_samples, std::uint64_t seed);

/// Same rate for a constant invader strategy.
EntropyEstimate entropy_growth_rate(const Vec2& incumbent, const Vec2& invader,
                                    const ValueProcess& vp, std::size_t n_samples,
                                    std::uint64_t seed);

}  // namespace twoscale
