#include "twoscale/model.hpp"

#include <cassert>
#include <cmath>
#include <sstream>

#include "twoscale/errors.hpp"
#include "twoscale/format.hpp"

namespace twoscale {

namespace {

constexpr double kWeightTolerance = 1e-12;
constexpr double kShareTolerance = 1e-12;

bool on_simplex(const Vec2& v) {
    return v[0] >= 0.0 && v[1] >= 0.0 && std::abs(v[0] + v[1] - 1.0) <= kWeightTolerance;
}

}  // namespace

void validate(const StrategyPair& s, ParameterRange range) {
    if (!std::isfinite(s.a) || !std::isfinite(s.b)) {
        throw DomainError("strategy parameters must be finite");
    }
    if (range == ParameterRange::Production) {
        if (!(s.a > 0.0 && s.a < 0.5)) {
            throw DomainError("a = " + format_double(s.a) +
                              " outside (0, 1/2): the two assets are symmetric, so a > 1/2 mirrors "
                              "a < 1/2, and a = 1/2 makes prices converge to a constant");
        }
        if (!(s.b > 0.0 && s.b <= 1.0)) {
            throw DomainError("b = " + format_double(s.b) +
                              " outside (0, 1]: x -> -x makes negative b redundant, and b = 0 "
                              "makes prices converge to a constant");
        }
    } else {
        if (!(s.a > 0.0 && s.a < 1.0)) {
            throw DomainError("a = " + format_double(s.a) + " outside (0, 1)");
        }
        if (!(s.b >= 0.0 && s.b <= 1.0)) {
            throw DomainError("b = " + format_double(s.b) + " outside [0, 1]");
        }
    }
}

Vec2 ValueProcess::draw(Stream& stream) const {
    const double delta = uniform01(stream);
    return {delta, 1.0 - delta};
}

Vec2 ValueProcess::mean() const { return {0.5, 0.5}; }

std::string SimulationConfig::canonical() const {
    std::ostringstream out;
    out << "a=" << format_double(strategies.a) << ";b=" << format_double(strategies.b)
        << ";rb0=" << format_double(rb0) << ";trail_length=" << trail_length
        << ";burn_in=" << burn_in << ";epsilon_floor=" << format_double(epsilon_floor)
        << ";value_process=uniform_simplex";
    return out.str();
}

std::uint64_t SimulationConfig::hash() const { return fnv1a64(canonical()); }

void validate(const SimulationConfig& cfg, ParameterRange range) {
    validate(cfg.strategies, range);
    if (!(cfg.rb0 > 0.0 && cfg.rb0 < 1.0)) {
        throw DomainError("rb0 = " + format_double(cfg.rb0) + " outside (0, 1)");
    }
    if (cfg.trail_length < 2) {
        throw DomainError("trail_length must be at least 2");
    }
    if (!(cfg.epsilon_floor > 0.0 && cfg.epsilon_floor < 0.5)) {
        throw DomainError("epsilon_floor must lie in (0, 1/2)");
    }
}

Vec2 market_price(std::span<const Holding> holdings) {
    if (holdings.empty()) {
        throw DomainError("market_price needs at least one holding");
    }
    double total = 0.0;
    Vec2 price{0.0, 0.0};
    for (std::size_t i = 0; i < holdings.size(); ++i) {
        const auto& h = holdings[i];
        if (!(h.weight > 0.0)) {
            throw DomainError("holding " + std::to_string(i) + ": weight must be positive");
        }
        if (!on_simplex(h.strategy)) {
            throw DomainError("holding " + std::to_string(i) + ": strategy is not on the simplex");
        }
        total += h.weight;
        price[0] += h.weight * h.strategy[0];
        price[1] += h.weight * h.strategy[1];
    }
    if (std::abs(total - 1.0) > kWeightTolerance) {
        throw DomainError("holding " + std::to_string(holdings.size() - 1) +
                          ": weights sum to " + format_double(total) + ", expected 1");
    }
    return price;
}

Vec2 price_from_wealth(const Vec2& slow, const Vec2& fast, double rb) {
    return {slow[0] + (fast[0] - slow[0]) * rb, slow[1] + (fast[1] - slow[1]) * rb};
}

Vec2 portfolio_units(double wealth, const Vec2& strategy, const Vec2& price) {
    if (!(price[0] > 0.0) || !(price[1] > 0.0)) {
        throw SingularityError("portfolio_units: non-positive price component");
    }
    return {wealth * strategy[0] / price[0], wealth * strategy[1] / price[1]};
}

double growth_rate(const Vec2& d_next, const Vec2& price, const Vec2& strategy,
                   double epsilon_floor) {
    if (price[0] < epsilon_floor || price[1] < epsilon_floor) {
        throw SingularityError("price component below floor " + format_double(epsilon_floor));
    }
    return d_next[0] / price[0] * strategy[0] + d_next[1] / price[1] * strategy[1];
}

double wealth_step(double rb, double beta) {
    const double next = rb * beta;
    if (!(next >= -kShareTolerance && next <= 1.0 + kShareTolerance)) {
        throw InvariantError("relative wealth " + format_double(next) + " left (0, 1)");
    }
    return next;
}

MarketDynamics::MarketDynamics(const StrategyPair& strategies, double rb0, double epsilon_floor)
    : strategies_(strategies), slow_(strategies.slow()), floor_(epsilon_floor), ra_(1.0 - rb0) {
    state_.rb = rb0;
}

const MarketState& MarketDynamics::quote(double x) {
    fast_ = strategies_.fast(x);
    state_.x = x;
    state_.price = price_from_wealth(slow_, fast_, state_.rb);
    const auto& p = state_.price;
    if (p[0] < floor_ || p[1] < floor_) {
        throw SingularityError("price component below floor " + format_double(floor_),
                               static_cast<std::int64_t>(state_.t));
    }
    audit_.max_simplex_error = std::max(audit_.max_simplex_error, std::abs(p[0] + p[1] - 1.0));
    audit_.min_s1 = std::min(audit_.min_s1, p[0]);
    audit_.max_s1 = std::max(audit_.max_s1, p[0]);
    quoted_ = true;
    return state_;
}

void MarketDynamics::settle(const Vec2& d_next) {
    assert(quoted_ && "settle() without a preceding quote()");
    const auto& price = state_.price;
    const double beta_b = growth_rate(d_next, price, fast_, floor_);
    const double beta_a = growth_rate(d_next, price, slow_, floor_);
    const double rb_prev = state_.rb;
    try {
        state_.rb = wealth_step(rb_prev, beta_b);
    } catch (const InvariantError& e) {
        throw InvariantError(std::string(e.what()) + " at step " + std::to_string(state_.t));
    }
    // The pricing rule makes ra * beta_a + rb * beta_b = sum_k d_k = 1.
    assert(std::abs((1.0 - rb_prev) * beta_a + state_.rb - 1.0) < 1e-12);
    ra_ *= beta_a;
    audit_.max_closure_error = std::max(audit_.max_closure_error, std::abs(ra_ + state_.rb - 1.0));
    ++state_.t;
    quoted_ = false;
}

Trail simulate_trail(const SimulationConfig& cfg, std::uint64_t seed, std::uint64_t run_index,
                     ClosureAudit* audit) {
    validate(cfg, ParameterRange::Extended);
    Stream fluctuations(StreamKey{seed, run_index, StreamRole::FluctuationDraws});
    Stream values(StreamKey{seed, run_index, StreamRole::ValueDraws});
    MarketDynamics market(cfg.strategies, cfg.rb0, cfg.epsilon_floor);

    Trail trail;
    trail.s1.reserve(cfg.trail_length);
    trail.s2.reserve(cfg.trail_length);
    trail.log_rb.reserve(cfg.trail_length);
    const std::size_t total = cfg.burn_in + cfg.trail_length;
    for (std::size_t t = 0; t < total; ++t) {
        const double x = uniform_sym(fluctuations);
        const MarketState& state = market.quote(x);
        if (t >= cfg.burn_in) {
            trail.s1.push_back(state.price[0]);
            trail.s2.push_back(state.price[1]);
            trail.log_rb.push_back(std::log(state.rb));
        }
        if (t + 1 < total) {
            market.settle(cfg.value_process.draw(values));
        }
    }

    trail.returns.resize(trail.s1.size() - 1);
    for (std::size_t t = 0; t + 1 < trail.s1.size(); ++t) {
        trail.returns[t] = std::log(trail.s1[t + 1] / trail.s1[t]);
    }
    trail.meta.source = TrailSource::Simulated;
    trail.meta.seed = seed;
    trail.meta.run_index = run_index;
    trail.meta.config_hash = hex64(cfg.hash());
    trail.meta.length = cfg.trail_length;
    trail.meta.burn_in = cfg.burn_in;
    if (audit != nullptr) {
        *audit = market.audit();
    }
    return trail;
}

namespace {

template <class InvaderFn>
EntropyEstimate entropy_rate(const Vec2& incumbent, InvaderFn invader, const ValueProcess& vp,
                             std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 1000) {
        throw DomainError("entropy_growth_rate needs at least 1000 samples");
    }
    if (!(incumbent[0] > 0.0 && incumbent[1] > 0.0)) {
        throw DomainError("incumbent strategy must be strictly positive");
    }
    Stream values(StreamKey{seed, 0, StreamRole::ValueDraws});
    Stream fluctuations(StreamKey{seed, 0, StreamRole::FluctuationDraws});
    // Welford accumulation of ln beta.
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const Vec2 lambda = invader(fluctuations);
        const Vec2 d = vp.draw(values);
        const double v = std::log(d[0] / incumbent[0] * lambda[0] + d[1] / incumbent[1] * lambda[1]);
        const double delta = v - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (v - mean);
    }
    const double n = static_cast<double>(n_samples);
    return {mean, std::sqrt(m2 / (n - 1.0) / n), n_samples};
}

}  // namespace

EntropyEstimate entropy_growth_rate(const Vec2& strategy_a, double b, const ValueProcess& vp,
                                    std::size_t n_samples, std::uint64_t seed) {
    if (!(b >= 0.0 && b <= 1.0)) {
        throw DomainError("b outside [0, 1]");
    }
    const StrategyPair fast{0.5, b};
    return entropy_rate(
        strategy_a, [&](Stream& s) { return fast.fast(uniform_sym(s)); }, vp, n_samples, seed);
}

EntropyEstimate entropy_growth_rate(const Vec2& incumbent, const Vec2& invader,
                                    const ValueProcess& vp, std::size_t n_samples,
                                    std::uint64_t seed) {
    return entropy_rate(
        incumbent, [&](Stream&) { return invader; }, vp, n_samples, seed);
}

}  // namespace twoscale
