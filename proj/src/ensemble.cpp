#include "twoscale/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "twoscale/errors.hpp"
#include "twoscale/format.hpp"

namespace twoscale {

void RunningMoments::add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

void RunningMoments::merge(const RunningMoments& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * nb / n;
    m2_ += other.m2_ + delta * delta * na * nb / n;
    n_ += other.n_;
}

double RunningMoments::variance() const {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
}

double RunningMoments::stddev() const { return std::sqrt(variance()); }

double RunningMoments::std_error() const {
    return n_ > 0 ? stddev() / std::sqrt(static_cast<double>(n_)) : 0.0;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
}

std::string to_string(Analysis analysis) {
    switch (analysis) {
        case Analysis::Acf:
            return "acf";
        case Analysis::Scaling:
            return "scaling";
        case Analysis::Distribution:
            return "distribution";
        case Analysis::Convergence:
            return "convergence";
    }
    return "unknown";
}

Analysis parse_analysis(const std::string& name) {
    if (name == "acf") return Analysis::Acf;
    if (name == "scaling") return Analysis::Scaling;
    if (name == "distribution") return Analysis::Distribution;
    if (name == "convergence") return Analysis::Convergence;
    throw DomainError("unknown analysis '" + name + "'");
}

SeriesAnalysis analyze_returns(std::span<const double> returns, const AnalysisOptions& options,
                               const std::set<Analysis>& analyses) {
    SeriesAnalysis out;
    out.n_returns = returns.size();
    try {
        out.standardized = standardize(returns);
    } catch (const DegenerateSeriesError& e) {
        out.degenerate = true;
        out.degenerate_reason = e.what();
        return out;
    }
    const auto& z = out.standardized;
    try {
        if (analyses.contains(Analysis::Acf)) {
            const std::size_t max_tau = std::min(options.max_tau, z.size() / 10);
            out.acf = acf_powers(z, options.alphas, max_tau, options.fit_range);
        }
        if (analyses.contains(Analysis::Scaling)) {
            const auto lags = default_lag_grid(z.size());
            out.scaling = zeta_spectrum(z, options.qs, lags);
            if (out.scaling->qs.size() >= 5) {
                out.spectrum = legendre_transform(out.scaling->qs, out.scaling->zeta);
            }
        }
        if (analyses.contains(Analysis::Distribution)) {
            out.distribution = return_histogram(z, options.n_bins, options.half_width, options.classifier);
        }
    } catch (const DegenerateSeriesError& e) {
        out.degenerate = true;
        out.degenerate_reason = e.what();
    }
    return out;
}

std::string SweepSpec::canonical() const {
    std::ostringstream out;
    auto list = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << format_double(v[i]);
    };
    out << "a_grid=";
    list(a_grid);
    out << ";b_grid=";
    list(b_grid);
    out << ";runs_per_cell=" << runs_per_cell << ";trail_length=" << trail_length
        << ";burn_in=" << burn_in << ";rb0=" << format_double(rb0)
        << ";epsilon_floor=" << format_double(epsilon_floor) << ";master_seed=" << master_seed
        << ";analyses=";
    bool first = true;
    for (auto a : analyses) {
        out << (first ? "" : ",") << to_string(a);
        first = false;
    }
    out << ";alphas=";
    for (std::size_t i = 0; i < options.alphas.size(); ++i) out << (i ? "," : "") << options.alphas[i];
    out << ";max_tau=" << options.max_tau << ";fit_range=" << format_double(options.fit_range.lo)
        << "," << format_double(options.fit_range.hi) << ";n_bins=" << options.n_bins
        << ";half_width=" << format_double(options.half_width) << ";qs=";
    list(options.qs);
    out << ";entropy_samples=" << entropy_samples;
    return out.str();
}

std::uint64_t SweepSpec::hash() const { return fnv1a64(canonical()); }

void validate(const SweepSpec& spec) {
    if (spec.a_grid.empty() || spec.b_grid.empty()) {
        throw DomainError("sweep grids must not be empty");
    }
    for (double a : spec.a_grid) {
        if (!(a > 0.0 && a <= 0.5)) throw DomainError("a_grid value " + format_double(a) + " outside (0, 1/2]");
    }
    for (double b : spec.b_grid) {
        if (!(b >= 0.0 && b <= 1.0)) throw DomainError("b_grid value " + format_double(b) + " outside [0, 1]");
    }
    if (spec.runs_per_cell < 1) throw DomainError("runs_per_cell must be at least 1");
    SimulationConfig cfg;
    cfg.strategies = {spec.a_grid.front(), spec.b_grid.front()};
    cfg.rb0 = spec.rb0;
    cfg.trail_length = spec.trail_length;
    cfg.burn_in = spec.burn_in;
    cfg.epsilon_floor = spec.epsilon_floor;
    validate(cfg, ParameterRange::Extended);
}

std::string cell_label(double a, double b) { return format_double(a) + "_" + format_double(b); }

namespace {

std::uint64_t run_key(double a, double b, std::size_t run) {
    return fnv1a64(cell_label(a, b) + "#" + std::to_string(run));
}

CellSummary empty_cell(const SweepSpec& spec, double a, double b) {
    CellSummary cell;
    cell.a = a;
    cell.b = b;
    const auto& opt = spec.options;
    if (spec.analyses.contains(Analysis::Acf)) {
        const std::size_t max_tau = std::min(opt.max_tau, (spec.trail_length - 1) / 10);
        cell.alphas = opt.alphas;
        for (std::size_t t = 0; t <= max_tau; ++t) cell.taus.push_back(t);
        cell.acf.assign(opt.alphas.size(), std::vector<RunningMoments>(max_tau + 1));
        cell.gamma.assign(opt.alphas.size(), RunningMoments{});
        cell.gamma_rejected.assign(opt.alphas.size(), 0);
    }
    if (spec.analyses.contains(Analysis::Distribution)) {
        cell.histogram.emplace(opt.n_bins, opt.half_width);
    }
    if (spec.analyses.contains(Analysis::Scaling)) {
        cell.qs = opt.qs;
        cell.hq.assign(opt.qs.size(), RunningMoments{});
        cell.hq_r2.assign(opt.qs.size(), RunningMoments{});
    }
    return cell;
}

}  // namespace

void CellSummary::merge(const CellSummary& other) {
    runs += other.runs;
    failed += other.failed;
    degenerate += other.degenerate;
    for (const auto& m : other.failure_messages) {
        if (failure_messages.size() < 5) failure_messages.push_back(m);
    }
    for (std::size_t i = 0; i < acf.size() && i < other.acf.size(); ++i) {
        for (std::size_t t = 0; t < acf[i].size(); ++t) acf[i][t].merge(other.acf[i][t]);
        gamma[i].merge(other.gamma[i]);
        gamma_rejected[i] += other.gamma_rejected[i];
    }
    kurtosis.merge(other.kurtosis);
    if (histogram && other.histogram) histogram->merge(*other.histogram);
    for (std::size_t i = 0; i < hq.size() && i < other.hq.size(); ++i) {
        hq[i].merge(other.hq[i]);
        hq_r2[i].merge(other.hq_r2[i]);
    }
    spread.merge(other.spread);
    log_rb_slope.merge(other.log_rb_slope);
    if (!entropy) entropy = other.entropy;
}

std::vector<std::optional<double>> CellSummary::mean_curve(std::size_t alpha_index) const {
    std::vector<std::optional<double>> out;
    for (const auto& m : acf.at(alpha_index)) {
        out.push_back(m.count() > 0 ? std::optional<double>(m.mean()) : std::nullopt);
    }
    return out;
}

void CellSummary::finalize(const AnalysisOptions& options) {
    mean_curve_fit.clear();
    std::vector<double> tau_real(taus.begin(), taus.end());
    for (std::size_t i = 0; i < acf.size(); ++i) {
        mean_curve_fit.push_back(fit_power_law(tau_real, mean_curve(i), options.fit_range));
    }
    pooled_distribution.reset();
    if (histogram) {
        try {
            pooled_distribution = histogram->report(options.classifier);
        } catch (const DegenerateSeriesError&) {
        }
    }
}

CellSummary run_cell_member(const SweepSpec& spec, double a, double b, std::size_t run) {
    CellSummary cell = empty_cell(spec, a, b);
    cell.runs = 1;
    SimulationConfig cfg;
    cfg.strategies = {a, b};
    cfg.rb0 = spec.rb0;
    cfg.trail_length = spec.trail_length;
    cfg.burn_in = spec.burn_in;
    cfg.epsilon_floor = spec.epsilon_floor;

    Trail trail;
    try {
        trail = simulate_trail(cfg, spec.master_seed, run_key(a, b, run));
    } catch (const SingularityError& e) {
        cell.failed = 1;
        cell.failure_messages.push_back("run " + std::to_string(run) + ": " + e.what());
        return cell;
    } catch (const InvariantError& e) {
        cell.failed = 1;
        cell.failure_messages.push_back("run " + std::to_string(run) + ": " + e.what());
        return cell;
    }

    if (spec.analyses.contains(Analysis::Convergence)) {
        std::vector<double> t;
        std::vector<double> y;
        for (std::size_t i = std::min<std::size_t>(100, trail.log_rb.size() / 2); i < trail.log_rb.size(); ++i) {
            if (!std::isfinite(trail.log_rb[i])) break;
            t.push_back(static_cast<double>(i));
            y.push_back(trail.log_rb[i]);
        }
        if (t.size() >= 2) cell.log_rb_slope.add(linear_fit(t, y).slope);
    }

    const SeriesAnalysis analysis = analyze_returns(trail.returns, spec.options, spec.analyses);
    if (analysis.degenerate) {
        cell.degenerate = 1;
        return cell;
    }
    if (analysis.acf) {
        const auto& rep = *analysis.acf;
        for (std::size_t i = 0; i < rep.values.size(); ++i) {
            for (std::size_t t = 0; t < rep.values[i].size() && t < cell.acf[i].size(); ++t) {
                if (rep.values[i][t]) cell.acf[i][t].add(*rep.values[i][t]);
            }
            if (rep.fits[i].ok && rep.fits[i].reliable) {
                cell.gamma[i].add(rep.fits[i].gamma);
            } else {
                ++cell.gamma_rejected[i];
            }
        }
    }
    if (analysis.distribution) {
        if (analysis.distribution->excess_kurtosis) cell.kurtosis.add(*analysis.distribution->excess_kurtosis);
        cell.histogram->add(analysis.standardized);
    }
    if (analysis.scaling) {
        for (std::size_t i = 0; i < analysis.scaling->hq.size(); ++i) {
            cell.hq[i].add(analysis.scaling->hq[i]);
            cell.hq_r2[i].add(analysis.scaling->fit_r2[i]);
        }
        cell.spread.add(analysis.scaling->spread);
    }
    return cell;
}

CellSummary reduce_runs(std::span<const CellSummary> runs) {
    if (runs.empty()) throw DomainError("reduce_runs: nothing to reduce");
    if (runs.size() == 1) return runs.front();
    const std::size_t mid = runs.size() / 2;
    CellSummary left = reduce_runs(runs.subspan(0, mid));
    left.merge(reduce_runs(runs.subspan(mid)));
    return left;
}

std::vector<CellSummary> run_sweep(const SweepSpec& spec, unsigned threads) {
    validate(spec);
    struct CellKey {
        double a;
        double b;
    };
    std::vector<CellKey> cells;
    for (double a : spec.a_grid) {
        for (double b : spec.b_grid) cells.push_back({a, b});
    }
    const std::size_t runs = spec.runs_per_cell;
    std::vector<CellSummary> members(cells.size() * runs);
    parallel_for(members.size(), threads, [&](std::size_t i) {
        const auto& c = cells[i / runs];
        members[i] = run_cell_member(spec, c.a, c.b, i % runs);
    });

    std::vector<CellSummary> out;
    out.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        CellSummary cell = reduce_runs(std::span<const CellSummary>(members).subspan(c * runs, runs));
        if (spec.analyses.contains(Analysis::Convergence)) {
            cell.entropy = entropy_growth_rate(Vec2{cells[c].a, 1.0 - cells[c].a}, cells[c].b,
                                               ValueProcess{}, spec.entropy_samples, spec.master_seed);
        }
        cell.finalize(spec.options);
        out.push_back(std::move(cell));
    }
    return out;
}

KurtosisFit kurtosis_vs_b(std::span<const CellSummary> cells) {
    if (cells.size() < 4) {
        throw DomainError("kurtosis_vs_b needs at least 4 b-cells");
    }
    for (const auto& c : cells) {
        if (c.a != cells.front().a) throw DomainError("kurtosis_vs_b: cells must share one a");
    }
    KurtosisFit fit;
    std::vector<double> b;
    std::vector<double> lk;
    for (const auto& c : cells) {
        if (c.kurtosis.count() > 0 && c.kurtosis.mean() > 0.0) {
            b.push_back(c.b);
            lk.push_back(std::log(c.kurtosis.mean()));
        } else {
            ++fit.n_excluded;
        }
    }
    fit.n_used = b.size();
    if (fit.n_used < 2) {
        throw DegenerateSeriesError("kurtosis_vs_b: fewer than two cells with positive kurtosis");
    }
    const LinearFit line = linear_fit(b, lk);
    fit.slope = line.slope;
    fit.intercept = line.intercept;
    fit.r2 = line.r2;
    return fit;
}

std::string to_string(ConvergenceMode mode) {
    switch (mode) {
        case ConvergenceMode::WealthDecay:
            return "wealth_decay";
        case ConvergenceMode::PriceDecay:
            return "price_decay";
        case ConvergenceMode::FixedPoint:
            return "fixed_point";
    }
    return "unknown";
}

ConvergenceRecord convergence_study(double a, double b, double rb0, std::size_t length,
                                    std::size_t n_seeds, std::uint64_t master_seed,
                                    const ConvergenceOptions& options) {
    constexpr double kNearZeroB = 1e-6;
    ConvergenceRecord rec;
    rec.a = a;
    rec.b = b;
    rec.window_lo = options.window_lo;
    if (a == 0.5 && b == 0.0) {
        rec.mode = ConvergenceMode::FixedPoint;
    } else if (a == 0.5) {
        rec.mode = ConvergenceMode::WealthDecay;
    } else if (b <= kNearZeroB) {
        rec.mode = ConvergenceMode::PriceDecay;
    } else {
        throw DomainError("(a, b) = (" + format_double(a) + ", " + format_double(b) +
                          ") is not convergent: use a = 1/2 or b close to 0");
    }
    if (n_seeds < 1) throw DomainError("convergence_study needs at least one seed");
    if (length < options.window_lo + 10 && rec.mode != ConvergenceMode::FixedPoint) {
        throw DomainError("trail too short for the regression window");
    }

    SimulationConfig cfg;
    cfg.strategies = {a, b};
    cfg.rb0 = rb0;
    cfg.trail_length = length;
    validate(cfg, ParameterRange::Extended);

    if (rec.mode == ConvergenceMode::WealthDecay) {
        rec.entropy = entropy_growth_rate(Vec2{0.5, 0.5}, b, ValueProcess{}, options.entropy_samples, master_seed);
    } else if (rec.mode == ConvergenceMode::PriceDecay) {
        // The fast component sits at E[d]; the slow one is the invader.
        rec.entropy = entropy_growth_rate(Vec2{0.5, 0.5}, Vec2{a, 1.0 - a}, ValueProcess{},
                                          options.entropy_samples, master_seed);
    }

    const double floor = std::max(options.floor_factor * b, 1e-12);
    RunningMoments slopes;
    std::vector<std::vector<double>> traces;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const Trail trail = simulate_trail(cfg, master_seed, s);
        if (rec.mode == ConvergenceMode::FixedPoint) {
            for (std::size_t t = 0; t < trail.s1.size(); ++t) {
                rec.max_price_deviation = std::max(rec.max_price_deviation, std::abs(trail.s1[t] - 0.5));
                rec.max_price_deviation = std::max(rec.max_price_deviation, std::abs(trail.s2[t] - 0.5));
            }
            continue;
        }
        std::vector<double> t;
        std::vector<double> y;
        for (std::size_t i = options.window_lo; i < trail.s1.size(); ++i) {
            double v;
            if (rec.mode == ConvergenceMode::WealthDecay) {
                v = trail.log_rb[i];
            } else {
                const double dev = std::abs(trail.s1[i] - 0.5);
                if (dev < floor) break;
                v = std::log(dev);
            }
            if (!std::isfinite(v)) break;
            t.push_back(static_cast<double>(i));
            y.push_back(v);
        }
        if (t.size() < 10) {
            throw DegenerateSeriesError("convergence window shorter than 10 points for seed " + std::to_string(s));
        }
        const LinearFit fit = linear_fit(t, y);
        rec.window_hi.push_back(static_cast<std::size_t>(t.back()));
        rec.slopes.push_back(fit.slope);
        rec.r2.push_back(fit.r2);
        slopes.add(fit.slope);
        if (s == 0) {
            rec.trace_t = t;
        }
        traces.push_back(std::move(y));
        if (n_seeds == 1) rec.slope_stderr = fit.slope_se;
    }
    if (rec.mode == ConvergenceMode::FixedPoint) return rec;
    rec.trace_log = traces.front();

    std::size_t common = traces.front().size();
    for (const auto& y : traces) common = std::min(common, y.size());
    for (std::size_t i = 0; i < common; ++i) {
        double sum = 0.0;
        for (const auto& y : traces) sum += y[i];
        rec.mean_trace_t.push_back(static_cast<double>(options.window_lo + i));
        rec.mean_trace_log.push_back(sum / static_cast<double>(traces.size()));
    }
    const LinearFit mean_fit = linear_fit(rec.mean_trace_t, rec.mean_trace_log);
    rec.mean_trace_slope = mean_fit.slope;
    rec.mean_trace_r2 = mean_fit.r2;

    rec.mean_slope = slopes.mean();
    if (n_seeds > 1) rec.slope_stderr = slopes.std_error();
    const double se = std::hypot(rec.slope_stderr, rec.entropy.std_error);
    rec.z_score = se > 0.0 ? (rec.mean_slope - rec.entropy.value) / se : 0.0;
    return rec;
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw DomainError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ControlBand control_band(ControlGenerator generator, std::size_t length, std::size_t n_seeds,
                         std::uint64_t master_seed, unsigned threads) {
    if (n_seeds < 1) throw DomainError("control_band needs at least one seed");
    std::vector<ScalingReport> reports(n_seeds);
    parallel_for(n_seeds, threads, [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(StreamKey{master_seed, i, StreamRole::Auxiliary});
        reports[i] = apparent_multifractality_control(generator, length, seed);
    });
    ControlBand band;
    band.generator = generator;
    band.length = length;
    band.qs = reports.front().qs;
    std::vector<RunningMoments> hq(band.qs.size());
    for (const auto& r : reports) {
        band.spreads.push_back(r.spread);
        for (std::size_t q = 0; q < hq.size(); ++q) hq[q].add(r.hq[q]);
    }
    for (const auto& m : hq) {
        band.hq_mean.push_back(m.mean());
        band.hq_stddev.push_back(m.stddev());
    }
    band.median = quantile(band.spreads, 0.5);
    band.p95 = quantile(band.spreads, 0.95);
    return band;
}

}  // namespace twoscale
