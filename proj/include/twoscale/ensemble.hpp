#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "twoscale/model.hpp"
#include "twoscale/multiscaling.hpp"
#include "twoscale/stats.hpp"

namespace twoscale {

/// Mergeable count / mean / second central moment (Welford, combined with
/// Chan's pairwise update).
class RunningMoments {
public:
    void add(double x);
    void merge(const RunningMoments& other);

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double m2() const { return m2_; }
    double variance() const;  // n - 1 divisor; 0 for fewer than two values
    double stddev() const;
    double std_error() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
/// concurrency). Work items are claimed from a shared counter; the first
/// exception is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

enum class Analysis { Acf, Scaling, Distribution, Convergence };

std::string to_string(Analysis analysis);
Analysis parse_analysis(const std::string& name);

struct AnalysisOptions {
    std::vector<int> alphas{1, 2, 3};
    std::size_t max_tau = 200;
    FitRange fit_range{};
    std::size_t n_bins = 60;
    double half_width = 6.0;
    ShapeClassifier classifier{};
    std::vector<double> qs = default_q_grid();
};

// All estimators run on one return series.
struct SeriesAnalysis {
    std::size_t n_returns = 0;
    bool degenerate = false;
    std::string degenerate_reason;
    std::vector<double> standardized;
    std::optional<AcfReport> acf;
    std::optional<ScalingReport> scaling;
    std::optional<SingularitySpectrum> spectrum;
    std::optional<DistributionReport> distribution;
};

/// Standardizes the returns and runs the requested estimators. A constant
/// series is reported as degenerate instead of analyzed.
SeriesAnalysis analyze_returns(std::span<const double> returns, const AnalysisOptions& options,
                               const std::set<Analysis>& analyses);

struct SweepSpec {
    std::vector<double> a_grid{0.45};
    std::vector<double> b_grid{0.45};
    std::size_t runs_per_cell = 1000;
    std::size_t trail_length = 5000;
    std::size_t burn_in = 0;
    double rb0 = 0.5;
    double epsilon_floor = 1e-9;
    std::uint64_t master_seed = 0;
    std::set<Analysis> analyses{Analysis::Acf};
    AnalysisOptions options{};
    std::size_t entropy_samples = 100000;

    std::string canonical() const;
    std::uint64_t hash() const;
};

void validate(const SweepSpec& spec);

/// Ensemble aggregate of one (a, b) cell. Built by merging per-run
/// aggregates; a one-run aggregate reproduces that run's estimates.
struct CellSummary {
    double a = 0.0;
    double b = 0.0;
    std::size_t runs = 0;
    std::size_t failed = 0;
    std::size_t degenerate = 0;
    std::vector<std::string> failure_messages;  // first few only

    std::vector<int> alphas;
    std::vector<std::size_t> taus;
    std::vector<std::vector<RunningMoments>> acf;  // [alpha][tau]
    std::vector<RunningMoments> gamma;             // reliable per-run fits only
    std::vector<std::size_t> gamma_rejected;       // per alpha
    std::vector<PowerLawFit> mean_curve_fit;       // filled by finalize()

    RunningMoments kurtosis;
    std::optional<HistogramAccumulator> histogram;
    std::optional<DistributionReport> pooled_distribution;  // filled by finalize()

    std::vector<double> qs;
    std::vector<RunningMoments> hq;
    std::vector<RunningMoments> hq_r2;
    RunningMoments spread;

    RunningMoments log_rb_slope;
    std::optional<EntropyEstimate> entropy;

    bool convergent_cell() const { return a == 0.5 || b == 0.0; }
    bool failure_flag() const { return runs > 0 && failed * 100 > runs; }

    void merge(const CellSummary& other);
    void finalize(const AnalysisOptions& options);

    std::vector<std::optional<double>> mean_curve(std::size_t alpha_index) const;
};

std::string cell_label(double a, double b);

/// One run of a cell: simulate, analyze, and wrap the result as an aggregate.
CellSummary run_cell_member(const SweepSpec& spec, double a, double b, std::size_t run);

/// Pairwise (tree) reduction of runs [lo, hi); merging the reductions of the
/// two halves reproduces the reduction of the whole exactly.
CellSummary reduce_runs(std::span<const CellSummary> runs);

/// Every cell of the spec, in a_grid-major order. The result does not depend
/// on the number of threads.
std::vector<CellSummary> run_sweep(const SweepSpec& spec, unsigned threads = 0);

struct KurtosisFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t n_used = 0;
    std::size_t n_excluded = 0;  // cells with non-positive mean kurtosis
};

/// Least squares of ln(mean excess kurtosis) on b over cells sharing one a.
KurtosisFit kurtosis_vs_b(std::span<const CellSummary> cells);

enum class ConvergenceMode {
    WealthDecay,  // lambda^a = E[d]: ln r^b_t falls linearly
    PriceDecay,   // b ~ 0: ln|S^1_t - 1/2| falls linearly
    FixedPoint,   // a = 1/2 and b = 0: S_t = (1/2, 1/2) throughout
};

std::string to_string(ConvergenceMode mode);

// Spread distribution of a monofractal control at one length.
struct ControlBand {
    ControlGenerator generator = ControlGenerator::GaussianWalk;
    std::size_t length = 0;
    std::vector<double> spreads;  // one per seed, in seed order
    double median = 0.0;
    double p95 = 0.0;
    std::vector<double> qs;
    std::vector<double> hq_mean;
    std::vector<double> hq_stddev;
};

/// Runs apparent_multifractality_control for n_seeds derived seeds.
ControlBand control_band(ControlGenerator generator, std::size_t length, std::size_t n_seeds,
                         std::uint64_t master_seed, unsigned threads = 0);

/// Linear-interpolated empirical quantile, p in [0, 1].
double quantile(std::vector<double> values, double p);

struct ConvergenceRecord {
    ConvergenceMode mode = ConvergenceMode::WealthDecay;
    double a = 0.5;
    double b = 0.0;
    std::size_t window_lo = 0;
    std::vector<std::size_t> window_hi;  // per seed
    std::vector<double> slopes;
    std::vector<double> r2;
    double mean_slope = 0.0;
    double slope_stderr = 0.0;
    EntropyEstimate entropy;
    double z_score = 0.0;             // (mean_slope - entropy) / combined stderr
    double max_price_deviation = 0.0;  // FixedPoint mode
    std::vector<double> trace_t;       // first seed: t and the regressed log quantity
    std::vector<double> trace_log;
    // Seed average of the log quantity over the window every seed reaches.
    std::vector<double> mean_trace_t;
    std::vector<double> mean_trace_log;
    double mean_trace_slope = 0.0;
    double mean_trace_r2 = 0.0;
};

struct ConvergenceOptions {
    std::size_t window_lo = 100;
    std::size_t entropy_samples = 100000;
    // PriceDecay windows end where |S^1 - 1/2| first drops below
    // max(floor_factor * b, 1e-12).
    double floor_factor = 10.0;
};

/// Per-seed regression slopes of the decaying log quantity and their
/// agreement with entropy_growth_rate. Throws DomainError outside the
/// convergent regime.
ConvergenceRecord convergence_study(double a, double b, double rb0, std::size_t length,
                                    std::size_t n_seeds, std::uint64_t master_seed,
                                    const ConvergenceOptions& options = {});

}  // namespace twoscale
