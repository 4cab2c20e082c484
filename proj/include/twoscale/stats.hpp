#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace twoscale {

// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_se = 0.0;  // classical OLS standard error
    std::size_t n = 0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// ln(p[t+1] / p[t]). Throws DomainError naming the first non-positive price.
std::vector<double> log_returns(std::span<const double> prices);

double mean(std::span<const double> series);

/// Sample standard deviation (n - 1 divisor).
double sample_stddev(std::span<const double> series);

// A price series split into its time average and the fluctuation around it.
struct PriceDecomposition {
    double level = 0.0;
    std::vector<double> fluctuation;  // price[t] - level
    double fluctuation_stddev = 0.0;
};

PriceDecomposition decompose_prices(std::span<const double> prices);

/// (z - mean) / sample stddev. Throws DegenerateSeriesError on zero variance.
std::vector<double> standardize(std::span<const double> series);

/// m4 / m2^2 - 3 with population (1/n) central moments.
double excess_kurtosis(std::span<const double> series);

struct FitRange {
    double lo = 5.0;
    double hi = 200.0;
};

struct PowerLawFit {
    bool ok = false;         // false: fewer than 8 usable points
    bool reliable = false;   // false also when over half the in-range values were non-positive
    double gamma = 0.0;      // C ~ tau^-gamma
    double intercept = 0.0;  // ln C at tau = 1
    double r2 = 0.0;
    std::size_t n_used = 0;
    std::size_t n_excluded = 0;
};

/// Log-log least squares on the points with tau inside fit_range and a
/// strictly positive value. Absent values are skipped without counting.
PowerLawFit fit_power_law(std::span<const double> taus, std::span<const std::optional<double>> values,
                          FitRange fit_range);

struct AcfReport {
    std::vector<int> alphas;
    std::vector<std::size_t> taus;                            // 0 .. max_tau
    std::vector<std::vector<std::optional<double>>> values;   // [alpha index][tau]
    std::vector<PowerLawFit> fits;                            // per alpha
    FitRange fit_range;
};

/// C_alpha(tau) = Pearson correlation of |z_{t+tau}|^alpha and |z_t|^alpha
/// over the overlapping window. max_tau is limited to n / 10.
AcfReport acf_powers(std::span<const double> series, std::span<const int> alphas,
                     std::size_t max_tau, FitRange fit_range = {});

enum class ShapeClass { Concave, Laplacian, Convex };

std::string to_string(ShapeClass shape);

// Curvature classifier for a log-density of standardized returns: a
// count-weighted quadratic fit of log f against |z| over
// region_lo <= |z| <= region_hi; the statistic is the fitted second
// derivative. Values inside the dead band are Laplacian.
struct ShapeClassifier {
    double region_lo = 0.5;
    double region_hi = 4.0;
    double dead_band = 0.15;
};

struct DistributionReport {
    std::vector<double> bin_edges;                 // n_bins + 1
    std::vector<std::size_t> counts;
    std::vector<std::optional<double>> log_density; // absent for empty bins
    std::size_t n_samples = 0;                     // samples inside the support
    std::size_t n_outside = 0;
    std::optional<double> excess_kurtosis;
    ShapeClass shape_class = ShapeClass::Laplacian;
    double shape_statistic = 0.0;
};

/// Fixed symmetric bins on [-half_width, half_width]; mergeable, so densities
/// can be pooled across an ensemble.
class HistogramAccumulator {
public:
    HistogramAccumulator(std::size_t n_bins, double half_width);

    void add(std::span<const double> series);
    void merge(const HistogramAccumulator& other);

    DistributionReport report(const ShapeClassifier& classifier = {}) const;

    std::size_t n_bins() const { return counts_.size(); }
    double half_width() const { return half_width_; }

private:
    double half_width_;
    std::vector<std::size_t> counts_;
    std::size_t n_outside_ = 0;
};

/// Histogram of an already standardized series with its kurtosis and shape class.
DistributionReport return_histogram(std::span<const double> series, std::size_t n_bins = 60,
                                    double half_width = 6.0, const ShapeClassifier& classifier = {});

}  // namespace twoscale
