#include "twoscale/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "twoscale/errors.hpp"
#include "twoscale/format.hpp"

namespace twoscale {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw DomainError("linear_fit needs two equally long series of at least 2 points");
    }
    const std::size_t n = x.size();
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) {
        throw DegenerateSeriesError("linear_fit: all abscissae are equal");
    }
    LinearFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    const double sse = std::max(0.0, syy - fit.slope * sxy);
    fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    fit.slope_se = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
    return fit;
}

std::vector<double> log_returns(std::span<const double> prices) {
    if (prices.size() < 2) {
        throw DomainError("log_returns needs at least 2 prices");
    }
    for (std::size_t i = 0; i < prices.size(); ++i) {
        if (!(prices[i] > 0.0)) {
            throw DomainError("non-positive price " + format_double(prices[i]) + " at index " +
                              std::to_string(i));
        }
    }
    std::vector<double> out(prices.size() - 1);
    for (std::size_t t = 0; t + 1 < prices.size(); ++t) {
        out[t] = std::log(prices[t + 1] / prices[t]);
    }
    return out;
}

double mean(std::span<const double> series) {
    if (series.empty()) {
        throw DomainError("mean of an empty series");
    }
    double sum = 0.0;
    for (double v : series) sum += v;
    return sum / static_cast<double>(series.size());
}

double sample_stddev(std::span<const double> series) {
    if (series.size() < 2) {
        throw DomainError("sample_stddev needs at least 2 values");
    }
    const double m = mean(series);
    double ss = 0.0;
    for (double v : series) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(series.size() - 1));
}

PriceDecomposition decompose_prices(std::span<const double> prices) {
    PriceDecomposition out;
    out.level = mean(prices);
    out.fluctuation.reserve(prices.size());
    for (double p : prices) out.fluctuation.push_back(p - out.level);
    if (prices.size() >= 2) out.fluctuation_stddev = sample_stddev(prices);
    return out;
}

std::vector<double> standardize(std::span<const double> series) {
    const double sd = sample_stddev(series);
    if (!(sd > 0.0)) {
        throw DegenerateSeriesError("series has zero variance");
    }
    const double m = mean(series);
    std::vector<double> out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        out[i] = (series[i] - m) / sd;
    }
    // A second centering pass removes the rounding residue of the first.
    const double residual = mean(out);
    for (double& v : out) v -= residual;
    return out;
}

double excess_kurtosis(std::span<const double> series) {
    if (series.size() < 4) {
        throw DomainError("excess_kurtosis needs at least 4 values");
    }
    const double m = mean(series);
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : series) {
        const double d2 = (v - m) * (v - m);
        m2 += d2;
        m4 += d2 * d2;
    }
    const double n = static_cast<double>(series.size());
    m2 /= n;
    m4 /= n;
    if (!(m2 > 0.0)) {
        throw DegenerateSeriesError("excess_kurtosis of a constant series");
    }
    return m4 / (m2 * m2) - 3.0;
}

PowerLawFit fit_power_law(std::span<const double> taus, std::span<const std::optional<double>> values,
                          FitRange fit_range) {
    if (taus.size() != values.size()) {
        throw DomainError("fit_power_law: taus and values differ in length");
    }
    PowerLawFit fit;
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < taus.size(); ++i) {
        if (taus[i] < fit_range.lo || taus[i] > fit_range.hi || !values[i]) continue;
        if (*values[i] > 0.0 && taus[i] > 0.0) {
            lx.push_back(std::log(taus[i]));
            ly.push_back(std::log(*values[i]));
        } else {
            ++fit.n_excluded;
        }
    }
    fit.n_used = lx.size();
    if (fit.n_used < 8) {
        return fit;
    }
    const LinearFit line = linear_fit(lx, ly);
    fit.ok = true;
    fit.gamma = -line.slope;
    fit.intercept = line.intercept;
    fit.r2 = line.r2;
    fit.reliable = fit.n_excluded * 2 <= fit.n_used + fit.n_excluded;
    return fit;
}

AcfReport acf_powers(std::span<const double> series, std::span<const int> alphas,
                     std::size_t max_tau, FitRange fit_range) {
    const std::size_t n = series.size();
    if (n < 20) {
        throw DomainError("acf_powers needs at least 20 values");
    }
    if (max_tau > n / 10) {
        throw DomainError("max_tau " + std::to_string(max_tau) + " exceeds n/10 = " +
                          std::to_string(n / 10));
    }
    AcfReport report;
    report.alphas.assign(alphas.begin(), alphas.end());
    report.fit_range = fit_range;
    report.taus.resize(max_tau + 1);
    std::vector<double> tau_real(max_tau + 1);
    for (std::size_t t = 0; t <= max_tau; ++t) {
        report.taus[t] = t;
        tau_real[t] = static_cast<double>(t);
    }

    std::vector<double> y(n);
    std::vector<double> prefix(n + 1);
    for (int alpha : alphas) {
        if (alpha < 1) {
            throw DomainError("acf_powers: alpha must be a positive integer");
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double a = std::abs(series[i]);
            double p = a;
            for (int k = 1; k < alpha; ++k) p *= a;
            y[i] = p;
        }
        prefix[0] = 0.0;
        for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + y[i];

        std::vector<std::optional<double>> row(max_tau + 1);
        for (std::size_t tau = 0; tau <= max_tau; ++tau) {
            const std::size_t m = n - tau;
            const double ma = prefix[m] / static_cast<double>(m);
            const double mb = (prefix[n] - prefix[tau]) / static_cast<double>(m);
            double sab = 0.0;
            double saa = 0.0;
            double sbb = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double da = y[i] - ma;
                const double db = y[i + tau] - mb;
                sab += da * db;
                saa += da * da;
                sbb += db * db;
            }
            if (tau == 0) {
                row[tau] = 1.0;
            } else if (saa > 0.0 && sbb > 0.0) {
                row[tau] = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
            }
        }
        report.fits.push_back(fit_power_law(tau_real, row, fit_range));
        report.values.push_back(std::move(row));
    }
    return report;
}

std::string to_string(ShapeClass shape) {
    switch (shape) {
        case ShapeClass::Concave:
            return "concave";
        case ShapeClass::Laplacian:
            return "laplacian";
        case ShapeClass::Convex:
            return "convex";
    }
    return "unknown";
}

HistogramAccumulator::HistogramAccumulator(std::size_t n_bins, double half_width)
    : half_width_(half_width), counts_(n_bins, 0) {
    if (n_bins < 20) {
        throw DomainError("histogram needs at least 20 bins");
    }
    if (!(half_width > 0.0)) {
        throw DomainError("histogram support must have positive width");
    }
}

void HistogramAccumulator::add(std::span<const double> series) {
    const double width = 2.0 * half_width_ / static_cast<double>(counts_.size());
    for (double z : series) {
        if (!(z >= -half_width_ && z < half_width_)) {
            ++n_outside_;
            continue;
        }
        auto bin = static_cast<std::size_t>((z + half_width_) / width);
        bin = std::min(bin, counts_.size() - 1);
        ++counts_[bin];
    }
}

void HistogramAccumulator::merge(const HistogramAccumulator& other) {
    if (other.counts_.size() != counts_.size() || other.half_width_ != half_width_) {
        throw DomainError("cannot merge histograms with different binning");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    n_outside_ += other.n_outside_;
}

namespace {

// Weighted least squares for y = c0 + c1 x + c2 x^2; returns c2.
double weighted_quadratic_curvature(const std::vector<double>& x, const std::vector<double>& y,
                                    const std::vector<double>& w) {
    std::array<std::array<double, 4>, 3> m{};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double p[3] = {1.0, x[i], x[i] * x[i]};
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) m[r][c] += w[i] * p[r] * p[c];
            m[r][3] += w[i] * p[r] * y[i];
        }
    }
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        }
        std::swap(m[col], m[pivot]);
        if (m[col][col] == 0.0) {
            throw DegenerateSeriesError("shape fit: singular normal equations");
        }
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
        }
    }
    return m[2][3] / m[2][2];
}

}  // namespace

DistributionReport HistogramAccumulator::report(const ShapeClassifier& classifier) const {
    DistributionReport rep;
    const std::size_t nb = counts_.size();
    const double width = 2.0 * half_width_ / static_cast<double>(nb);
    rep.bin_edges.resize(nb + 1);
    for (std::size_t i = 0; i <= nb; ++i) {
        rep.bin_edges[i] = -half_width_ + width * static_cast<double>(i);
    }
    rep.counts = counts_;
    rep.n_outside = n_outside_;
    for (auto c : counts_) rep.n_samples += c;
    if (rep.n_samples == 0) {
        throw DomainError("no samples inside the histogram support");
    }
    rep.log_density.resize(nb);
    const double norm = static_cast<double>(rep.n_samples) * width;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> w;
    for (std::size_t i = 0; i < nb; ++i) {
        if (counts_[i] == 0) continue;
        const double ld = std::log(static_cast<double>(counts_[i]) / norm);
        rep.log_density[i] = ld;
        const double centre = std::abs(0.5 * (rep.bin_edges[i] + rep.bin_edges[i + 1]));
        if (centre >= classifier.region_lo && centre <= classifier.region_hi) {
            x.push_back(centre);
            y.push_back(ld);
            w.push_back(static_cast<double>(counts_[i]));
        }
    }
    std::vector<double> distinct = x;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3) {
        throw DegenerateSeriesError("too few occupied bins in the shape classification region");
    }
    rep.shape_statistic = 2.0 * weighted_quadratic_curvature(x, y, w);
    if (rep.shape_statistic < -classifier.dead_band) {
        rep.shape_class = ShapeClass::Concave;
    } else if (rep.shape_statistic > classifier.dead_band) {
        rep.shape_class = ShapeClass::Convex;
    } else {
        rep.shape_class = ShapeClass::Laplacian;
    }
    return rep;
}

DistributionReport return_histogram(std::span<const double> series, std::size_t n_bins,
                                    double half_width, const ShapeClassifier& classifier) {
    HistogramAccumulator acc(n_bins, half_width);
    acc.add(series);
    DistributionReport rep = acc.report(classifier);
    if (series.size() >= 4) {
        try {
            rep.excess_kurtosis = excess_kurtosis(series);
        } catch (const DegenerateSeriesError&) {
        }
    }
    return rep;
}

}  // namespace twoscale
