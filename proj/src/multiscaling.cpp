#include "twoscale/multiscaling.hpp"

#include <algorithm>
#include <cmath>

#include "twoscale/errors.hpp"
#include "twoscale/stats.hpp"
#include "twoscale/stochastic.hpp"

namespace twoscale {

std::vector<double> default_q_grid() {
    std::vector<double> qs;
    for (int i = 1; i <= 10; ++i) qs.push_back(0.5 * i);
    return qs;
}

std::vector<std::size_t> default_lag_grid(std::size_t n) {
    std::vector<std::size_t> lags;
    for (std::size_t lag = 1; lag <= 512 && 4 * lag <= n; lag *= 2) lags.push_back(lag);
    return lags;
}

ScalingReport zeta_spectrum(std::span<const double> returns, std::span<const double> qs,
                            std::span<const std::size_t> lag_grid) {
    if (qs.empty()) {
        throw DomainError("zeta_spectrum: empty q grid");
    }
    for (double q : qs) {
        if (!(q > 0.0)) throw DomainError("zeta_spectrum: q must be positive");
    }
    if (lag_grid.size() < 2) {
        throw DomainError("zeta_spectrum needs at least two lags");
    }
    for (std::size_t i = 0; i < lag_grid.size(); ++i) {
        if (lag_grid[i] == 0 || (i > 0 && lag_grid[i] <= lag_grid[i - 1])) {
            throw DomainError("zeta_spectrum: lag grid must be positive and strictly increasing");
        }
    }
    const std::size_t n = returns.size();
    const std::size_t needed = 4 * lag_grid.back();
    if (n < needed) {
        throw DomainError("zeta_spectrum: series of length " + std::to_string(n) +
                          " is shorter than the required minimum " + std::to_string(needed));
    }
    if (std::all_of(returns.begin(), returns.end(), [](double r) { return r == 0.0; })) {
        throw DegenerateSeriesError("zeta_spectrum: all returns are zero");
    }

    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + returns[i];

    const std::size_t nq = qs.size();
    std::vector<std::vector<double>> log_moment(nq, std::vector<double>(lag_grid.size()));
    std::vector<double> log_lag(lag_grid.size());
    std::vector<double> abs_r;
    std::vector<double> sums(nq);
    for (std::size_t li = 0; li < lag_grid.size(); ++li) {
        const std::size_t lag = lag_grid[li];
        log_lag[li] = std::log(static_cast<double>(lag));
        const std::size_t m = n - lag + 1;
        abs_r.resize(m);
        for (std::size_t t = 0; t < m; ++t) abs_r[t] = std::abs(prefix[t + lag] - prefix[t]);
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t t = 0; t < m; ++t) {
            const double v = abs_r[t];
            if (v == 0.0) continue;
            const double lv = std::log(v);
            for (std::size_t qi = 0; qi < nq; ++qi) sums[qi] += std::exp(qs[qi] * lv);
        }
        for (std::size_t qi = 0; qi < nq; ++qi) {
            if (!(sums[qi] > 0.0)) {
                throw DegenerateSeriesError("zeta_spectrum: zero moment at lag " +
                                            std::to_string(lag));
            }
            log_moment[qi][li] = std::log(sums[qi] / static_cast<double>(m));
        }
    }

    ScalingReport report;
    report.qs.assign(qs.begin(), qs.end());
    report.lag_grid.assign(lag_grid.begin(), lag_grid.end());
    for (std::size_t qi = 0; qi < nq; ++qi) {
        const LinearFit fit = linear_fit(log_lag, log_moment[qi]);
        report.zeta.push_back(fit.slope);
        report.hq.push_back(fit.slope / qs[qi]);
        report.fit_r2.push_back(fit.r2);
    }
    const auto [lo, hi] = std::minmax_element(report.hq.begin(), report.hq.end());
    report.spread = *hi - *lo;
    return report;
}

SingularitySpectrum legendre_transform(std::span<const double> qs, std::span<const double> zeta) {
    if (qs.size() != zeta.size()) {
        throw DomainError("legendre_transform: q and zeta differ in length");
    }
    if (qs.size() < 5) {
        throw DomainError("legendre_transform needs zeta on at least 5 q points");
    }
    for (std::size_t i = 1; i < qs.size(); ++i) {
        if (!(qs[i] > qs[i - 1])) throw DomainError("legendre_transform: q grid must increase");
    }
    // Upper concave hull (monotone chain).
    std::vector<std::size_t> hull;
    for (std::size_t i = 0; i < qs.size(); ++i) {
        while (hull.size() >= 2) {
            const std::size_t j = hull[hull.size() - 2];
            const std::size_t k = hull.back();
            const double cross =
                (qs[k] - qs[j]) * (zeta[i] - zeta[j]) - (zeta[k] - zeta[j]) * (qs[i] - qs[j]);
            if (cross >= 0.0) {
                hull.pop_back();
            } else {
                break;
            }
        }
        hull.push_back(i);
    }

    SingularitySpectrum spectrum;
    spectrum.n_collapsed = qs.size() - hull.size();
    for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
        const std::size_t j = hull[h];
        const std::size_t k = hull[h + 1];
        const double alpha = (zeta[k] - zeta[j]) / (qs[k] - qs[j]);
        spectrum.alphas.push_back(alpha);
        spectrum.d_of_alpha.push_back(alpha * qs[j] - zeta[j] + 1.0);
    }
    return spectrum;
}

std::vector<double> inverse_legendre_transform(const SingularitySpectrum& spectrum,
                                               std::span<const double> qs) {
    if (spectrum.alphas.empty()) {
        throw DomainError("inverse_legendre_transform: empty spectrum");
    }
    std::vector<double> out;
    out.reserve(qs.size());
    for (double q : qs) {
        double best = spectrum.alphas[0] * q - spectrum.d_of_alpha[0];
        for (std::size_t i = 1; i < spectrum.alphas.size(); ++i) {
            best = std::min(best, spectrum.alphas[i] * q - spectrum.d_of_alpha[i]);
        }
        out.push_back(best + 1.0);
    }
    return out;
}

std::vector<double> control_increments(ControlGenerator generator, std::size_t length,
                                       std::uint64_t seed) {
    Stream stream(StreamKey{seed, 0, StreamRole::Auxiliary});
    std::vector<double> out(length);
    if (generator == ControlGenerator::GaussianWalk) {
        for (auto& v : out) v = standard_normal(stream);
        return out;
    }
    double level = 1.0;
    for (auto& v : out) {
        const double next = level * (1.0 + 0.05 * standard_normal(stream));
        v = next - level;
        level = next;
    }
    return out;
}

ScalingReport apparent_multifractality_control(ControlGenerator generator, std::size_t length,
                                               std::uint64_t seed) {
    if (length < 1000) {
        throw DomainError("control series need length >= 1000");
    }
    const auto series = control_increments(generator, length, seed);
    const auto qs = default_q_grid();
    const auto lags = default_lag_grid(length);
    return zeta_spectrum(series, qs, lags);
}

}  // namespace twoscale
