#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace twoscale {

struct ScalingReport {
    std::vector<double> qs;
    std::vector<double> zeta;
    std::vector<double> hq;  // zeta / q
    std::vector<std::size_t> lag_grid;
    std::vector<double> fit_r2;
    double spread = 0.0;     // max(hq) - min(hq)
};

// 0.5, 1.0, ..., 5.0
std::vector<double> default_q_grid();

/// Dyadic lags 1, 2, 4, ... up to min(512, n / 4).
std::vector<std::size_t> default_lag_grid(std::size_t n);

/// Moment-scaling estimate of zeta(q).
///
/// For each lag D the aggregated returns R_D(t) = sum_{i<D} r[t+i] are
/// taken over every start t (overlapping windows). zeta(q) is the slope of
/// ln mean|R_D|^q against ln D.
ScalingReport zeta_spectrum(std::span<const double> returns, std::span<const double> qs,
                            std::span<const std::size_t> lag_grid);

struct SingularitySpectrum {
    std::vector<double> alphas;
    std::vector<double> d_of_alpha;
    std::size_t n_collapsed = 0;  // grid points dropped from the concave hull
};

/// Discrete concave conjugate of zeta(q) - 1: D(alpha) = inf_q(alpha q - zeta(q) + 1).
/// alpha runs over the slopes of the concave hull of (q, zeta); points off the
/// hull shrink the alpha support instead of raising an error.
SingularitySpectrum legendre_transform(std::span<const double> qs, std::span<const double> zeta);

/// Evaluates 1 + inf_alpha(alpha q - D(alpha)) on the given q grid.
std::vector<double> inverse_legendre_transform(const SingularitySpectrum& spectrum,
                                               std::span<const double> qs);

enum class ControlGenerator {
    // i.i.d. standard normal increments.
    GaussianWalk,
    // Increments of P_{t+1} = P_t (1 + 0.05 eps_t), eps_t standard normal, P_0 = 1.
    MultiplicativeWalk,
};

std::vector<double> control_increments(ControlGenerator generator, std::size_t length,
                                       std::uint64_t seed);

/// zeta_spectrum of a monofractal control series with default grids.
ScalingReport apparent_multifractality_control(ControlGenerator generator, std::size_t length,
                                               std::uint64_t seed);

}  // namespace twoscale
