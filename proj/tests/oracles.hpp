#pragma once

// Reference computations written independently of the library so that tests
// compare two implementations instead of one implementation with itself.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

inline double mean(const std::vector<double>& v) {
    long double s = 0;
    for (double x : v) s += x;
    return static_cast<double>(s / v.size());
}

inline double population_variance(const std::vector<double>& v) {
    const double m = mean(v);
    long double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return static_cast<double>(s / v.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean(x);
    const double my = mean(y);
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

// Ordinary least-squares slope, textbook normal equations.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean(x);
    const double my = mean(y);
    long double num = 0, den = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    return static_cast<double>(num / den);
}

// Samples from a distribution whose excess kurtosis is known in closed form,
// drawn with a generator unrelated to the library's streams.
inline std::vector<double> gaussian_sample(std::size_t n, std::uint32_t seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> dist;
    std::vector<double> v(n);
    for (auto& x : v) x = dist(gen);
    return v;
}

inline std::vector<double> laplace_sample(std::size_t n, std::uint32_t seed) {
    std::mt19937 gen(seed);
    std::exponential_distribution<double> e;
    std::bernoulli_distribution sign;
    std::vector<double> v(n);
    for (auto& x : v) x = sign(gen) ? e(gen) : -e(gen);
    return v;
}

inline std::vector<double> student_t3_sample(std::size_t n, std::uint32_t seed) {
    std::mt19937 gen(seed);
    std::student_t_distribution<double> t(3.0);
    std::vector<double> v(n);
    for (auto& x : v) x = t(gen);
    return v;
}

}  // namespace oracle
