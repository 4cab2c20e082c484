#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "twoscale/errors.hpp"
#include "twoscale/stats.hpp"

using namespace twoscale;

namespace {

std::vector<double> iota_taus(std::size_t n) {
    std::vector<double> t(n);
    std::iota(t.begin(), t.end(), 0.0);
    return t;
}

std::vector<double> power_abs(const std::vector<double>& z, int alpha) {
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::pow(std::abs(z[i]), alpha);
    return out;
}

}  // namespace

TEST_CASE("log_returns") {
    const std::vector<double> flat(10, 0.3);
    for (double r : log_returns(flat)) CHECK(r == 0.0);
    const std::vector<double> two{0.5, 0.55};
    const auto r = log_returns(two);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == doctest::Approx(std::log(1.1)).epsilon(1e-14));
    CHECK(r[0] == doctest::Approx(0.09531).epsilon(1e-4));
    const std::vector<double> bad{1.0, 2.0, 0.0, 3.0};
    try {
        log_returns(bad);
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
}

TEST_CASE("standardize") {
    const std::vector<double> v{1, 2, 3};
    const auto z = standardize(v);
    CHECK(z[0] == doctest::Approx(-1.0));
    CHECK(z[1] == doctest::Approx(0.0));
    CHECK(z[2] == doctest::Approx(1.0));

    const auto x = oracle::laplace_sample(5000, 2);
    std::vector<double> shifted(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = 3.0 + 0.01 * x[i];
    const auto once = standardize(shifted);
    const auto twice = standardize(once);
    CHECK(std::abs(mean(once)) < 1e-12);
    CHECK(std::abs(sample_stddev(once) - 1.0) < 1e-12);
    double worst = 0;
    for (std::size_t i = 0; i < once.size(); ++i) worst = std::max(worst, std::abs(once[i] - twice[i]));
    CHECK(worst < 1e-12);

    CHECK_THROWS_AS(standardize(std::vector<double>(20, 1.5)), DegenerateSeriesError);
}

TEST_CASE("price decomposition splits level and fluctuation") {
    const std::vector<double> p{0.4, 0.5, 0.6, 0.5};
    const PriceDecomposition d = decompose_prices(p);
    CHECK(d.level == doctest::Approx(0.5));
    CHECK(d.fluctuation[0] == doctest::Approx(-0.1));
    CHECK(d.fluctuation[2] == doctest::Approx(0.1));
    CHECK(d.fluctuation_stddev == doctest::Approx(std::sqrt(0.02 / 3.0)));
}

TEST_CASE("linear_fit agrees with the normal equations") {
    std::mt19937 gen(1);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::vector<double> x(500);
    std::vector<double> y(500);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = 0.01 * static_cast<double>(i);
        y[i] = 1.5 - 2.0 * x[i] + noise(gen);
    }
    const LinearFit fit = linear_fit(x, y);
    CHECK(fit.slope == doctest::Approx(oracle::ols_slope(x, y)).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(std::pow(oracle::pearson(x, y), 2)).epsilon(1e-10));
    CHECK(std::abs(fit.slope + 2.0) < 4 * fit.slope_se);
}

TEST_CASE("excess kurtosis reference laws") {
    CHECK(std::abs(excess_kurtosis(oracle::gaussian_sample(1'000'000, 5))) < 0.02);
}

TEST_CASE("excess kurtosis of Laplace samples is unbiased around 3") {
    // A single n = 1e6 estimate has a sampling spread near 0.036, so the
    // mean over seeds is the sharp check and each seed gets a 4-sigma band.
    double sum = 0;
    const int seeds = 16;
    for (int s = 0; s < seeds; ++s) {
        const double k = excess_kurtosis(oracle::laplace_sample(1'000'000, 600 + s));
        CHECK(std::abs(k - 3.0) < 0.15);
        sum += k;
    }
    CHECK(std::abs(sum / seeds - 3.0) < 0.05);
}

TEST_CASE("excess kurtosis uses population moments and is affine invariant") {
    const auto x = oracle::student_t3_sample(20000, 9);
    const double m = oracle::mean(x);
    long double m2 = 0, m4 = 0;
    for (double v : x) {
        m2 += (v - m) * (v - m);
        m4 += std::pow(v - m, 4);
    }
    m2 /= x.size();
    m4 /= x.size();
    const double k = excess_kurtosis(x);
    CHECK(k == doctest::Approx(static_cast<double>(m4 / (m2 * m2) - 3.0)).epsilon(1e-10));
    for (double c : {-3.0, 0.001, 250.0}) {
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = c * x[i] + 7.5;
        CHECK(std::abs(excess_kurtosis(y) - k) < 1e-10);
    }
}

TEST_CASE("acf_powers matches a direct Pearson computation per lag") {
    const auto z = standardize(oracle::student_t3_sample(3000, 4));
    const std::vector<int> alphas{1, 2, 3};
    const AcfReport rep = acf_powers(z, alphas, 60);
    REQUIRE(rep.taus.size() == 61);
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        const auto p = power_abs(z, alphas[ai]);
        CHECK(*rep.values[ai][0] == 1.0);
        for (std::size_t tau : {1u, 7u, 33u, 60u}) {
            const std::vector<double> head(p.begin(), p.end() - tau);
            const std::vector<double> tail(p.begin() + tau, p.end());
            REQUIRE(rep.values[ai][tau].has_value());
            CHECK(std::abs(*rep.values[ai][tau] - oracle::pearson(head, tail)) < 1e-10);
        }
        for (const auto& v : rep.values[ai]) {
            REQUIRE(v.has_value());
            CHECK(std::abs(*v) <= 1.0);
        }
    }
}

TEST_CASE("acf of a periodic magnitude is one at the period") {
    std::vector<double> z;
    for (int i = 0; i < 2000; ++i) z.push_back(i % 5 == 0 ? 3.0 : (i % 2 ? 0.5 : -0.5));
    const std::vector<int> alphas{1, 2};
    const AcfReport rep = acf_powers(z, alphas, 50);
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        CHECK(*rep.values[ai][5] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(*rep.values[ai][10] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("acf of a constant magnitude is absent, not zero") {
    std::vector<double> z;
    for (int i = 0; i < 500; ++i) z.push_back(i % 3 ? 1.0 : -1.0);
    const std::vector<int> alphas{2};
    const AcfReport rep = acf_powers(z, alphas, 20);
    CHECK(rep.values[0][0] == 1.0);
    CHECK_FALSE(rep.values[0][3].has_value());
    CHECK_FALSE(rep.fits[0].ok);
}

TEST_CASE("white noise stays inside the 2/sqrt(n) band") {
    const std::size_t n = 5000;
    const auto z = oracle::gaussian_sample(n, 12);
    const std::vector<int> alphas{2};
    const AcfReport rep = acf_powers(z, alphas, 50);
    int inside = 0;
    for (std::size_t tau = 1; tau <= 50; ++tau) inside += std::abs(*rep.values[0][tau]) < 2.0 / std::sqrt(double(n));
    CHECK(inside >= 45);
}

TEST_CASE("fit_power_law recovers planted exponents") {
    const auto taus = iota_taus(201);
    SUBCASE("noiseless") {
        std::vector<std::optional<double>> v(taus.size());
        for (std::size_t i = 1; i < taus.size(); ++i) v[i] = std::pow(taus[i], -0.3);
        const PowerLawFit fit = fit_power_law(taus, v, {5, 200});
        REQUIRE(fit.ok);
        CHECK(std::abs(fit.gamma - 0.3) < 1e-9);
        CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.n_used == 196);
        CHECK(fit.reliable);
    }
    SUBCASE("ten percent multiplicative noise") {
        std::mt19937 gen(8);
        std::uniform_real_distribution<double> u(-0.1, 0.1);
        for (double gamma : {0.2, 0.6, 1.1}) {
            std::vector<std::optional<double>> v(taus.size());
            for (std::size_t i = 1; i < taus.size(); ++i) v[i] = std::pow(taus[i], -gamma) * (1.0 + u(gen));
            const PowerLawFit fit = fit_power_law(taus, v, {5, 200});
            CHECK(std::abs(fit.gamma - gamma) < 0.05);
        }
    }
    SUBCASE("exponential decay is flagged by a poor fit") {
        std::vector<std::optional<double>> v(taus.size());
        for (std::size_t i = 1; i < taus.size(); ++i) v[i] = std::exp(-0.05 * taus[i]);
        const PowerLawFit fit = fit_power_law(taus, v, {5, 200});
        REQUIRE(fit.ok);
        CHECK(fit.r2 < 0.9);
    }
    SUBCASE("too few points or mostly negative values") {
        std::vector<std::optional<double>> v(taus.size());
        for (std::size_t i = 1; i < taus.size(); ++i) v[i] = i < 10 ? std::optional<double>(1.0 / i) : std::nullopt;
        CHECK_FALSE(fit_power_law(taus, v, {5, 200}).ok);
        for (std::size_t i = 1; i < taus.size(); ++i) v[i] = (i % 3 == 0) ? 0.1 : -0.1;
        const PowerLawFit fit = fit_power_law(taus, v, {5, 200});
        CHECK(fit.ok);
        CHECK_FALSE(fit.reliable);
        CHECK(fit.n_excluded > fit.n_used);
    }
}

TEST_CASE("histogram conserves mass and its density integrates to one") {
    const auto z = standardize(oracle::laplace_sample(50000, 3));
    const DistributionReport rep = return_histogram(z, 60, 6.0);
    const std::size_t total = std::accumulate(rep.counts.begin(), rep.counts.end(), std::size_t{0});
    CHECK(total == rep.n_samples);
    CHECK(rep.n_samples + rep.n_outside == z.size());
    double integral = 0;
    for (std::size_t i = 0; i < rep.counts.size(); ++i) {
        if (rep.log_density[i]) integral += std::exp(*rep.log_density[i]) * (rep.bin_edges[i + 1] - rep.bin_edges[i]);
    }
    CHECK(std::abs(integral - 1.0) < 1e-6);
    REQUIRE(rep.excess_kurtosis.has_value());
    CHECK(*rep.excess_kurtosis == doctest::Approx(excess_kurtosis(z)));
}

TEST_CASE("merged histograms equal one histogram of the pooled sample") {
    const auto a = standardize(oracle::gaussian_sample(4000, 1));
    const auto b = standardize(oracle::student_t3_sample(6000, 2));
    HistogramAccumulator left(60, 6.0);
    HistogramAccumulator right(60, 6.0);
    HistogramAccumulator pooled(60, 6.0);
    left.add(a);
    right.add(b);
    pooled.add(a);
    pooled.add(b);
    left.merge(right);
    const auto x = left.report();
    const auto y = pooled.report();
    CHECK(x.counts == y.counts);
    CHECK(x.shape_statistic == y.shape_statistic);
    HistogramAccumulator other(40, 6.0);
    CHECK_THROWS_AS(left.merge(other), DomainError);
}

TEST_CASE("shape classifier separates Gaussian, Laplace and Student-t at n = 20000") {
    const int seeds = 40;
    int gauss = 0;
    int laplace = 0;
    int student = 0;
    for (int s = 0; s < seeds; ++s) {
        gauss += return_histogram(standardize(oracle::gaussian_sample(20000, 100 + s))).shape_class == ShapeClass::Concave;
        laplace += return_histogram(standardize(oracle::laplace_sample(20000, 200 + s))).shape_class ==
                   ShapeClass::Laplacian;
        student += return_histogram(standardize(oracle::student_t3_sample(20000, 300 + s))).shape_class ==
                   ShapeClass::Convex;
    }
    CHECK(gauss >= 0.95 * seeds);
    CHECK(laplace >= 0.95 * seeds);
    CHECK(student >= 0.95 * seeds);
    CHECK(to_string(ShapeClass::Concave) == "concave");
}
