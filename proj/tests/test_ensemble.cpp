#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "twoscale/ensemble.hpp"
#include "twoscale/errors.hpp"
#include "twoscale/format.hpp"
#include "twoscale/io.hpp"

using namespace twoscale;

namespace {

SweepSpec small_spec() {
    SweepSpec spec;
    spec.a_grid = {0.45};
    spec.b_grid = {0.25, 0.65};
    spec.runs_per_cell = 12;
    spec.trail_length = 2000;
    spec.master_seed = 17;
    spec.analyses = {Analysis::Acf, Analysis::Scaling, Analysis::Distribution};
    return spec;
}

CellSummary planted_kurtosis(double b, double value) {
    CellSummary c;
    c.a = 0.4;
    c.b = b;
    c.kurtosis.add(value);
    return c;
}

}  // namespace

TEST_CASE("running moments agree with two-pass formulas and merge exactly") {
    const auto x = oracle::laplace_sample(10001, 4);
    RunningMoments all;
    RunningMoments left;
    RunningMoments right;
    for (std::size_t i = 0; i < x.size(); ++i) {
        all.add(x[i]);
        (i < 3777 ? left : right).add(x[i]);
    }
    const double var = oracle::population_variance(x) * x.size() / (x.size() - 1);
    CHECK(all.mean() == doctest::Approx(oracle::mean(x)).epsilon(1e-12));
    CHECK(all.variance() == doctest::Approx(var).epsilon(1e-12));
    left.merge(right);
    CHECK(left.count() == all.count());
    CHECK(std::abs(left.mean() - all.mean()) < 1e-12);
    CHECK(std::abs(left.variance() - all.variance()) < 1e-12 * all.variance());
    CHECK(all.std_error() == doctest::Approx(std::sqrt(var / x.size())));
    RunningMoments empty;
    empty.merge(all);
    CHECK(empty.mean() == all.mean());
}

TEST_CASE("parallel_for visits every index once and rethrows") {
    std::vector<std::atomic<int>> hits(500);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(100, 4,
                                 [](std::size_t i) {
                                     if (i == 37) throw DataError("boom");
                                 }),
                    DataError);
}

TEST_CASE("a one-run aggregate reproduces that run's estimates") {
    SweepSpec spec = small_spec();
    spec.runs_per_cell = 1;
    const auto cells = run_sweep(spec, 1);
    REQUIRE(cells.size() == 2);
    const CellSummary& cell = cells[1];
    SimulationConfig cfg;
    cfg.strategies = {0.45, 0.65};
    cfg.trail_length = spec.trail_length;
    const Trail trail = simulate_trail(cfg, spec.master_seed, fnv1a64(cell_label(0.45, 0.65) + "#0"));
    const SeriesAnalysis direct = analyze_returns(trail.returns, spec.options, spec.analyses);
    REQUIRE(direct.acf);
    for (std::size_t a = 0; a < cell.alphas.size(); ++a) {
        for (std::size_t t = 0; t < cell.taus.size(); ++t) {
            REQUIRE(direct.acf->values[a][t].has_value());
            CHECK(cell.acf[a][t].mean() == *direct.acf->values[a][t]);
        }
        if (direct.acf->fits[a].reliable) CHECK(cell.gamma[a].mean() == direct.acf->fits[a].gamma);
    }
    CHECK(cell.kurtosis.mean() == *direct.distribution->excess_kurtosis);
    for (std::size_t q = 0; q < cell.qs.size(); ++q) CHECK(cell.hq[q].mean() == direct.scaling->hq[q]);
    CHECK(cell.pooled_distribution->counts == direct.distribution->counts);
}

TEST_CASE("merging the two halves reproduces the full reduction") {
    const SweepSpec spec = small_spec();
    std::vector<CellSummary> runs;
    for (std::size_t r = 0; r < 11; ++r) runs.push_back(run_cell_member(spec, 0.45, 0.25, r));
    const CellSummary full = reduce_runs(runs);
    CellSummary halves = reduce_runs(std::span(runs).first(5));
    halves.merge(reduce_runs(std::span(runs).subspan(5)));
    CHECK(full.runs == 11);
    for (std::size_t a = 0; a < full.acf.size(); ++a) {
        for (std::size_t t = 0; t < full.acf[a].size(); ++t) {
            CHECK(full.acf[a][t].mean() == halves.acf[a][t].mean());
            CHECK(full.acf[a][t].variance() == halves.acf[a][t].variance());
        }
    }
    CHECK(full.kurtosis.mean() == halves.kurtosis.mean());
    // Mean curves obey the same bound as individual correlations.
    for (std::size_t a = 0; a < full.alphas.size(); ++a) {
        for (const auto& v : full.mean_curve(a)) {
            if (v) CHECK(std::abs(*v) <= 1.0);
        }
    }
}

TEST_CASE("sweep results do not depend on the thread count") {
    const SweepSpec spec = small_spec();
    const auto serial = run_sweep(spec, 1);
    const auto parallel = run_sweep(spec, 8);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(to_json(serial[i]).dump() == to_json(parallel[i]).dump());
}

TEST_CASE("sweep validation and flags") {
    SweepSpec spec = small_spec();
    spec.a_grid = {0.6};
    CHECK_THROWS_AS(validate(spec), DomainError);
    spec = small_spec();
    spec.runs_per_cell = 0;
    CHECK_THROWS_AS(validate(spec), DomainError);

    CellSummary cell;
    cell.a = 0.5;
    cell.b = 0.3;
    CHECK(cell.convergent_cell());
    cell.a = 0.4;
    cell.b = 0.0;
    CHECK(cell.convergent_cell());
    cell.b = 0.3;
    CHECK_FALSE(cell.convergent_cell());
}

TEST_CASE("singular runs are tallied, not resampled") {
    SweepSpec spec;
    spec.a_grid = {0.45};
    spec.b_grid = {1.0};
    spec.runs_per_cell = 20;
    spec.trail_length = 1000;
    spec.epsilon_floor = 0.3;  // far above the usual floor, so some runs must fail
    spec.analyses = {Analysis::Distribution};
    const auto cells = run_sweep(spec, 2);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].runs == 20);
    CHECK(cells[0].failed > 0);
    CHECK(cells[0].failure_flag());
    CHECK_FALSE(cells[0].failure_messages.empty());
    CHECK(cells[0].kurtosis.count() == cells[0].runs - cells[0].failed - cells[0].degenerate);
}

TEST_CASE("volatility clustering is significant at (0.45, 0.45)") {
    SweepSpec spec;
    spec.a_grid = {0.45};
    spec.b_grid = {0.45};
    spec.runs_per_cell = 1000;
    spec.trail_length = 5000;
    spec.master_seed = 1;
    spec.options.alphas = {2};
    spec.options.max_tau = 20;
    const auto cells = run_sweep(spec, 0);
    const auto& acf = cells[0].acf[0];
    for (std::size_t tau = 1; tau <= 10; ++tau) CHECK(acf[tau].mean() > 2.0 * acf[tau].std_error());
}

TEST_CASE("kurtosis_vs_b") {
    SUBCASE("planted exponential") {
        std::vector<CellSummary> cells;
        for (int i = 1; i <= 9; ++i) cells.push_back(planted_kurtosis(0.1 * i, 2.0 * std::exp(0.1 * i)));
        const KurtosisFit fit = kurtosis_vs_b(cells);
        CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.intercept == doctest::Approx(std::log(2.0)).epsilon(1e-12));
        CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.n_used == 9);
    }
    SUBCASE("constant kurtosis has no trend") {
        std::vector<CellSummary> cells;
        for (int i = 1; i <= 6; ++i) cells.push_back(planted_kurtosis(0.1 * i, 1.7));
        CHECK(std::abs(kurtosis_vs_b(cells).slope) < 1e-12);
    }
    SUBCASE("non-positive cells are excluded and counted") {
        std::vector<CellSummary> cells;
        for (int i = 1; i <= 6; ++i) cells.push_back(planted_kurtosis(0.1 * i, i < 3 ? -0.5 : std::exp(0.1 * i)));
        const KurtosisFit fit = kurtosis_vs_b(cells);
        CHECK(fit.n_excluded == 2);
        CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-12));
    }
    std::vector<CellSummary> three(3, planted_kurtosis(0.1, 1.0));
    CHECK_THROWS_AS(kurtosis_vs_b(three), DomainError);
}

TEST_CASE("convergence study") {
    SUBCASE("price decay for a vanishing fluctuation is exponential") {
        const ConvergenceRecord rec = convergence_study(0.4, 1e-9, 0.4, 5000, 50, 3, {100, 20000, 10.0});
        CHECK(rec.mode == ConvergenceMode::PriceDecay);
        CHECK(rec.mean_slope < 0.0);
        CHECK(rec.mean_trace_r2 >= 0.98);
        CHECK(std::abs(rec.z_score) < 3.0);
    }
    SUBCASE("wealth decay matches the entropy rate") {
        const ConvergenceRecord rec = convergence_study(0.5, 0.45, 0.5, 5000, 20, 4);
        CHECK(rec.mode == ConvergenceMode::WealthDecay);
        CHECK(rec.entropy.value < 0.0);
        CHECK(std::abs(rec.z_score) < 3.0);
        CHECK(rec.mean_trace_r2 >= 0.95);
        CHECK(rec.slopes.size() == 20);
    }
    SUBCASE("the fixed point never moves") {
        const ConvergenceRecord rec = convergence_study(0.5, 0.0, 0.3, 2000, 3, 5);
        CHECK(rec.mode == ConvergenceMode::FixedPoint);
        CHECK(rec.max_price_deviation == 0.0);
    }
    CHECK_THROWS_AS(convergence_study(0.4, 0.45, 0.5, 5000, 5, 1), DomainError);
}

TEST_CASE("quantile and control band") {
    CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(quantile({0.0, 10.0}, 0.95) == doctest::Approx(9.5));
    const ControlBand one = control_band(ControlGenerator::GaussianWalk, 4000, 12, 9, 1);
    const ControlBand many = control_band(ControlGenerator::GaussianWalk, 4000, 12, 9, 8);
    CHECK(one.spreads == many.spreads);
    CHECK(one.p95 >= one.median);
    CHECK(one.hq_mean.size() == one.qs.size());
}
