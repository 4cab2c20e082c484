// Command-line front end: simulate, analyze, sweep, compare, controls.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "twoscale/errors.hpp"
#include "twoscale/format.hpp"
#include "twoscale/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace twoscale;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string out_dir = ".";
    std::string format = "csv";
};

struct SimulateArgs {
    std::optional<double> a;
    std::optional<double> b;
    std::optional<std::size_t> length;
    std::optional<std::size_t> burn_in;
    std::optional<double> rb0;
    std::string output;
};

struct AnalyzeArgs {
    std::string input;
    ColumnSpec columns;
    std::size_t max_tau = 200;
    std::size_t control_seeds = 0;
    bool plots = false;
};

struct SweepArgs {
    std::string spec;
    unsigned threads = 0;
    bool plots = false;
};

struct CompareArgs {
    std::string model;
    std::string empirical;
    ColumnSpec columns;
};

struct ControlsArgs {
    std::string generator = "both";
    std::size_t length = 20000;
    std::size_t seeds = 50;
    unsigned threads = 0;
};

std::string render(const auto& fn) {
    std::ostringstream out;
    fn(out);
    return out.str();
}

const std::set<Analysis> kAllAnalyses{Analysis::Acf, Analysis::Scaling, Analysis::Distribution};

int run_simulate(const Globals& g, const SimulateArgs& args) {
    SimulationConfig cfg;
    KeyValues kv;
    if (!g.config.empty()) kv = read_key_value_file(g.config);
    auto put = [&](const char* key, const auto& value) {
        if (value) kv[key] = format_double(static_cast<double>(*value));
    };
    put("a", args.a);
    put("b", args.b);
    put("rb0", args.rb0);
    if (args.length) kv["trail_length"] = std::to_string(*args.length), kv.erase("length");
    if (args.burn_in) kv["burn_in"] = std::to_string(*args.burn_in);
    if (g.seed) kv["seed"] = std::to_string(*g.seed);
    cfg = simulation_config_from(kv, cfg);

    const Trail trail = simulate_trail(cfg, cfg.seed);
    const bool as_json = g.format == "json";
    fs::path path = args.output.empty() ? fs::path(g.out_dir) / (as_json ? "trail.json" : "trail.csv")
                                        : fs::path(args.output);
    if (as_json) {
        write_text_file(path, trail_to_json(trail, cfg).dump(2) + "\n");
    } else {
        write_text_file(path, render([&](std::ostream& o) { write_trail_csv(o, trail, cfg); }));
    }
    std::cout << "wrote " << path.string() << " (" << trail.s1.size() << " prices, seed " << cfg.seed << ")\n";
    return kOk;
}

struct LoadedSeries {
    Trail trail;
    json meta;
};

LoadedSeries load_series(const fs::path& input, const ColumnSpec& columns) {
    if (!fs::exists(input)) throw DataError("no such file: " + input.string());
    LoadedSeries out;
    if (is_trail_csv(input)) {
        out.trail = read_trail_csv(input);
        out.meta = json{{"source", "simulated"},
                        {"input", input.string()},
                        {"seed", out.trail.meta.seed},
                        {"config_hash", out.trail.meta.config_hash}};
    } else {
        const EmpiricalSeries series = ingest_csv(input, columns);
        out.trail = to_trail(series);
        out.meta = json{{"source", "empirical"},
                        {"input", input.string()},
                        {"label", series.label},
                        {"first_date", format_date(series.days.front())},
                        {"last_date", format_date(series.days.back())},
                        {"rows", series.n_rows},
                        {"rejected_rows", series.n_rejected},
                        {"unparseable_rows", series.n_unparseable},
                        {"resorted", series.resorted},
                        {"warnings", series.warnings}};
        for (const auto& w : series.warnings) std::cerr << "warning: " << w << "\n";
    }
    return out;
}

int run_analyze(const Globals& g, const AnalyzeArgs& args) {
    const LoadedSeries loaded = load_series(args.input, args.columns);
    AnalysisOptions options;
    options.max_tau = args.max_tau;
    const SeriesAnalysis analysis = analyze_returns(loaded.trail.returns, options, kAllAnalyses);
    if (analysis.degenerate) throw DegenerateSeriesError(analysis.degenerate_reason);

    const fs::path dir(g.out_dir);
    json summary = to_json(analysis);
    summary["format_version"] = kFormatVersion;
    summary["tool_version"] = kToolVersion;
    summary["input"] = loaded.meta;
    summary["pipeline"] = pipeline_summary(analysis);
    const PriceDecomposition decomposition = decompose_prices(loaded.trail.s1);
    summary["price_decomposition"] = json{{"level", decomposition.level},
                                          {"fluctuation_stddev", decomposition.fluctuation_stddev}};
    if (analysis.acf) write_text_file(dir / "acf.csv", render([&](std::ostream& o) { write_acf_csv(o, *analysis.acf); }));
    if (analysis.scaling) {
        write_text_file(dir / "scaling.csv",
                        render([&](std::ostream& o) { write_scaling_csv(o, *analysis.scaling); }));
    }
    if (analysis.spectrum) {
        write_text_file(dir / "spectrum.csv",
                        render([&](std::ostream& o) { write_spectrum_csv(o, *analysis.spectrum); }));
    }
    if (analysis.distribution) {
        write_text_file(dir / "hist.csv",
                        render([&](std::ostream& o) { write_hist_csv(o, *analysis.distribution); }));
    }
    std::optional<ControlBand> band;
    if (args.control_seeds > 0) {
        band = control_band(ControlGenerator::GaussianWalk, loaded.trail.returns.size(), args.control_seeds,
                            g.seed.value_or(0));
        summary["control_band"] = to_json(*band);
    }
    write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    if (args.plots) {
        const fs::path plots = dir / "plots";
        if (analysis.acf) emit_plot_data(*analysis.acf, plots);
        if (analysis.scaling) emit_plot_data(*analysis.scaling, plots, band ? &*band : nullptr);
        if (analysis.distribution) emit_plot_data(*analysis.distribution, plots);
    }
    std::cout << "analyzed " << analysis.n_returns << " returns into " << dir.string() << "\n";
    return kOk;
}

int run_sweep(const Globals& g, const SweepArgs& args) {
    const std::string spec_path = !args.spec.empty() ? args.spec : g.config;
    if (spec_path.empty()) throw CLI::RequiredError("--spec");
    KeyValues kv = read_key_value_file(spec_path);
    if (g.seed) {
        kv.erase("seed");
        kv["master_seed"] = std::to_string(*g.seed);
    }
    const SweepSpec spec = sweep_spec_from(kv);
    const auto start = std::chrono::steady_clock::now();
    const std::vector<CellSummary> cells = twoscale::run_sweep(spec, args.threads);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_sweep_outputs(g.out_dir, spec, cells);
    if (args.plots) {
        for (const auto& cell : cells) emit_plot_data(cell, fs::path(g.out_dir) / "sweep" / cell_label(cell.a, cell.b) / "plots");
    }
    std::size_t flagged = 0;
    for (const auto& cell : cells) {
        if (cell.failure_flag()) {
            ++flagged;
            std::cerr << "warning: cell " << cell_label(cell.a, cell.b) << " lost " << cell.failed << " of "
                      << cell.runs << " runs\n";
        }
    }
    std::cout << "sweep: " << cells.size() << " cells x " << spec.runs_per_cell << " runs in "
              << format_double(seconds) << " s; " << flagged << " flagged; output in " << g.out_dir << "\n";
    return kOk;
}

json load_pipeline(const fs::path& path, const ColumnSpec& columns, json& meta) {
    if (fs::is_directory(path)) {
        const json summary = read_json_file(path / "summary.json");
        if (!summary.contains("pipeline")) throw DataError(path.string() + "/summary.json has no pipeline block");
        meta = json{{"source", "sweep_cell"}, {"input", path.string()}, {"a", summary.value("a", 0.0)},
                    {"b", summary.value("b", 0.0)}, {"runs", summary.value("runs", 0)}};
        return summary["pipeline"];
    }
    if (path.extension() == ".json") {
        const json summary = read_json_file(path);
        if (!summary.contains("pipeline")) throw DataError(path.string() + " has no pipeline block");
        meta = summary.value("input", json{{"input", path.string()}});
        return summary["pipeline"];
    }
    const LoadedSeries loaded = load_series(path, columns);
    meta = loaded.meta;
    const SeriesAnalysis analysis = analyze_returns(loaded.trail.returns, AnalysisOptions{}, kAllAnalyses);
    if (analysis.degenerate) throw DegenerateSeriesError(path.string() + ": " + analysis.degenerate_reason);
    return pipeline_summary(analysis);
}

int run_compare(const Globals& g, const CompareArgs& args) {
    json model_meta;
    json empirical_meta;
    const json model = load_pipeline(args.model, args.columns, model_meta);
    const json empirical = load_pipeline(args.empirical, args.columns, empirical_meta);

    json rows = json::array();
    for (const char* key : {"excess_kurtosis", "c2_mean_lag_1_100", "shape_class", "shape_statistic", "hq_spread"}) {
        rows.push_back(json{{"quantity", key}, {"model", model.value(key, json())},
                            {"empirical", empirical.value(key, json())}});
    }
    if (model.contains("alphas") && empirical.contains("alphas")) {
        for (std::size_t i = 0; i < model["alphas"].size() && i < empirical["alphas"].size(); ++i) {
            rows.push_back(json{{"quantity", "gamma_" + model["alphas"][i].dump()},
                                {"model", model["gamma"][i]},
                                {"empirical", empirical["gamma"][i]}});
        }
    }
    const json out{{"format_version", kFormatVersion},
                   {"tool_version", kToolVersion},
                   {"model", json{{"input", model_meta}, {"summary", model}}},
                   {"empirical", json{{"input", empirical_meta}, {"summary", empirical}}},
                   {"rows", rows}};
    const fs::path dir(g.out_dir);
    write_text_file(dir / "compare.json", out.dump(2) + "\n");

    std::ostringstream table;
    table << "# format_version=" << kFormatVersion << "\n# quantity model empirical\n";
    for (const auto& row : rows) {
        auto cell = [](const json& v) { return v.is_null() ? std::string("NaN") : v.is_string() ? v.get<std::string>() : v.dump(); };
        table << row["quantity"].get<std::string>() << ' ' << cell(row["model"]) << ' ' << cell(row["empirical"]) << '\n';
    }
    write_text_file(dir / "compare.dat", table.str());
    if (model.contains("qs") && empirical.contains("qs")) {
        std::ostringstream hq;
        hq << "# format_version=" << kFormatVersion << "\n# q hq_model hq_empirical\n";
        for (std::size_t i = 0; i < model["qs"].size() && i < empirical["hq"].size(); ++i) {
            hq << model["qs"][i].dump() << ' ' << (model["hq"][i].is_null() ? "NaN" : model["hq"][i].dump()) << ' '
               << (empirical["hq"][i].is_null() ? "NaN" : empirical["hq"][i].dump()) << '\n';
        }
        write_text_file(dir / "compare_hq.dat", hq.str());
        write_text_file(dir / "compare_hq.gp",
                        "set xlabel 'q'\nset ylabel 'h_q'\nplot 'compare_hq.dat' using 1:2 with linespoints title "
                        "'model', '' using 1:3 with linespoints title 'empirical'\n");
    }
    std::cout << "wrote " << (dir / "compare.json").string() << "\n";
    return kOk;
}

int run_controls(const Globals& g, const ControlsArgs& args) {
    std::vector<ControlGenerator> generators;
    if (args.generator == "gaussian" || args.generator == "both") generators.push_back(ControlGenerator::GaussianWalk);
    if (args.generator == "multiplicative" || args.generator == "both") {
        generators.push_back(ControlGenerator::MultiplicativeWalk);
    }
    json bands = json::array();
    const fs::path dir(g.out_dir);
    for (auto gen : generators) {
        const ControlBand band = control_band(gen, args.length, args.seeds, g.seed.value_or(0), args.threads);
        bands.push_back(to_json(band));
        const std::string name = gen == ControlGenerator::GaussianWalk ? "gaussian_walk" : "multiplicative_walk";
        std::ostringstream data;
        data << "# format_version=" << kFormatVersion << "\n# generator=" << name << " length=" << band.length
             << " seeds=" << band.spreads.size() << " median_spread=" << format_double(band.median)
             << " p95_spread=" << format_double(band.p95) << "\n# q hq_mean hq_lo2sd hq_hi2sd\n";
        for (std::size_t i = 0; i < band.qs.size(); ++i) {
            data << format_double(band.qs[i]) << ' ' << format_double(band.hq_mean[i]) << ' '
                 << format_double(band.hq_mean[i] - 2.0 * band.hq_stddev[i]) << ' '
                 << format_double(band.hq_mean[i] + 2.0 * band.hq_stddev[i]) << '\n';
        }
        write_text_file(dir / ("control_" + name + ".dat"), data.str());
        std::cout << name << ": median spread " << format_double(band.median) << ", p95 "
                  << format_double(band.p95) << "\n";
    }
    const json out{{"format_version", kFormatVersion},
                   {"tool_version", kToolVersion},
                   {"seed", g.seed.value_or(0)},
                   {"bands", bands}};
    write_text_file(dir / "controls.json", out.dump(2) + "\n");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-component market price simulator and stylized-fact analysis"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", kToolVersion);

    Globals g;
    app.add_option("--seed", g.seed, "Master seed (overrides config files)");
    app.add_option("--config", g.config, "key = value configuration file");
    app.add_option("--out-dir", g.out_dir, "Directory for output files")->capture_default_str();
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate one price trail");
    simulate->add_option("--a", sim.a, "Slow strategy weight on asset 1");
    simulate->add_option("--b", sim.b, "Fluctuation amplitude of the fast strategy");
    simulate->add_option("--length", sim.length, "Number of recorded prices");
    simulate->add_option("--burn-in", sim.burn_in, "Steps discarded before recording");
    simulate->add_option("--rb0", sim.rb0, "Initial relative wealth of the fast component");
    simulate->add_option("--output,-o", sim.output, "Output file (default <out-dir>/trail.csv)");

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "Run every estimator on a trail or dated close-price CSV");
    analyze->add_option("--input,-i", an.input, "Trail CSV or empirical CSV")->required();
    analyze->add_option("--date-col", an.columns.date_column, "Date column name")->capture_default_str();
    analyze->add_option("--close-col", an.columns.close_column, "Close column name")->capture_default_str();
    analyze->add_option("--date-format", an.columns.date_format, "strptime-style date format (default ISO)");
    analyze->add_option("--max-tau", an.max_tau, "Largest autocorrelation lag")->capture_default_str();
    analyze->add_option("--control-seeds", an.control_seeds, "Gaussian control runs overlaid on the h_q plot");
    analyze->add_flag("--plots", an.plots, "Write plot data and gnuplot scripts");

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "Run an ensemble sweep over an (a, b) grid");
    sweep->add_option("--spec", sw.spec, "Sweep spec file (key = value)");
    sweep->add_option("--threads", sw.threads, "Worker threads (0 = hardware concurrency)");
    sweep->add_flag("--plots", sw.plots, "Write plot data per cell");

    CompareArgs cmp;
    auto* compare = app.add_subcommand("compare", "Pair a model summary with an empirical one");
    compare->add_option("--model", cmp.model, "Sweep cell directory, summary.json or trail CSV")->required();
    compare->add_option("--empirical", cmp.empirical, "Close-price CSV or summary.json")->required();
    compare->add_option("--date-col", cmp.columns.date_column, "Date column name")->capture_default_str();
    compare->add_option("--close-col", cmp.columns.close_column, "Close column name")->capture_default_str();
    compare->add_option("--date-format", cmp.columns.date_format, "strptime-style date format (default ISO)");

    ControlsArgs ctl;
    auto* controls = app.add_subcommand("controls", "Multiscaling spread of monofractal control walks");
    controls->add_option("--generator", ctl.generator, "Control process")
        ->check(CLI::IsMember({"gaussian", "multiplicative", "both"}))
        ->capture_default_str();
    controls->add_option("--length", ctl.length, "Series length")->capture_default_str();
    controls->add_option("--seeds", ctl.seeds, "Number of seeds")->capture_default_str();
    controls->add_option("--threads", ctl.threads, "Worker threads (0 = hardware concurrency)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        if (e.get_exit_code() != 0) std::cerr << app.help();
        return kUsage;
    }

    try {
        if (*simulate) return run_simulate(g, sim);
        if (*analyze) return run_analyze(g, an);
        if (*sweep) return run_sweep(g, sw);
        if (*compare) return run_compare(g, cmp);
        if (*controls) return run_controls(g, ctl);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: missing " << e.what() << "\n" << app.help();
        return kUsage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const Error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    }
    return kUsage;
}
