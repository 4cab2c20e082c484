#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "twoscale/ensemble.hpp"
#include "twoscale/model.hpp"
#include "twoscale/multiscaling.hpp"
#include "twoscale/stats.hpp"

namespace twoscale {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kToolVersion = "twoscale 1.0.0";

using KeyValues = std::map<std::string, std::string>;

/// Flat `key = value` text with `#` comments and blank lines. Repeated keys
/// are an error.
KeyValues parse_key_values(std::istream& in, const std::string& origin = "<config>");
KeyValues read_key_value_file(const std::filesystem::path& path);

/// Keys: a, b, rb0, trail_length (or length), burn_in, seed, epsilon_floor.
/// Missing keys keep the values of `base`. Ranges are checked for production
/// use (0 < a < 1/2, 0 < b <= 1).
SimulationConfig simulation_config_from(const KeyValues& kv, SimulationConfig base = {});

/// Keys: a_grid, b_grid (comma lists), runs_per_cell, trail_length,
/// burn_in, rb0, epsilon_floor, master_seed (or seed), analyses (comma
/// list), alphas, max_tau, fit_tau_min, fit_tau_max, n_bins, half_width,
/// entropy_samples.
SweepSpec sweep_spec_from(const KeyValues& kv);

struct ColumnSpec {
    std::string date_column = "date";
    std::string close_column = "close";
    std::string date_format;  // std::get_time format; empty means ISO-8601 YYYY-MM-DD
};

struct EmpiricalSeries {
    std::vector<std::int64_t> days;  // days since 1970-01-01, strictly increasing
    std::vector<double> closes;
    std::string label;
    std::size_t n_rows = 0;
    std::size_t n_rejected = 0;     // missing or non-positive close
    std::size_t n_unparseable = 0;  // malformed date, number or row
    bool resorted = false;
    std::vector<std::string> warnings;
};

/// Reads a dated close-price CSV. Unparseable rows above 1% of the data rows
/// raise DataError; below that they are dropped with a warning.
EmpiricalSeries ingest_csv(const std::filesystem::path& path, const ColumnSpec& columns = {});

std::string format_date(std::int64_t days);

Trail to_trail(const EmpiricalSeries& series);

void write_trail_csv(std::ostream& out, const Trail& trail, const SimulationConfig& cfg);
nlohmann::json trail_to_json(const Trail& trail, const SimulationConfig& cfg);

/// Reads the `t,s1,s2,log_rb,return` file written by write_trail_csv.
/// Returns are recomputed from s1.
Trail read_trail_csv(const std::filesystem::path& path);

/// True when the file's header has the trail layout.
bool is_trail_csv(const std::filesystem::path& path);

void write_acf_csv(std::ostream& out, const AcfReport& report);
void write_acf_csv(std::ostream& out, const CellSummary& cell);
void write_hist_csv(std::ostream& out, const DistributionReport& report);
void write_scaling_csv(std::ostream& out, const ScalingReport& report);
void write_scaling_csv(std::ostream& out, const CellSummary& cell);
void write_spectrum_csv(std::ostream& out, const SingularitySpectrum& spectrum);

nlohmann::json to_json(const PowerLawFit& fit);
nlohmann::json to_json(const AcfReport& report);
nlohmann::json to_json(const DistributionReport& report);
nlohmann::json to_json(const ScalingReport& report);
nlohmann::json to_json(const SingularitySpectrum& spectrum);
nlohmann::json to_json(const CellSummary& cell);
nlohmann::json to_json(const ConvergenceRecord& record);
nlohmann::json to_json(const ControlBand& band);
nlohmann::json to_json(const SeriesAnalysis& analysis);

/// Headline numbers shared by single-series and ensemble summaries; the
/// `compare` subcommand pairs two of these.
nlohmann::json pipeline_summary(const SeriesAnalysis& analysis);
nlohmann::json pipeline_summary(const CellSummary& cell);

/// Writes `sweep/<a>_<b>/{summary.json, acf.csv, scaling.csv, hist.csv}`
/// below `out_dir` for the analyses that ran, plus `manifest.json`. Nothing
/// written depends on wall time or thread count.
void write_sweep_outputs(const std::filesystem::path& out_dir, const SweepSpec& spec,
                         const std::vector<CellSummary>& cells);

// Plot-ready whitespace-separated data plus a gnuplot script per figure class.
void emit_plot_data(const ConvergenceRecord& record, const std::filesystem::path& dir);
void emit_plot_data(const AcfReport& report, const std::filesystem::path& dir);
void emit_plot_data(const CellSummary& cell, const std::filesystem::path& dir);
void emit_plot_data(const ScalingReport& report, const std::filesystem::path& dir,
                    const ControlBand* control = nullptr);
void emit_plot_data(const DistributionReport& report, const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace twoscale
