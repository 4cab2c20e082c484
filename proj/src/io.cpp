#include "twoscale/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "twoscale/errors.hpp"
#include "twoscale/format.hpp"

namespace twoscale {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(trim(field));
    return out;
}

std::optional<double> parse_double(std::string_view text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return v;
}

double require_double(const KeyValues& kv, const std::string& key) {
    const auto v = parse_double(trim(kv.at(key)));
    if (!v) throw DomainError("config key '" + key + "': '" + kv.at(key) + "' is not a number");
    return *v;
}

std::uint64_t require_uint(const KeyValues& kv, const std::string& key) {
    const std::string text = trim(kv.at(key));
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw DomainError("config key '" + key + "': '" + text + "' is not a non-negative integer");
    }
    return v;
}

std::vector<double> require_list(const KeyValues& kv, const std::string& key) {
    std::vector<double> out;
    for (const auto& item : split_csv(kv.at(key))) {
        const auto v = parse_double(item);
        if (!v) throw DomainError("config key '" + key + "': '" + item + "' is not a number");
        out.push_back(*v);
    }
    return out;
}

void reject_unknown(const KeyValues& kv, std::initializer_list<const char*> known) {
    for (const auto& [key, value] : kv) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            throw DomainError("unknown config key '" + key + "'");
        }
    }
}

std::optional<std::int64_t> civil_days(int y, unsigned m, unsigned d) {
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd}.time_since_epoch().count();
}

std::optional<std::int64_t> parse_date(const std::string& text, const std::string& format) {
    if (format.empty()) {
        int y = 0;
        unsigned m = 0;
        unsigned d = 0;
        char tail = 0;
        if (std::sscanf(text.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) return std::nullopt;
        return civil_days(y, m, d);
    }
    std::tm tm{};
    std::istringstream in(text);
    in >> std::get_time(&tm, format.c_str());
    if (in.fail()) return std::nullopt;
    in >> std::ws;
    if (!in.eof()) return std::nullopt;
    return civil_days(tm.tm_year + 1900, static_cast<unsigned>(tm.tm_mon + 1),
                      static_cast<unsigned>(tm.tm_mday));
}

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json moments_json(const RunningMoments& m) {
    return json{{"n", m.count()}, {"mean", m.mean()}, {"variance", m.variance()},
                {"stddev", m.stddev()}, {"stderr", m.std_error()}};
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

template <class Fn>
std::string render(Fn&& fn) {
    std::ostringstream out;
    fn(out);
    return out.str();
}

}  // namespace

KeyValues parse_key_values(std::istream& in, const std::string& origin) {
    KeyValues kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(text).substr(0, eq));
        const std::string value = trim(std::string_view(text).substr(eq + 1));
        if (key.empty()) throw DataError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, value).second) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": repeated key '" + key + "'");
        }
    }
    return kv;
}

KeyValues read_key_value_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return parse_key_values(in, path.string());
}

SimulationConfig simulation_config_from(const KeyValues& kv, SimulationConfig cfg) {
    reject_unknown(kv, {"a", "b", "rb0", "trail_length", "length", "burn_in", "seed", "epsilon_floor"});
    if (kv.contains("a")) cfg.strategies.a = require_double(kv, "a");
    if (kv.contains("b")) cfg.strategies.b = require_double(kv, "b");
    if (kv.contains("rb0")) cfg.rb0 = require_double(kv, "rb0");
    if (kv.contains("trail_length")) cfg.trail_length = require_uint(kv, "trail_length");
    if (kv.contains("length")) cfg.trail_length = require_uint(kv, "length");
    if (kv.contains("burn_in")) cfg.burn_in = require_uint(kv, "burn_in");
    if (kv.contains("seed")) cfg.seed = require_uint(kv, "seed");
    if (kv.contains("epsilon_floor")) cfg.epsilon_floor = require_double(kv, "epsilon_floor");
    validate(cfg, ParameterRange::Production);
    return cfg;
}

SweepSpec sweep_spec_from(const KeyValues& kv) {
    reject_unknown(kv, {"a_grid", "b_grid", "runs_per_cell", "trail_length", "burn_in", "rb0",
                        "epsilon_floor", "master_seed", "seed", "analyses", "alphas", "max_tau",
                        "fit_tau_min", "fit_tau_max", "n_bins", "half_width", "entropy_samples"});
    SweepSpec spec;
    if (kv.contains("a_grid")) spec.a_grid = require_list(kv, "a_grid");
    if (kv.contains("b_grid")) spec.b_grid = require_list(kv, "b_grid");
    if (kv.contains("runs_per_cell")) spec.runs_per_cell = require_uint(kv, "runs_per_cell");
    if (kv.contains("trail_length")) spec.trail_length = require_uint(kv, "trail_length");
    if (kv.contains("burn_in")) spec.burn_in = require_uint(kv, "burn_in");
    if (kv.contains("rb0")) spec.rb0 = require_double(kv, "rb0");
    if (kv.contains("epsilon_floor")) spec.epsilon_floor = require_double(kv, "epsilon_floor");
    if (kv.contains("seed")) spec.master_seed = require_uint(kv, "seed");
    if (kv.contains("master_seed")) spec.master_seed = require_uint(kv, "master_seed");
    if (kv.contains("analyses")) {
        spec.analyses.clear();
        for (const auto& name : split_csv(kv.at("analyses"))) spec.analyses.insert(parse_analysis(name));
    }
    if (kv.contains("alphas")) {
        spec.options.alphas.clear();
        for (double a : require_list(kv, "alphas")) {
            if (a != std::floor(a) || a < 1) throw DomainError("alphas must be positive integers");
            spec.options.alphas.push_back(static_cast<int>(a));
        }
    }
    if (kv.contains("max_tau")) spec.options.max_tau = require_uint(kv, "max_tau");
    if (kv.contains("fit_tau_min")) spec.options.fit_range.lo = require_double(kv, "fit_tau_min");
    if (kv.contains("fit_tau_max")) spec.options.fit_range.hi = require_double(kv, "fit_tau_max");
    if (kv.contains("n_bins")) spec.options.n_bins = require_uint(kv, "n_bins");
    if (kv.contains("half_width")) spec.options.half_width = require_double(kv, "half_width");
    if (kv.contains("entropy_samples")) spec.entropy_samples = require_uint(kv, "entropy_samples");
    validate(spec);
    return spec;
}

EmpiricalSeries ingest_csv(const fs::path& path, const ColumnSpec& columns) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        header = split_csv(t);
        break;
    }
    if (header.empty()) throw DataError(path.string() + ": missing header row");
    auto find_column = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (lower(header[i]) == lower(name)) return i;
        }
        throw DataError(path.string() + ": no column named '" + name + "'");
    };
    const std::size_t date_col = find_column(columns.date_column);
    const std::size_t close_col = find_column(columns.close_column);

    EmpiricalSeries series;
    series.label = path.filename().string();
    std::vector<std::pair<std::int64_t, double>> rows;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        ++series.n_rows;
        const auto fields = split_csv(t);
        if (fields.size() != header.size()) {
            ++series.n_unparseable;
            continue;
        }
        const auto day = parse_date(fields[date_col], columns.date_format);
        if (!day) {
            ++series.n_unparseable;
            continue;
        }
        const std::string& close_text = fields[close_col];
        const std::string lc = lower(close_text);
        if (close_text.empty() || lc == "na" || lc == "nan" || lc == "null" || close_text == ".") {
            ++series.n_rejected;
            continue;
        }
        const auto close = parse_double(close_text);
        if (!close) {
            ++series.n_unparseable;
            continue;
        }
        if (!(*close > 0.0) || !std::isfinite(*close)) {
            ++series.n_rejected;
            continue;
        }
        rows.emplace_back(*day, *close);
    }
    if (series.n_unparseable * 100 > series.n_rows) {
        throw DataError(path.string() + ": " + std::to_string(series.n_unparseable) + " of " +
                        std::to_string(series.n_rows) + " rows are unparseable (limit 1%)");
    }
    if (series.n_unparseable > 0) {
        series.warnings.push_back(std::to_string(series.n_unparseable) + " unparseable rows skipped");
    }
    if (series.n_rejected > 0) {
        series.warnings.push_back(std::to_string(series.n_rejected) +
                                  " rows with missing or non-positive close rejected");
    }
    if (!std::is_sorted(rows.begin(), rows.end(),
                        [](const auto& x, const auto& y) { return x.first < y.first; })) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const auto& x, const auto& y) { return x.first < y.first; });
        series.resorted = true;
        series.warnings.push_back("rows re-sorted into ascending date order");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].first == rows[i - 1].first) {
            throw DataError(path.string() + ": duplicate date " + format_date(rows[i].first));
        }
    }
    if (rows.size() < 2) throw DataError(path.string() + ": fewer than two valid rows");
    for (const auto& [d, c] : rows) {
        series.days.push_back(d);
        series.closes.push_back(c);
    }
    return series;
}

std::string format_date(std::int64_t days) {
    using namespace std::chrono;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

Trail to_trail(const EmpiricalSeries& series) {
    Trail trail;
    trail.s1 = series.closes;
    trail.returns = log_returns(trail.s1);
    trail.meta.source = TrailSource::Ingested;
    trail.meta.origin = series.label;
    trail.meta.length = trail.s1.size();
    return trail;
}

void write_trail_csv(std::ostream& out, const Trail& trail, const SimulationConfig& cfg) {
    out << "# format_version=" << kFormatVersion << "\n"
        << "# tool_version=" << kToolVersion << "\n"
        << "# source=simulated\n"
        << "# seed=" << trail.meta.seed << "\n"
        << "# run_index=" << trail.meta.run_index << "\n"
        << "# config_hash=" << trail.meta.config_hash << "\n"
        << "# config=" << cfg.canonical() << "\n"
        << "t,s1,s2,log_rb,return\n";
    for (std::size_t t = 0; t < trail.s1.size(); ++t) {
        out << t << ',' << format_double(trail.s1[t]) << ','
            << (t < trail.s2.size() ? format_double(trail.s2[t]) : "") << ','
            << (t < trail.log_rb.size() ? format_double(trail.log_rb[t]) : "") << ','
            << (t < trail.returns.size() ? format_double(trail.returns[t]) : "") << '\n';
    }
}

json trail_to_json(const Trail& trail, const SimulationConfig& cfg) {
    return json{{"format_version", kFormatVersion},
                {"tool_version", kToolVersion},
                {"source", "simulated"},
                {"seed", trail.meta.seed},
                {"run_index", trail.meta.run_index},
                {"config_hash", trail.meta.config_hash},
                {"config", cfg.canonical()},
                {"s1", trail.s1},
                {"s2", trail.s2},
                {"log_rb", trail.log_rb},
                {"returns", trail.returns}};
}

bool is_trail_csv(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto header = split_csv(t);
        return header.size() >= 2 && header[0] == "t" && header[1] == "s1";
    }
    return false;
}

Trail read_trail_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    Trail trail;
    trail.meta.source = TrailSource::Simulated;
    trail.meta.origin = path.filename().string();
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = trim(std::string_view(line).substr(1, eq - 1));
            const std::string value = trim(std::string_view(line).substr(eq + 1));
            if (key == "seed") trail.meta.seed = std::stoull(value);
            if (key == "run_index") trail.meta.run_index = std::stoull(value);
            if (key == "config_hash") trail.meta.config_hash = value;
            continue;
        }
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() < 2) throw DataError(path.string() + ":" + std::to_string(line_no) + ": short row");
        const auto s1 = parse_double(fields[1]);
        if (!s1) throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad s1");
        trail.s1.push_back(*s1);
        if (fields.size() > 2 && !fields[2].empty()) {
            if (auto s2 = parse_double(fields[2])) trail.s2.push_back(*s2);
        }
        if (fields.size() > 3 && !fields[3].empty()) {
            if (auto lr = parse_double(fields[3])) trail.log_rb.push_back(*lr);
        }
    }
    trail.returns = log_returns(trail.s1);
    trail.meta.length = trail.s1.size();
    return trail;
}

void write_acf_csv(std::ostream& out, const AcfReport& report) {
    out << "tau";
    for (int a : report.alphas) out << ",c" << a;
    out << '\n';
    for (std::size_t t = 0; t < report.taus.size(); ++t) {
        out << report.taus[t];
        for (const auto& row : report.values) out << ',' << opt_field(row[t]);
        out << '\n';
    }
}

void write_acf_csv(std::ostream& out, const CellSummary& cell) {
    out << "tau";
    for (int a : cell.alphas) out << ",c" << a;
    out << '\n';
    for (std::size_t t = 0; t < cell.taus.size(); ++t) {
        out << cell.taus[t];
        for (const auto& row : cell.acf) {
            out << ',' << (row[t].count() > 0 ? format_double(row[t].mean()) : "");
        }
        out << '\n';
    }
}

void write_hist_csv(std::ostream& out, const DistributionReport& report) {
    out << "bin_left,bin_right,count,log_density\n";
    for (std::size_t i = 0; i < report.counts.size(); ++i) {
        out << format_double(report.bin_edges[i]) << ',' << format_double(report.bin_edges[i + 1]) << ','
            << report.counts[i] << ',' << opt_field(report.log_density[i]) << '\n';
    }
}

void write_scaling_csv(std::ostream& out, const ScalingReport& report) {
    out << "q,zeta,hq,r2\n";
    for (std::size_t i = 0; i < report.qs.size(); ++i) {
        out << format_double(report.qs[i]) << ',' << format_double(report.zeta[i]) << ','
            << format_double(report.hq[i]) << ',' << format_double(report.fit_r2[i]) << '\n';
    }
}

void write_scaling_csv(std::ostream& out, const CellSummary& cell) {
    out << "q,zeta,hq,r2\n";
    for (std::size_t i = 0; i < cell.qs.size(); ++i) {
        if (cell.hq[i].count() == 0) {
            out << format_double(cell.qs[i]) << ",,,\n";
            continue;
        }
        out << format_double(cell.qs[i]) << ',' << format_double(cell.qs[i] * cell.hq[i].mean()) << ','
            << format_double(cell.hq[i].mean()) << ',' << format_double(cell.hq_r2[i].mean()) << '\n';
    }
}

void write_spectrum_csv(std::ostream& out, const SingularitySpectrum& spectrum) {
    out << "alpha,D\n";
    for (std::size_t i = 0; i < spectrum.alphas.size(); ++i) {
        out << format_double(spectrum.alphas[i]) << ',' << format_double(spectrum.d_of_alpha[i]) << '\n';
    }
}

json to_json(const PowerLawFit& fit) {
    json j{{"ok", fit.ok}, {"reliable", fit.reliable}, {"n_used", fit.n_used}, {"n_excluded", fit.n_excluded}};
    if (fit.ok) {
        j["gamma"] = fit.gamma;
        j["intercept"] = fit.intercept;
        j["r2"] = fit.r2;
    } else {
        j["gamma"] = nullptr;
        j["r2"] = nullptr;
    }
    return j;
}

json to_json(const AcfReport& report) {
    json values = json::array();
    for (const auto& row : report.values) {
        json r = json::array();
        for (const auto& v : row) r.push_back(opt_json(v));
        values.push_back(r);
    }
    json fits = json::array();
    for (const auto& f : report.fits) fits.push_back(to_json(f));
    return json{{"alphas", report.alphas},
                {"taus", report.taus},
                {"values", values},
                {"fits", fits},
                {"fit_range", {report.fit_range.lo, report.fit_range.hi}}};
}

json to_json(const DistributionReport& report) {
    json ld = json::array();
    for (const auto& v : report.log_density) ld.push_back(opt_json(v));
    return json{{"bin_edges", report.bin_edges},
                {"counts", report.counts},
                {"log_density", ld},
                {"n_samples", report.n_samples},
                {"n_outside", report.n_outside},
                {"excess_kurtosis", opt_json(report.excess_kurtosis)},
                {"shape_class", to_string(report.shape_class)},
                {"shape_statistic", report.shape_statistic}};
}

json to_json(const ScalingReport& report) {
    return json{{"qs", report.qs},         {"zeta", report.zeta},     {"hq", report.hq},
                {"lag_grid", report.lag_grid}, {"fit_r2", report.fit_r2}, {"spread", report.spread}};
}

json to_json(const SingularitySpectrum& spectrum) {
    return json{{"alphas", spectrum.alphas},
                {"d_of_alpha", spectrum.d_of_alpha},
                {"n_collapsed", spectrum.n_collapsed}};
}

json to_json(const CellSummary& cell) {
    json j{{"a", cell.a},
           {"b", cell.b},
           {"runs", cell.runs},
           {"failed", cell.failed},
           {"degenerate", cell.degenerate},
           {"failure_flag", cell.failure_flag()},
           {"convergent_cell", cell.convergent_cell()},
           {"failure_messages", cell.failure_messages}};
    if (!cell.acf.empty()) {
        json acf = json::array();
        for (std::size_t i = 0; i < cell.acf.size(); ++i) {
            json mean = json::array();
            json var = json::array();
            json sd = json::array();
            for (const auto& m : cell.acf[i]) {
                const bool has = m.count() > 0;
                mean.push_back(has ? json(m.mean()) : json(nullptr));
                var.push_back(has ? json(m.variance()) : json(nullptr));
                sd.push_back(has ? json(m.stddev()) : json(nullptr));
            }
            acf.push_back(json{{"alpha", cell.alphas[i]},
                               {"mean", mean},
                               {"variance", var},
                               {"stddev", sd},
                               {"gamma_runs", moments_json(cell.gamma[i])},
                               {"gamma_rejected", cell.gamma_rejected[i]},
                               {"mean_curve_fit", i < cell.mean_curve_fit.size() ? to_json(cell.mean_curve_fit[i])
                                                                                  : json(nullptr)}});
        }
        j["acf"] = json{{"taus", cell.taus}, {"curves", acf}};
    }
    if (cell.histogram) {
        j["kurtosis"] = moments_json(cell.kurtosis);
        j["distribution"] = cell.pooled_distribution ? to_json(*cell.pooled_distribution) : json(nullptr);
    }
    if (!cell.hq.empty()) {
        json hq = json::array();
        for (const auto& m : cell.hq) hq.push_back(moments_json(m));
        j["scaling"] = json{{"qs", cell.qs}, {"hq", hq}, {"spread", moments_json(cell.spread)}};
    }
    if (cell.entropy) {
        j["convergence"] = json{{"log_rb_slope", moments_json(cell.log_rb_slope)},
                                {"entropy_growth_rate", cell.entropy->value},
                                {"entropy_stderr", cell.entropy->std_error}};
    }
    j["pipeline"] = pipeline_summary(cell);
    return j;
}

json to_json(const ConvergenceRecord& rec) {
    return json{{"mode", to_string(rec.mode)},
                {"a", rec.a},
                {"b", rec.b},
                {"window_lo", rec.window_lo},
                {"window_hi", rec.window_hi},
                {"slopes", rec.slopes},
                {"r2", rec.r2},
                {"mean_slope", rec.mean_slope},
                {"slope_stderr", rec.slope_stderr},
                {"entropy_growth_rate", rec.entropy.value},
                {"entropy_stderr", rec.entropy.std_error},
                {"z_score", rec.z_score},
                {"mean_trace_slope", rec.mean_trace_slope},
                {"mean_trace_r2", rec.mean_trace_r2},
                {"max_price_deviation", rec.max_price_deviation}};
}

json to_json(const ControlBand& band) {
    return json{{"generator", band.generator == ControlGenerator::GaussianWalk ? "gaussian_walk"
                                                                                : "multiplicative_walk"},
                {"length", band.length},
                {"spreads", band.spreads},
                {"median", band.median},
                {"p95", band.p95},
                {"qs", band.qs},
                {"hq_mean", band.hq_mean},
                {"hq_stddev", band.hq_stddev}};
}

json to_json(const SeriesAnalysis& analysis) {
    json j{{"n_returns", analysis.n_returns}, {"degenerate", analysis.degenerate}};
    if (analysis.degenerate) j["degenerate_reason"] = analysis.degenerate_reason;
    if (analysis.acf) j["acf"] = to_json(*analysis.acf);
    if (analysis.scaling) j["scaling"] = to_json(*analysis.scaling);
    if (analysis.spectrum) j["spectrum"] = to_json(*analysis.spectrum);
    if (analysis.distribution) j["distribution"] = to_json(*analysis.distribution);
    return j;
}

namespace {

json c2_short_lag_mean(const std::vector<int>& alphas, const std::vector<std::optional<double>>* curve) {
    (void)alphas;
    if (curve == nullptr) return nullptr;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 1; t < curve->size() && t <= 100; ++t) {
        if ((*curve)[t]) {
            sum += *(*curve)[t];
            ++n;
        }
    }
    return n > 0 ? json(sum / static_cast<double>(n)) : json(nullptr);
}

}  // namespace

json pipeline_summary(const SeriesAnalysis& analysis) {
    json j{{"n_returns", analysis.n_returns}, {"degenerate", analysis.degenerate}};
    if (analysis.acf) {
        json gammas = json::array();
        const std::vector<std::optional<double>>* c2 = nullptr;
        for (std::size_t i = 0; i < analysis.acf->alphas.size(); ++i) {
            const auto& f = analysis.acf->fits[i];
            gammas.push_back(f.ok ? json(f.gamma) : json(nullptr));
            if (analysis.acf->alphas[i] == 2) c2 = &analysis.acf->values[i];
        }
        j["alphas"] = analysis.acf->alphas;
        j["gamma"] = gammas;
        j["c2_mean_lag_1_100"] = c2_short_lag_mean(analysis.acf->alphas, c2);
    }
    if (analysis.distribution) {
        j["excess_kurtosis"] = opt_json(analysis.distribution->excess_kurtosis);
        j["shape_class"] = to_string(analysis.distribution->shape_class);
        j["shape_statistic"] = analysis.distribution->shape_statistic;
    }
    if (analysis.scaling) {
        j["qs"] = analysis.scaling->qs;
        j["hq"] = analysis.scaling->hq;
        j["hq_spread"] = analysis.scaling->spread;
    }
    return j;
}

json pipeline_summary(const CellSummary& cell) {
    json j{{"runs", cell.runs}, {"degenerate_runs", cell.degenerate}};
    if (!cell.acf.empty()) {
        json gammas = json::array();
        std::optional<std::vector<std::optional<double>>> c2;
        for (std::size_t i = 0; i < cell.alphas.size(); ++i) {
            const auto& g = cell.gamma[i];
            gammas.push_back(g.count() > 0 ? json(g.mean()) : json(nullptr));
            if (cell.alphas[i] == 2) c2 = cell.mean_curve(i);
        }
        j["alphas"] = cell.alphas;
        j["gamma"] = gammas;
        j["c2_mean_lag_1_100"] = c2_short_lag_mean(cell.alphas, c2 ? &*c2 : nullptr);
    }
    if (cell.histogram) {
        j["excess_kurtosis"] = cell.kurtosis.count() > 0 ? json(cell.kurtosis.mean()) : json(nullptr);
        if (cell.pooled_distribution) {
            j["shape_class"] = to_string(cell.pooled_distribution->shape_class);
            j["shape_statistic"] = cell.pooled_distribution->shape_statistic;
        }
    }
    if (!cell.hq.empty()) {
        json hq = json::array();
        for (const auto& m : cell.hq) hq.push_back(m.count() > 0 ? json(m.mean()) : json(nullptr));
        j["qs"] = cell.qs;
        j["hq"] = hq;
        j["hq_spread"] = cell.spread.count() > 0 ? json(cell.spread.mean()) : json(nullptr);
    }
    return j;
}

void write_text_file(const fs::path& path, const std::string& text) { write_file(path, text); }

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_sweep_outputs(const fs::path& out_dir, const SweepSpec& spec, const std::vector<CellSummary>& cells) {
    json cell_list = json::array();
    for (const auto& cell : cells) {
        const std::string label = cell_label(cell.a, cell.b);
        const fs::path dir = out_dir / "sweep" / label;
        fs::create_directories(dir);
        json summary = to_json(cell);
        summary["format_version"] = kFormatVersion;
        summary["tool_version"] = kToolVersion;
        summary["master_seed"] = spec.master_seed;
        summary["spec_hash"] = hex64(spec.hash());
        write_file(dir / "summary.json", summary.dump(2) + "\n");
        if (!cell.acf.empty()) write_file(dir / "acf.csv", render([&](std::ostream& o) { write_acf_csv(o, cell); }));
        if (!cell.hq.empty()) {
            write_file(dir / "scaling.csv", render([&](std::ostream& o) { write_scaling_csv(o, cell); }));
        }
        if (cell.pooled_distribution) {
            write_file(dir / "hist.csv", render([&](std::ostream& o) { write_hist_csv(o, *cell.pooled_distribution); }));
        }
        cell_list.push_back(json{{"label", label},
                                 {"a", cell.a},
                                 {"b", cell.b},
                                 {"runs", cell.runs},
                                 {"failed", cell.failed},
                                 {"degenerate", cell.degenerate},
                                 {"failure_flag", cell.failure_flag()},
                                 {"convergent_cell", cell.convergent_cell()}});
    }
    json analyses = json::array();
    for (auto a : spec.analyses) analyses.push_back(to_string(a));
    json manifest{{"format_version", kFormatVersion},
                  {"tool_version", kToolVersion},
                  {"spec", spec.canonical()},
                  {"spec_hash", hex64(spec.hash())},
                  {"master_seed", spec.master_seed},
                  {"a_grid", spec.a_grid},
                  {"b_grid", spec.b_grid},
                  {"runs_per_cell", spec.runs_per_cell},
                  {"trail_length", spec.trail_length},
                  {"burn_in", spec.burn_in},
                  {"analyses", analyses},
                  {"rng", "mt19937_64 seeded by splitmix64(master_seed, run_index, stream_role)"},
                  {"cells", cell_list}};
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void emit_plot_data(const ConvergenceRecord& record, const fs::path& dir) {
    const bool wealth = record.mode == ConvergenceMode::WealthDecay;
    const char* column = wealth ? "ln_rb" : "ln_abs_s1_minus_half";
    auto series = [&](const std::vector<double>& t, const std::vector<double>& y, const std::string& what) {
        std::ostringstream data;
        data << "# format_version=" << kFormatVersion << "\n# mode=" << to_string(record.mode) << " trace=" << what
             << "\n";
        if (t.size() >= 2) {
            const LinearFit fit = linear_fit(t, y);
            data << "# fit: slope=" << format_double(fit.slope) << " intercept=" << format_double(fit.intercept)
                 << " r2=" << format_double(fit.r2) << "\n";
        }
        data << "# entropy_growth_rate=" << format_double(record.entropy.value) << "\n# t " << column << "\n";
        for (std::size_t i = 0; i < t.size(); ++i) data << format_double(t[i]) << ' ' << format_double(y[i]) << '\n';
        return data.str();
    };
    write_file(dir / "convergence.dat", series(record.trace_t, record.trace_log, "first_seed"));
    write_file(dir / "convergence_mean.dat", series(record.mean_trace_t, record.mean_trace_log, "seed_mean"));
    write_file(dir / "convergence.gp",
               std::string("set xlabel 't'\nset ylabel '") + (wealth ? "ln r^b_t" : "ln|S^1_t - 1/2|") +
                   "'\nplot 'convergence.dat' using 1:2 with lines title 'first seed', "
                   "'convergence_mean.dat' using 1:2 with lines title 'seed mean'\n");
}

void emit_plot_data(const AcfReport& report, const fs::path& dir) {
    std::ostringstream data;
    data << "# format_version=" << kFormatVersion << "\n# tau";
    for (int a : report.alphas) data << " c" << a;
    data << '\n';
    for (std::size_t t = 1; t < report.taus.size(); ++t) {
        data << report.taus[t];
        for (const auto& row : report.values) data << ' ' << (row[t] ? format_double(*row[t]) : "NaN");
        data << '\n';
    }
    write_file(dir / "acf.dat", data.str());
    std::ostringstream gp;
    gp << "set logscale xy\nset xlabel 'tau'\nset ylabel 'C_alpha(tau)'\nplot ";
    for (std::size_t i = 0; i < report.alphas.size(); ++i) {
        gp << (i ? ", " : "") << "'acf.dat' using 1:" << i + 2 << " with lines title 'C" << report.alphas[i] << "'";
    }
    gp << '\n';
    write_file(dir / "acf.gp", gp.str());
}

void emit_plot_data(const CellSummary& cell, const fs::path& dir) {
    if (!cell.acf.empty()) {
        std::ostringstream data;
        data << "# format_version=" << kFormatVersion << "\n# a=" << format_double(cell.a)
             << " b=" << format_double(cell.b) << " runs=" << cell.runs << "\n# tau";
        for (int a : cell.alphas) data << " mean" << a << " stddev" << a << " lo2sd" << a << " hi2sd" << a << " var" << a;
        data << '\n';
        for (std::size_t t = 1; t < cell.taus.size(); ++t) {
            data << cell.taus[t];
            for (const auto& row : cell.acf) {
                const auto& m = row[t];
                if (m.count() == 0) {
                    data << " NaN NaN NaN NaN NaN";
                    continue;
                }
                data << ' ' << format_double(m.mean()) << ' ' << format_double(m.stddev()) << ' '
                     << format_double(m.mean() - 2.0 * m.stddev()) << ' '
                     << format_double(m.mean() + 2.0 * m.stddev()) << ' ' << format_double(m.variance());
            }
            data << '\n';
        }
        write_file(dir / "acf_band.dat", data.str());
        std::ostringstream gp;
        gp << "set logscale x\nset xlabel 'tau'\nset ylabel '<C_alpha(tau)>'\nplot ";
        for (std::size_t i = 0; i < cell.alphas.size(); ++i) {
            const std::size_t col = 2 + 5 * i;
            gp << (i ? ", " : "") << "'acf_band.dat' using 1:" << col << ":" << col + 2 << ":" << col + 3
               << " with yerrorlines title 'C" << cell.alphas[i] << " +/- 2 sd'";
        }
        gp << '\n';
        write_file(dir / "acf_band.gp", gp.str());
    }
    if (cell.pooled_distribution) emit_plot_data(*cell.pooled_distribution, dir);
}

void emit_plot_data(const ScalingReport& report, const fs::path& dir, const ControlBand* control) {
    std::ostringstream data;
    data << "# format_version=" << kFormatVersion << "\n# spread=" << format_double(report.spread) << "\n";
    if (control != nullptr) {
        data << "# control_length=" << control->length << " control_p95_spread=" << format_double(control->p95) << "\n";
        data << "# q hq control_lo control_hi\n";
    } else {
        data << "# q hq\n";
    }
    for (std::size_t i = 0; i < report.qs.size(); ++i) {
        data << format_double(report.qs[i]) << ' ' << format_double(report.hq[i]);
        if (control != nullptr && i < control->hq_mean.size()) {
            data << ' ' << format_double(control->hq_mean[i] - 2.0 * control->hq_stddev[i]) << ' '
                 << format_double(control->hq_mean[i] + 2.0 * control->hq_stddev[i]);
        }
        data << '\n';
    }
    write_file(dir / "multiscaling.dat", data.str());
    std::string gp = "set xlabel 'q'\nset ylabel 'h_q = zeta(q)/q'\nplot 'multiscaling.dat' using 1:2 with linespoints title 'h_q'";
    if (control != nullptr) gp += ", '' using 1:3:4 with filledcurves fs transparent solid 0.2 title 'control +/- 2 sd'";
    write_file(dir / "multiscaling.gp", gp + "\n");
}

void emit_plot_data(const DistributionReport& report, const fs::path& dir) {
    std::ostringstream data;
    data << "# format_version=" << kFormatVersion << "\n# shape_class=" << to_string(report.shape_class)
         << " shape_statistic=" << format_double(report.shape_statistic) << "\n# z log_density\n";
    for (std::size_t i = 0; i < report.counts.size(); ++i) {
        if (!report.log_density[i]) continue;
        data << format_double(0.5 * (report.bin_edges[i] + report.bin_edges[i + 1])) << ' '
             << format_double(*report.log_density[i]) << '\n';
    }
    write_file(dir / "density.dat", data.str());
    write_file(dir / "density.gp",
               "set xlabel 'standardized return'\nset ylabel 'ln f(z)'\nplot 'density.dat' using 1:2 with points title 'log density'\n");
}

}  // namespace twoscale
