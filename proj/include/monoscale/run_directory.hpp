#pragma once

// Run directories: config snapshot, event log, per-stage memories and
// warm-up tasks, and the CSV / Markdown stage reports.
//
//   <out>/config.snapshot
//   <out>/events.jsonl
//   <out>/memory/stage_<k>.json
//   <out>/tasks/stage_<k>.jsonl
//   <out>/report.csv
//   <out>/report.md

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "monoscale/config.hpp"
#include "monoscale/errors.hpp"
#include "monoscale/memory_json.hpp"
#include "monoscale/stages.hpp"

namespace monoscale {

namespace fs = std::filesystem;

inline constexpr const char* kOutRootVariable = "MONOSCALE_OUT_ROOT";
inline constexpr const char* kDefaultOutRoot = "runs";

/// $MONOSCALE_OUT_ROOT if set and nonempty, else "runs".
inline fs::path default_out_root() {
  const char* v = std::getenv(kOutRootVariable);
  return (v && *v) ? fs::path(v) : fs::path(kDefaultOutRoot);
}

inline fs::path memory_path(const fs::path& run, int k) {
  return run / "memory" / ("stage_" + std::to_string(k) + ".json");
}

inline fs::path tasks_path(const fs::path& run, int k) {
  return run / "tasks" / ("stage_" + std::to_string(k) + ".jsonl");
}

// ---------------------------------------------------------------------------
// Report rows

struct ReportRow {
  std::string run_id;
  std::string mode;
  std::uint64_t seed = 0;
  int stage = 0;
  std::size_t pool_size = 0;
  double j_exact = 0.0;
  double j_fallback = 0.0;
  Divergence kl = Divergence::finite(0.0);
  std::string chosen_kind;
  double monotone_margin = 0.0;
  std::size_t warm_kept = 0;
  std::size_t buffer_n = 0;

  bool operator==(const ReportRow&) const = default;
};

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {"run_id",    "mode",        "seed",          "stage",
                                                "pool_size", "j_exact",     "j_fallback",    "kl",
                                                "chosen_kind", "monotone_margin", "warm_kept", "buffer_n"};
  return cols;
}

inline ReportRow report_row(const RunConfig& c, const StageReport& r) {
  return ReportRow{c.effective_run_id(),
                   std::string(to_string(c.scenario.mode)),
                   c.scenario.seed,
                   r.k,
                   r.pool_size,
                   r.j_after,
                   r.j_before,
                   r.kl,
                   std::string(to_string(r.chosen_kind)),
                   r.margin,
                   r.warm_kept,
                   r.buffer_n};
}

/// 12 significant digits, '.' decimal point, no grouping.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string csv_header() {
  std::string out;
  for (std::size_t i = 0; i < report_columns().size(); ++i) out += (i ? "," : "") + report_columns()[i];
  return out + "\n";
}

inline std::string to_csv_line(const ReportRow& r) {
  std::ostringstream os;
  os << r.run_id << ',' << r.mode << ',' << r.seed << ',' << r.stage << ',' << r.pool_size << ','
     << format_number(r.j_exact) << ',' << format_number(r.j_fallback) << ',' << r.kl.str() << ',' << r.chosen_kind
     << ',' << format_number(r.monotone_margin) << ',' << r.warm_kept << ',' << r.buffer_n << '\n';
  return os.str();
}

inline std::string to_csv(const std::vector<ReportRow>& rows) {
  std::string out = csv_header();
  for (const auto& r : rows) out += to_csv_line(r);
  return out;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw Error("report.csv: bad number '" + s + "'");
  return v;
}

inline unsigned long long parse_unsigned(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw Error("report.csv: bad integer '" + s + "'");
  return v;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + p.string() + "'");
}

}  // namespace detail

inline std::vector<ReportRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line + "\n" != csv_header()) throw Error("report.csv: unexpected header");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != report_columns().size()) throw Error("report.csv: wrong column count in '" + line + "'");
    ReportRow r;
    r.run_id = f[0];
    r.mode = f[1];
    r.seed = detail::parse_unsigned(f[2]);
    r.stage = static_cast<int>(detail::parse_unsigned(f[3]));
    r.pool_size = detail::parse_unsigned(f[4]);
    r.j_exact = detail::parse_double(f[5]);
    r.j_fallback = detail::parse_double(f[6]);
    r.kl = f[7] == "INF" ? Divergence::infinite() : Divergence::finite(detail::parse_double(f[7]));
    r.chosen_kind = f[8];
    r.monotone_margin = detail::parse_double(f[9]);
    r.warm_kept = detail::parse_unsigned(f[10]);
    r.buffer_n = detail::parse_unsigned(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Per-stage J table with the margin column, one row per stage.
inline std::string to_markdown(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  if (!rows.empty()) os << "# " << rows.front().run_id << "\n\nmode: " << rows.front().mode
                        << ", seed: " << rows.front().seed << "\n\n";
  os << "| stage | agents | J | J fallback | margin | KL | chosen | warm kept | buffer |\n";
  os << "|---:|---:|---:|---:|---:|---:|:---|---:|---:|\n";
  for (const auto& r : rows) {
    char j[32], jf[32], m[32];
    std::snprintf(j, sizeof j, "%.4f", r.j_exact);
    std::snprintf(jf, sizeof jf, "%.4f", r.j_fallback);
    std::snprintf(m, sizeof m, "%+.4f", r.monotone_margin);
    os << "| " << r.stage << " | " << r.pool_size << " | " << j << " | " << jf << " | " << m << " | " << r.kl.str()
       << " | " << r.chosen_kind << " | " << r.warm_kept << " | " << r.buffer_n << " |\n";
  }
  if (rows.size() >= 2) {
    char d[32];
    std::snprintf(d, sizeof d, "%+.4f", rows.back().j_exact - rows.front().j_exact);
    os << "\nJ change from stage " << rows.front().stage << " to stage " << rows.back().stage << ": " << d << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Writing a run

inline const std::vector<std::string>& run_files() {
  static const std::vector<std::string> files = {"config.snapshot", "events.jsonl", "report.csv", "report.md",
                                                 "memory"};
  return files;
}

/// Entries of `run_files()` missing under `dir`.
inline std::vector<std::string> missing_run_files(const fs::path& dir) {
  std::vector<std::string> missing;
  for (const auto& f : run_files())
    if (!fs::exists(dir / f)) missing.push_back(f);
  return missing;
}

/**
 * Creates `dir` or checks that it is empty. With `force`, files a previous
 * run wrote are removed first; anything else in the directory is left alone
 * and still counts as content.
 */
inline void prepare_run_directory(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
  if (fs::exists(dir) && force) {
    for (const auto& f : run_files()) fs::remove_all(dir / f);
    fs::remove_all(dir / "tasks");
  }
  if (fs::exists(dir) && !fs::is_empty(dir))
    throw ConfigError("output directory '" + dir.string() + "' is not empty (use --force to overwrite a run)");
  fs::create_directories(dir / "memory");
  fs::create_directories(dir / "tasks");
}

struct ResumeFrom {
  int stage = 0;
  fs::path memory_file;
};

struct RunOutcome {
  std::vector<StageReport> reports;
  std::vector<ReportRow> rows;
  AuditResult audit;
};

/**
 * Runs a scenario into `dir`, which prepare_run_directory has readied. With
 * `resume`, the state after `resume->stage` is rebuilt from the stored
 * memory and only later stages are run and written.
 */
inline RunOutcome write_run(const RunConfig& config, const fs::path& dir, const std::optional<ResumeFrom>& resume = {}) {
  const auto& s = config.scenario;
  detail::write_file(dir / "config.snapshot", dump_config(config));

  std::ofstream events(dir / "events.jsonl", std::ios::binary | std::ios::trunc);
  if (!events) throw Error("cannot write '" + (dir / "events.jsonl").string() + "'");
  EventSink sink = [&](const Json& e) { events << e.dump() << '\n'; };

  auto observer = [&](const StageResult& r) {
    detail::write_file(memory_path(dir, r.report.k), dump_memory(r.state.memory));
    if (!r.tasks.empty() || (s.mode == Mode::monoscale && r.report.k > 0)) {
      std::string lines;
      for (const auto& t : r.tasks) lines += to_json(s.space, r.state.bandit.pool(), t).dump() + "\n";
      detail::write_file(tasks_path(dir, r.report.k), lines);
    }
  };

  std::optional<StageState> from;
  if (resume) from = resume_state(s, resume->stage, load_memory(resume->memory_file.string()));

  RunOutcome out;
  out.reports = run_scenario(s, sink, observer, std::move(from));
  events.close();
  if (!events) throw Error("write failed for events.jsonl");

  for (const auto& r : out.reports) out.rows.push_back(report_row(config, r));
  detail::write_file(dir / "report.csv", to_csv(out.rows));
  detail::write_file(dir / "report.md", to_markdown(out.rows));
  if (out.reports.size() >= 2) out.audit = audit_monotonicity(out.reports);
  return out;
}

}  // namespace monoscale
