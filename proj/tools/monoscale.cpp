// monoscale: run expansion scenarios, verify the numerical checks, render
// reports and inspect stored memories.
//
// Exit codes: 0 success, 1 a verify check failed, 2 usage or config error,
// 3 runtime error.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "monoscale/monoscale.hpp"

namespace {

using namespace monoscale;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> eval;
  bool force = false;
  std::optional<int> resume_stage;
  std::string resume_from;
};

int cmd_run(const RunArgs& a) {
  RunConfig config = load_config(a.config);
  auto& s = config.scenario;
  if (a.seed) s.seed = *a.seed;
  if (a.mode) s.mode = mode_from_string(*a.mode);
  if (a.eval) s.trust.evaluation = evaluation_from_string(*a.eval);
  s.validate();

  std::optional<ResumeFrom> resume;
  if (a.resume_stage) {
    if (a.resume_from.empty()) throw ConfigError("--resume-stage needs --resume-from <run dir>");
    resume = ResumeFrom{*a.resume_stage, memory_path(a.resume_from, *a.resume_stage)};
    if (!fs::exists(resume->memory_file)) throw ConfigError("no memory file '" + resume->memory_file.string() + "'");
  } else if (!a.resume_from.empty()) {
    throw ConfigError("--resume-from needs --resume-stage <k>");
  }

  const fs::path out = a.out.empty() ? default_out_root() / config.effective_run_id() : fs::path(a.out);
  prepare_run_directory(out, a.force);
  const auto result = write_run(config, out, resume);

  for (const auto& r : result.rows)
    std::printf("stage %d  agents %zu  J %.6f  margin %+.6f  kl %s  %s\n", r.stage, r.pool_size, r.j_exact,
                r.monotone_margin, r.kl.str().c_str(), r.chosen_kind.c_str());
  if (result.reports.size() >= 2) {
    if (result.audit.pass)
      std::printf("monotonicity: pass\n");
    else
      std::printf("monotonicity: violated at stage %d (margin %.6g)%s\n", *result.audit.stage, result.audit.margin,
                  result.audit.estimation_mode ? " [estimation_mode]" : "");
  }
  std::printf("wrote %s\n", out.string().c_str());
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_verify(const std::string& checks, std::size_t trials, std::uint64_t seed, const std::string& mode) {
  if (trials < 1) throw ConfigError("--trials must be at least 1");
  const auto names = split_list(checks);
  if (names.empty()) throw ConfigError("--checks names no checks");
  for (const auto& n : names)
    if (std::find(check_names().begin(), check_names().end(), n) == check_names().end())
      throw ConfigError("unknown check '" + n + "'");
  const Mode m = mode_from_string(mode);

  bool all = true;
  for (const auto& n : names) {
    const auto r = run_check(n, trials, seed, m);
    std::printf("%-9s %s  %zu/%zu trials", n.c_str(), r.pass() ? "PASS" : "FAIL", r.trials - r.failures.size(),
                r.trials);
    if (n == "surrogate" || n == "bridge") std::printf("  worst residual %.3g", r.worst);
    std::printf("\n");
    for (const auto& f : r.failures) std::printf("  seed %llu: %s\n", static_cast<unsigned long long>(f.seed), f.detail.c_str());
    all = all && r.pass();
  }
  return all ? kExitOk : kExitCheckFailed;
}

int cmd_report(const std::string& run, const std::string& format) {
  const fs::path dir(run);
  if (!fs::is_directory(dir)) {
    std::fprintf(stderr, "error: run directory '%s' does not exist\n", run.c_str());
    return kExitRuntime;
  }
  const auto missing = missing_run_files(dir);
  if (!missing.empty()) {
    std::fprintf(stderr, "error: incomplete run directory '%s'; missing:", run.c_str());
    for (const auto& m : missing) std::fprintf(stderr, " %s", m.c_str());
    std::fprintf(stderr, "\n");
    return kExitRuntime;
  }
  const auto rows = parse_csv(detail::read_file(dir / "report.csv"));
  std::cout << (format == "md" ? to_markdown(rows) : to_csv(rows));
  return kExitOk;
}

int cmd_inspect_memory(const std::string& file) {
  const Memory m = load_memory(file);
  std::vector<const MemoryEntry*> entries;
  for (const auto& e : m.entries()) entries.push_back(&e);
  std::stable_sort(entries.begin(), entries.end(), [](const MemoryEntry* a, const MemoryEntry* b) {
    if (a->priority != b->priority) return a->priority > b->priority;
    return a->id < b->id;
  });

  std::printf("budget %zu, %zu entries (%zu counted)\n", m.budget(), m.size(), m.budgeted_size());
  std::printf("| id | title | condition | agent | effect | priority | confidence | provenance |\n");
  std::printf("|---|---|---|---|---|---:|---:|---|\n");
  for (const auto* e : entries) {
    const std::string priority = e->priority == kFallbackPriority ? "max" : std::to_string(e->priority);
    char effect[64];
    if (e->effect.kind == EffectKind::forbid)
      std::snprintf(effect, sizeof effect, "forbid");
    else
      std::snprintf(effect, sizeof effect, "%s %.3g", std::string(to_string(e->effect.kind)).c_str(),
                    e->effect.magnitude);
    std::printf("| %s | %s | %s | %s | %s | %s | %.3f | stage %d, n=%d, rate=%.3f |\n", e->id.c_str(),
                e->title.c_str(), describe(e->condition).c_str(), e->target_agent.c_str(), effect, priority.c_str(),
                e->confidence, e->provenance.stage, e->provenance.evidence_count, e->provenance.success_rate);
  }
  return kExitOk;
}

int cmd_init_config(const std::string& preset, std::uint64_t seed, const std::string& mode, const std::string& out) {
  RunConfig c;
  c.scenario = preset_scenario(preset, seed, mode_from_string(mode));
  c.scenario.validate();
  if (out.empty())
    std::cout << dump_config(c);
  else
    detail::write_file(out, dump_config(c));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expansion-aware routing memory simulator"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario into a run directory");
  run_cmd->add_option("--config", run.config, "Scenario config (JSON)")->required();
  run_cmd->add_option("--out", run.out, "Output directory (default: $MONOSCALE_OUT_ROOT/<run_id>)");
  run_cmd->add_option("--seed", run.seed, "Override the master seed");
  run_cmd->add_option("--mode", run.mode, "Override the mode")->check(CLI::IsMember({"monoscale", "naive", "frozen"}));
  run_cmd->add_option("--eval", run.eval, "Override the update evaluation")->check(CLI::IsMember({"exact", "empirical"}));
  run_cmd->add_flag("--force", run.force, "Overwrite a previous run in --out");
  run_cmd->add_option("--resume-stage", run.resume_stage, "Resume after stage k");
  run_cmd->add_option("--resume-from", run.resume_from, "Run directory holding memory/stage_<k>.json");

  std::string checks = "surrogate,bridge,monotone,fallback,kl";
  std::size_t trials = 100;
  std::uint64_t verify_seed = 0;
  std::string verify_mode = "monoscale";
  auto* verify_cmd = app.add_subcommand("verify", "Run the numerical checks");
  verify_cmd->add_option("--checks", checks, "Comma-separated: surrogate,bridge,monotone,fallback,kl");
  verify_cmd->add_option("--trials", trials, "Trials per check");
  verify_cmd->add_option("--seed", verify_seed, "Master seed");
  verify_cmd->add_option("--mode", verify_mode, "Mode for the monotone check")
      ->check(CLI::IsMember({"monoscale", "naive", "frozen"}));

  std::string report_run;
  std::string report_format = "csv";
  auto* report_cmd = app.add_subcommand("report", "Render a run's stage report");
  report_cmd->add_option("--run", report_run, "Run directory")->required();
  report_cmd->add_option("--format", report_format, "csv or md")->check(CLI::IsMember({"csv", "md"}));

  std::string memory_file;
  auto* inspect_cmd = app.add_subcommand("inspect-memory", "Print a stored memory as a table");
  inspect_cmd->add_option("--file", memory_file, "memory/stage_<k>.json")->required();

  std::string init_preset = "clean_10";
  std::uint64_t init_seed = 0;
  std::string init_mode = "monoscale";
  std::string init_out;
  auto* init_cmd = app.add_subcommand("init-config", "Write a config with every default spelled out");
  init_cmd->add_option("--preset", init_preset, "clean_10 or malfunctioning_10")
      ->check(CLI::IsMember(presets::names()));
  init_cmd->add_option("--seed", init_seed, "Master seed");
  init_cmd->add_option("--mode", init_mode, "Mode")->check(CLI::IsMember({"monoscale", "naive", "frozen"}));
  init_cmd->add_option("--out", init_out, "Write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*verify_cmd) return cmd_verify(checks, trials, verify_seed, verify_mode);
    if (*report_cmd) return cmd_report(report_run, report_format);
    if (*inspect_cmd) return cmd_inspect_memory(memory_file);
    if (*init_cmd) return cmd_init_config(init_preset, init_seed, init_mode, init_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
