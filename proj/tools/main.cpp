#include "stages.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <map>

namespace fs = std::filesystem;
using namespace ocpcli;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<unsigned long long> seed;
  std::optional<int> jobs;
  std::string log_level = "info";
  std::optional<std::string> certificate;
};

void add_common(CLI::App& app, Flags& f) {
  app.add_option("--config", f.config, "experiment config (YAML)")->envname("OCPKIT_CONFIG")->required();
  app.add_option("--out", f.out, "artifact directory (overrides the config's output)")->envname("OCPKIT_OUT");
  app.add_option("--seed", f.seed, "random seed (overrides the config)")->envname("OCPKIT_SEED");
  app.add_option("--jobs", f.jobs, "worker threads (overrides the config)")
      ->envname("OCPKIT_JOBS")
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", f.log_level, "trace, debug, info, warn, error or off")
      ->envname("OCPKIT_LOG_LEVEL")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
}

Context make_context(const Flags& f) {
  Context ctx;
  ctx.config = load_config(f.config);
  const std::string out = f.out.empty() ? ctx.config.output : f.out;
  if (out.empty()) throw ConfigError(f.config + ": output: not set in the config and no --out given");
  ctx.out = out;
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  const fs::path probe = ctx.out / ".ocpkit_write_probe";
  if (ec || !std::ofstream(probe)) throw ConfigError(f.config + ": output: directory '" + out + "' is not writable");
  fs::remove(probe, ec);
  ctx.seed = f.seed.value_or(ctx.config.seed);
  ctx.jobs = f.jobs.value_or(ctx.config.jobs);
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turnpike and dissipativity analysis of optimal control problems"};
  app.require_subcommand(1);
  Flags flags;

  const std::map<std::string, std::string> commands = {
      {"simulate", "integrate the model under the configured input"},
      {"steady-state", "optimal steady state -> steady_state.json"},
      {"solve-ocp", "OCP sweep -> ocp_<i>.csv, ocp_summary.json"},
      {"turnpike", "turnpike measures of stored trajectories -> turnpike_report.json"},
      {"certify", "storage function synthesis -> certificate.json"},
      {"check-cert", "pointwise certificate check -> certificate_check.json"},
      {"residuals", "dissipation residuals along stored trajectories -> residuals_<i>.csv"},
      {"report", "aggregate existing artifacts -> report.json"},
      {"run", "the full pipeline"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(*sub, flags);
    subs[name] = sub;
  }
  subs["check-cert"]->add_option("--certificate", flags.certificate, "certificate to check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  auto logger = spdlog::stderr_logger_st("ocpkit");
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::from_str(flags.log_level));
  spdlog::set_default_logger(logger);

  try {
    const Context ctx = make_context(flags);
    if (subs["simulate"]->parsed()) return stage_simulate(ctx);
    if (subs["steady-state"]->parsed()) return stage_steady_state(ctx);
    if (subs["solve-ocp"]->parsed()) return stage_solve_ocp(ctx);
    if (subs["turnpike"]->parsed()) return stage_turnpike(ctx);
    if (subs["certify"]->parsed()) return stage_certify(ctx);
    if (subs["check-cert"]->parsed()) return stage_check_cert(ctx, flags.certificate);
    if (subs["residuals"]->parsed()) return stage_residuals(ctx);
    if (subs["report"]->parsed()) return stage_report(ctx);
    return run_pipeline(ctx);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const MissingArtifacts& e) {
    spdlog::error("missing artifacts:");
    for (const auto& f : e.files()) spdlog::error("  {}", f);
    return kFailure;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
}
