#pragma once

#include "config.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ocpcli {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2 };

struct Context {
  ExperimentConfig config;
  std::filesystem::path out;
  unsigned long long seed = 0;
  int jobs = 1;
};

/// Upstream artifacts that a stage needs but cannot find.
class MissingArtifacts : public std::runtime_error {
 public:
  explicit MissingArtifacts(std::vector<std::string> files);
  [[nodiscard]] const std::vector<std::string>& files() const { return files_; }

 private:
  std::vector<std::string> files_;
};

/// Each stage reads its inputs from and writes its artifacts to ctx.out.
/// Returns an exit code; throws ConfigError for a block the stage needs but
/// the config lacks, and MissingArtifacts for absent inputs.
int stage_simulate(const Context& ctx);
int stage_steady_state(const Context& ctx);
int stage_solve_ocp(const Context& ctx);
int stage_turnpike(const Context& ctx);
int stage_certify(const Context& ctx);
/// `certificate` defaults to <out>/certificate.json.
int stage_check_cert(const Context& ctx, const std::optional<std::string>& certificate);
int stage_residuals(const Context& ctx);
int stage_report(const Context& ctx);

/// Every stage enabled by the config, in order; stops at the first failure.
int run_pipeline(const Context& ctx);

}  // namespace ocpcli
