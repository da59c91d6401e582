#pragma once

#include "ocpkit/dissipativity.hpp"
#include "ocpkit/turnpike.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ocpcli {

using ocpkit::Box;
using ocpkit::Vec;

/// Schema violation; the message is "<file>:<line>:<column>: <field>: <reason>".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

/// kind "reactor": Van de Vusse CSTR with optional parameter overrides.
/// kind "polynomial": states, inputs, dynamics and cost given as polynomial text.
struct ModelConfig {
  std::string label;
  std::string kind;
  ocpkit::ReactorParams params;
  int taylor_order = 4;
  double taylor_center = 110.0;
  std::vector<std::string> states;
  std::vector<std::string> inputs;
  std::vector<ocpkit::Polynomial> dynamics;
  ocpkit::Polynomial cost;
  Box state_box;
  Box input_box;
};

struct SimulateConfig {
  Vec x0;
  std::vector<Vec> inputs;  // one per equal interval
  double T = 1.0;
  double step = 1e-3;
};

struct OcpConfig {
  std::vector<Vec> x0;
  std::vector<double> T;
  int N = 0;                        // fixed interval count, or
  double intervals_per_unit = 0.0;  // N = round(T * intervals_per_unit)
  double step = 1e-3;
  double fine_step = 1e-3;
  ocpkit::ObjectiveMode objective = ocpkit::ObjectiveMode::averaged;

  [[nodiscard]] int intervals(double horizon) const;
  [[nodiscard]] int runs() const { return static_cast<int>(x0.size() * T.size()); }
};

struct TurnpikeConfig {
  std::vector<double> epsilon;
  double delta0 = 1e-6;
  ocpkit::ThetaKind kind = ocpkit::ThetaKind::state;
};

struct DissipativityConfig {
  ocpkit::SynthesisOptions synthesis;
  ocpkit::CheckOptions check;
};

/// Pass/fail thresholds evaluated by `report`. Unset entries are not checked.
struct ChecksConfig {
  struct Reference {
    Vec x;
    Vec u;
    double tolerance = 0.01;  // relative to max(|reference|, 1)
  };
  struct Spread {
    double epsilon = 0.0;
    double max = 0.2;
  };
  struct InputAtBound {
    std::string column;
    double value = 0.0;
    double tolerance = 1e-6;
    double min_fraction = 0.9;
  };
  std::optional<Reference> steady_state;
  std::optional<Spread> turnpike_spread;
  std::optional<double> min_alpha;
  std::optional<double> max_residual;
  std::optional<InputAtBound> input_at_bound;
};

struct ExperimentConfig {
  std::string path;
  int schema_version = kSchemaVersion;
  std::string output;
  unsigned long long seed = 0;
  int jobs = 1;
  ModelConfig model;
  ocpkit::SteadyStateOptions steady_state;
  ocpkit::NlpOptions nlp;
  ocpkit::SdpOptions sdp;
  std::optional<SimulateConfig> simulate;
  std::optional<OcpConfig> ocp;
  std::optional<TurnpikeConfig> turnpike;
  std::optional<DissipativityConfig> dissipativity;
  ChecksConfig checks;
};

/// Parses and validates a YAML experiment file. Throws ConfigError.
ExperimentConfig load_config(const std::string& path);

/// The model objects described by a config.
struct Model {
  ocpkit::ControlSystem system;
  ocpkit::CostFunction cost;
};

Model build_model(const ModelConfig& m);

/// Polynomial field and cost used for synthesis and certificate checks.
/// The reactor is replaced by its Taylor model.
struct PolynomialModel {
  ocpkit::PolynomialVectorField field;
  ocpkit::Polynomial cost;
};

PolynomialModel build_polynomial_model(const ModelConfig& m);

}  // namespace ocpcli
