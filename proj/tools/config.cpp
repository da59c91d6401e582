#include "config.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <map>

namespace ocpcli {

using namespace ocpkit;

int OcpConfig::intervals(double horizon) const {
  if (N > 0) return N;
  return std::max(1, static_cast<int>(std::lround(horizon * intervals_per_unit)));
}

namespace {

std::string join(const std::string& field, const std::string& key) { return field.empty() ? key : field + "." + key; }

class Reader {
 public:
  explicit Reader(std::string file) : file_(std::move(file)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& field, const std::string& why) const {
    const YAML::Mark m = n.Mark();
    throw ConfigError(fmt::format("{}:{}:{}: {}: {}", file_, m.line + 1, m.column + 1, field, why));
  }

  void keys(const YAML::Node& map, const std::string& field, std::initializer_list<const char*> allowed) const {
    if (!map.IsMap()) fail(map, field, "expected a mapping");
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
      if (!known) fail(kv.first, join(field, key), "unknown key");
    }
  }

  YAML::Node required(const YAML::Node& map, const std::string& field, const char* key) const {
    const YAML::Node n = map[key];
    if (!n) fail(map, join(field, key), "missing required key");
    return n;
  }

  double number(const YAML::Node& n, const std::string& field) const {
    if (!n.IsScalar()) fail(n, field, "expected a number");
    try {
      const double v = n.as<double>();
      if (!std::isfinite(v)) fail(n, field, "must be finite");
      return v;
    } catch (const YAML::Exception&) {
      fail(n, field, "expected a number");
    }
  }

  double positive(const YAML::Node& n, const std::string& field) const {
    const double v = number(n, field);
    if (!(v > 0)) fail(n, field, "must be positive");
    return v;
  }

  double nonnegative(const YAML::Node& n, const std::string& field) const {
    const double v = number(n, field);
    if (v < 0) fail(n, field, "must be non-negative");
    return v;
  }

  long long integer(const YAML::Node& n, const std::string& field) const {
    if (!n.IsScalar()) fail(n, field, "expected an integer");
    try {
      return n.as<long long>();
    } catch (const YAML::Exception&) {
      fail(n, field, "expected an integer");
    }
  }

  int count(const YAML::Node& n, const std::string& field, int min) const {
    const long long v = integer(n, field);
    if (v < min || v > 1000000000) fail(n, field, fmt::format("must be an integer >= {}", min));
    return static_cast<int>(v);
  }

  std::string text(const YAML::Node& n, const std::string& field) const {
    if (!n.IsScalar()) fail(n, field, "expected a string");
    return n.as<std::string>();
  }

  bool boolean(const YAML::Node& n, const std::string& field) const {
    if (!n.IsScalar()) fail(n, field, "expected true or false");
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, field, "expected true or false");
    }
  }

  YAML::Node list(const YAML::Node& n, const std::string& field) const {
    if (!n.IsSequence()) fail(n, field, "expected a list");
    if (n.size() == 0) fail(n, field, "list must be nonempty");
    return n;
  }

  std::vector<double> numbers(const YAML::Node& n, const std::string& field) const {
    std::vector<double> out;
    for (const auto& item : list(n, field)) out.push_back(number(item, field));
    return out;
  }

  std::vector<std::string> texts(const YAML::Node& n, const std::string& field) const {
    std::vector<std::string> out;
    for (const auto& item : list(n, field)) out.push_back(text(item, field));
    return out;
  }

  Vec vec(const YAML::Node& n, const std::string& field, int size) const {
    const auto v = numbers(n, field);
    if (size >= 0 && static_cast<int>(v.size()) != size) fail(n, field, fmt::format("expected {} entries, got {}", size, v.size()));
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  std::vector<Vec> vecs(const YAML::Node& n, const std::string& field, int size) const {
    std::vector<Vec> out;
    for (const auto& item : list(n, field)) out.push_back(vec(item, field, size));
    return out;
  }

  Box box(const YAML::Node& n, const std::string& field, int size) const {
    keys(n, field, {"lower", "upper"});
    const Vec lo = vec(required(n, field, "lower"), join(field, "lower"), size);
    const Vec hi = vec(required(n, field, "upper"), join(field, "upper"), size);
    if ((lo.array() > hi.array()).any()) fail(n, field, "lower exceeds upper");
    return {lo, hi};
  }

 private:
  std::string file_;
};

void read_reactor_params(const Reader& r, const YAML::Node& n, ReactorParams& p) {
  static const std::map<std::string, double ReactorParams::*> fields = {
      {"k10", &ReactorParams::k10},       {"k20", &ReactorParams::k20},
      {"k30", &ReactorParams::k30},       {"E1", &ReactorParams::E1},
      {"E2", &ReactorParams::E2},         {"E3", &ReactorParams::E3},
      {"dHAB", &ReactorParams::dHAB},     {"dHBC", &ReactorParams::dHBC},
      {"dHAD", &ReactorParams::dHAD},     {"delta", &ReactorParams::delta},
      {"alpha_heat", &ReactorParams::alpha_heat}, {"c_in", &ReactorParams::c_in},
      {"theta_in", &ReactorParams::theta_in},     {"theta0", &ReactorParams::theta0},
      {"beta", &ReactorParams::beta},
  };
  const std::string field = "model.parameters";
  if (!n.IsMap()) r.fail(n, field, "expected a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    const auto it = fields.find(key);
    if (it == fields.end()) r.fail(kv.first, join(field, key), "unknown key");
    p.*(it->second) = r.number(kv.second, join(field, key));
  }
  try {
    p.validate();
  } catch (const Error& e) {
    r.fail(n, field, e.what());
  }
}

ModelConfig read_model(const Reader& r, const YAML::Node& n) {
  const std::string f = "model";
  ModelConfig m;
  m.label = r.text(r.required(n, f, "label"), "model.label");
  const YAML::Node kind = r.required(n, f, "kind");
  m.kind = r.text(kind, "model.kind");
  if (m.kind == "reactor") {
    r.keys(n, f, {"label", "kind", "parameters", "taylor"});
    if (n["parameters"]) read_reactor_params(r, n["parameters"], m.params);
    if (const YAML::Node t = n["taylor"]) {
      r.keys(t, "model.taylor", {"order", "center"});
      if (t["order"]) m.taylor_order = r.count(t["order"], "model.taylor.order", 0);
      if (t["center"]) m.taylor_center = r.number(t["center"], "model.taylor.center");
    }
    m.states = {"cA", "cB", "theta"};
    m.inputs = {"u1", "u2"};
    m.state_box = reactor_state_box();
    m.input_box = reactor_input_box();
  } else if (m.kind == "polynomial") {
    r.keys(n, f, {"label", "kind", "states", "inputs", "dynamics", "cost", "state_box", "input_box"});
    m.states = r.texts(r.required(n, f, "states"), "model.states");
    m.inputs = r.texts(r.required(n, f, "inputs"), "model.inputs");
    std::vector<std::string> vars = m.states;
    vars.insert(vars.end(), m.inputs.begin(), m.inputs.end());
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (std::find(vars.begin() + static_cast<long>(i) + 1, vars.end(), vars[i]) != vars.end()) {
        r.fail(n, f, "duplicate variable name '" + vars[i] + "'");
      }
    }
    const auto nx = static_cast<int>(m.states.size());
    const auto nu = static_cast<int>(m.inputs.size());
    const auto parse = [&](const YAML::Node& node, const std::string& field) {
      try {
        return parse_polynomial(r.text(node, field), vars);
      } catch (const Error& e) {
        r.fail(node, field, e.what());
      }
    };
    const YAML::Node dyn = r.list(r.required(n, f, "dynamics"), "model.dynamics");
    if (static_cast<int>(dyn.size()) != nx) r.fail(dyn, "model.dynamics", fmt::format("expected {} entries, got {}", nx, dyn.size()));
    for (const auto& d : dyn) m.dynamics.push_back(parse(d, "model.dynamics"));
    m.cost = parse(r.required(n, f, "cost"), "model.cost");
    m.state_box = r.box(r.required(n, f, "state_box"), "model.state_box", nx);
    m.input_box = r.box(r.required(n, f, "input_box"), "model.input_box", nu);
  } else {
    r.fail(kind, "model.kind", "unknown model '" + m.kind + "' (expected reactor or polynomial)");
  }
  return m;
}

void read_solver(const Reader& r, const YAML::Node& n, ExperimentConfig& c) {
  r.keys(n, "solver", {"steady_state", "nlp", "sdp"});
  if (const YAML::Node s = n["steady_state"]) {
    r.keys(s, "solver.steady_state", {"multistart", "residual_tolerance"});
    if (s["multistart"]) c.steady_state.multistart = r.count(s["multistart"], "solver.steady_state.multistart", 1);
    if (s["residual_tolerance"]) {
      c.steady_state.residual_tolerance = r.positive(s["residual_tolerance"], "solver.steady_state.residual_tolerance");
    }
  }
  if (const YAML::Node s = n["nlp"]) {
    const std::string f = "solver.nlp";
    r.keys(s, f, {"tolerance", "max_outer", "max_inner", "initial_penalty", "penalty_factor"});
    if (s["tolerance"]) c.nlp.tolerance = r.positive(s["tolerance"], f + ".tolerance");
    if (s["max_outer"]) c.nlp.max_outer = r.count(s["max_outer"], f + ".max_outer", 1);
    if (s["max_inner"]) c.nlp.max_inner = r.count(s["max_inner"], f + ".max_inner", 1);
    if (s["initial_penalty"]) c.nlp.initial_penalty = r.positive(s["initial_penalty"], f + ".initial_penalty");
    if (s["penalty_factor"]) {
      c.nlp.penalty_factor = r.number(s["penalty_factor"], f + ".penalty_factor");
      if (!(c.nlp.penalty_factor > 1)) r.fail(s["penalty_factor"], f + ".penalty_factor", "must exceed 1");
    }
  }
  if (const YAML::Node s = n["sdp"]) {
    const std::string f = "solver.sdp";
    r.keys(s, f, {"max_iter", "tolerance", "dense_cap", "stall_iterations"});
    if (s["max_iter"]) c.sdp.max_iter = r.count(s["max_iter"], f + ".max_iter", 1);
    if (s["tolerance"]) c.sdp.tolerance = r.positive(s["tolerance"], f + ".tolerance");
    if (s["dense_cap"]) c.sdp.dense_cap = r.count(s["dense_cap"], f + ".dense_cap", 1);
    if (s["stall_iterations"]) c.sdp.stall_iterations = r.count(s["stall_iterations"], f + ".stall_iterations", 1);
  }
}

SimulateConfig read_simulate(const Reader& r, const YAML::Node& n, const ModelConfig& m) {
  const std::string f = "simulate";
  r.keys(n, f, {"x0", "inputs", "T", "step"});
  SimulateConfig s;
  s.x0 = r.vec(r.required(n, f, "x0"), "simulate.x0", static_cast<int>(m.states.size()));
  s.inputs = r.vecs(r.required(n, f, "inputs"), "simulate.inputs", static_cast<int>(m.inputs.size()));
  s.T = r.positive(r.required(n, f, "T"), "simulate.T");
  if (n["step"]) s.step = r.positive(n["step"], "simulate.step");
  return s;
}

OcpConfig read_ocp(const Reader& r, const YAML::Node& n, const ModelConfig& m) {
  const std::string f = "ocp";
  r.keys(n, f, {"x0", "T", "N", "intervals_per_unit", "step", "fine_step", "objective"});
  OcpConfig o;
  const YAML::Node x0 = r.required(n, f, "x0");
  o.x0 = r.vecs(x0, "ocp.x0", static_cast<int>(m.states.size()));
  for (std::size_t i = 0; i < o.x0.size(); ++i) {
    if (!m.state_box.contains(o.x0[i], 1e-12)) r.fail(x0[i], "ocp.x0", "initial state lies outside the state box");
  }
  const YAML::Node T = r.required(n, f, "T");
  for (const auto& t : r.list(T, "ocp.T")) o.T.push_back(r.positive(t, "ocp.T"));
  if (n["N"] && n["intervals_per_unit"]) r.fail(n, f, "give either N or intervals_per_unit, not both");
  if (n["N"]) {
    o.N = r.count(n["N"], "ocp.N", 1);
  } else if (n["intervals_per_unit"]) {
    o.intervals_per_unit = r.positive(n["intervals_per_unit"], "ocp.intervals_per_unit");
  } else {
    r.fail(n, "ocp.N", "missing required key (or intervals_per_unit)");
  }
  if (n["step"]) o.step = r.positive(n["step"], "ocp.step");
  if (n["fine_step"]) o.fine_step = r.positive(n["fine_step"], "ocp.fine_step");
  if (const YAML::Node obj = n["objective"]) {
    const auto s = r.text(obj, "ocp.objective");
    if (s == "averaged") {
      o.objective = ObjectiveMode::averaged;
    } else if (s == "integral") {
      o.objective = ObjectiveMode::integral;
    } else {
      r.fail(obj, "ocp.objective", "expected averaged or integral");
    }
  }
  return o;
}

TurnpikeConfig read_turnpike(const Reader& r, const YAML::Node& n) {
  const std::string f = "turnpike";
  r.keys(n, f, {"epsilon", "delta0", "kind"});
  TurnpikeConfig t;
  const YAML::Node eps = r.required(n, f, "epsilon");
  for (const auto& e : r.list(eps, "turnpike.epsilon")) t.epsilon.push_back(r.nonnegative(e, "turnpike.epsilon"));
  if (n["delta0"]) t.delta0 = r.positive(n["delta0"], "turnpike.delta0");
  if (const YAML::Node k = n["kind"]) {
    const auto s = r.text(k, "turnpike.kind");
    if (s == "state") {
      t.kind = ThetaKind::state;
    } else if (s == "input_state") {
      t.kind = ThetaKind::input_state;
    } else {
      r.fail(k, "turnpike.kind", "expected state or input_state");
    }
  }
  return t;
}

DissipativityConfig read_dissipativity(const Reader& r, const YAML::Node& n) {
  const std::string f = "dissipativity";
  r.keys(n, f, {"storage_degree", "multiplier_degree", "alpha_mode", "bisection_tolerance", "accept_residual",
                "reduce_degree", "strictness", "check"});
  DissipativityConfig d;
  auto& s = d.synthesis;
  s.storage_degree = r.count(r.required(n, f, "storage_degree"), "dissipativity.storage_degree", 0);
  if (n["multiplier_degree"]) s.multiplier_degree = r.count(n["multiplier_degree"], "dissipativity.multiplier_degree", -1);
  if (const YAML::Node a = n["alpha_mode"]) {
    const auto m = r.text(a, "dissipativity.alpha_mode");
    if (m == "direct") {
      s.alpha_mode = AlphaMode::direct;
    } else if (m == "bisection") {
      s.alpha_mode = AlphaMode::bisection;
    } else {
      r.fail(a, "dissipativity.alpha_mode", "expected direct or bisection");
    }
  }
  if (n["bisection_tolerance"]) s.bisection_tolerance = r.positive(n["bisection_tolerance"], "dissipativity.bisection_tolerance");
  if (n["accept_residual"]) s.accept_residual = r.positive(n["accept_residual"], "dissipativity.accept_residual");
  if (n["reduce_degree"]) s.reduce_degree = r.boolean(n["reduce_degree"], "dissipativity.reduce_degree");
  if (const YAML::Node st = n["strictness"]) {
    const auto m = r.text(st, "dissipativity.strictness");
    if (m != "state" && m != "input_state") r.fail(st, "dissipativity.strictness", "expected state or input_state");
    s.input_strictness = m == "input_state";
  }
  if (const YAML::Node c = n["check"]) {
    const std::string cf = "dissipativity.check";
    r.keys(c, cf, {"grid", "random", "tolerance", "max_listed"});
    if (c["grid"]) d.check.grid = r.count(c["grid"], cf + ".grid", 2);
    if (c["random"]) d.check.random = r.count(c["random"], cf + ".random", 0);
    if (c["tolerance"]) d.check.tolerance = r.nonnegative(c["tolerance"], cf + ".tolerance");
    if (c["max_listed"]) d.check.max_listed = r.count(c["max_listed"], cf + ".max_listed", 0);
  }
  s.check_grid = d.check.grid;
  s.check_random = d.check.random;
  s.check_tolerance = d.check.tolerance;
  return d;
}

ChecksConfig read_checks(const Reader& r, const YAML::Node& n, const ExperimentConfig& c) {
  const std::string f = "checks";
  r.keys(n, f, {"steady_state", "turnpike_spread", "min_alpha", "max_residual", "input_at_bound"});
  ChecksConfig k;
  if (const YAML::Node s = n["steady_state"]) {
    r.keys(s, "checks.steady_state", {"x", "u", "tolerance"});
    ChecksConfig::Reference ref;
    ref.x = r.vec(r.required(s, "checks.steady_state", "x"), "checks.steady_state.x", static_cast<int>(c.model.states.size()));
    ref.u = r.vec(r.required(s, "checks.steady_state", "u"), "checks.steady_state.u", static_cast<int>(c.model.inputs.size()));
    if (s["tolerance"]) ref.tolerance = r.positive(s["tolerance"], "checks.steady_state.tolerance");
    k.steady_state = ref;
  }
  if (const YAML::Node s = n["turnpike_spread"]) {
    const std::string sf = "checks.turnpike_spread";
    if (!c.turnpike) r.fail(s, sf, "requires a turnpike block");
    r.keys(s, sf, {"epsilon", "max"});
    ChecksConfig::Spread sp;
    const YAML::Node e = r.required(s, sf, "epsilon");
    sp.epsilon = r.nonnegative(e, sf + ".epsilon");
    const auto& grid = c.turnpike->epsilon;
    if (std::find(grid.begin(), grid.end(), sp.epsilon) == grid.end()) r.fail(e, sf + ".epsilon", "not in turnpike.epsilon");
    sp.max = r.positive(r.required(s, sf, "max"), sf + ".max");
    k.turnpike_spread = sp;
  }
  if (const YAML::Node s = n["min_alpha"]) {
    if (!c.dissipativity) r.fail(s, "checks.min_alpha", "requires a dissipativity block");
    k.min_alpha = r.nonnegative(s, "checks.min_alpha");
  }
  if (const YAML::Node s = n["max_residual"]) {
    if (!c.dissipativity || !c.ocp) r.fail(s, "checks.max_residual", "requires ocp and dissipativity blocks");
    k.max_residual = r.number(s, "checks.max_residual");
  }
  if (const YAML::Node s = n["input_at_bound"]) {
    const std::string sf = "checks.input_at_bound";
    if (!c.ocp) r.fail(s, sf, "requires an ocp block");
    r.keys(s, sf, {"column", "value", "tolerance", "min_fraction"});
    ChecksConfig::InputAtBound b;
    const YAML::Node col = r.required(s, sf, "column");
    b.column = r.text(col, sf + ".column");
    bool found = false;
    for (std::size_t i = 1; i <= c.model.inputs.size(); ++i) found = found || b.column == fmt::format("u{}", i);
    if (!found) r.fail(col, sf + ".column", "expected an input column u1..u" + std::to_string(c.model.inputs.size()));
    b.value = r.number(r.required(s, sf, "value"), sf + ".value");
    if (s["tolerance"]) b.tolerance = r.nonnegative(s["tolerance"], sf + ".tolerance");
    if (s["min_fraction"]) {
      b.min_fraction = r.number(s["min_fraction"], sf + ".min_fraction");
      if (b.min_fraction < 0 || b.min_fraction > 1) r.fail(s["min_fraction"], sf + ".min_fraction", "must lie in [0, 1]");
    }
    k.input_at_bound = b;
  }
  return k;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError(path + ": cannot open config file");
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("{}:{}:{}: syntax error: {}", path, e.mark.line + 1, e.mark.column + 1, e.msg));
  }
  const Reader r(path);
  ExperimentConfig c;
  c.path = path;
  if (!root.IsMap()) r.fail(root, "config", "expected a mapping at top level");
  r.keys(root, "", {"schema_version", "output", "seed", "jobs", "model", "solver", "simulate", "ocp", "turnpike",
                    "dissipativity", "checks"});
  const YAML::Node version = r.required(root, "", "schema_version");
  c.schema_version = static_cast<int>(r.integer(version, "schema_version"));
  if (c.schema_version != kSchemaVersion) {
    r.fail(version, "schema_version", fmt::format("unsupported version {} (expected {})", c.schema_version, kSchemaVersion));
  }
  if (root["output"]) c.output = r.text(root["output"], "output");
  if (root["seed"]) {
    const long long s = r.integer(root["seed"], "seed");
    if (s < 0) r.fail(root["seed"], "seed", "must be non-negative");
    c.seed = static_cast<unsigned long long>(s);
  }
  if (root["jobs"]) c.jobs = r.count(root["jobs"], "jobs", 1);
  c.model = read_model(r, r.required(root, "", "model"));
  if (root["solver"]) read_solver(r, root["solver"], c);
  if (root["simulate"]) c.simulate = read_simulate(r, root["simulate"], c.model);
  if (root["ocp"]) c.ocp = read_ocp(r, root["ocp"], c.model);
  if (const YAML::Node t = root["turnpike"]) {
    if (!c.ocp) r.fail(t, "turnpike", "requires an ocp block");
    c.turnpike = read_turnpike(r, t);
  }
  if (root["dissipativity"]) c.dissipativity = read_dissipativity(r, root["dissipativity"]);
  if (root["checks"]) c.checks = read_checks(r, root["checks"], c);
  return c;
}

Model build_model(const ModelConfig& m) {
  if (m.kind == "reactor") return {reactor_system(m.params), reactor_cost(m.params)};
  const auto nx = static_cast<int>(m.states.size());
  const PolynomialVectorField vf(nx, static_cast<int>(m.inputs.size()), m.dynamics);
  return {vf.to_system(m.label, m.state_box, m.input_box), polynomial_cost(m.label, m.cost, nx)};
}

PolynomialModel build_polynomial_model(const ModelConfig& m) {
  if (m.kind == "reactor") {
    return {polynomialize_reactor(m.params, m.taylor_order, m.taylor_center), *reactor_cost(m.params).polynomial};
  }
  return {PolynomialVectorField(static_cast<int>(m.states.size()), static_cast<int>(m.inputs.size()), m.dynamics),
          m.cost};
}

}  // namespace ocpcli
