#include "stages.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <thread>

namespace ocpcli {

using namespace ocpkit;
using nlohmann::json;
namespace fs = std::filesystem;

MissingArtifacts::MissingArtifacts(std::vector<std::string> files)
    : std::runtime_error("missing artifacts: " + fmt::format("{}", fmt::join(files, ", "))), files_(std::move(files)) {}

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw Error("write failed for " + path.string());
}

void require_files(const std::vector<fs::path>& files) {
  std::vector<std::string> missing;
  for (const auto& f : files) {
    if (!fs::exists(f)) missing.push_back(f.string());
  }
  if (!missing.empty()) throw MissingArtifacts(std::move(missing));
}

json read_json(const fs::path& path) {
  require_files({path});
  std::ifstream is(path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw Error(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
}

template <class T>
const T& need(const std::optional<T>& block, const Context& ctx, const char* name) {
  if (!block) throw ConfigError(fmt::format("{}: {}: block required by this command", ctx.config.path, name));
  return *block;
}

std::string ocp_file(int k) { return fmt::format("ocp_{}.csv", k); }
std::string residual_file(int k) { return fmt::format("residuals_{}.csv", k); }

/// Runs body(0..n-1) on up to `jobs` threads; the first exception by index is rethrown.
void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        body(k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(jobs, n));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SteadyStatePair read_steady_state(const Context& ctx) {
  const json j = read_json(ctx.out / "steady_state.json");
  SteadyStatePair z;
  try {
    z.x_bar = json_vec(j.at("x_bar"));
    z.u_bar = json_vec(j.at("u_bar"));
    z.cost_value = j.at("cost").get<double>();
    z.dynamics_residual = j.at("dynamics_residual").get<double>();
    z.is_best_found = j.at("best_found").get<bool>();
  } catch (const json::exception& e) {
    throw Error(std::string("steady_state.json: ") + e.what());
  }
  return z;
}

struct StoredRun {
  int index = 0;
  int x0_index = 0;
  double T = 0.0;
  std::string status;
  fs::path file;
};

std::vector<StoredRun> read_ocp_summary(const Context& ctx) {
  const json j = read_json(ctx.out / "ocp_summary.json");
  std::vector<StoredRun> runs;
  std::vector<fs::path> files;
  try {
    for (const auto& r : j.at("runs")) {
      StoredRun s;
      s.index = r.at("index").get<int>();
      s.x0_index = r.at("x0_index").get<int>();
      s.T = r.at("T").get<double>();
      s.status = r.at("status").get<std::string>();
      s.file = ctx.out / r.at("file").get<std::string>();
      files.push_back(s.file);
      runs.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("ocp_summary.json: ") + e.what());
  }
  require_files(files);
  return runs;
}

StorageCertificate read_certificate(const fs::path& path) {
  return certificate_from_json(read_json(path));
}

std::string vec_text(const Vec& v) {
  std::vector<std::string> parts;
  for (Eigen::Index i = 0; i < v.size(); ++i) parts.push_back(fmt::format("{:.6g}", v[i]));
  return fmt::format("({})", fmt::join(parts, ", "));
}

}  // namespace

int stage_simulate(const Context& ctx) {
  const auto& s = need(ctx.config.simulate, ctx, "simulate");
  const Model m = build_model(ctx.config.model);
  const Trajectory traj = integrate(m.system, s.x0, ControlSignal::uniform(s.T, s.inputs), s.step);
  write_trajectory_csv(traj, (ctx.out / "simulate.csv").string());
  spdlog::info("simulate: {} samples to {}", traj.size(), (ctx.out / "simulate.csv").string());
  return kOk;
}

int stage_steady_state(const Context& ctx) {
  const auto& c = ctx.config;
  const Model m = build_model(c.model);
  SteadyStateOptions opts = c.steady_state;
  opts.seed = ctx.seed;
  opts.jobs = ctx.jobs;
  opts.nlp = c.nlp;
  const SteadyStatePair z = optimal_steady_state(m.system, m.cost, opts);

  json candidates = json::array();
  for (const auto& cand : z.candidates) {
    candidates.push_back({{"x", vec_json(cand.x)},
                          {"u", vec_json(cand.u)},
                          {"cost", cand.cost},
                          {"residual", cand.residual},
                          {"status", to_string(cand.status)}});
  }
  json j;
  j["model"] = c.model.label;
  j["states"] = c.model.states;
  j["inputs"] = c.model.inputs;
  j["x_bar"] = vec_json(z.x_bar);
  j["u_bar"] = vec_json(z.u_bar);
  j["cost"] = z.cost_value;
  j["dynamics_residual"] = z.dynamics_residual;
  j["status"] = to_string(z.status);
  j["best_found"] = z.is_best_found;
  j["seed"] = ctx.seed;
  j["candidates"] = candidates;
  write_json(ctx.out / "steady_state.json", j);

  spdlog::info("steady state x = {}, u = {}, F = {:.10g}, |f| = {:.3g}", vec_text(z.x_bar), vec_text(z.u_bar),
               z.cost_value, z.dynamics_residual);
  if (!z.is_best_found || !(z.dynamics_residual <= opts.residual_tolerance)) {
    spdlog::error("steady state not found to tolerance {:.3g}", opts.residual_tolerance);
    return kFailure;
  }
  return kOk;
}

int stage_solve_ocp(const Context& ctx) {
  const auto& c = ctx.config;
  const auto& o = need(c.ocp, ctx, "ocp");
  const Model m = build_model(c.model);
  const int nT = static_cast<int>(o.T.size());
  const int runs = o.runs();
  std::vector<OcpSolution> sols(static_cast<std::size_t>(runs));
  parallel_for(runs, ctx.jobs, [&](int k) {
    const double T = o.T[static_cast<std::size_t>(k % nT)];
    OcpSpec spec(m.system, m.cost, o.x0[static_cast<std::size_t>(k / nT)], T, o.intervals(T));
    spec.step = o.step;
    spec.fine_step = o.fine_step;
    spec.objective_mode = o.objective;
    spec.nlp = c.nlp;
    sols[static_cast<std::size_t>(k)] = solve_ocp(spec);
  });

  json list = json::array();
  int failed = 0;
  for (int k = 0; k < runs; ++k) {
    const auto& s = sols[static_cast<std::size_t>(k)];
    const double T = o.T[static_cast<std::size_t>(k % nT)];
    write_trajectory_csv(s.trajectory, (ctx.out / ocp_file(k)).string());
    list.push_back({{"index", k},
                    {"file", ocp_file(k)},
                    {"x0_index", k / nT},
                    {"T_index", k % nT},
                    {"x0", vec_json(o.x0[static_cast<std::size_t>(k / nT)])},
                    {"T", T},
                    {"N", o.intervals(T)},
                    {"status", to_string(s.status)},
                    {"J_T", s.J_T},
                    {"objective", s.objective},
                    {"shooting_defect", s.shooting_defect},
                    {"node_deviation", s.node_deviation},
                    {"violations", s.violations.size()},
                    {"nlp_status", to_string(s.nlp.status)},
                    {"nlp_iterations", s.nlp.iterations}});
    spdlog::info("ocp {}: x0 #{} T = {} {} J_T = {:.10g}", k, k / nT, T, to_string(s.status), s.J_T);
    if (s.status != OcpStatus::solved) ++failed;
  }
  write_json(ctx.out / "ocp_summary.json", {{"model", c.model.label}, {"runs", list}});
  if (failed > 0) {
    spdlog::error("{} of {} OCP runs did not solve", failed, runs);
    return kFailure;
  }
  return kOk;
}

int stage_turnpike(const Context& ctx) {
  const auto& c = ctx.config;
  const auto& t = need(c.turnpike, ctx, "turnpike");
  const SteadyStatePair z = read_steady_state(ctx);
  std::vector<SweepRun> sweep;
  for (const auto& r : read_ocp_summary(ctx)) sweep.push_back({read_trajectory_csv(r.file.string()), r.T, r.x0_index});

  TurnpikeOptions opts;
  opts.kind = t.kind;
  opts.epsilon_grid = t.epsilon;
  opts.delta0 = t.delta0;
  Vec reference = z.x_bar;
  opts.scale = c.model.state_box.scale();
  if (t.kind == ThetaKind::input_state) {
    reference = z.z();
    opts.scale.conservativeResize(reference.size());
    opts.scale.tail(c.model.input_box.dim()) = c.model.input_box.scale();
  }
  const TurnpikeReport rep = nu_envelope(sweep, reference, opts);

  json cells = json::array();
  for (const auto& cell : rep.cells) {
    cells.push_back({{"run", cell.run},
                     {"x0_index", cell.x0_index},
                     {"T", cell.T},
                     {"epsilon", cell.epsilon},
                     {"measure", cell.theta.measure},
                     {"error_bar", cell.theta.error_bar},
                     {"arcs",
                      {{"enters", cell.arcs.enters},
                       {"entry", cell.arcs.entry},
                       {"exit", cell.arcs.exit},
                       {"approach", cell.arcs.approach_length()},
                       {"middle", cell.arcs.middle_length()},
                       {"leaving", cell.arcs.leaving_length()}}}});
  }
  json exactness = json::array();
  for (const auto& e : rep.exactness) exactness.push_back({{"measure", e.measure}, {"error_bar", e.error_bar}});
  json j;
  j["kind"] = to_string(rep.kind);
  j["epsilon_grid"] = rep.epsilon_grid;
  j["delta0"] = rep.delta0;
  j["reference"] = vec_json(reference);
  j["scale"] = vec_json(opts.scale);
  j["cells"] = cells;
  j["nu_envelope"] = rep.nu_envelope;
  j["max_relative_spread"] = rep.max_relative_spread;
  j["max_slope"] = rep.max_slope;
  j["slope_tolerance"] = rep.slope_tolerance;
  j["turnpike_consistent"] = rep.turnpike_consistent;
  j["exactness"] = exactness;
  j["exact_turnpike"] = rep.exact_turnpike;
  write_json(ctx.out / "turnpike_report.json", j);

  for (std::size_t e = 0; e < rep.epsilon_grid.size(); ++e) {
    spdlog::info("turnpike eps = {}: nu = {:.6g}, spread = {:.3g}, slope = {:.3g}", rep.epsilon_grid[e],
                 rep.nu_envelope[e], rep.max_relative_spread[e], rep.max_slope[e]);
  }
  return kOk;
}

int stage_certify(const Context& ctx) {
  const auto& c = ctx.config;
  const auto& d = need(c.dissipativity, ctx, "dissipativity");
  const SteadyStatePair z = read_steady_state(ctx);
  const PolynomialModel pm = build_polynomial_model(c.model);
  SynthesisOptions opts = d.synthesis;
  opts.sdp = c.sdp;
  opts.seed = ctx.seed;
  SynthesisResult res;
  try {
    res = synthesize_certificate(pm.field, c.model.state_box, c.model.input_box, pm.cost, z, opts);
  } catch (const NoCertificate& e) {
    spdlog::error("certify: {}", e.what());
    return kFailure;
  }
  json j = to_json(res.certificate);
  j["synthesis"] = {{"requested_degree", res.requested_degree},
                    {"degree", res.certificate.degree},
                    {"mode", res.problem.mode == SosProblem::Mode::vertex ? "vertex" : "joint"},
                    {"strictness", opts.input_strictness ? "input_state" : "state"},
                    {"alpha_mode", to_string(opts.alpha_mode)},
                    {"psd_dimension", res.problem.sdp.psd_dimension()},
                    {"constraints", res.problem.sdp.m()},
                    {"sdp_status", to_string(res.solution.status)},
                    {"sdp_iterations", res.solution.iterations},
                    {"notes", res.notes}};
  write_json(ctx.out / "certificate.json", j);
  for (const auto& note : res.notes) spdlog::info("certify: {}", note);
  spdlog::info("certify: degree {} alpha_bar = {:.6g}, min residual {:.3g}", res.certificate.degree,
               res.certificate.alpha_bar, res.certificate.verification.min_residual);
  if (!res.certificate.verification.passed) {
    spdlog::error("certify: synthesized certificate failed its pointwise check");
    return kFailure;
  }
  return kOk;
}

int stage_check_cert(const Context& ctx, const std::optional<std::string>& certificate) {
  const auto& c = ctx.config;
  const fs::path path = certificate ? fs::path(*certificate) : ctx.out / "certificate.json";
  const StorageCertificate cert = read_certificate(path);
  const PolynomialModel pm = build_polynomial_model(c.model);
  const auto nx = static_cast<int>(c.model.states.size());
  const auto nu = static_cast<int>(c.model.inputs.size());
  if (cert.n_x() != nx || cert.u_ref.size() != nu) {
    spdlog::error("{}: certificate dimensions ({} states, {} inputs) do not match model '{}'", path.string(),
                  cert.n_x(), cert.u_ref.size(), c.model.label);
    return kFailure;
  }
  const ControlSystem sys = pm.field.to_system(c.model.label, c.model.state_box, c.model.input_box);
  SteadyStatePair ref;
  ref.x_bar = cert.x_ref;
  ref.u_bar = cert.u_ref;
  const SupplyRate w = supply_rate(polynomial_cost(c.model.label, pm.cost, nx), ref);
  CheckOptions opts = c.dissipativity ? c.dissipativity->check : CheckOptions{};
  opts.seed = ctx.seed;
  const CertificateCheck chk = check_certificate(cert, sys, w, opts);

  json viol = json::array();
  for (const auto& p : chk.violations) viol.push_back({{"x", vec_json(p.x)}, {"u", vec_json(p.u)}, {"residual", p.residual}});
  json j;
  j["certificate"] = certificate ? *certificate : std::string("certificate.json");
  j["points"] = chk.points;
  j["min_residual"] = chk.min_residual;
  j["worst"] = {{"x", vec_json(chk.worst.x)}, {"u", vec_json(chk.worst.u)}};
  j["violation_count"] = chk.violation_count;
  j["violations"] = viol;
  j["min_storage"] = chk.min_storage;
  j["max_abs_storage"] = chk.max_abs_storage;
  j["tolerance"] = opts.tolerance;
  j["passed"] = chk.passed;
  write_json(ctx.out / "certificate_check.json", j);

  fmt::print("{}: {} points, min residual {:.6g}, min S {:.6g}, {} violations\n", path.string(), chk.points,
             chk.min_residual, chk.min_storage, chk.violation_count);
  for (const auto& p : chk.violations) {
    fmt::print("  violation at x = {}, u = {}: residual {:.6g}\n", vec_text(p.x), vec_text(p.u), p.residual);
  }
  if (chk.violation_count > static_cast<int>(chk.violations.size())) {
    fmt::print("  ... {} more\n", chk.violation_count - static_cast<int>(chk.violations.size()));
  }
  fmt::print("certificate check {}\n", chk.passed ? "PASSED" : "FAILED");
  return chk.passed ? kOk : kFailure;
}

int stage_residuals(const Context& ctx) {
  const auto& c = ctx.config;
  need(c.ocp, ctx, "ocp");
  need(c.dissipativity, ctx, "dissipativity");
  const StorageCertificate cert = read_certificate(ctx.out / "certificate.json");
  const auto runs = read_ocp_summary(ctx);
  const Model m = build_model(c.model);
  SteadyStatePair ref;
  ref.x_bar = cert.x_ref;
  ref.u_bar = cert.u_ref;
  const SupplyRate w = supply_rate(m.cost, ref);

  json list = json::array();
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    const DissipationTrace tr = dissipation_residual(read_trajectory_csv(r.file.string()), cert, w);
    std::ofstream os(ctx.out / residual_file(r.index));
    os << "t,delta\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i) os << format_double(tr.times[i]) << ',' << format_double(tr.delta[i]) << '\n';
    if (!os) throw Error("cannot write " + (ctx.out / residual_file(r.index)).string());
    const double mx = tr.max();
    const double mn = *std::min_element(tr.delta.begin(), tr.delta.end());
    worst = std::max(worst, mx);
    list.push_back({{"index", r.index}, {"file", residual_file(r.index)}, {"max_delta", mx}, {"min_delta", mn}});
    spdlog::info("residuals {}: max delta = {:.3g}, min delta = {:.3g}", r.index, mx, mn);
  }
  write_json(ctx.out / "residuals_summary.json", {{"runs", list}, {"max_delta", worst}});
  return kOk;
}

int stage_report(const Context& ctx) {
  const auto& c = ctx.config;
  std::vector<fs::path> files{ctx.out / "steady_state.json"};
  if (c.ocp) {
    files.push_back(ctx.out / "ocp_summary.json");
    for (int k = 0; k < c.ocp->runs(); ++k) files.push_back(ctx.out / ocp_file(k));
  }
  if (c.turnpike) files.push_back(ctx.out / "turnpike_report.json");
  if (c.dissipativity) {
    files.push_back(ctx.out / "certificate.json");
    files.push_back(ctx.out / "certificate_check.json");
  }
  if (c.dissipativity && c.ocp) {
    files.push_back(ctx.out / "residuals_summary.json");
    for (int k = 0; k < c.ocp->runs(); ++k) files.push_back(ctx.out / residual_file(k));
  }
  require_files(files);

  json checks = json::array();
  bool all = true;
  const auto add = [&](const std::string& name, bool passed, double value, double threshold) {
    checks.push_back({{"name", name}, {"passed", passed}, {"value", value}, {"threshold", threshold}});
    all = all && passed;
  };

  const json ss = read_json(ctx.out / "steady_state.json");
  const double residual = ss.at("dynamics_residual").get<double>();
  add("steady_state.residual", ss.at("best_found").get<bool>() && residual <= c.steady_state.residual_tolerance,
      residual, c.steady_state.residual_tolerance);
  if (c.checks.steady_state) {
    const auto& ref = *c.checks.steady_state;
    const Vec x = json_vec(ss.at("x_bar"));
    const Vec u = json_vec(ss.at("u_bar"));
    double dev = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) dev = std::max(dev, std::abs(x[i] - ref.x[i]) / std::max(std::abs(ref.x[i]), 1.0));
    for (Eigen::Index i = 0; i < u.size(); ++i) dev = std::max(dev, std::abs(u[i] - ref.u[i]) / std::max(std::abs(ref.u[i]), 1.0));
    add("steady_state.reference", dev <= ref.tolerance, dev, ref.tolerance);
  }

  if (c.ocp) {
    const auto runs = read_ocp_summary(ctx);
    const auto unsolved = std::count_if(runs.begin(), runs.end(), [](const StoredRun& r) { return r.status != "solved"; });
    add("ocp.solved", unsolved == 0, static_cast<double>(unsolved), 0.0);
    if (c.checks.input_at_bound) {
      const auto& b = *c.checks.input_at_bound;
      const int col = std::stoi(b.column.substr(1)) - 1;
      double worst = 1.0;
      for (const auto& r : runs) {
        const Trajectory tr = read_trajectory_csv(r.file.string());
        const auto hits = std::count_if(tr.inputs.begin(), tr.inputs.end(),
                                        [&](const Vec& u) { return std::abs(u[col] - b.value) <= b.tolerance; });
        worst = std::min(worst, static_cast<double>(hits) / static_cast<double>(tr.size()));
      }
      add("ocp.input_at_bound." + b.column, worst >= b.min_fraction, worst, b.min_fraction);
    }
  }

  if (c.turnpike) {
    const json tp = read_json(ctx.out / "turnpike_report.json");
    const auto slopes = tp.at("max_slope").get<std::vector<double>>();
    add("turnpike.consistent", tp.at("turnpike_consistent").get<bool>(), *std::max_element(slopes.begin(), slopes.end()),
        tp.at("slope_tolerance").get<double>());
    if (c.checks.turnpike_spread) {
      const auto& sp = *c.checks.turnpike_spread;
      const auto grid = tp.at("epsilon_grid").get<std::vector<double>>();
      const auto spread = tp.at("max_relative_spread").get<std::vector<double>>();
      const auto it = std::find(grid.begin(), grid.end(), sp.epsilon);
      if (it == grid.end()) throw Error(fmt::format("turnpike_report.json has no epsilon {}", sp.epsilon));
      const double v = spread[static_cast<std::size_t>(it - grid.begin())];
      add(fmt::format("turnpike.spread.eps_{}", sp.epsilon), v < sp.max, v, sp.max);
    }
  }

  if (c.dissipativity) {
    const json cert = read_json(ctx.out / "certificate.json");
    const json chk = read_json(ctx.out / "certificate_check.json");
    add("certificate.verified", chk.at("passed").get<bool>(), chk.at("min_residual").get<double>(),
        -chk.at("tolerance").get<double>());
    if (c.checks.min_alpha) {
      const double a = cert.at("alpha_bar").get<double>();
      add("certificate.alpha_bar", a >= *c.checks.min_alpha, a, *c.checks.min_alpha);
    }
  }
  if (c.dissipativity && c.ocp && c.checks.max_residual) {
    const json res = read_json(ctx.out / "residuals_summary.json");
    const double mx = res.at("max_delta").get<double>();
    add("residuals.max_delta", mx <= *c.checks.max_residual, mx, *c.checks.max_residual);
  }

  write_json(ctx.out / "report.json", {{"model", c.model.label}, {"checks", checks}, {"passed", all}});
  for (const auto& ch : checks) {
    fmt::print("{} {} (value {:.6g}, threshold {:.6g})\n", ch["passed"].get<bool>() ? "PASS" : "FAIL",
               ch["name"].get<std::string>(), ch["value"].get<double>(), ch["threshold"].get<double>());
  }
  return all ? kOk : kFailure;
}

int run_pipeline(const Context& ctx) {
  const auto& c = ctx.config;
  std::vector<std::pair<const char*, std::function<int()>>> stages;
  stages.emplace_back("steady-state", [&] { return stage_steady_state(ctx); });
  if (c.simulate) stages.emplace_back("simulate", [&] { return stage_simulate(ctx); });
  if (c.ocp) stages.emplace_back("solve-ocp", [&] { return stage_solve_ocp(ctx); });
  if (c.turnpike) stages.emplace_back("turnpike", [&] { return stage_turnpike(ctx); });
  if (c.dissipativity) {
    stages.emplace_back("certify", [&] { return stage_certify(ctx); });
    stages.emplace_back("check-cert", [&] { return stage_check_cert(ctx, std::nullopt); });
  }
  if (c.dissipativity && c.ocp) stages.emplace_back("residuals", [&] { return stage_residuals(ctx); });
  stages.emplace_back("report", [&] { return stage_report(ctx); });
  for (const auto& [name, stage] : stages) {
    spdlog::info("stage {}", name);
    const int code = stage();
    if (code != kOk) {
      spdlog::error("stage {} exited with {}", name, code);
      return code;
    }
  }
  return kOk;
}

}  // namespace ocpcli
