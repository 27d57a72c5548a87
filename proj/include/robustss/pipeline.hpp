#pragma once

// End-to-end runs: primal -> dual -> verification, producing a
// deterministic JSON report, a per-path CSV and separate stage timings.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "robustss/dual.hpp"
#include "robustss/errors.hpp"
#include "robustss/instance_io.hpp"
#include "robustss/primal.hpp"
#include "robustss/superhedge.hpp"
#include "robustss/tolerances.hpp"
#include "robustss/utility.hpp"

namespace robustss {

inline constexpr int kReportSchemaVersion = 1;

enum ExitCode : int { exit_ok = 0, exit_schema = 2, exit_invariant = 3, exit_verification = 4, exit_solver = 5 };

struct RunConfig {
  std::string subcommand = "solve";  // solve | primal | dual
  std::string market_path;
  std::string ambiguity_path;
  std::string utility = "log";
  double x0 = 1.0;
  double tol_saddle = tol::saddle;
  std::optional<std::uint64_t> seed;
  bool curves = false;
};

struct RunResult {
  json report;
  json timings;
  std::string csv;
  std::string value_curve_csv;
  std::string dual_curve_csv;
  int exit_code = exit_ok;
};

namespace pipeline_detail {

inline std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Checks {
 public:
  void add(const std::string& name, double value, double tolerance) {
    const bool pass = std::isfinite(value) && value <= tolerance;
    list_.push_back({{"name", name}, {"value", value}, {"tolerance", tolerance}, {"pass", pass}});
    all_ = all_ && pass;
  }
  void flag(const std::string& name, bool pass) {
    list_.push_back({{"name", name}, {"pass", pass}});
    all_ = all_ && pass;
  }
  bool all() const { return all_; }
  const json& list() const { return list_; }

 private:
  json list_ = json::array();
  bool all_ = true;
};

class Stopwatch {
 public:
  template <class F>
  auto time(const std::string& stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto out = f();
    timings_[stage] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }
  const json& timings() const { return timings_; }

 private:
  json timings_ = json::object();
};

inline json strategy_json(const TradingStrategy& s, const Market& m) {
  json nodes = json::array();
  for (std::size_t id = 0; id < s.delta.size(); ++id) {
    if (s.delta[id] == 0.0) continue;
    const PathNode& n = m.paths.node(static_cast<int>(id));
    nodes.push_back({{"node", id}, {"depth", n.depth}, {"price", n.price}, {"delta", s.delta[id]}});
  }
  return {{"x", s.x}, {"delta", nodes}, {"h", s.h}};
}

inline bool supports_differ(const AmbiguityModel& amb) {
  if (amb.kind() != AmbiguityModel::Kind::hull) return false;
  const auto first = amb.vertices().front().support_mask();
  for (const auto& v : amb.vertices())
    if (v.support_mask() != first) return true;
  return false;
}

}  // namespace pipeline_detail

/// Runs one (instance, utility, x0) job.
inline RunResult run_pipeline(const Instance& inst, const RunConfig& cfg) {
  using namespace pipeline_detail;
  if (!(cfg.x0 > 0.0)) throw InvariantError("x.positive", "x0 must be positive");
  const UtilityFamily util = UtilityFamily::parse(cfg.utility);
  certify_equivalent_measures(inst.ambiguity, inst.system);

  const Market& m = inst.market;
  const double x0 = cfg.x0, ts = cfg.tol_saddle;
  const bool do_primal = cfg.subcommand != "dual", do_dual = cfg.subcommand != "primal";
  Stopwatch sw;
  Checks checks;
  bool converged = true;

  RunResult out;
  json& rep = out.report;
  rep["schema_version"] = kReportSchemaVersion;
  rep["config"] = {{"subcommand", cfg.subcommand}, {"market", cfg.market_path},  {"ambiguity", cfg.ambiguity_path},
                   {"utility", util.tag()},        {"x0", x0},                    {"tol_saddle", ts}};
  if (cfg.seed) rep["config"]["seed"] = *cfg.seed;
  const auto& red = inst.ambiguity.reduced();
  std::size_t union_size = 0;
  for (bool b : red.union_support) union_size += b;
  rep["instance"] = {{"periods", m.grid.periods},
                     {"paths", m.paths.path_count()},
                     {"options", m.options.size()},
                     {"calibration", inst.calibration.mode == CalibrationSpec::Mode::marginals ? "marginals" : "options"},
                     {"ambiguity", inst.ambiguity.kind() == AmbiguityModel::Kind::hull ? "hull" : "density_band"},
                     {"union_support", union_size},
                     {"supports_differ", supports_differ(inst.ambiguity)}};
  {
    std::vector<double> probes;
    for (int k = -4; k <= 4; ++k) probes.push_back(std::pow(10.0, k));
    const auto uv = validate_utility(util, probes);
    rep["utility"] = {{"tag", util.tag()},
                      {"bounded", uv.bounded},
                      {"elasticity_proxy", uv.elasticity_proxy},
                      {"warnings", uv.warnings}};
  }

  std::optional<PrimalSolution> primal;
  std::optional<RobustValue> robust;
  if (do_primal) {
    primal = sw.time("robust_primal", [&] { return solve_robust_primal(x0, inst.ambiguity, m, inst.system, util); });
    robust = sw.time("robust_value", [&] { return solve_u(x0, inst.ambiguity, inst.system, util); });
    converged = converged && primal->converged && robust->converged;
    const MinimaxReport mm = verify_minimax(primal->value, robust->value, 2.0 * ts);
    rep["primal"] = {{"value", primal->value},
                     {"upper_bound", primal->upper_bound},
                     {"certified_gap", primal->certified_gap},
                     {"converged", primal->converged},
                     {"worst_measure", to_std(primal->worst_measure.weights())},
                     {"strategy", strategy_json(primal->strategy, m)},
                     {"wealth", to_std(primal->wealth)},
                     {"diagnostics", primal->diagnostics}};
    rep["robust_value"] = {{"value", robust->value},
                           {"lower_bound", robust->lower_bound},
                           {"certified_gap", robust->certified_gap},
                           {"converged", robust->converged},
                           {"argmin", to_std(robust->argmin.weights())}};
    checks.add("primal_certified_gap", primal->certified_gap, ts);
    checks.add("robust_value_certified_gap", robust->certified_gap, ts);
    checks.add("minimax_gap", mm.gap, 2.0 * ts);
  }

  if (do_dual) {
    const ConjugateResult conj =
        sw.time("conjugate_search", [&] { return conjugate_search(x0, inst.ambiguity, inst.system, util); });
    const DualSolution& d = conj.dual;
    const DualSolution vp = sw.time("dual_fixed_measure", [&] { return solve_v_P(conj.y_hat, d.P_hat, inst.system, util); });
    const RecoveredOptimizers rec = sw.time(
        "recover", [&] { return recover_optimizers(d.P_hat, d.Q_hat, conj.y_hat, x0, util, inst.system); });
    converged = converged && d.converged && vp.converged;
    rep["dual"] = {{"y_hat", conj.y_hat},
                   {"v", conj.v_at_y},
                   {"conjugate_value", conj.value},
                   {"certified_gap", d.certified_gap},
                   {"converged", d.converged},
                   {"evaluations", conj.evaluations},
                   {"v_P_hat", vp.value},
                   {"P_hat", to_std(d.P_hat.weights())},
                   {"Q_hat", to_std(d.Q_hat.weights())},
                   {"Y_hat", to_std(d.Y_hat)},
                   {"X_recovered", to_std(rec.X_hat)},
                   {"extension_price", rec.extension_price}};
    checks.add("dual_certified_gap", d.certified_gap, ts);
    checks.add("dual_fixed_measure_gap", vp.certified_gap, ts);
    checks.add("q_hat_calibration_residual", inst.system.residual(d.Q_hat.weights()), tol::feasibility);
    checks.add("density_consistency", std::abs(d.P_hat.expectation(d.Y_hat) - conj.y_hat), tol::measure_validity * 10);
    // X = I(Y) must be attainable from x0 on supp P-hat: the finite-scale
    // density reduction is certified by its superhedging price
    checks.add("density_reduction_superhedge", std::abs(rec.extension_price - x0), tol::theorem2_residual);

    std::ostringstream csv;
    csv << "path";
    for (int t = 1; t <= m.grid.periods; ++t) csv << ",s" << t;
    csv << ",X_hat,Y_hat,wealth\n";
    for (std::size_t p = 0; p < m.paths.path_count(); ++p) {
      csv << p;
      for (int t = 1; t <= m.grid.periods; ++t) csv << "," << fmt(m.paths.price(p, t));
      const Index i = static_cast<Index>(p);
      csv << "," << fmt(rec.X_hat[i]) << "," << fmt(d.Y_hat[i]) << ","
          << (primal ? fmt(primal->wealth[i]) : std::string("")) << "\n";
    }
    out.csv = csv.str();

    if (do_primal) {
      // the optimal wealth under the least favorable measure; the robust
      // strategy's own wealth stays in the primal section
      const PrimalSolution at_p =
          sw.time("primal_fixed_measure", [&] { return solve_u_P(x0, d.P_hat, m, inst.system, util); });
      converged = converged && at_p.converged;
      SaddleReport s;
      s.x0 = x0;
      s.u_hat = primal->value;
      s.u = robust->value;
      s.y_hat = conj.y_hat;
      s.v_y = conj.v_at_y;
      s.v_P_y = vp.value;
      s.X_hat = at_p.wealth;
      s.Y_hat = d.Y_hat;
      s.P_hat = d.P_hat;
      s.Q_hat = d.Q_hat;
      s.minimax_gap = std::abs(primal->value - robust->value);
      s.conjugacy_gap = std::abs(primal->value - conj.value);
      const ResidualReport r = theorem2_verify(s, util);
      rep["saddle"] = {{"x0", x0},
                       {"u_hat", s.u_hat},
                       {"u", s.u},
                       {"y_hat", s.y_hat},
                       {"v_y", s.v_y},
                       {"v_P_y", s.v_P_y},
                       {"X_hat", to_std(s.X_hat)},
                       {"Y_hat", to_std(s.Y_hat)},
                       {"P_hat", to_std(s.P_hat.weights())},
                       {"Q_hat", to_std(s.Q_hat.weights())},
                       {"minimax_gap", s.minimax_gap},
                       {"conjugacy_gap", s.conjugacy_gap},
                       {"residuals",
                        {{"r1", r.r1}, {"r2", r.r2}, {"r3", r.r3}, {"r4", r.r4}, {"r5", r.r5}, {"tolerance", r.tol},
                         {"pass", r.pass}}}};
      checks.add("conjugacy_gap", s.conjugacy_gap, 3.0 * ts);
      checks.add("r1_value_identity", r.r1, r.tol);
      checks.add("r2_conjugate_identity", r.r2, r.tol);
      checks.add("r3_dual_measure_identity", r.r3, r.tol);
      checks.add("r4_inverse_marginal", r.r4, r.tol);
      checks.add("r5_budget_identity", r.r5, r.tol);
    }

    if (cfg.curves) {
      std::ostringstream vc, dc;
      vc << "x,u_hat\n";
      if (do_primal)
        for (double f : {0.25, 0.5, 1.0, 2.0, 4.0})
          vc << fmt(f * x0) << "," << fmt(solve_robust_primal(f * x0, inst.ambiguity, m, inst.system, util).value)
             << "\n";
      dc << "y,v\n";
      for (int k = -4; k <= 4; ++k) {
        const double y = conj.y_hat * std::pow(2.0, 0.5 * k);
        dc << fmt(y) << "," << fmt(solve_v(y, inst.ambiguity, inst.system, util).value) << "\n";
      }
      out.value_curve_csv = vc.str();
      out.dual_curve_csv = dc.str();
    }
  }

  rep["checks"] = checks.list();
  if (!converged) {
    out.exit_code = exit_solver;
    rep["status"] = "not_converged";
  } else if (!checks.all()) {
    out.exit_code = exit_verification;
    rep["status"] = "verification_failed";
  } else {
    rep["status"] = "pass";
  }
  rep["exit_code"] = out.exit_code;
  out.timings = sw.timings();
  return out;
}

struct VerifyOutcome {
  bool pass = false;
  json details;
};

/// Re-checks a saved report: recomputes the saddle residuals from the stored
/// (y, P, Q, X) and confirms every recorded check is within its tolerance.
inline VerifyOutcome verify_report(const json& rep) {
  VerifyOutcome out;
  try {
    if (rep.at("schema_version").get<int>() != kReportSchemaVersion) throw SchemaError("unsupported report schema");
    bool ok = true;
    json recomputed = json::object();
    if (rep.contains("saddle")) {
      const json& s = rep["saddle"];
      const UtilityFamily util = UtilityFamily::parse(rep.at("config").at("utility").get<std::string>());
      auto vec = [](const json& j) {
        const auto v = j.get<std::vector<double>>();
        return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
      };
      SaddleReport sr;
      sr.x0 = s.at("x0").get<double>();
      sr.u_hat = s.at("u_hat").get<double>();
      sr.u = s.at("u").get<double>();
      sr.y_hat = s.at("y_hat").get<double>();
      sr.v_y = s.at("v_y").get<double>();
      sr.v_P_y = s.at("v_P_y").get<double>();
      sr.X_hat = vec(s.at("X_hat"));
      sr.P_hat = Measure::from_solver(vec(s.at("P_hat")));
      sr.Q_hat = Measure::from_solver(vec(s.at("Q_hat")));
      const ResidualReport r = theorem2_verify(sr, util, s.at("residuals").at("tolerance").get<double>());
      recomputed = {{"r1", r.r1}, {"r2", r.r2}, {"r3", r.r3}, {"r4", r.r4}, {"r5", r.r5}, {"pass", r.pass}};
      ok = ok && r.pass;
    }
    for (const auto& c : rep.at("checks")) {
      if (c.contains("value")) {
        const double v = c.at("value").is_number() ? c.at("value").get<double>() : kInf;
        ok = ok && v <= c.at("tolerance").get<double>();
      } else {
        ok = ok && c.at("pass").get<bool>();
      }
    }
    out.pass = ok;
    out.details = {{"recomputed_residuals", recomputed}, {"pass", ok}};
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed report: ") + e.what());
  }
  return out;
}

struct SuperhedgeRun {
  json report;
  int exit_code = exit_ok;
};

inline SuperhedgeRun run_superhedge(const Instance& inst, const std::vector<std::vector<double>>& claims) {
  SuperhedgeRun out;
  json list = json::array();
  bool ok = true;
  for (const auto& c : claims) {
    if (static_cast<Index>(c.size()) != inst.system.path_count())
      throw InvariantError("claim.size", "claim must have one value per path");
    const ClaimVector claim(Vector(Eigen::Map<const Vector>(c.data(), static_cast<Index>(c.size()))));
    const SuperhedgeResult sh = superhedge_price(claim, inst.system);
    const CalibratedExpectation ce = max_calibrated_expectation(claim, inst.system);
    const double gap = std::abs(sh.price - ce.value);
    const bool pass = gap <= tol::duality_gap;
    ok = ok && pass;
    const TradingStrategy s = inst.system.instruments.to_strategy(sh.price, sh.theta, inst.market.paths.node_count());
    list.push_back({{"claim", c},
                    {"superhedge_price", sh.price},
                    {"max_calibrated_expectation", ce.value},
                    {"maximizer", pipeline_detail::to_std(ce.maximizer.weights())},
                    {"gap", gap},
                    {"tolerance", tol::duality_gap},
                    {"pass", pass},
                    {"strategy", pipeline_detail::strategy_json(s, inst.market)}});
  }
  out.report = {{"schema_version", kReportSchemaVersion}, {"claims", list}, {"status", ok ? "pass" : "verification_failed"}};
  out.exit_code = ok ? exit_ok : exit_verification;
  return out;
}

}  // namespace robustss
