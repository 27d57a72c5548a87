#include <gtest/gtest.h>

#include "common.hpp"
#include "robustss/generator.hpp"
#include "robustss/pipeline.hpp"

using namespace robustss;
using fixtures::vec;

namespace {

Instance r1() {
  return make_instance(json::parse(R"({"T": 1, "s0": 1, "levels": [[0.5, 2]], "cap": 4})"),
                       json::parse(R"({"type": "hull", "measures": [[0.6, 0.4], [0.4, 0.6]]})"));
}

RunConfig config(double x0, const std::string& utility = "log") {
  RunConfig c;
  c.subcommand = "solve";
  c.utility = utility;
  c.x0 = x0;
  return c;
}

}  // namespace

TEST(Pipeline, BinomialHullLog) {
  const RunResult r = run_pipeline(r1(), config(1.0));
  ASSERT_EQ(r.exit_code, exit_ok) << r.report.dump(2);
  // log utility: u_P(1) = KL(P | Q), minimized over the hull at P = (0.6, 0.4)
  const Vector q = vec({2.0 / 3.0, 1.0 / 3.0});
  const double oracle = fixtures::kl(vec({0.6, 0.4}), q);
  EXPECT_NEAR(r.report["primal"]["value"].get<double>(), oracle, 1e-9);
  EXPECT_NEAR(oracle, 0.0097123, 1e-6);
  EXPECT_NEAR(r.report["dual"]["y_hat"].get<double>(), 1.0, 1e-7);
  const auto x = r.report["saddle"]["X_hat"].get<std::vector<double>>();
  EXPECT_NEAR(x[0], 0.9, 1e-6);
  EXPECT_NEAR(x[1], 1.2, 1e-6);
  EXPECT_EQ(r.report["status"], "pass");
  EXPECT_TRUE(verify_report(r.report).pass);
}

TEST(Pipeline, LogScaling) {
  // u(lambda x) = u(x) + ln lambda for log utility
  const double base = run_pipeline(r1(), config(1.0)).report["primal"]["value"].get<double>();
  for (double lambda : {0.5, 2.0, 10.0}) {
    const RunResult r = run_pipeline(r1(), config(lambda));
    EXPECT_NEAR(r.report["primal"]["value"].get<double>(), base + std::log(lambda), 1e-7);
    EXPECT_NEAR(r.report["dual"]["y_hat"].get<double>(), 1.0 / lambda, 1e-6);
  }
}

TEST(Pipeline, SingletonIsExact) {
  // P = Q calibrated: cash is optimal, u(1) = U(1) and every residual vanishes
  json m = json::parse(R"({"T": 2, "s0": 1, "levels": [[0.5, 2], [0.25, 1, 4]], "cap": 8,
    "options": [{"kind": "call", "maturity": 2, "strike": 1, "price": 0.5}]})");
  json a = {{"type", "hull"}, {"measures", {{26.0 / 45, 1.0 / 18, 1.0 / 30, 4.0 / 45, 1.0 / 9, 2.0 / 15}}}};
  const Instance inst = make_instance(m, a);
  ASSERT_LE(inst.system.residual(inst.ambiguity.vertices()[0].weights()), 1e-12);
  for (const char* u : {"log", "power:0.5", "bexp:0.5"}) {
    const RunResult r = run_pipeline(inst, config(1.0, u));
    ASSERT_EQ(r.exit_code, exit_ok) << u;
    const UtilityFamily util = UtilityFamily::parse(u);
    EXPECT_NEAR(r.report["primal"]["value"].get<double>(), util.value(1.0), 1e-9);
    for (const char* k : {"r1", "r2", "r3", "r4", "r5"})
      EXPECT_LE(r.report["saddle"]["residuals"][k].get<double>(), 1e-9) << u << " " << k;
  }
}

TEST(Pipeline, VerifyRejectsTamperedReport) {
  json rep = run_pipeline(r1(), config(1.0)).report;
  ASSERT_TRUE(verify_report(rep).pass);
  rep["saddle"]["y_hat"] = rep["saddle"]["y_hat"].get<double>() + 0.1;
  const VerifyOutcome v = verify_report(rep);
  EXPECT_FALSE(v.pass);
  EXPECT_NEAR(v.details["recomputed_residuals"]["r2"].get<double>(), 0.1, 1e-3);
  json broken = rep;
  broken.erase("checks");
  EXPECT_THROW(verify_report(broken), SchemaError);
}

TEST(Pipeline, SubcommandsAndErrors) {
  RunConfig c = config(1.0);
  c.subcommand = "primal";
  const RunResult p = run_pipeline(r1(), c);
  EXPECT_TRUE(p.report.contains("primal"));
  EXPECT_FALSE(p.report.contains("dual"));
  c.subcommand = "dual";
  const RunResult d = run_pipeline(r1(), c);
  EXPECT_FALSE(d.report.contains("primal"));
  EXPECT_TRUE(d.report.contains("dual"));
  EXPECT_THROW(run_pipeline(r1(), config(0.0)), InvariantError);
  EXPECT_THROW(run_pipeline(r1(), config(1.0, "cubic")), std::exception);
}

TEST(Pipeline, Deterministic) {
  const auto g = generate_random_instance(7);
  const Instance inst = make_instance(g.market, g.ambiguity);
  const RunResult a = run_pipeline(inst, config(g.x0, g.utility));
  const RunResult b = run_pipeline(inst, config(g.x0, g.utility));
  EXPECT_EQ(a.report.dump(), b.report.dump());
  EXPECT_EQ(a.csv, b.csv);
}

TEST(Pipeline, SuperhedgeClaims) {
  const SuperhedgeRun r = run_superhedge(r1(), {{0, 1}, {4, 0}, {1.2, 0.9}});
  ASSERT_EQ(r.exit_code, exit_ok);
  const auto& c = r.report["claims"];
  // E_Q with Q = (2/3, 1/3)
  EXPECT_NEAR(c[0]["superhedge_price"].get<double>(), 1.0 / 3.0, 1e-10);
  EXPECT_NEAR(c[1]["superhedge_price"].get<double>(), 8.0 / 3.0, 1e-10);
  EXPECT_NEAR(c[2]["superhedge_price"].get<double>(), 1.1, 1e-10);
}
