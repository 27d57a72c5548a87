// robustss: batch CLI for robust utility maximization on finite path grids.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "robustss/generator.hpp"
#include "robustss/pipeline.hpp"

namespace fs = std::filesystem;
using namespace robustss;

namespace {

struct Options {
  std::string market, ambiguity, utility = "log", claim, report, out_dir = ".";
  std::vector<double> x0;
  double tol_saddle = tol::saddle;
  int jobs = 1;
  bool curves = false;
  std::optional<std::uint64_t> seed;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write '" + path.string() + "'");
  out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::optional<std::uint64_t> effective_seed(const Options& o) {
  if (const char* env = std::getenv("ROBUSTSS_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw SchemaError("ROBUSTSS_SEED must be a nonnegative integer");
    }
  }
  return o.seed;
}

std::string x_label(double x) {
  std::ostringstream s;
  s << "x0_" << x;
  return s.str();
}

int run_solve(const std::string& sub, Options o, bool utility_given) {
  const auto seed = effective_seed(o);
  Instance inst;
  if (!o.market.empty() || !o.ambiguity.empty()) {
    if (o.market.empty() || o.ambiguity.empty()) throw SchemaError("--market and --ambiguity go together");
    inst = load_instance(o.market, o.ambiguity);
  } else if (seed) {
    const GeneratedInstance g = generate_random_instance(*seed);
    inst = make_instance(g.market, g.ambiguity);
    if (!utility_given) o.utility = g.utility;
    if (o.x0.empty()) o.x0.push_back(g.x0);
  } else {
    throw SchemaError("need --market/--ambiguity or a seed");
  }
  if (o.x0.empty()) o.x0.push_back(1.0);

  auto job = [&](double x) {
    RunConfig cfg;
    cfg.subcommand = sub;
    cfg.market_path = o.market;
    cfg.ambiguity_path = o.ambiguity;
    cfg.utility = o.utility;
    cfg.x0 = x;
    cfg.tol_saddle = o.tol_saddle;
    cfg.seed = seed;
    cfg.curves = o.curves;
    return run_pipeline(inst, cfg);
  };

  // independent x0 values run concurrently, each writing its own directory
  std::vector<RunResult> results(o.x0.size());
  const std::size_t width = static_cast<std::size_t>(std::max(1, o.jobs));
  for (std::size_t lo = 0; lo < o.x0.size(); lo += width) {
    std::vector<std::future<RunResult>> batch;
    for (std::size_t i = lo; i < std::min(o.x0.size(), lo + width); ++i)
      batch.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred, job, o.x0[i]));
    for (std::size_t i = 0; i < batch.size(); ++i) results[lo + i] = batch[i].get();
  }

  int code = exit_ok;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const RunResult& r = results[i];
    const fs::path dir = o.x0.size() > 1 ? fs::path(o.out_dir) / x_label(o.x0[i]) : fs::path(o.out_dir);
    fs::create_directories(dir);
    write_file(dir / "report.json", dump(r.report));
    write_file(dir / "timings.json", dump(r.timings));
    if (!r.csv.empty()) write_file(dir / "paths.csv", r.csv);
    if (o.curves) {
      if (!r.value_curve_csv.empty()) write_file(dir / "value_curve.csv", r.value_curve_csv);
      if (!r.dual_curve_csv.empty()) write_file(dir / "dual_curve.csv", r.dual_curve_csv);
    }
    std::cout << "x0=" << o.x0[i] << " status=" << r.report["status"].get<std::string>();
    if (r.report.contains("primal")) std::cout << " u_hat=" << r.report["primal"]["value"].get<double>();
    if (r.report.contains("dual")) std::cout << " y_hat=" << r.report["dual"]["y_hat"].get<double>();
    std::cout << "\n";
    code = std::max(code, r.exit_code);
  }
  return code;
}

int run_superhedge(const Options& o) {
  if (o.market.empty() || o.ambiguity.empty() || o.claim.empty())
    throw SchemaError("superhedge needs --market, --ambiguity and --claim");
  const Instance inst = load_instance(o.market, o.ambiguity);
  const SuperhedgeRun r = robustss::run_superhedge(inst, parse_claims(read_json_file(o.claim)));
  fs::create_directories(o.out_dir);
  write_file(fs::path(o.out_dir) / "superhedge.json", dump(r.report));
  for (const auto& c : r.report["claims"])
    std::cout << "price=" << c["superhedge_price"].get<double>() << " gap=" << c["gap"].get<double>()
              << (c["pass"].get<bool>() ? " pass" : " FAIL") << "\n";
  return r.exit_code;
}

int run_verify(const Options& o) {
  if (o.report.empty()) throw SchemaError("verify needs --report");
  const VerifyOutcome v = verify_report(read_json_file(o.report));
  std::cout << dump(v.details);
  return v.pass ? exit_ok : exit_verification;
}

int run_gen(const Options& o) {
  const auto seed = effective_seed(o);
  if (!seed) throw SchemaError("gen needs --seed or ROBUSTSS_SEED");
  const GeneratedInstance g = generate_random_instance(*seed);
  fs::create_directories(o.out_dir);
  write_file(fs::path(o.out_dir) / "market.json", dump(g.market));
  write_file(fs::path(o.out_dir) / "ambiguity.json", dump(g.ambiguity));
  write_file(fs::path(o.out_dir) / "run.json", dump({{"seed", *seed}, {"utility", g.utility}, {"x0", g.x0}}));
  std::cout << "utility=" << g.utility << " x0=" << g.x0 << "\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust utility maximization with static options on a finite grid"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed_value = 0;

  auto instance_flags = [&](CLI::App* sub) {
    sub->add_option("--market", o.market, "market JSON");
    sub->add_option("--ambiguity", o.ambiguity, "ambiguity JSON");
    sub->add_option("--out-dir", o.out_dir, "output directory");
  };
  std::vector<CLI::App*> pipelines;
  std::vector<CLI::Option*> utility_opts;
  for (const char* name : {"solve", "primal", "dual"}) {
    CLI::App* sub = app.add_subcommand(name, std::string(name) + " pipeline");
    instance_flags(sub);
    utility_opts.push_back(sub->add_option("--utility", o.utility, "log | power:p | bexp:p"));
    sub->add_option("--x0", o.x0, "initial capital (repeatable)")->check(CLI::PositiveNumber);
    sub->add_option("--tol-saddle", o.tol_saddle, "certified-gap tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--jobs", o.jobs, "concurrent x0 runs")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed_value, "generate the instance from this seed");
    sub->add_flag("--curves", o.curves, "also write value and dual curves");
    pipelines.push_back(sub);
  }
  CLI::App* sh = app.add_subcommand("superhedge", "superhedging prices of claims");
  instance_flags(sh);
  sh->add_option("--claim", o.claim, "claim JSON")->required();
  CLI::App* ver = app.add_subcommand("verify", "re-verify a saved report");
  ver->add_option("--report", o.report, "report JSON")->required();
  CLI::App* gen = app.add_subcommand("gen", "write a random instance");
  gen->add_option("--seed", seed_value, "seed");
  gen->add_option("--out-dir", o.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_schema;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    if (const CLI::Option* opt = active->get_option_no_throw("--seed"); opt && opt->count() > 0) o.seed = seed_value;
    for (std::size_t i = 0; i < pipelines.size(); ++i)
      if (active == pipelines[i]) return run_solve(active->get_name(), o, utility_opts[i]->count() > 0);
    if (active == sh) return run_superhedge(o);
    if (active == ver) return run_verify(o);
    return run_gen(o);
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return exit_schema;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return exit_invariant;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return exit_solver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_solver;
  }
}
