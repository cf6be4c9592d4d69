#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dc/experiment.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

dc::Target target_by_name(const std::string& name, int dim) {
  dc::TargetSpec spec;
  spec.name = name;
  spec.dim = dim;
  if (name == "gaussian")
    throw std::runtime_error("gaussian needs mu/cov parameters; use a config file");
  return dc::builtin_target(spec);
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            int jobs_override, long seed_override) {
  dc::ExperimentConfig cfg;
  bool config_has_seeds = false;
  if (!config_path.empty()) {
    const std::string text = read_file(config_path);
    cfg = dc::parse_config(text);
    config_has_seeds = nlohmann::json::parse(text).contains("seeds");
  } else {
    cfg = dc::default_config();
  }
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (jobs_override > 0) cfg.jobs = jobs_override;
  if (seed_override >= 0) {
    cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
  } else if (!config_has_seeds) {
    if (const char* env = std::getenv("DC_SEED"))
      cfg.seeds = {static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10))};
  }

  const dc::RunSummary summary = dc::run(cfg);
  int failed = 0;
  for (const auto& r : summary.records)
    if (!r.error.empty()) ++failed;
  std::printf("wrote %s (%zu cells, %d failed)\n", summary.results_csv_path.c_str(),
              summary.records.size(), failed);
  if (summary.pooled)
    std::printf("pooled ELBO/error improvement correlation: %.4f (%d pairs)\n",
                summary.pooled->pearson, summary.pooled->n_pairs);
  std::printf("summary: %s\n", summary.summary_json_path.c_str());
  return 0;
}

int cmd_validate(const std::string& target_name, int dim, const std::string& methods,
                 int M, bool self_test) {
  const dc::Target target = target_by_name(target_name, dim);
  std::vector<std::string> names;
  std::stringstream ss(methods);
  std::string item;
  while (std::getline(ss, item, ',')) names.push_back(item);

  const auto cells = dc::validate_cells(target, names, M, self_test);
  const double threshold = 1e-3;
  bool ok = true;
  std::printf("%-12s %4s %8s %14s  %s\n", "method", "M", "cube_dim", "max_rel_err",
              "status");
  for (const auto& c : cells) {
    const char* name = c.is_base ? "base" : dc::method_name(c.method);
    if (c.skipped) {
      std::printf("%-12s %4d %8d %14s  SKIP (%s)\n", name, c.M, c.cube_dim, "-",
                  c.note.c_str());
      continue;
    }
    bool pass;
    if (self_test) {
      pass = c.max_rel_err > 0.1;  // the corrupted coupling must fail loudly
      std::printf("%-12s %4d %8d %14.3e  %s (negative control)\n", name, c.M,
                  c.cube_dim, c.max_rel_err, pass ? "PASS" : "FAIL");
    } else {
      pass = c.max_rel_err <= threshold;
      std::printf("%-12s %4d %8d %14.3e  %s\n", name, c.M, c.cube_dim, c.max_rel_err,
                  pass ? "PASS" : "FAIL");
    }
    ok = ok && pass;
  }
  return ok ? 0 : 1;
}

int cmd_oracle(const std::string& target_name, int dim, long budget) {
  const dc::Target target = target_by_name(target_name, dim);
  const dc::MomentOracle oracle = dc::moment_oracle(target, budget);
  nlohmann::json j;
  j["target"] = target.name;
  j["source"] = oracle.source == dc::OracleSource::analytic ? "analytic"
                : oracle.source == dc::OracleSource::grid_quadrature
                    ? "grid_quadrature"
                    : "long_run_importance_sampling";
  j["mean"] = std::vector<double>(oracle.mean.data(), oracle.mean.data() + oracle.mean.size());
  std::vector<std::vector<double>> cov;
  for (int i = 0; i < oracle.cov.rows(); ++i)
    cov.emplace_back(oracle.cov.row(i).begin(), oracle.cov.row(i).end());
  j["cov"] = cov;
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variance-reduced Monte Carlo variational objectives with coupled "
               "posterior sampling"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int jobs = 0;
  long seed = -1;
  auto* run = app.add_subcommand("run", "run an experiment sweep from a JSON config");
  run->add_option("--config", config_path, "config file (JSON); default sweep if omitted");
  run->add_option("--out", out_dir, "output directory override");
  run->add_option("--jobs", jobs, "worker threads (0 = hardware)");
  run->add_option("--seed", seed, "replace the seed list with a single seed");

  std::string v_target = "skewed_mixture_1d", v_methods = "base,iid,anti,strat";
  int v_dim = 2, v_M = 2;
  bool v_self_test = false;
  auto* val = app.add_subcommand("validate",
                                 "quadrature check of the estimator-coupling identity");
  val->add_option("--target", v_target, "1-d target name");
  val->add_option("--dim", v_dim, "dimension for families that need one");
  val->add_option("--methods", v_methods, "comma-separated list; 'base' allowed");
  val->add_option("--M", v_M, "candidate points per batch");
  val->add_flag("--self-test", v_self_test,
                "corrupt the coupling and require the check to fail");

  std::string o_target = "skewed_mixture_1d";
  int o_dim = 2;
  long o_budget = 1'000'000;
  auto* orc = app.add_subcommand("oracle", "print the posterior moment oracle");
  orc->add_option("--target", o_target, "target name");
  orc->add_option("--dim", o_dim, "dimension for families that need one");
  orc->add_option("--budget", o_budget, "importance-sampling budget");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, jobs, seed);
    if (val->parsed()) return cmd_validate(v_target, v_dim, v_methods, v_M, v_self_test);
    if (orc->parsed()) return cmd_oracle(o_target, o_dim, o_budget);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
