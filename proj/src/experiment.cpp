#include "dc/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dc/estimator.hpp"
#include "dc/stats.hpp"

namespace dc {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Cell {
  TargetSpec target;
  Method method;
  MapKind map;
  int M;
  std::uint64_t seed;
  std::string tag;  // target_method_map_M_seed
};

std::string cell_tag(const std::string& target, Method m, MapKind k, int M,
                     std::uint64_t seed) {
  std::ostringstream os;
  os << target << "_" << method_name(m) << "_" << map_kind_name(k) << "_M" << M << "_s"
     << seed;
  return os.str();
}

SweepRecord run_cell(const Cell& cell, const ExperimentConfig& cfg,
                     const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  SweepRecord rec;
  rec.target = cell.target.name;
  rec.method = method_name(cell.method);
  rec.map = map_kind_name(cell.map);
  rec.M = cell.M;
  rec.seed = cell.seed;
  try {
    const Target target = builtin_target(cell.target);
    const CubeMap map{cell.map, target.dim};
    const std::uint64_t h = fnv1a64(cell.tag);

    const GaussianParams init = laplace_init(target);

    RngStream bank_rng(cell.seed, h * 16 + 0);
    const SampleBank bank =
        draw_bank(cell.method, cell.M, map, cfg.bank_size, bank_rng);
    const OptResult opt = optimize(target, bank, init, cfg.opt);

    EstimatorCouplingPair pair = rao_blackwell_discrete(
        split_lift(base_pair(opt.theta_star, map, target), cell.method, cell.M));

    RngStream eval_rng(cell.seed, h * 16 + 1);
    const SampleBank eval_bank =
        draw_bank(cell.method, cell.M, map, cfg.eval_bank_size, eval_rng);
    const ElboEstimate elbo = eval_elbo(pair, eval_bank);
    rec.final_elbo = elbo.elbo_hat;
    if (target.log_normalizer) rec.gap = *target.log_normalizer - elbo.elbo_hat;

    const MomentOracle oracle = moment_oracle(target);

    if (target.log_normalizer && target.dim <= 2 && cfg.kl_draws > 0) {
      RngStream kl_rng(cell.seed, h * 16 + 2);
      GapOptions gopts;
      gopts.kl_draws = cfg.kl_draws;
      try {
        const GapReport gr = gap_report(pair, target, eval_bank, oracle, kl_rng, gopts);
        rec.kl_z = gr.kl_z_hat;
      } catch (const std::exception&) {
        // KL estimate unavailable (grid coverage); the cell itself is fine
      }
    }

    RngStream me_rng(cell.seed, h * 16 + 3);
    const MomentError me = moment_error(pair, oracle, cfg.moment_samples, me_rng);
    rec.mean_err = me.mean_err;
    rec.cov_err = me.cov_err;

    if (cfg.samples_per_cell > 0) {
      RngStream s_rng(cell.seed, h * 16 + 4);
      std::ofstream fs(out_dir + "/samples_" + cell.tag + ".csv", std::ios::binary);
      for (int j = 0; j < target.dim; ++j) fs << (j ? "," : "") << "z" << j;
      fs << "\n";
      WeightedCubeBatch batch;
      CandidateSet cs;
      for (int i = 0; i < cfg.samples_per_cell; ++i) {
        pair.evaluate_into(s_rng, batch, cs);
        int idx;
        try {
          idx = sample_coupling_index(cs, s_rng);
        } catch (const DegenerateBatch&) {
          continue;
        }
        for (int j = 0; j < target.dim; ++j) fs << (j ? "," : "") << fmt(cs.z(j, idx));
        fs << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == ',' || c == '\n') c = ';';
    rec.error = msg;
  }
  rec.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  return rec;
}

}  // namespace

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  TargetSpec skew;
  skew.name = "skewed_mixture_1d";
  TargetSpec gauss;
  gauss.name = "gaussian";
  gauss.mu = Eigen::Vector2d(0.5, -0.3);
  gauss.cov = Eigen::Matrix2d{{1.2, 0.5}, {0.5, 0.8}};
  TargetSpec fun;
  fun.name = "funnel";
  fun.dim = 2;
  TargetSpec logit;
  logit.name = "logit_reg_small";
  cfg.targets = {skew, gauss, fun, logit};
  cfg.methods = {Method::iid, Method::anti, Method::strat, Method::anti_strat,
                 Method::qmc, Method::lhs};
  cfg.maps = {MapKind::cartesian, MapKind::elliptical};
  cfg.M_values = {2, 4, 8};
  cfg.seeds = {1, 2, 3};
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (cfg.targets.empty()) fail("targets: must not be empty");
  if (cfg.methods.empty()) fail("methods: must not be empty");
  if (cfg.maps.empty()) fail("maps: must not be empty");
  if (cfg.M_values.empty()) fail("M_values: must not be empty");
  if (cfg.seeds.empty()) fail("seeds: must not be empty");
  for (int M : cfg.M_values) {
    if (M < 1 || M > 512) fail("M_values: M must be in [1, 512]");
    for (Method m : cfg.methods)
      if ((m == Method::anti || m == Method::anti_strat) && M % 2 != 0)
        fail(std::string("M_values: ") + method_name(m) + " requires even M, got " +
             std::to_string(M));
  }
  if (cfg.bank_size < 1) fail("optimizer.bank_size: must be positive");
  if (cfg.eval_bank_size < 1) fail("optimizer.eval_bank_size: must be positive");
  if (cfg.opt.iters < 1) fail("optimizer.iters: must be positive");
  if (!(cfg.opt.step > 0.0)) fail("optimizer.step: must be positive");
  if (cfg.kl_draws < 0) fail("kl_draws: must be >= 0");
  if (cfg.moment_samples < 100) fail("moment_samples: must be >= 100");
  if (cfg.samples_per_cell < 0) fail("samples_per_cell: must be >= 0");
}

namespace {

void check_allowed_keys(const json& obj, const std::string& path,
                        std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok)
      throw std::invalid_argument("config: " + path + "." + key + ": unknown field");
  }
}

TargetSpec parse_target(const json& j, const std::string& path) {
  if (!j.is_object()) throw std::invalid_argument("config: " + path + ": must be an object");
  check_allowed_keys(j, path, {"name", "dim", "mu", "cov", "evidence"});
  TargetSpec spec;
  if (!j.contains("name"))
    throw std::invalid_argument("config: " + path + ".name: required");
  spec.name = j.at("name").get<std::string>();
  if (j.contains("dim")) spec.dim = j.at("dim").get<int>();
  if (j.contains("evidence")) spec.evidence = j.at("evidence").get<double>();
  if (j.contains("mu")) {
    const auto v = j.at("mu").get<std::vector<double>>();
    spec.mu = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
  }
  if (j.contains("cov")) {
    const auto rows = j.at("cov").get<std::vector<std::vector<double>>>();
    const long n = static_cast<long>(rows.size());
    spec.cov.resize(n, n);
    for (long i = 0; i < n; ++i) {
      if (static_cast<long>(rows[static_cast<std::size_t>(i)].size()) != n)
        throw std::invalid_argument("config: " + path + ".cov: must be square");
      for (long k = 0; k < n; ++k)
        spec.cov(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
  }
  return spec;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
  }
  check_allowed_keys(j, "$",
                     {"targets", "methods", "maps", "M_values", "seeds", "optimizer",
                      "kl_draws", "moment_samples", "samples_per_cell", "out_dir",
                      "jobs"});
  ExperimentConfig cfg = default_config();
  if (j.contains("targets")) {
    cfg.targets.clear();
    int i = 0;
    for (const auto& t : j.at("targets"))
      cfg.targets.push_back(parse_target(t, "targets[" + std::to_string(i++) + "]"));
  }
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j.at("methods"))
      cfg.methods.push_back(method_from_name(m.get<std::string>()));
  }
  if (j.contains("maps")) {
    cfg.maps.clear();
    for (const auto& m : j.at("maps"))
      cfg.maps.push_back(map_kind_from_name(m.get<std::string>()));
  }
  if (j.contains("M_values")) cfg.M_values = j.at("M_values").get<std::vector<int>>();
  if (j.contains("seeds"))
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_allowed_keys(o, "optimizer",
                       {"optimizer", "step", "iters", "bank_size", "eval_bank_size",
                        "seed", "widen_restart"});
    if (o.contains("optimizer")) {
      const std::string name = o.at("optimizer").get<std::string>();
      if (name == "adam") cfg.opt.engine = OptimizerSettings::Engine::adam;
      else if (name == "lbfgs") cfg.opt.engine = OptimizerSettings::Engine::lbfgs;
      else throw std::invalid_argument("config: optimizer.optimizer: adam or lbfgs");
    }
    if (o.contains("step")) cfg.opt.step = o.at("step").get<double>();
    if (o.contains("iters")) cfg.opt.iters = o.at("iters").get<int>();
    if (o.contains("bank_size")) cfg.bank_size = o.at("bank_size").get<int>();
    if (o.contains("eval_bank_size"))
      cfg.eval_bank_size = o.at("eval_bank_size").get<int>();
    if (o.contains("widen_restart"))
      cfg.opt.widen_restart = o.at("widen_restart").get<bool>();
    if (o.contains("seed") && !j.contains("seeds"))
      cfg.seeds = {o.at("seed").get<std::uint64_t>()};
  }
  if (j.contains("kl_draws")) cfg.kl_draws = j.at("kl_draws").get<long>();
  if (j.contains("moment_samples"))
    cfg.moment_samples = j.at("moment_samples").get<long>();
  if (j.contains("samples_per_cell"))
    cfg.samples_per_cell = j.at("samples_per_cell").get<int>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
  validate_config(cfg);
  return cfg;
}

std::string results_csv_header() {
  return "target,method,map,M,seed,final_elbo,gap,kl_z,mean_err,cov_err,error";
}

std::string record_to_csv_row(const SweepRecord& r) {
  std::ostringstream os;
  os << r.target << "," << r.method << "," << r.map << "," << r.M << "," << r.seed << ","
     << fmt_opt(r.final_elbo) << "," << fmt_opt(r.gap) << "," << fmt_opt(r.kl_z) << ","
     << fmt_opt(r.mean_err) << "," << fmt_opt(r.cov_err) << "," << r.error;
  return os.str();
}

RunSummary run(const ExperimentConfig& cfg) {
  validate_config(cfg);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec || !fs::is_directory(cfg.out_dir))
    throw std::runtime_error("run: cannot create output directory " + cfg.out_dir);
  {
    std::ofstream probe(cfg.out_dir + "/.write_probe", std::ios::binary);
    if (!probe) throw std::runtime_error("run: output directory not writable");
  }
  fs::remove(cfg.out_dir + "/.write_probe", ec);

  // grid: methods x M (+ iid M=1 baseline) per target/map/seed
  std::vector<Cell> cells;
  for (const TargetSpec& t : cfg.targets)
    for (MapKind map : cfg.maps)
      for (std::uint64_t seed : cfg.seeds) {
        bool have_iid1 = false;
        for (Method m : cfg.methods)
          for (int M : cfg.M_values) {
            cells.push_back({t, m, map, M, seed, cell_tag(t.name, m, map, M, seed)});
            if (m == Method::iid && M == 1) have_iid1 = true;
          }
        if (!have_iid1)
          cells.push_back({t, Method::iid, map, 1, seed,
                           cell_tag(t.name, Method::iid, map, 1, seed)});
      }

  std::vector<SweepRecord> records(cells.size());
  std::atomic<std::size_t> next{0};
  const unsigned jobs = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs)
                                     : std::max(1u, std::thread::hardware_concurrency());
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      records[i] = run_cell(cells[i], cfg, cfg.out_dir);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  RunSummary summary;
  summary.records = records;
  summary.results_csv_path = cfg.out_dir + "/results.csv";
  summary.summary_json_path = cfg.out_dir + "/summary.json";

  {
    std::ofstream out(summary.results_csv_path, std::ios::binary);
    out << results_csv_header() << "\n";
    for (const SweepRecord& r : records) out << record_to_csv_row(r) << "\n";
  }
  {
    std::ofstream out(cfg.out_dir + "/timings.csv", std::ios::binary);
    out << "cell,wall_time_ms\n";
    for (std::size_t i = 0; i < cells.size(); ++i)
      out << cells[i].tag << "," << records[i].wall_time_ms << "\n";
  }

  json per_target = json::object();
  auto corr_json = [](const CorrelationReport& c) {
    json j;
    j["pearson"] = c.pearson;
    j["pearson_filtered"] = c.pearson_filtered;
    j["n_pairs"] = c.n_pairs;
    if (!c.note.empty()) j["note"] = c.note;
    return j;
  };
  for (const TargetSpec& t : cfg.targets) {
    std::vector<SweepRecord> sub;
    for (const SweepRecord& r : records)
      if (r.target == t.name) sub.push_back(r);
    try {
      const CorrelationReport c = sweep_correlation(sub);
      summary.per_target[t.name] = c;
      per_target[t.name] = corr_json(c);
    } catch (const std::exception& e) {
      per_target[t.name] = json{{"note", e.what()}};
    }
  }
  json jsum;
  try {
    const CorrelationReport pooled = sweep_correlation(records);
    summary.pooled = pooled;
    jsum["correlation"] = corr_json(pooled);
  } catch (const std::exception& e) {
    jsum["correlation"] = json{{"note", e.what()}};
  }
  jsum["correlation_per_target"] = per_target;
  jsum["cells"] = cells.size();
  int failed = 0;
  for (const SweepRecord& r : records)
    if (!r.error.empty()) ++failed;
  jsum["failed_cells"] = failed;
  {
    std::ofstream out(summary.summary_json_path, std::ios::binary);
    out << jsum.dump(2) << "\n";
  }
  return summary;
}

std::vector<SweepRecord> load_records_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_records_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != results_csv_header())
    throw std::runtime_error("load_records_csv: unexpected header");
  std::vector<SweepRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    for (int i = 0; i < 10; ++i) {
      const std::size_t c = line.find(',', pos);
      f.push_back(line.substr(pos, c - pos));
      pos = c + 1;
    }
    f.push_back(line.substr(pos));  // error column may be empty
    SweepRecord r;
    r.target = f[0];
    r.method = f[1];
    r.map = f[2];
    r.M = std::stoi(f[3]);
    r.seed = std::stoull(f[4]);
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    r.final_elbo = opt(f[5]);
    r.gap = opt(f[6]);
    r.kl_z = opt(f[7]);
    r.mean_err = opt(f[8]);
    r.cov_err = opt(f[9]);
    r.error = f[10];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ValidityCell> validate_cells(const Target& target,
                                         const std::vector<std::string>& method_names,
                                         int M, bool corrupt_self_test) {
  if (target.dim != 1)
    throw std::invalid_argument("validate: 1-d targets only");
  GaussianParams theta = laplace_init(target);
  theta.scale *= 2.5;  // widen so the grid sees more of the target
  const CubeMap map{MapKind::cartesian, 1};
  const std::vector<double> grid = equal_mass_grid(theta, 32);
  constexpr int kQuadPoints = 4096;  // multiple of the 32 bins: edges align

  std::vector<ValidityCell> out;
  for (const std::string& name : method_names) {
    ValidityCell cell;
    if (name == "base") {
      cell.is_base = true;
      cell.method = Method::iid;
      cell.M = 1;
    } else {
      cell.method = method_from_name(name);
      cell.M = M;
      if ((cell.method == Method::anti || cell.method == Method::anti_strat) &&
          cell.M % 2 != 0)
        cell.M += 1;
    }
    cell.cube_dim = uniform_count(cell.method, cell.M, 1);
    if (cell.cube_dim > 2) {
      cell.skipped = true;
      cell.note = "cube dimension > 2";
      out.push_back(cell);
      continue;
    }
    const EstimatorCouplingPair pair = rao_blackwell_discrete(split_lift(
        base_pair(theta, map, target), cell.method, cell.M));
    try {
      cell.max_rel_err =
          check_validity(pair, target, grid, kQuadPoints, corrupt_self_test);
    } catch (const std::exception& e) {
      cell.skipped = true;
      cell.note = e.what();
    }
    out.push_back(cell);
  }
  return out;
}

}  // namespace dc
