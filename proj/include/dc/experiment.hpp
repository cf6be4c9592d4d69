#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dc/cube.hpp"
#include "dc/diagnostics.hpp"
#include "dc/mapping.hpp"
#include "dc/objective.hpp"
#include "dc/target.hpp"

namespace dc {

/// Full sweep description. Parsed from a JSON config file; CLI flags override
/// individual fields. The iid M=1 baseline cell is always added.
struct ExperimentConfig {
  std::vector<TargetSpec> targets;
  std::vector<Method> methods;
  std::vector<MapKind> maps;
  std::vector<int> M_values;
  std::vector<std::uint64_t> seeds;
  OptimizerSettings opt;
  int bank_size = 2048;
  int eval_bank_size = 65536;
  long kl_draws = 1'000'000;
  long moment_samples = 100'000;
  int samples_per_cell = 10'000;
  std::string out_dir = "results";
  int jobs = 0;  // 0 = hardware concurrency
};

/// The default desk-scale sweep: 4 targets x 6 methods x 2 maps x M in {2,4,8}
/// x 3 seeds, plus the iid M=1 baseline per (target, map, seed).
ExperimentConfig default_config();

/// Strict JSON parse; unknown fields and invalid combinations are reported
/// with their path. Throws std::invalid_argument.
ExperimentConfig parse_config(const std::string& json_text);

/// Validates the grid (even M for antithetic methods, positive sizes, Halton
/// dimension bound). Called by parse_config and run.
void validate_config(const ExperimentConfig& cfg);

struct RunSummary {
  std::vector<SweepRecord> records;
  std::map<std::string, CorrelationReport> per_target;
  std::optional<CorrelationReport> pooled;
  std::string results_csv_path;
  std::string summary_json_path;
};

/// Executes the sweep: per cell, Laplace init -> optimize -> fresh-bank
/// evaluation, gap/KL diagnostics, moment errors, posterior samples. Cells run
/// in a worker pool; a failing cell is recorded in its CSV error column and
/// the run continues. Byte-deterministic results.csv for a fixed config.
RunSummary run(const ExperimentConfig& cfg);

std::string results_csv_header();
std::string record_to_csv_row(const SweepRecord& r);

/// Parses a results.csv previously written by run().
std::vector<SweepRecord> load_records_csv(const std::string& path);

/// One coupling-validity cell of the `validate` command.
struct ValidityCell {
  Method method = Method::iid;
  int M = 1;
  bool is_base = false;
  int cube_dim = 0;
  bool skipped = false;
  double max_rel_err = 0.0;
  std::string note;
};

/// Runs check_validity for each requested method (plus "base") on a 1-d
/// target; cells whose cube dimension exceeds 2 are skipped with a notice.
/// With corrupt_self_test, the coupling probabilities are reversed and the
/// cell is expected to fail loudly (error > 0.1).
std::vector<ValidityCell> validate_cells(const Target& target,
                                         const std::vector<std::string>& method_names,
                                         int M, bool corrupt_self_test);

}  // namespace dc
