#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "genft/checkpoint.hpp"
#include "genft/config.hpp"
#include "genft/train.hpp"

namespace genft {

inline constexpr const char* kToolVersion = "0.1.0";

/// One per output directory, written as manifest.json.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string tool_version = kToolVersion;
  std::string started_at;
  std::string finished_at;
  std::string config_text;

  std::string to_json() const;
};

/// UTC wall-clock time, ISO 8601.
std::string utc_timestamp();

struct Experiment {
  SyntheticTask task;
  std::vector<AdapterGroup> groups;
  TrainRun run;
};

/// Task from the config seed, adapter init from an independent stream of the
/// same seed, then training.
Experiment run_experiment(const RunConfig& config);

struct TrainArtifacts {
  std::string loss_csv;
  std::string checkpoint;
  std::string manifest;
  std::vector<std::string> bases;
};

/// Runs the experiment and writes loss.csv, checkpoint.genft and
/// manifest.json into `out_dir` (created if missing). With `export_base` the
/// frozen weights are also written as base_<group>_<layer>.gftm.
TrainArtifacts train_to_directory(const RunConfig& config, const std::string& config_path,
                                  const std::string& out_dir, bool export_base,
                                  Experiment* result = nullptr);

std::string base_file_name(const std::string& group, std::size_t layer);

/// Variant names understood by ablation_variant().
const std::vector<std::string>& ablation_variants();

/// The config with one component removed. Dimensions not removed are kept;
/// a removed partner dimension that was already 0 is replaced by 8 so the
/// variant still trains something.
RunConfig ablation_variant(const RunConfig& config, const std::string& variant);

struct AblationRow {
  std::uint64_t seed;
  std::string variant;
  std::size_t shared_dim;
  std::size_t specific_dim;
  std::size_t params;
  double initial_loss;
  double final_loss;
};

std::vector<AblationRow> run_ablation(const RunConfig& config,
                                      const std::vector<std::uint64_t>& seeds);
void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows);

/// Gradient check of every group the config builds, masks frozen, against
/// the task's first layer inputs and targets.
GradCheckReport run_grad_check(const RunConfig& config, double tolerance = 1e-4);

struct MergeResult {
  Matrix merged;
  double self_check_error = 0.0;  // max |adapted - merged| over random inputs
};

/// Looks up a group by name (empty = the only group) in the checkpoint.
AdapterGroup& find_group(Checkpoint& ck, const std::string& name);

/// Installs `w0` as the base of (group, layer) and merges it. With
/// `self_check_inputs` > 0 the eval-mode adapted forward is compared with
/// the merged forward on that many random inputs.
MergeResult merge_checkpoint(Checkpoint& ck, const std::string& group, std::size_t layer,
                             const Matrix& w0, std::size_t self_check_inputs = 0,
                             std::uint64_t seed = 42);

inline constexpr double kMergeTolerance = 1e-12;

struct DumpFiles {
  std::string w0;
  std::string delta;
  std::string merged;
};

/// W0.csv, delta.csv and merged.csv for one layer of a checkpoint.
DumpFiles dump_delta(Checkpoint& ck, const std::string& group, std::size_t layer,
                     const Matrix& w0, const std::string& out_dir);

/// Matched-budget cases for each D: LoRA(r = n) and GenFT(a + b = n, b = 0).
std::vector<BenchCase> bench_cases(const std::vector<std::size_t>& dims, std::size_t n);

}  // namespace genft
