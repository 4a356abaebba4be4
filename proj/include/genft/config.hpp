#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "genft/adapters.hpp"
#include "genft/train.hpp"

namespace genft {

/// Everything one run needs. Parsed from flat `key = value` text with `#`
/// comments; string values may be quoted. Keys are the
/// hyperparameter names (ratio, init_a, init_b, sigma1, sigma2, shared_dim,
/// specific_dim, bias, dropout, scaling, seed, label_smoothing, batch_size,
/// lr, weight_decay, epochs, warmup_epochs, cycle_decay) plus the model and
/// task shape. Short abbreviations (K-U, LR, T/F, ...) are accepted.
struct RunConfig {
  AdapterKind method = AdapterKind::genft;
  GenFTSpec genft;
  LoraSpec lora;
  TrainConfig train;
  TaskSpec task;

  /// Cross-field checks; ConfigError naming the offending key.
  void validate() const;
};

RunConfig parse_config(std::string_view text);

/// Sets one key from its text form without re-validating the whole config.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

RunConfig load_config(const std::string& path);

/// Canonical `key = value` rendering; parse_config(to_config_text(c)) == c.
std::string to_config_text(const RunConfig& config);

/// Names of every recognised key, in canonical order.
const std::vector<std::string>& config_keys();

/// One adapter group per projection type over the task's frozen bases, with
/// factors drawn from `rng` in ascending type order.
std::vector<AdapterGroup> build_groups(const RunConfig& config, const SyntheticTask& task,
                                       Rng& rng);

}  // namespace genft
