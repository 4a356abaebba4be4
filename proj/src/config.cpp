#include "genft/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "genft/errors.hpp"

namespace genft {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end)
    throw ConfigError("expected a nonnegative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "T" || v == "1") return true;
  if (v == "false" || v == "F" || v == "0") return false;
  throw ConfigError("expected true/false (or T/F), got '" + v + "'");
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Key size_key(std::string name, T RunConfig::*outer, std::size_t T::*inner) {
  return {name, [=](RunConfig& c, const std::string& v) { (c.*outer).*inner = to_uint(v); },
          [=](const RunConfig& c) { return std::to_string((c.*outer).*inner); }};
}

template <typename T>
Key double_key(std::string name, T RunConfig::*outer, double T::*inner) {
  return {name, [=](RunConfig& c, const std::string& v) { (c.*outer).*inner = to_double(v); },
          [=](const RunConfig& c) { return format_double((c.*outer).*inner); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back({"method", [](RunConfig& c, const std::string& v) { c.method = parse_adapter_kind(v); },
                 [](const RunConfig& c) { return to_string(c.method); }});
    k.push_back(size_key("types", &RunConfig::task, &TaskSpec::types));
    k.push_back(size_key("layers", &RunConfig::task, &TaskSpec::layers));
    k.push_back(size_key("d_in", &RunConfig::task, &TaskSpec::d_in));
    k.push_back(size_key("d_out", &RunConfig::task, &TaskSpec::d_out));
    k.push_back(size_key("shared_dim", &RunConfig::genft, &GenFTSpec::shared_dim));
    k.push_back(size_key("specific_dim", &RunConfig::genft, &GenFTSpec::specific_dim));
    k.push_back({"ratio", [](RunConfig& c, const std::string& v) { c.genft.hyper.ratio = to_double(v); },
                 [](const RunConfig& c) { return format_double(c.genft.hyper.ratio); }});
    k.push_back({"scaling", [](RunConfig& c, const std::string& v) { c.genft.hyper.scaling = to_double(v); },
                 [](const RunConfig& c) { return format_double(c.genft.hyper.scaling); }});
    k.push_back({"sigma1", [](RunConfig& c, const std::string& v) { c.genft.hyper.sigma1 = parse_activation(v); },
                 [](const RunConfig& c) { return to_string(c.genft.hyper.sigma1); }});
    k.push_back({"sigma2", [](RunConfig& c, const std::string& v) { c.genft.hyper.sigma2 = parse_activation(v); },
                 [](const RunConfig& c) { return to_string(c.genft.hyper.sigma2); }});
    k.push_back({"init_a", [](RunConfig& c, const std::string& v) { c.genft.init_a = parse_init_scheme(v); },
                 [](const RunConfig& c) { return to_string(c.genft.init_a); }});
    k.push_back({"init_b", [](RunConfig& c, const std::string& v) { c.genft.init_b = parse_init_scheme(v); },
                 [](const RunConfig& c) { return to_string(c.genft.init_b); }});
    k.push_back({"init_shared",
                 [](RunConfig& c, const std::string& v) { c.genft.init_shared = parse_init_scheme(v); },
                 [](const RunConfig& c) { return to_string(c.genft.init_shared); }});
    k.push_back({"bias", [](RunConfig& c, const std::string& v) { c.genft.hyper.bias_enabled = to_bool(v); },
                 [](const RunConfig& c) { return std::string(c.genft.hyper.bias_enabled ? "true" : "false"); }});
    k.push_back({"dropout", [](RunConfig& c, const std::string& v) { c.genft.hyper.dropout = to_double(v); },
                 [](const RunConfig& c) { return format_double(c.genft.hyper.dropout); }});
    k.push_back({"mask", [](RunConfig& c, const std::string& v) { c.genft.mask_policy = parse_mask_policy(v); },
                 [](const RunConfig& c) { return to_string(c.genft.mask_policy); }});
    k.push_back({"ablation", [](RunConfig& c, const std::string& v) { c.genft.ablation = parse_ablation(v); },
                 [](const RunConfig& c) { return to_string(c.genft.ablation); }});
    k.push_back(size_key("lora_rank", &RunConfig::lora, &LoraSpec::rank));
    k.push_back(double_key("lora_scaling", &RunConfig::lora, &LoraSpec::scaling));
    k.push_back({"lora_init_a", [](RunConfig& c, const std::string& v) { c.lora.init_a = parse_init_scheme(v); },
                 [](const RunConfig& c) { return to_string(c.lora.init_a); }});
    k.push_back({"lora_init_b", [](RunConfig& c, const std::string& v) { c.lora.init_b = parse_init_scheme(v); },
                 [](const RunConfig& c) { return to_string(c.lora.init_b); }});
    k.push_back({"seed", [](RunConfig& c, const std::string& v) { c.train.seed = to_uint(v); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    k.push_back(double_key("lr", &RunConfig::train, &TrainConfig::lr));
    k.push_back(double_key("weight_decay", &RunConfig::train, &TrainConfig::weight_decay));
    k.push_back(double_key("beta1", &RunConfig::train, &TrainConfig::beta1));
    k.push_back(double_key("beta2", &RunConfig::train, &TrainConfig::beta2));
    k.push_back(double_key("eps", &RunConfig::train, &TrainConfig::eps));
    k.push_back(size_key("epochs", &RunConfig::train, &TrainConfig::epochs));
    k.push_back(size_key("warmup_epochs", &RunConfig::train, &TrainConfig::warmup_epochs));
    k.push_back(double_key("cycle_decay", &RunConfig::train, &TrainConfig::cycle_decay));
    k.push_back(size_key("batch_size", &RunConfig::train, &TrainConfig::batch_size));
    k.push_back(double_key("label_smoothing", &RunConfig::train, &TrainConfig::label_smoothing));
    k.push_back({"task", [](RunConfig& c, const std::string& v) { c.task.kind = parse_task_kind(v); },
                 [](const RunConfig& c) { return to_string(c.task.kind); }});
    k.push_back({"teacher", [](RunConfig& c, const std::string& v) { c.task.teacher = parse_teacher_kind(v); },
                 [](const RunConfig& c) { return to_string(c.task.teacher); }});
    k.push_back(double_key("teacher_scale", &RunConfig::task, &TaskSpec::teacher_scale));
    k.push_back(size_key("teacher_dim", &RunConfig::task, &TaskSpec::teacher_dim));
    k.push_back(size_key("n_samples", &RunConfig::task, &TaskSpec::n_samples));
    k.push_back(double_key("noise_std", &RunConfig::task, &TaskSpec::noise_std));
    return k;
  }();
  return table;
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front())
    return v.substr(1, v.size() - 2);
  return v;
}

std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quote) {
      if (ch == quote) quote = 0;
    } else if (ch == '"' || ch == '\'') {
      quote = ch;
    } else if (ch == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const Key& k : keys()) n.push_back(k.name);
    return n;
  }();
  return names;
}

void RunConfig::validate() const {
  auto named = [](const char* key, const auto& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(key) + ": " + e.what());
    }
  };
  named("dropout", [&] {
    if (!(genft.hyper.dropout >= 0.0 && genft.hyper.dropout < 1.0))
      throw ConfigError("must lie in [0, 1)");
  });
  named("ratio", [&] { if (!std::isfinite(genft.hyper.ratio)) throw ConfigError("must be finite"); });
  named("scaling", [&] { if (!std::isfinite(genft.hyper.scaling)) throw ConfigError("must be finite"); });
  named("ablation", [&] { genft.ablation.validate(); });
  named("lora_scaling", [&] { if (!std::isfinite(lora.scaling)) throw ConfigError("must be finite"); });
  if (task.layers == 0) throw ConfigError("layers: must be positive");
  if (task.types == 0) throw ConfigError("types: must be positive");
  if (task.d_in == 0) throw ConfigError("d_in: must be positive");
  if (task.d_out == 0) throw ConfigError("d_out: must be positive");
  if (task.n_samples == 0) throw ConfigError("n_samples: must be positive");
  if (!(task.noise_std >= 0.0)) throw ConfigError("noise_std: must be nonnegative");
  if (method == AdapterKind::genft && task.d_in != task.d_out && genft.specific_dim > 0 &&
      !genft.ablation.no_specific && !genft.ablation.no_column) {
    throw ConfigError("specific_dim: the column transform reuses A and B, which needs d_in == d_out "
                      "(use specific_dim = 0 or ablation = no_column for non-square layers)");
  }
  train.validate();
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const Key& k : keys()) {
    if (k.name != key) continue;
    try {
      k.set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
    return;
  }
  throw ConfigError(key + ": unknown configuration key");
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::map<std::string, const Key*> index;
  for (const Key& k : keys()) index[k.name] = &k;
  std::set<std::string> seen;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty() || line.front() == '[') continue;  // blank, comment, or table header
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError(key + ": unknown configuration key");
    if (!seen.insert(key).second) throw ConfigError(key + ": given more than once");
    try {
      it->second->set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const Key& k : keys()) {
    const std::string value = k.get(config);
    const bool numeric = !value.empty() && (std::isdigit(static_cast<unsigned char>(value[0])) ||
                                            value[0] == '-' || value == "true" || value == "false");
    out += k.name + " = " + (numeric ? value : "\"" + value + "\"") + "\n";
  }
  return out;
}

std::vector<AdapterGroup> build_groups(const RunConfig& config, const SyntheticTask& task,
                                       Rng& rng) {
  std::vector<AdapterGroup> groups;
  for (std::size_t t = 0; t < task.layers.size(); ++t) {
    const std::string name = "type" + std::to_string(t);
    if (config.method == AdapterKind::genft) {
      groups.push_back(AdapterGroup::make_genft(name, task.bases(t), config.genft, rng));
    } else {
      groups.push_back(AdapterGroup::make_lora(name, task.bases(t), config.lora, rng));
    }
  }
  return groups;
}

}  // namespace genft
