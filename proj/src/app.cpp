#include "genft/app.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "genft/errors.hpp"

namespace genft {

namespace fs = std::filesystem;

namespace {

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
}

std::string join(const std::string& dir, const std::string& file) {
  return (fs::path(dir) / file).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

}  // namespace

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  j["tool_version"] = tool_version;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["config"] = config_text;
  return j.dump(2) + "\n";
}

Experiment run_experiment(const RunConfig& config) {
  config.validate();
  Experiment e;
  e.task = make_task(config.task, config.train.seed);
  Rng init_rng = Rng(config.train.seed).fork(3);
  e.groups = build_groups(config, e.task, init_rng);
  e.run = train(e.task, e.groups, config.train);
  return e;
}

std::string base_file_name(const std::string& group, std::size_t layer) {
  return "base_" + group + "_" + std::to_string(layer) + ".gftm";
}

TrainArtifacts train_to_directory(const RunConfig& config, const std::string& config_path,
                                  const std::string& out_dir, bool export_base,
                                  Experiment* result) {
  RunManifest manifest;
  manifest.command = "train";
  manifest.config_path = config_path;
  manifest.seed = config.train.seed;
  manifest.out_dir = out_dir;
  manifest.started_at = utc_timestamp();
  manifest.config_text = to_config_text(config);

  Experiment e = run_experiment(config);
  ensure_directory(out_dir);

  TrainArtifacts files;
  files.loss_csv = join(out_dir, "loss.csv");
  {
    std::ofstream out = open_out(files.loss_csv);
    write_trace_csv(out, e.run.trace);
    if (!out) throw IoError("write failed: " + files.loss_csv);
  }
  files.checkpoint = join(out_dir, "checkpoint.genft");
  save_checkpoint(files.checkpoint, e.groups, config.train.seed);
  if (export_base) {
    for (const AdapterGroup& g : e.groups) {
      for (std::size_t l = 0; l < g.layers(); ++l) {
        files.bases.push_back(join(out_dir, base_file_name(g.name(), l)));
        save_gftm(files.bases.back(), g.base(l));
      }
    }
  }
  manifest.finished_at = utc_timestamp();
  files.manifest = join(out_dir, "manifest.json");
  {
    std::ofstream out = open_out(files.manifest);
    out << manifest.to_json();
    if (!out) throw IoError("write failed: " + files.manifest);
  }
  if (result) *result = std::move(e);
  return files;
}

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> names{"full", "no_shared", "no_specific", "no_row",
                                              "no_column"};
  return names;
}

RunConfig ablation_variant(const RunConfig& config, const std::string& variant) {
  if (config.method != AdapterKind::genft) throw ConfigError("ablation: method must be genft");
  RunConfig out = config;
  GenFTSpec& g = out.genft;
  g.ablation = {};
  if (variant == "full") {
  } else if (variant == "no_shared") {
    g.ablation.no_shared = true;
    g.shared_dim = 0;
    if (g.specific_dim == 0) g.specific_dim = 8;
  } else if (variant == "no_specific") {
    g.ablation.no_specific = true;
    g.specific_dim = 0;
    if (g.shared_dim == 0) g.shared_dim = 8;
  } else if (variant == "no_row") {
    g.ablation.no_row = true;
  } else if (variant == "no_column") {
    g.ablation.no_column = true;
  } else {
    throw ConfigError("ablation: unknown variant '" + variant + "'");
  }
  out.validate();
  return out;
}

std::vector<AblationRow> run_ablation(const RunConfig& config,
                                      const std::vector<std::uint64_t>& seeds) {
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    for (const std::string& variant : ablation_variants()) {
      RunConfig c = ablation_variant(config, variant);
      c.train.seed = seed;
      Experiment e = run_experiment(c);
      std::size_t params = 0;
      for (const AdapterGroup& g : e.groups) params += g.trainable_count();
      rows.push_back({seed, variant, c.genft.shared_dim, c.genft.specific_dim, params,
                      e.run.initial_loss, e.run.final_loss});
    }
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, const std::vector<AblationRow>& rows) {
  out << "seed,variant,shared_dim,specific_dim,params,initial_loss,final_loss\n";
  char buf[64];
  for (const AblationRow& r : rows) {
    out << r.seed << ',' << r.variant << ',' << r.shared_dim << ',' << r.specific_dim << ','
        << r.params << ',';
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.initial_loss, r.final_loss);
    out << buf << '\n';
  }
}

GradCheckReport run_grad_check(const RunConfig& config, double tolerance) {
  config.validate();
  SyntheticTask task = make_task(config.task, config.train.seed);
  Rng init_rng = Rng(config.train.seed).fork(3);
  std::vector<AdapterGroup> groups = build_groups(config, task, init_rng);
  Rng mask_rng = Rng(config.train.seed).fork(1);
  GradCheckReport total;
  total.tolerance = tolerance;
  for (std::size_t t = 0; t < groups.size(); ++t) {
    std::vector<Matrix> targets;
    for (const TaskLayer& layer : task.layers[t]) targets.push_back(layer.y);
    GradCheckReport r = grad_check(groups[t], task.layers[t][0].x, targets, MaskUse::frozen,
                                   mask_rng, tolerance);
    total.passed = total.passed && r.passed;
    total.entries.insert(total.entries.end(), r.entries.begin(), r.entries.end());
  }
  return total;
}

AdapterGroup& find_group(Checkpoint& ck, const std::string& name) {
  if (name.empty()) {
    if (ck.groups.size() != 1) {
      throw ConfigError("checkpoint holds " + std::to_string(ck.groups.size()) +
                        " groups; name one with --group");
    }
    return ck.groups.front();
  }
  for (AdapterGroup& g : ck.groups)
    if (g.name() == name) return g;
  throw ConfigError("checkpoint has no group named '" + name + "'");
}

MergeResult merge_checkpoint(Checkpoint& ck, const std::string& group, std::size_t layer,
                             const Matrix& w0, std::size_t self_check_inputs,
                             std::uint64_t seed) {
  AdapterGroup& g = find_group(ck, group);
  g.set_base(layer, w0);
  const MergedLayer merged = g.merge(layer);
  MergeResult result{merged.weight, 0.0};
  Rng rng(seed);
  for (std::size_t i = 0; i < self_check_inputs; ++i) {
    Matrix x(g.d_in(), 4);
    for (double& v : x.values()) v = rng.normal(0.0, 1.0);
    const Matrix adapted = g.forward(layer, x, Mode::eval, nullptr);
    result.self_check_error = std::max(result.self_check_error,
                                       max_abs_diff(adapted, merged.forward(x)));
  }
  return result;
}

DumpFiles dump_delta(Checkpoint& ck, const std::string& group, std::size_t layer,
                     const Matrix& w0, const std::string& out_dir) {
  AdapterGroup& g = find_group(ck, group);
  g.set_base(layer, w0);
  const Matrix delta = g.delta(layer);
  ensure_directory(out_dir);
  DumpFiles files{join(out_dir, "W0.csv"), join(out_dir, "delta.csv"), join(out_dir, "merged.csv")};
  save_csv(files.w0, w0);
  save_csv(files.delta, delta);
  save_csv(files.merged, add(w0, delta));
  return files;
}

std::vector<BenchCase> bench_cases(const std::vector<std::size_t>& dims, std::size_t n) {
  std::vector<BenchCase> cases;
  for (std::size_t d : dims) {
    cases.push_back({AdapterKind::lora, d, n});
    cases.push_back({AdapterKind::genft, d, n});
  }
  return cases;
}

}  // namespace genft
