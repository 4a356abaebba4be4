#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "genft/genft.h"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct CommandError {
  int code;
};

void check(genft_status status) {
  if (status == GENFT_OK) return;
  std::cerr << "genft: " << genft_status_name(status) << ": " << genft_last_error() << "\n";
  throw CommandError{genft_status_is_validation(status) ? kExitValidation : kExitRuntime};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  genft_string_free(s);
  return out;
}

void write_or_print(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::cerr << "genft: io error: cannot write " << path << "\n";
    throw CommandError{kExitRuntime};
  }
}

struct ConfigHandle {
  genft_config* c = nullptr;
  ~ConfigHandle() { genft_config_free(c); }
};

struct MatrixHandle {
  genft_matrix* m = nullptr;
  ~MatrixHandle() { genft_matrix_free(m); }
};

struct CheckpointHandle {
  genft_checkpoint* ck = nullptr;
  ~CheckpointHandle() { genft_checkpoint_free(ck); }
};

void load_config(ConfigHandle& h, const std::string& path, const std::optional<std::uint64_t>& seed) {
  check(genft_config_load(path.c_str(), &h.c));
  if (seed) check(genft_config_set(h.c, "seed", std::to_string(*seed).c_str()));
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool self_check = false;
  bool export_base = false;
  double tolerance = 1e-4;

  // budget
  std::uint64_t layers = 12;
  std::uint64_t d = 768;
  std::optional<std::uint64_t> d_in, d_out;
  std::uint64_t types = 1;
  std::optional<std::uint64_t> r, a;
  std::uint64_t b = 0;
  bool bias = false;
  bool curve = false;
  std::vector<std::uint64_t> curve_b{0, 2, 4};
  std::uint64_t dim_min = 1;
  std::uint64_t dim_max = 64;

  // merge / dump
  std::string checkpoint;
  std::string w0;
  std::string group;
  std::size_t layer = 0;

  // ablate
  std::vector<std::uint64_t> seeds;

  // bench
  std::vector<std::size_t> dims{256, 512};
  std::size_t n = 8;
  std::size_t repeats = 7;
};

int cmd_train(const Options& o) {
  ConfigHandle cfg;
  load_config(cfg, o.config, o.seed);
  const std::string out = o.out.empty() ? "run" : o.out;
  genft_train_result r{};
  check(genft_train(cfg.c, o.config.c_str(), out.c_str(), o.export_base, &r));
  std::printf("steps=%llu initial_loss=%.6g final_loss=%.6g base_unchanged=%s\n",
              static_cast<unsigned long long>(r.steps), r.initial_loss, r.final_loss,
              r.base_unchanged ? "yes" : "no");
  std::printf("wrote %s/loss.csv, %s/checkpoint.genft, %s/manifest.json\n", out.c_str(),
              out.c_str(), out.c_str());
  return 0;
}

int cmd_grad_check(const Options& o) {
  ConfigHandle cfg;
  load_config(cfg, o.config, o.seed);
  int passed = 0;
  char* report = nullptr;
  check(genft_grad_check(cfg.c, o.tolerance, &passed, &report));
  std::cout << take(report);
  return passed ? 0 : kExitRuntime;
}

int cmd_budget(const Options& o) {
  if (o.curve) {
    std::string csv;
    for (std::size_t i = 0; i < o.curve_b.size(); ++i) {
      char* part = nullptr;
      check(genft_budget_curve_csv(o.layers, o.d, o.types, o.curve_b[i], o.dim_min, o.dim_max,
                                   &part));
      std::string text = take(part);
      if (i > 0) text = text.substr(text.find('\n') + 1);
      if (o.curve_b.size() > 1) {
        // Prefix every row with the specific dim it was computed for.
        std::string tagged;
        std::size_t start = 0;
        bool header = i == 0;
        while (start < text.size()) {
          const std::size_t end = text.find('\n', start);
          const std::string line = text.substr(start, end - start);
          tagged += (header ? std::string("b") : std::to_string(o.curve_b[i])) + "," + line + "\n";
          header = false;
          start = end == std::string::npos ? text.size() : end + 1;
        }
        text = tagged;
      }
      csv += text;
    }
    write_or_print(csv, o.out);
    return 0;
  }
  genft_budget_spec spec{};
  spec.layers = o.layers;
  spec.d_in = o.d_in.value_or(o.d);
  spec.d_out = o.d_out.value_or(o.d);
  spec.types = o.types;
  spec.r = o.r.value_or(0);
  spec.a = o.a.value_or(0);
  spec.b = o.b;
  spec.bias = o.bias;
  genft_budget_report rep{};
  const bool solve = o.r.has_value() && !o.a.has_value();
  check(genft_budget(&spec, solve, &rep));
  const unsigned long long a = rep.has_solved_a ? rep.solved_a : spec.a;
  std::printf("lora_params=%llu\n", static_cast<unsigned long long>(rep.lora_params));
  std::printf("genft_params=%llu\n", static_cast<unsigned long long>(rep.genft_params));
  if (o.r) {
    if (rep.inequality_holds) {
      std::printf("a=%llu, latent=%llu > r=%llu\n", a,
                  static_cast<unsigned long long>(rep.latent_dim),
                  static_cast<unsigned long long>(spec.r));
    } else {
      std::printf("a=%llu, latent=%llu, r=%llu\n", a,
                  static_cast<unsigned long long>(rep.latent_dim),
                  static_cast<unsigned long long>(spec.r));
    }
  } else {
    std::printf("a=%llu, latent=%llu\n", a, static_cast<unsigned long long>(rep.latent_dim));
  }
  return 0;
}

void open_inputs(const Options& o, CheckpointHandle& ck, MatrixHandle& w0) {
  check(genft_checkpoint_load(o.checkpoint.c_str(), &ck.ck));
  check(genft_matrix_load(o.w0.c_str(), &w0.m));
}

int cmd_merge(const Options& o) {
  CheckpointHandle ck;
  MatrixHandle w0, merged;
  open_inputs(o, ck, w0);
  double err = 0.0;
  check(genft_checkpoint_merge(ck.ck, o.group.c_str(), o.layer, w0.m, o.self_check ? 10 : 0,
                               &merged.m, &err));
  const std::string out = o.out.empty() ? "merged.gftm" : o.out;
  check(genft_matrix_save(merged.m, out.c_str()));
  std::printf("wrote %s (%zux%zu)\n", out.c_str(), genft_matrix_rows(merged.m),
              genft_matrix_cols(merged.m));
  if (o.self_check) {
    const bool ok = err <= genft_merge_tolerance();
    std::printf("self-check %s: max |adapted - merged| = %.3g (tolerance %.0e)\n",
                ok ? "passed" : "FAILED", err, genft_merge_tolerance());
    if (!ok) return kExitRuntime;
  }
  return 0;
}

int cmd_dump(const Options& o) {
  CheckpointHandle ck;
  MatrixHandle w0;
  open_inputs(o, ck, w0);
  const std::string out = o.out.empty() ? "dump" : o.out;
  check(genft_checkpoint_dump(ck.ck, o.group.c_str(), o.layer, w0.m, out.c_str()));
  std::printf("wrote %s/W0.csv, %s/delta.csv, %s/merged.csv\n", out.c_str(), out.c_str(),
              out.c_str());
  return 0;
}

int cmd_ablate(const Options& o) {
  ConfigHandle cfg;
  load_config(cfg, o.config, o.seed);
  std::vector<std::uint64_t> seeds = o.seeds;
  if (seeds.empty()) seeds.push_back(genft_config_seed(cfg.c));
  char* csv = nullptr;
  check(genft_ablate(cfg.c, seeds.data(), seeds.size(), &csv));
  write_or_print(take(csv), o.out);
  return 0;
}

int cmd_bench(const Options& o) {
  char* csv = nullptr;
  check(genft_bench(o.dims.data(), o.dims.size(), o.n, o.repeats, o.seed.value_or(42), &csv));
  write_or_print(take(csv), o.out);
  return 0;
}

int apply_thread_env() {
  const char* env = std::getenv("GENFT_THREADS");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const unsigned long threads = std::strtoul(env, &end, 10);
  if (*end != '\0' || threads == 0 || threads > 1024) {
    std::cerr << "genft: GENFT_THREADS must be a positive integer, got '" << env << "'\n";
    return kExitValidation;
  }
  check(genft_set_threads(static_cast<std::uint32_t>(threads)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative parameter-efficient fine-tuning toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", genft_version());
  Options o;

  auto* train = app.add_subcommand("train", "Train adapters on the synthetic task");
  train->add_option("--config", o.config, "Config file")->required();
  train->add_option("--seed", o.seed, "Override the config seed");
  train->add_option("--out", o.out, "Output directory (default: run)");
  train->add_flag("--export-base", o.export_base, "Also write the frozen weights as GFTM");

  auto* grad = app.add_subcommand("grad-check", "Compare analytic and numeric gradients");
  grad->add_option("--config", o.config, "Config file")->required();
  grad->add_option("--seed", o.seed, "Override the config seed");
  grad->add_option("--tol", o.tolerance, "Relative error tolerance");

  auto* budget = app.add_subcommand("budget", "Trainable parameter counts");
  budget->add_option("--L", o.layers, "Layers");
  budget->add_option("--D", o.d, "Width of square layers");
  budget->add_option("--D-in", o.d_in, "Input width");
  budget->add_option("--D-out", o.d_out, "Output width");
  budget->add_option("--types", o.types, "Adapted projection types");
  budget->add_option("--r", o.r, "LoRA rank; solves for the shared dim unless --a is given");
  budget->add_option("--a", o.a, "Shared dim");
  budget->add_option("--b", o.b, "Specific dim");
  budget->add_flag("--bias", o.bias, "Count GenFT output biases");
  budget->add_flag("--curve", o.curve, "Emit count-versus-dim CSV");
  budget->add_option("--curve-b", o.curve_b, "Specific dims for the curve")->delimiter(',');
  budget->add_option("--dim-min", o.dim_min, "Smallest dim on the curve");
  budget->add_option("--dim-max", o.dim_max, "Largest dim on the curve");
  budget->add_option("--out", o.out, "Write the curve CSV here instead of stdout");

  auto* merge = app.add_subcommand("merge", "Fold a trained update into W0");
  auto* dump = app.add_subcommand("dump", "Write W0, delta and merged matrices as CSV");
  for (auto* sub : {merge, dump}) {
    sub->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
    sub->add_option("--w0", o.w0, "Frozen weight (GFTM)")->required();
    sub->add_option("--group", o.group, "Group name when the checkpoint has several");
    sub->add_option("--layer", o.layer, "Layer index");
  }
  merge->add_option("--out", o.out, "Merged GFTM file (default: merged.gftm)");
  merge->add_flag("--self-check", o.self_check, "Verify against the adapted forward");
  dump->add_option("--out", o.out, "Output directory (default: dump)");

  auto* ablate = app.add_subcommand("ablate", "Train every single-component ablation");
  ablate->add_option("--config", o.config, "Config file")->required();
  ablate->add_option("--seed", o.seed, "Override the config seed");
  ablate->add_option("--seeds", o.seeds, "Seeds to run")->delimiter(',');
  ablate->add_option("--out", o.out, "CSV file (default: stdout)");

  auto* bench = app.add_subcommand("bench", "Forward+backward timings at matched budgets");
  bench->add_option("--dims", o.dims, "Layer widths")->delimiter(',');
  bench->add_option("--n", o.n, "LoRA rank and GenFT latent dim");
  bench->add_option("--repeats", o.repeats, "Timed repetitions per case");
  bench->add_option("--seed", o.seed, "Seed");
  bench->add_option("--out", o.out, "CSV file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (const int rc = apply_thread_env()) return rc;
    if (*train) return cmd_train(o);
    if (*grad) return cmd_grad_check(o);
    if (*budget) return cmd_budget(o);
    if (*merge) return cmd_merge(o);
    if (*dump) return cmd_dump(o);
    if (*ablate) return cmd_ablate(o);
    if (*bench) return cmd_bench(o);
  } catch (const CommandError& e) {
    return e.code;
  }
  return kExitValidation;
}
