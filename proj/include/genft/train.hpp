#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "genft/adapters.hpp"
#include "genft/autodiff.hpp"
#include "genft/matrix.hpp"

namespace genft {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 100;
  std::size_t warmup_epochs = 0;
  double cycle_decay = 0.1;
  std::size_t batch_size = 64;
  std::uint64_t seed = 42;
  double label_smoothing = 0.0;

  void validate() const;
};

/// Linear warmup from 0 to lr over [0, warmup_epochs], then cosine decay to
/// cycle_decay * lr at epoch `epochs - 1`. Fractional epochs are allowed;
/// epochs past the end stay at the floor.
double lr_schedule(const TrainConfig& config, double epoch);

struct AdamWState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// One decoupled-weight-decay Adam update, in place. `step_index` is
/// zero-based; bias correction uses step_index + 1. Throws TrainingError
/// naming the parameter when a gradient is not finite.
void adamw_step(std::span<const NamedParam> params, std::span<const Matrix> grads,
                AdamWState& state, const TrainConfig& config, std::size_t step_index, double lr);

enum class TaskKind { teacher_student_regression, toy_classification };
enum class TeacherKind { genft, lowrank, none };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);
std::string to_string(TeacherKind kind);
TeacherKind parse_teacher_kind(std::string_view name);

struct TaskSpec {
  TaskKind kind = TaskKind::teacher_student_regression;
  TeacherKind teacher = TeacherKind::genft;
  std::size_t types = 1;
  std::size_t layers = 2;
  std::size_t d_in = 16;
  std::size_t d_out = 16;
  std::size_t n_samples = 64;
  double noise_std = 0.0;
  /// Frobenius norm of the hidden update relative to the base weight.
  double teacher_scale = 0.5;
  /// Latent width of the hidden update (shared dim for a GenFT teacher,
  /// rank for a low-rank teacher).
  std::size_t teacher_dim = 4;
};

struct TaskLayer {
  Matrix base;     // frozen W0, D_out x D_in
  Matrix teacher;  // W0 + hidden update
  Matrix x;        // D_in x n_samples
  Matrix y;        // regression targets, D_out x n_samples
  std::vector<std::size_t> labels;  // classification targets
};

/// Data for `types` projection kinds x `layers` layers.
struct SyntheticTask {
  TaskSpec spec;
  std::vector<std::vector<TaskLayer>> layers;  // [type][layer]

  /// Frozen base weights of one projection type.
  std::vector<Matrix> bases(std::size_t type) const;
};

SyntheticTask make_task(const TaskSpec& spec, std::uint64_t seed);

/// Mean over (type, layer) of the per-layer loss on the given sample
/// columns (all columns when `columns` is empty). MSE for regression,
/// smoothed cross-entropy for classification.
Var task_loss(Tape& tape, const SyntheticTask& task, const std::vector<AdapterGroup>& groups,
              const std::vector<AdapterGroup::Bound>& bound,
              const std::vector<std::vector<LayerMasks>>& masks,
              std::span<const std::size_t> columns, double label_smoothing);

/// Eval-mode loss over the whole data set.
double evaluate_loss(const SyntheticTask& task, const std::vector<AdapterGroup>& groups,
                     double label_smoothing = 0.0);

struct TraceRow {
  std::size_t step;
  double loss;
  double lr;
};

struct TrainRun {
  std::vector<TraceRow> trace;
  double initial_loss = 0.0;  // eval mode, before the first step
  double final_loss = 0.0;    // eval mode, after the last step
  std::size_t steps = 0;
  std::vector<std::uint64_t> base_checksums_before;
  std::vector<std::uint64_t> base_checksums_after;
};

/// AdamW on every trainable parameter of `groups`. Masks are drawn from a
/// stream forked from config.seed, in ascending type, layer, row-then-column
/// order; minibatches from another. Throws TrainingError on a non-finite
/// loss, naming the step.
TrainRun train(const SyntheticTask& task, std::vector<AdapterGroup>& groups,
               const TrainConfig& config);

/// Header "step,loss,lr".
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  bool passed = true;

  std::string to_text() const;
};

using LossBuilder = std::function<Var(Tape&, const std::vector<Var>& params)>;
/// Hook applied to each analytic gradient before comparison (fault injection).
using GradTamper = std::function<void(const std::string& name, Matrix& grad)>;

/// Compares analytic gradients against central differences with step `h`.
/// Per entry the relative error is |g - n| / max(|g|, |n|, 1e-3 * scale + 1e-8),
/// where scale is the largest |n| of that parameter.
GradCheckReport grad_check(const std::vector<NamedParam>& params, const LossBuilder& loss,
                           double tolerance, double h = 1e-5, const GradTamper& tamper = {});

/// How masks are treated during a layer-group gradient check. Live masks
/// would differ between the perturbed evaluations, so they are rejected.
enum class MaskUse { eval, frozen, live };

/// Loss = sum over layers of mean((forward(x) - targets[l])^2).
GradCheckReport grad_check(AdapterGroup& group, const Matrix& x, std::span<const Matrix> targets,
                           MaskUse masks, Rng& mask_rng, double tolerance,
                           const GradTamper& tamper = {});

struct BenchCase {
  AdapterKind method;
  std::size_t d;
  std::size_t dim;  // LoRA rank, or GenFT shared dim (specific dim 0)
};

struct BenchRow {
  std::string method;
  std::size_t d;
  std::size_t dim;
  double median_seconds;
};

/// Median wall time of one adapted-layer forward + backward (square D x D
/// base, D x batch_cols input, MSE loss) per case. Method "base" in the
/// output means no adapter.
std::vector<BenchRow> timing_bench(std::span<const BenchCase> cases, std::size_t batch_cols = 32,
                                   std::size_t repeats = 7, std::uint64_t seed = 42);

/// Median time of the frozen-base-only forward + backward at width d.
double base_bench(std::size_t d, std::size_t batch_cols = 32, std::size_t repeats = 7,
                  std::uint64_t seed = 42);

/// Header "method,d,dim,median_seconds".
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace genft
