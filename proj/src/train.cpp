#include "genft/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include "genft/errors.hpp"
#include "genft/init.hpp"

namespace genft {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive and finite");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (warmup_epochs > epochs) throw ConfigError("warmup_epochs must not exceed epochs");
  if (!(cycle_decay >= 0.0 && cycle_decay <= 1.0)) throw ConfigError("cycle_decay must lie in [0, 1]");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw ConfigError("label_smoothing must lie in [0, 1)");
}

double lr_schedule(const TrainConfig& c, double epoch) {
  const double warm = static_cast<double>(c.warmup_epochs);
  if (epoch < warm) return c.lr * epoch / warm;
  const double span = static_cast<double>(c.epochs) - 1.0 - warm;
  const double floor = c.cycle_decay * c.lr;
  if (span <= 0.0) return c.lr;
  const double t = std::min(1.0, (epoch - warm) / span);
  return floor + (c.lr - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void adamw_step(std::span<const NamedParam> params, std::span<const Matrix> grads,
                AdamWState& state, const TrainConfig& c, std::size_t step_index, double lr) {
  if (params.size() != grads.size()) {
    throw DimensionError("adamw_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const NamedParam& p : params) {
      state.m.emplace_back(p.value->rows(), p.value->cols());
      state.v.emplace_back(p.value->rows(), p.value->cols());
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adamw_step: optimizer state size mismatch");

  const double t = static_cast<double>(step_index + 1);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i].value;
    const Matrix& g = grads[i];
    if (!p.same_shape(g) || !p.same_shape(state.m[i])) {
      throw DimensionError("adamw_step: " + params[i].name + " is " + shape_string(p) +
                           " but its gradient is " + shape_string(g));
    }
    if (!all_finite(g)) throw TrainingError("non-finite gradient for parameter " + params[i].name);
    auto pv = p.values();
    auto gv = g.values();
    auto mv = state.m[i].values();
    auto vv = state.v[i].values();
    for (std::size_t k = 0; k < pv.size(); ++k) {
      pv[k] -= lr * c.weight_decay * pv[k];
      mv[k] = c.beta1 * mv[k] + (1.0 - c.beta1) * gv[k];
      vv[k] = c.beta2 * vv[k] + (1.0 - c.beta2) * gv[k] * gv[k];
      const double m_hat = mv[k] / correction1;
      const double v_hat = vv[k] / correction2;
      pv[k] -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

std::string to_string(TaskKind kind) {
  return kind == TaskKind::teacher_student_regression ? "teacher_student_regression"
                                                      : "toy_classification";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "teacher_student_regression" || name == "regression")
    return TaskKind::teacher_student_regression;
  if (name == "toy_classification" || name == "classification") return TaskKind::toy_classification;
  throw ConfigError("unknown task '" + std::string(name) +
                    "' (expected teacher_student_regression, toy_classification)");
}

std::string to_string(TeacherKind kind) {
  switch (kind) {
    case TeacherKind::genft: return "genft";
    case TeacherKind::lowrank: return "lowrank";
    case TeacherKind::none: return "none";
  }
  return "none";
}

TeacherKind parse_teacher_kind(std::string_view name) {
  if (name == "genft") return TeacherKind::genft;
  if (name == "lowrank") return TeacherKind::lowrank;
  if (name == "none") return TeacherKind::none;
  throw ConfigError("unknown teacher '" + std::string(name) + "' (expected genft, lowrank, none)");
}

std::vector<Matrix> SyntheticTask::bases(std::size_t type) const {
  std::vector<Matrix> out;
  for (const TaskLayer& l : layers.at(type)) out.push_back(l.base);
  return out;
}

namespace {

Matrix normal_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal(0.0, stddev);
  return m;
}

double frobenius(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return std::sqrt(s);
}

}  // namespace

SyntheticTask make_task(const TaskSpec& spec, std::uint64_t seed) {
  if (spec.types == 0 || spec.layers == 0 || spec.d_in == 0 || spec.d_out == 0 ||
      spec.n_samples == 0) {
    throw ConfigError("task dimensions, layers, types and n_samples must be positive");
  }
  if (!(spec.noise_std >= 0.0)) throw ConfigError("noise_std must be nonnegative");
  Rng rng(seed);
  SyntheticTask task;
  task.spec = spec;
  const double base_std = 1.0 / std::sqrt(static_cast<double>(spec.d_in));
  for (std::size_t t = 0; t < spec.types; ++t) {
    // Hidden generator shared by the layers of this type.
    SharedFactors hidden{normal_matrix(rng, spec.d_in, spec.teacher_dim, base_std),
                         normal_matrix(rng, spec.d_out, spec.teacher_dim, base_std)};
    const std::size_t hidden_b = spec.d_in == spec.d_out ? 1 : 0;
    std::vector<TaskLayer> layers;
    for (std::size_t l = 0; l < spec.layers; ++l) {
      TaskLayer tl;
      tl.base = normal_matrix(rng, spec.d_out, spec.d_in, base_std);
      Matrix hidden_delta(spec.d_out, spec.d_in);
      if (spec.teacher == TeacherKind::genft) {
        LayerFactors lf{normal_matrix(rng, spec.d_in, hidden_b, base_std),
                        normal_matrix(rng, spec.d_in, hidden_b, base_std), l};
        hidden_delta = generate_delta(tl.base, hidden, lf, GenFTHyper{}, MaskSpec{});
      } else if (spec.teacher == TeacherKind::lowrank) {
        hidden_delta = matmul(normal_matrix(rng, spec.d_out, spec.teacher_dim, 1.0),
                              normal_matrix(rng, spec.teacher_dim, spec.d_in, 1.0));
      }
      const double norm = frobenius(hidden_delta);
      if (norm > 0.0) hidden_delta = scale(hidden_delta, spec.teacher_scale * frobenius(tl.base) / norm);
      tl.teacher = add(tl.base, hidden_delta);
      tl.x = normal_matrix(rng, spec.d_in, spec.n_samples, 1.0);
      tl.y = matmul(tl.teacher, tl.x);
      if (spec.noise_std > 0.0)
        for (double& v : tl.y.values()) v += rng.normal(0.0, spec.noise_std);
      if (spec.kind == TaskKind::toy_classification) {
        for (std::size_t j = 0; j < spec.n_samples; ++j) {
          std::size_t best = 0;
          for (std::size_t i = 1; i < spec.d_out; ++i)
            if (tl.y(i, j) > tl.y(best, j)) best = i;
          tl.labels.push_back(best);
        }
      }
      layers.push_back(std::move(tl));
    }
    task.layers.push_back(std::move(layers));
  }
  return task;
}

namespace {

Matrix select_columns(const Matrix& m, std::span<const std::size_t> columns) {
  if (columns.empty()) return m;
  Matrix out(m.rows(), columns.size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < columns.size(); ++j) out(i, j) = m(i, columns[j]);
  return out;
}

}  // namespace

Var task_loss(Tape& tape, const SyntheticTask& task, const std::vector<AdapterGroup>& groups,
              const std::vector<AdapterGroup::Bound>& bound,
              const std::vector<std::vector<LayerMasks>>& masks,
              std::span<const std::size_t> columns, double label_smoothing) {
  if (groups.size() != task.layers.size()) {
    throw DimensionError("task has " + std::to_string(task.layers.size()) + " projection types but " +
                         std::to_string(groups.size()) + " adapter groups were given");
  }
  std::optional<Var> total;
  std::size_t terms = 0;
  for (std::size_t t = 0; t < groups.size(); ++t) {
    if (groups[t].layers() != task.layers[t].size()) {
      throw DimensionError("group '" + groups[t].name() + "' layer count does not match the task");
    }
    for (std::size_t l = 0; l < groups[t].layers(); ++l) {
      const TaskLayer& tl = task.layers[t][l];
      Var x = tape.constant(select_columns(tl.x, columns));
      Var h = groups[t].forward(bound[t], l, x, masks[t][l]);
      Var loss = [&] {
        if (task.spec.kind == TaskKind::teacher_student_regression)
          return mean_squared_error(h, tape.constant(select_columns(tl.y, columns)));
        std::vector<std::size_t> labels;
        if (columns.empty()) {
          labels = tl.labels;
        } else {
          for (std::size_t c : columns) labels.push_back(tl.labels[c]);
        }
        return cross_entropy(h, labels, label_smoothing);
      }();
      total = total ? add(*total, loss) : loss;
      ++terms;
    }
  }
  return scale(*total, 1.0 / static_cast<double>(terms));
}

double evaluate_loss(const SyntheticTask& task, const std::vector<AdapterGroup>& groups,
                     double label_smoothing) {
  Tape tape;
  std::vector<AdapterGroup::Bound> bound;
  std::vector<std::vector<LayerMasks>> masks;
  for (const AdapterGroup& g : groups) {
    bound.push_back(g.bind(tape, false));
    masks.emplace_back(g.layers());
  }
  return task_loss(tape, task, groups, bound, masks, {}, label_smoothing).value()(0, 0);
}

TrainRun train(const SyntheticTask& task, std::vector<AdapterGroup>& groups,
               const TrainConfig& config) {
  config.validate();
  TrainRun run;
  for (const AdapterGroup& g : groups)
    for (std::size_t l = 0; l < g.layers(); ++l) run.base_checksums_before.push_back(checksum(g.base(l)));

  std::vector<NamedParam> params;
  for (AdapterGroup& g : groups)
    for (NamedParam& p : g.trainable_parameters()) params.push_back(p);

  const Rng root(config.seed);
  Rng mask_rng = root.fork(1);
  Rng batch_rng = root.fork(2);
  const std::size_t n = task.spec.n_samples;
  const std::size_t batch = std::min(config.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  const double label_smoothing =
      task.spec.kind == TaskKind::toy_classification ? config.label_smoothing : 0.0;

  run.initial_loss = evaluate_loss(task, groups, label_smoothing);
  AdamWState state;
  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (batch < n) {
      for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[batch_rng.below(i + 1)]);
    }
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      const double lr = lr_schedule(
          config, static_cast<double>(epoch) + static_cast<double>(s) / static_cast<double>(steps_per_epoch));
      std::span<const std::size_t> columns;
      if (batch < n) {
        const std::size_t begin = s * batch;
        columns = std::span<const std::size_t>(order).subspan(begin, std::min(batch, n - begin));
      }
      Tape tape;
      std::vector<AdapterGroup::Bound> bound;
      std::vector<std::vector<LayerMasks>> masks;
      for (const AdapterGroup& g : groups) {
        bound.push_back(g.bind(tape, true));
        masks.push_back(g.draw_masks(Mode::train, mask_rng));
      }
      Var loss = task_loss(tape, task, groups, bound, masks, columns, label_smoothing);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) {
        throw TrainingError("loss diverged (non-finite) at step " + std::to_string(step));
      }
      tape.backward(loss);
      std::vector<Matrix> grads;
      for (const auto& b : bound)
        for (Var v : b.params) grads.push_back(v.grad());
      adamw_step(params, grads, state, config, step, lr);
      run.trace.push_back({step, value, lr});
    }
  }
  run.steps = step;
  run.final_loss = evaluate_loss(task, groups, label_smoothing);
  for (const AdapterGroup& g : groups)
    for (std::size_t l = 0; l < g.layers(); ++l) run.base_checksums_after.push_back(checksum(g.base(l)));
  return run;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  char buf[96];
  out << "step,loss,lr\n";
  for (const TraceRow& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r.step, r.loss, r.lr);
    out << buf;
  }
}

std::string GradCheckReport::to_text() const {
  std::ostringstream out;
  char buf[64];
  for (const GradCheckEntry& e : entries) {
    std::snprintf(buf, sizeof buf, "%.3e", e.max_rel_error);
    out << (e.passed ? "PASS " : "FAIL ") << e.name << " max_rel_error=" << buf
        << " worst_index=" << e.worst_index << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.1e", tolerance);
  out << (passed ? "PASS" : "FAIL") << " overall (tolerance " << buf << ")\n";
  return out.str();
}

GradCheckReport grad_check(const std::vector<NamedParam>& params, const LossBuilder& loss,
                           double tolerance, double h, const GradTamper& tamper) {
  GradCheckReport report;
  report.tolerance = tolerance;

  std::vector<Matrix> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const NamedParam& p : params) vars.push_back(tape.leaf(*p.value));
    Var l = loss(tape, vars);
    tape.backward(l);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      analytic.push_back(vars[i].grad());
      if (tamper) tamper(params[i].name, analytic.back());
    }
  }
  auto evaluate = [&] {
    Tape tape;
    std::vector<Var> vars;
    for (const NamedParam& p : params) vars.push_back(tape.constant(*p.value));
    return loss(tape, vars).value()(0, 0);
  };

  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& value = *params[i].value;
    Matrix numeric(value.rows(), value.cols());
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double saved = value.values()[k];
      value.values()[k] = saved + h;
      const double plus = evaluate();
      value.values()[k] = saved - h;
      const double minus = evaluate();
      value.values()[k] = saved;
      numeric.values()[k] = (plus - minus) / (2.0 * h);
    }
    const double floor = 1e-3 * max_abs(numeric) + 1e-8;
    GradCheckEntry entry;
    entry.name = params[i].name;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = analytic[i].values()[k];
      const double nv = numeric.values()[k];
      const double rel = std::abs(g - nv) / std::max({std::abs(g), std::abs(nv), floor});
      if (rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = k;
      }
    }
    entry.passed = entry.max_rel_error <= tolerance;
    report.passed = report.passed && entry.passed;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

GradCheckReport grad_check(AdapterGroup& group, const Matrix& x, std::span<const Matrix> targets,
                           MaskUse mask_use, Rng& mask_rng, double tolerance,
                           const GradTamper& tamper) {
  if (mask_use == MaskUse::live) {
    throw ContractError("grad_check needs eval-mode or frozen masks; live masks change between evaluations");
  }
  if (targets.size() != group.layers()) {
    throw DimensionError("grad_check: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(group.layers()) + " layers");
  }
  const std::vector<LayerMasks> masks =
      group.draw_masks(mask_use == MaskUse::frozen ? Mode::train : Mode::eval, mask_rng);
  const std::vector<NamedParam> params = group.trainable_parameters();

  LossBuilder loss = [&](Tape& tape, const std::vector<Var>& vars) {
    AdapterGroup::Bound bound;
    bound.params = vars;
    for (std::size_t l = 0; l < group.layers(); ++l) bound.bases.push_back(tape.constant(group.base(l)));
    Var xv = tape.constant(x);
    std::optional<Var> total;
    for (std::size_t l = 0; l < group.layers(); ++l) {
      Var term = mean_squared_error(group.forward(bound, l, xv, masks[l]), tape.constant(targets[l]));
      total = total ? add(*total, term) : term;
    }
    return *total;
  };
  return grad_check(params, loss, tolerance, 1e-5, tamper);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

template <typename F>
double time_median(std::size_t repeats, F&& f) {
  f();  // warm-up
  std::vector<double> samples;
  for (std::size_t i = 0; i < std::max<std::size_t>(1, repeats); ++i) {
    const auto start = std::chrono::steady_clock::now();
    f();
    const auto stop = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double>(stop - start).count());
  }
  return median(std::move(samples));
}

}  // namespace

std::vector<BenchRow> timing_bench(std::span<const BenchCase> cases, std::size_t batch_cols,
                                   std::size_t repeats, std::uint64_t seed) {
  std::vector<BenchRow> rows;
  for (const BenchCase& c : cases) {
    Rng rng(seed);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(c.d));
    std::vector<Matrix> bases{normal_matrix(rng, c.d, c.d, stddev)};
    const Matrix x = normal_matrix(rng, c.d, batch_cols, 1.0);
    const Matrix y = normal_matrix(rng, c.d, batch_cols, 1.0);
    AdapterGroup group = [&] {
      if (c.method == AdapterKind::lora) {
        LoraSpec spec;
        spec.rank = c.dim;
        spec.init_b = InitScheme::kaiming_uniform;
        return AdapterGroup::make_lora("bench", bases, spec, rng);
      }
      GenFTSpec spec;
      spec.shared_dim = c.dim;
      spec.specific_dim = 0;
      spec.hyper.sigma1 = Activation::tanh;
      return AdapterGroup::make_genft("bench", bases, spec, rng);
    }();
    const double seconds = time_median(repeats, [&] {
      Tape tape;
      const AdapterGroup::Bound bound = group.bind(tape, true);
      Var h = group.forward(bound, 0, tape.constant(x), LayerMasks{});
      Var loss = mean_squared_error(h, tape.constant(y));
      tape.backward(loss);
    });
    rows.push_back({to_string(c.method), c.d, c.dim, seconds});
  }
  return rows;
}

double base_bench(std::size_t d, std::size_t batch_cols, std::size_t repeats, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix w0 = normal_matrix(rng, d, d, 1.0 / std::sqrt(static_cast<double>(d)));
  const Matrix x = normal_matrix(rng, d, batch_cols, 1.0);
  const Matrix y = normal_matrix(rng, d, batch_cols, 1.0);
  return time_median(repeats, [&] {
    Tape tape;
    Var h = matmul(tape.constant(w0), tape.constant(x));
    Var loss = mean_squared_error(h, tape.constant(y));
    tape.backward(loss);
  });
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  char buf[64];
  out << "method,d,dim,median_seconds\n";
  for (const BenchRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6e", r.median_seconds);
    out << r.method << ',' << r.d << ',' << r.dim << ',' << buf << '\n';
  }
}

}  // namespace genft
