#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "genft/errors.hpp"
#include "genft/train.hpp"
#include "support.hpp"

using namespace genft;
using testing::random_matrix;

namespace {

TaskSpec small_task(std::size_t d = 6) {
  TaskSpec t;
  t.layers = 2;
  t.d_in = d;
  t.d_out = d;
  t.n_samples = 24;
  t.teacher_dim = 2;
  return t;
}

std::vector<AdapterGroup> genft_groups(const SyntheticTask& task, std::uint64_t seed,
                                       std::size_t a = 3, std::size_t b = 1) {
  GenFTSpec s;
  s.shared_dim = a;
  s.specific_dim = b;
  s.hyper.scaling = 0.1;
  Rng rng(seed);
  std::vector<AdapterGroup> out;
  for (std::size_t t = 0; t < task.layers.size(); ++t)
    out.push_back(AdapterGroup::make_genft("type" + std::to_string(t), task.bases(t), s, rng));
  return out;
}

}  // namespace

TEST_CASE("AdamW matches a scalar reference loop for 100 steps") {
  Rng rng(3);
  Matrix p = random_matrix(rng, 8, 8);
  std::vector<double> ref(p.values().begin(), p.values().end()), m(64, 0.0), v(64, 0.0);
  TrainConfig c;
  c.weight_decay = 0.05;
  AdamWState state;
  std::vector<NamedParam> params{{"p", &p}};
  for (std::size_t step = 0; step < 100; ++step) {
    const Matrix g = random_matrix(rng, 8, 8);
    const double lr = 1e-2 * (1.0 + std::sin(static_cast<double>(step)));
    adamw_step(params, std::span<const Matrix>(&g, 1), state, c, step, lr);
    const double t = static_cast<double>(step + 1);
    for (std::size_t k = 0; k < 64; ++k) {
      const double gk = g.values()[k];
      ref[k] = ref[k] * (1.0 - lr * c.weight_decay);
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
      ref[k] -= lr * (m[k] / (1.0 - std::pow(c.beta1, t))) /
                (std::sqrt(v[k] / (1.0 - std::pow(c.beta2, t))) + c.eps);
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < 64; ++k) worst = std::max(worst, std::abs(ref[k] - p.values()[k]));
  CHECK(worst < 1e-10);
}

TEST_CASE("AdamW rejects non-finite gradients and names the parameter") {
  Matrix p(2, 2, 1.0);
  Matrix g(2, 2, 0.0);
  g(1, 1) = std::numeric_limits<double>::infinity();
  std::vector<NamedParam> params{{"layer0.A", &p}};
  AdamWState state;
  try {
    adamw_step(params, std::span<const Matrix>(&g, 1), state, TrainConfig{}, 0, 1e-3);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("layer0.A") != std::string::npos);
  }
}

TEST_CASE("cosine schedule with warmup and floor") {
  TrainConfig c;
  c.lr = 1e-2;
  c.epochs = 11;
  c.warmup_epochs = 2;
  c.cycle_decay = 0.1;
  CHECK(lr_schedule(c, 0.0) == 0.0);
  CHECK(lr_schedule(c, 1.0) == doctest::Approx(5e-3));
  CHECK(lr_schedule(c, 2.0) == doctest::Approx(1e-2));
  CHECK(lr_schedule(c, 10.0) == doctest::Approx(1e-3));
  const double mid = 1e-3 + (1e-2 - 1e-3) * 0.5 * (1.0 + std::cos(std::numbers::pi * 0.5));
  CHECK(lr_schedule(c, 6.0) == doctest::Approx(mid));
  for (double e = 2.0; e < 10.0; e += 0.25) CHECK(lr_schedule(c, e + 0.25) <= lr_schedule(c, e));
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.warmup_epochs = c.epochs + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("task generation is seed-deterministic") {
  const SyntheticTask a = make_task(small_task(), 5), b = make_task(small_task(), 5);
  const SyntheticTask c = make_task(small_task(), 6);
  CHECK(a.layers[0][1].y == b.layers[0][1].y);
  CHECK(a.layers[0][0].base != c.layers[0][0].base);
  CHECK(a.layers[0][0].x.rows() == 6);
  CHECK(a.layers[0][0].x.cols() == 24);
  TaskSpec none = small_task();
  none.teacher = TeacherKind::none;
  const SyntheticTask z = make_task(none, 5);
  CHECK(z.layers[0][0].teacher == z.layers[0][0].base);
}

TEST_CASE("zero-update start is exact when the teacher equals W0") {
  TaskSpec spec = small_task();
  spec.teacher = TeacherKind::none;
  const SyntheticTask task = make_task(spec, 1);
  LoraSpec ls;
  ls.rank = 2;
  Rng rng(1);
  std::vector<AdapterGroup> groups{AdapterGroup::make_lora("type0", task.bases(0), ls, rng)};
  CHECK(evaluate_loss(task, groups) == 0.0);
  GenFTSpec gs;
  gs.shared_dim = 2;
  gs.init_shared = InitScheme::zeros;
  std::vector<AdapterGroup> g2{AdapterGroup::make_genft("type0", task.bases(0), gs, rng)};
  CHECK(evaluate_loss(task, g2) == 0.0);
}

TEST_CASE("training decreases loss, keeps W0 frozen, and is bit-reproducible") {
  const SyntheticTask task = make_task(small_task(), 9);
  TrainConfig c;
  c.lr = 2e-2;
  c.epochs = 40;
  c.batch_size = 8;
  auto g1 = genft_groups(task, 3);
  auto g2 = genft_groups(task, 3);
  const TrainRun r1 = train(task, g1, c);
  const TrainRun r2 = train(task, g2, c);
  CHECK(r1.steps == 40 * 3);
  CHECK(r1.trace.size() == r1.steps);
  CHECK(r1.final_loss < r1.initial_loss);
  CHECK(r1.base_checksums_before == r1.base_checksums_after);
  REQUIRE(r1.trace.size() == r2.trace.size());
  bool identical = true;
  for (std::size_t i = 0; i < r1.trace.size(); ++i)
    identical = identical && r1.trace[i].loss == r2.trace[i].loss && r1.trace[i].lr == r2.trace[i].lr;
  CHECK(identical);
  CHECK(g1[0].shared().us == g2[0].shared().us);

  std::ostringstream csv;
  write_trace_csv(csv, r1.trace);
  CHECK(csv.str().rfind("step,loss,lr\n0,", 0) == 0);
}

TEST_CASE("divergence reports the step index") {
  const SyntheticTask task = make_task(small_task(), 2);
  auto groups = genft_groups(task, 1);
  TrainConfig c;
  c.lr = 1e300;
  c.weight_decay = 0.0;
  c.epochs = 50;
  try {
    train(task, groups, c);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("classification task trains with label smoothing") {
  TaskSpec spec = small_task();
  spec.kind = TaskKind::toy_classification;
  const SyntheticTask task = make_task(spec, 4);
  REQUIRE(task.layers[0][0].labels.size() == spec.n_samples);
  auto groups = genft_groups(task, 2);
  TrainConfig c;
  c.lr = 2e-2;
  c.epochs = 30;
  c.label_smoothing = 0.1;
  const TrainRun run = train(task, groups, c);
  CHECK(run.final_loss < run.initial_loss);
}

TEST_CASE("grad check passes for GenFT across the activation menu") {
  Rng rng(5);
  const std::size_t d = 5;
  for (Activation s1 : kAllActivations) {
    for (Activation s2 : kAllActivations) {
      GenFTSpec s;
      s.shared_dim = 2;
      s.specific_dim = 1;
      s.init_b = InitScheme::kaiming_uniform;
      s.hyper.sigma1 = s1;
      s.hyper.sigma2 = s2;
      s.hyper.bias_enabled = true;
      std::vector<Matrix> bases{random_matrix(rng, d, d), random_matrix(rng, d, d)};
      auto g = AdapterGroup::make_genft("k", bases, s, rng);
      const Matrix x = random_matrix(rng, d, 4);
      const std::vector<Matrix> y{random_matrix(rng, d, 4), random_matrix(rng, d, 4)};
      Rng masks(1);
      const GradCheckReport r = grad_check(g, x, y, MaskUse::eval, masks, 1e-4);
      CAPTURE(to_string(s1));
      CAPTURE(to_string(s2));
      CHECK(r.passed);
      CHECK(r.entries.size() == 2 + 3 * 2);
    }
  }
}

TEST_CASE("grad check passes for LoRA and with frozen dropout masks") {
  Rng rng(6);
  LoraSpec ls;
  ls.rank = 2;
  ls.init_b = InitScheme::kaiming_uniform;
  auto lg = AdapterGroup::make_lora("k", {random_matrix(rng, 6, 6)}, ls, rng);
  const Matrix x = random_matrix(rng, 6, 3);
  const std::vector<Matrix> y{random_matrix(rng, 6, 3)};
  Rng masks(2);
  CHECK(grad_check(lg, x, y, MaskUse::eval, masks, 1e-4).passed);

  GenFTSpec s;
  s.shared_dim = 2;
  s.specific_dim = 1;
  s.hyper.dropout = 0.3;
  s.hyper.sigma1 = Activation::tanh;
  auto gg = AdapterGroup::make_genft("k", {random_matrix(rng, 6, 6)}, s, rng);
  CHECK(grad_check(gg, x, y, MaskUse::frozen, masks, 1e-4).passed);
  CHECK_THROWS_AS(grad_check(gg, x, y, MaskUse::live, masks, 1e-4), ContractError);
}

TEST_CASE("a corrupted gradient fails on the right parameter") {
  Rng rng(7);
  GenFTSpec s;
  s.shared_dim = 2;
  s.specific_dim = 1;
  s.init_b = InitScheme::kaiming_uniform;
  auto g = AdapterGroup::make_genft("k", {random_matrix(rng, 4, 4)}, s, rng);
  const Matrix x = random_matrix(rng, 4, 3);
  const std::vector<Matrix> y{random_matrix(rng, 4, 3)};
  Rng masks(3);
  const GradCheckReport r =
      grad_check(g, x, y, MaskUse::eval, masks, 1e-4, [](const std::string& name, Matrix& grad) {
        if (name != "k.Vs") return;
        std::size_t smallest = 0;
        for (std::size_t i = 1; i < grad.size(); ++i)
          if (std::abs(grad.values()[i]) < std::abs(grad.values()[smallest])) smallest = i;
        grad.values()[smallest] += 1e-2;
      });
  CHECK_FALSE(r.passed);
  for (const GradCheckEntry& e : r.entries) CHECK(e.passed == (e.name != "k.Vs"));
  CHECK(r.to_text().find("k.Vs") != std::string::npos);
}

TEST_CASE("timing bench emits one row per case") {
  const std::vector<BenchCase> cases{{AdapterKind::lora, 16, 4}, {AdapterKind::genft, 16, 4},
                                     {AdapterKind::genft, 16, 0}};
  const auto rows = timing_bench(cases, 8, 3, 1);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].method == "lora");
  CHECK(rows[1].method == "genft");
  for (const BenchRow& r : rows) CHECK(r.median_seconds > 0.0);
  std::ostringstream csv;
  write_bench_csv(csv, rows);
  CHECK(csv.str().rfind("method,d,dim,median_seconds\n", 0) == 0);
}
