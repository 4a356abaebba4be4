#include <doctest.h>

#include <sstream>

#include "genft/adapters.hpp"
#include "genft/budget.hpp"
#include "genft/errors.hpp"
#include "genft/rng.hpp"

using namespace genft;

namespace {

BudgetSpec spec(std::uint64_t layers, std::uint64_t d, std::uint64_t types, std::uint64_t r,
                std::uint64_t a, std::uint64_t b) {
  BudgetSpec s = BudgetSpec::square(layers, d, types);
  s.r = r;
  s.a = a;
  s.b = b;
  return s;
}

}  // namespace

TEST_CASE("reported parameter counts") {
  CHECK(count_lora(spec(12, 768, 2, 34, 0, 0)) == 1253376);
  CHECK(count_genft(spec(12, 768, 2, 0, 32, 2)) == 172032);
  CHECK(count_genft(spec(12, 768, 2, 0, 84, 0)) == 258048);
  CHECK(count_lora(spec(12, 768, 1, 8, 0, 0)) == 147456);
  CHECK(count_lora(spec(12, 768, 1, 0, 0, 0)) == 0);
}

TEST_CASE("closed forms agree with element counts of constructed groups") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::uint64_t layers = 1 + rng.below(4), d = 2 + rng.below(8), r = 1 + rng.below(4);
    const std::uint64_t a = rng.below(5), b = rng.below(3);
    const bool bias = rng.below(2) == 1;
    std::vector<Matrix> bases(layers, Matrix(d, d));
    GenFTSpec gs;
    gs.shared_dim = a;
    gs.specific_dim = b;
    gs.hyper.bias_enabled = bias;
    auto g = AdapterGroup::make_genft("t", bases, gs, rng);
    BudgetSpec s = spec(layers, d, 1, r, a, b);
    s.bias = bias;
    CHECK(count_genft(s) == g.trainable_count());
    LoraSpec ls;
    ls.rank = r;
    CHECK(count_lora(s) == AdapterGroup::make_lora("t", bases, ls, rng).trainable_count());
  }
}

TEST_CASE("non-square counts") {
  BudgetSpec s;
  s.layers = 2;
  s.d_in = 6;
  s.d_out = 4;
  s.types = 3;
  s.r = 2;
  s.a = 5;
  s.b = 1;
  CHECK(count_lora(s) == 2 * 2 * (6 + 4) * 3);
  CHECK(count_genft(s) == (5 * (6 + 4) + 2 * 2 * 1 * 6) * 3);
  s.bias = true;
  CHECK(count_genft(s) == (5 * (6 + 4) + 2 * 2 * 1 * 6) * 3 + 2 * 4 * 3);
}

TEST_CASE("budget matching gives parity and a wider latent space") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t layers = 2 + rng.below(23);
    const std::uint64_t r = 1 + rng.below(128);
    const std::uint64_t b = rng.below(r + 1);
    const std::uint64_t d = 1 + rng.below(1024);
    const std::uint64_t a = solve_shared_dim(layers, r, b);
    CHECK(count_genft(spec(layers, d, 1, r, a, b)) == count_lora(spec(layers, d, 1, r, 0, b)));
    const auto gap = static_cast<std::int64_t>(a + b) - static_cast<std::int64_t>(r);
    CHECK(gap == static_cast<std::int64_t>((layers - 1) * (r - b)));
    CHECK(gap >= 0);
    if (r > b) CHECK(gap > 0);
  }
}

TEST_CASE("infeasible budgets") {
  CHECK_THROWS_AS(solve_shared_dim(12, 2, 3), InfeasibleError);
  CHECK(solve_shared_dim(12, 3, 3) == 0);
  CHECK_THROWS_AS(budget_report(spec(12, 768, 1, 2, 0, 3), true), InfeasibleError);
}

TEST_CASE("budget report verdicts") {
  const BudgetReport r = budget_report(spec(12, 768, 1, 8, 0, 2), true);
  REQUIRE(r.solved_a.has_value());
  CHECK(*r.solved_a == 72);
  CHECK(r.latent_dim == 74);
  CHECK(r.inequality_holds);
  CHECK(r.lora_params == r.genft_params);

  const BudgetReport single = budget_report(spec(1, 768, 1, 5, 0, 0), true);
  CHECK(single.latent_dim == 5);
  CHECK_FALSE(single.inequality_holds);

  const BudgetReport equal_b = budget_report(spec(12, 768, 1, 4, 0, 4), true);
  CHECK_FALSE(equal_b.inequality_holds);

  const BudgetReport given = budget_report(spec(12, 768, 2, 34, 32, 2), false);
  CHECK_FALSE(given.solved_a.has_value());
  CHECK(given.genft_params == 172032);
  CHECK(given.lora_params == 1253376);
}

TEST_CASE("budget curve compares equal latent dimension and rank") {
  const auto rows = budget_curve(12, 768, 1, 2, 1, 6);
  REQUIRE(rows.size() == 5);
  CHECK(rows.front().dim == 2);
  for (const BudgetCurveRow& row : rows) {
    CHECK(row.lora_params == 2 * 12 * 768 * row.dim);
    CHECK(row.genft_params == 2 * 768 * (row.dim - 2) + 2 * 12 * 768 * 2);
  }
  std::ostringstream out;
  write_budget_csv(out, rows);
  CHECK(out.str().rfind("dim,lora_params,genft_params\n", 0) == 0);
  CHECK(out.str().find("2,36864,36864\n") != std::string::npos);
}
