#include <doctest.h>

#include <cmath>

#include "genft/activation.hpp"
#include "genft/errors.hpp"
#include "genft/generator.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace genft;
using testing::naive_matmul;
using testing::naive_transpose;
using testing::random_matrix;
using testing::apply;
using testing::elementwise;
using testing::naive_delta;
using testing::times;

namespace {

LayerMasks draw(Rng& rng, std::size_t rows, std::size_t cols, double p) {
  return sample_layer_masks(MaskSpec{Mode::train, p, &rng}, rows, cols);
}

struct Instance {
  Matrix w0;
  SharedFactors shared;
  LayerFactors layer;
};

Instance random_instance(Rng& rng, std::size_t d_out, std::size_t d_in, std::size_t a,
                         std::size_t b) {
  Instance in;
  in.w0 = random_matrix(rng, d_out, d_in);
  in.shared.us = random_matrix(rng, d_in, a, 0.5);
  in.shared.vs = random_matrix(rng, d_out, a, 0.5);
  in.layer.a = random_matrix(rng, d_in, b, 0.5);
  in.layer.b = random_matrix(rng, d_in, b, 0.5);
  return in;
}

}  // namespace

TEST_CASE("factored generator equals explicit U and V for every activation pair") {
  Rng rng(2024);
  std::size_t checked = 0;
  for (Activation s1 : kAllActivations) {
    for (Activation s2 : kAllActivations) {
      for (int trial = 0; trial < 4; ++trial) {
        const std::size_t d = 2 + rng.below(15);
        const std::size_t a = rng.below(6), b = rng.below(4);
        Instance in = random_instance(rng, d, d, a, b);
        GenFTHyper h;
        h.sigma1 = s1;
        h.sigma2 = s2;
        h.ratio = rng.uniform(0.2, 1.6);
        h.scaling = rng.uniform(0.1, 1.5);
        h.dropout = trial % 2 ? 0.3 : 0.0;
        const std::uint64_t mask_seed = rng.next_u64();
        Rng oracle_rng(mask_seed), lib_rng(mask_seed);
        const LayerMasks masks = draw(oracle_rng, d, d, h.dropout);
        const Matrix got = generate_delta(in.w0, in.shared, in.layer, h,
                                          MaskSpec{Mode::train, h.dropout, &lib_rng});
        const Matrix want = naive_delta(in.w0, in.shared, in.layer, h, masks);
        CAPTURE(to_string(s1));
        CAPTURE(to_string(s2));
        CHECK(max_abs_diff(got, want) <= 1e-10 * std::max(1.0, max_abs(want)));
        ++checked;
      }
    }
  }
  CHECK(checked == 100);
}

TEST_CASE("square case is not transposed; non-square output is oriented to W0") {
  Rng rng(5);
  Instance sq = random_instance(rng, 4, 4, 3, 0);
  GenFTHyper h;
  const Matrix d = generate_delta(sq.w0, sq.shared, sq.layer, h, MaskSpec{});
  // identity activations: ΔW = (W0 Us Usᵀ)ᵀ Vs Vsᵀ, no final transpose
  const Matrix want = naive_matmul(
      naive_transpose(naive_matmul(sq.w0, naive_matmul(sq.shared.us, naive_transpose(sq.shared.us)))),
      naive_matmul(sq.shared.vs, naive_transpose(sq.shared.vs)));
  CHECK(max_abs_diff(d, want) < 1e-12);

  Instance rect = random_instance(rng, 5, 3, 2, 0);
  const Matrix dr = generate_delta(rect.w0, rect.shared, rect.layer, h, MaskSpec{});
  CHECK(dr.rows() == 5);
  CHECK(dr.cols() == 3);
  const Matrix naive = naive_delta(rect.w0, rect.shared, rect.layer, h,
                                   LayerMasks{Matrix(5, 3, 1.0), Matrix(3, 5, 1.0)});
  CHECK(max_abs_diff(dr, naive) < 1e-12);
}

TEST_CASE("non-square layers with specific factors and a column transform are rejected") {
  Rng rng(6);
  Instance rect = random_instance(rng, 5, 3, 2, 1);
  CHECK_THROWS_AS(generate_delta(rect.w0, rect.shared, rect.layer, GenFTHyper{}, MaskSpec{}),
                  DimensionError);
  Ablation no_col;
  no_col.no_column = true;
  CHECK(generate_delta(rect.w0, rect.shared, rect.layer, GenFTHyper{}, MaskSpec{}, no_col).rows() ==
        5);
}

TEST_CASE("factor shape errors name both shapes") {
  Rng rng(8);
  Instance in = random_instance(rng, 4, 4, 2, 1);
  in.shared.us = random_matrix(rng, 3, 2);
  try {
    generate_delta(in.w0, in.shared, in.layer, GenFTHyper{}, MaskSpec{});
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3x2") != std::string::npos);
    CHECK(msg.find("4x4") != std::string::npos);
  }
}

TEST_CASE("ablations follow their defining formulas") {
  Rng rng(12);
  Instance in = random_instance(rng, 6, 6, 3, 2);
  GenFTHyper h;
  h.sigma1 = Activation::tanh;
  h.sigma2 = Activation::gelu;
  h.scaling = 0.7;
  h.ratio = 0.8;
  const LayerMasks ones{Matrix(6, 6, 1.0), Matrix(6, 6, 1.0)};

  SUBCASE("no_shared drops Us and Vs") {
    Ablation ab;
    ab.no_shared = true;
    SharedFactors none{Matrix(6, 0), Matrix(6, 0)};
    CHECK(max_abs_diff(generate_delta(in.w0, in.shared, in.layer, h, MaskSpec{}, ab),
                       naive_delta(in.w0, none, in.layer, h, ones)) < 1e-12);
  }
  SUBCASE("no_specific drops A and B") {
    Ablation ab;
    ab.no_specific = true;
    LayerFactors none{Matrix(6, 0), Matrix(6, 0), 0};
    CHECK(max_abs_diff(generate_delta(in.w0, in.shared, in.layer, h, MaskSpec{}, ab),
                       naive_delta(in.w0, in.shared, none, h, ones)) < 1e-12);
  }
  SUBCASE("no_row feeds W0 transposed into the column step") {
    Ablation ab;
    ab.no_row = true;
    Matrix v = elementwise(naive_matmul(in.shared.vs, naive_transpose(in.shared.vs)),
                           naive_matmul(in.layer.b, naive_transpose(in.layer.a)));
    Matrix want = apply(h.sigma2, naive_matmul(naive_transpose(in.w0), v));
    for (double& x : want.values()) x *= h.scaling;
    CHECK(max_abs_diff(generate_delta(in.w0, in.shared, in.layer, h, MaskSpec{}, ab), want) < 1e-12);
  }
  SUBCASE("no_column scales the row features") {
    Ablation ab;
    ab.no_column = true;
    Matrix u = elementwise(naive_matmul(in.shared.us, naive_transpose(in.shared.us)),
                           naive_matmul(in.layer.b, naive_transpose(in.layer.a)));
    Matrix pre = naive_matmul(in.w0, u);
    for (double& x : pre.values()) x *= h.ratio;
    Matrix want = apply(h.sigma1, pre);
    for (double& x : want.values()) x *= h.scaling;
    CHECK(max_abs_diff(generate_delta(in.w0, in.shared, in.layer, h, MaskSpec{}, ab), want) < 1e-12);
  }
  SUBCASE("removing both transforms is a configuration error") {
    Ablation ab;
    ab.no_row = true;
    ab.no_column = true;
    CHECK_THROWS_AS(ab.validate(), ConfigError);
    CHECK_THROWS_AS(generate_delta(in.w0, in.shared, in.layer, h, MaskSpec{}, ab), ConfigError);
  }
}

TEST_CASE("ablation text form") {
  CHECK(parse_ablation("none") == Ablation{});
  const Ablation ab = parse_ablation("no_shared,no_column");
  CHECK(ab.no_shared);
  CHECK(ab.no_column);
  CHECK_FALSE(ab.no_row);
  CHECK(parse_ablation(to_string(ab)) == ab);
  CHECK_THROWS_AS(parse_ablation("no_rows"), ConfigError);
  CHECK_THROWS_AS(parse_ablation("no_row,no_column").validate(), ConfigError);
}

TEST_CASE("zero dims give a zero update with identity activations") {
  Rng rng(3);
  Instance in = random_instance(rng, 4, 4, 0, 0);
  CHECK(max_abs(generate_delta(in.w0, in.shared, in.layer, GenFTHyper{}, MaskSpec{})) == 0.0);
}

TEST_CASE("masks are Bernoulli(1-p), unscaled, and absent in eval mode") {
  const double p = 0.3;
  const std::size_t rows = 100, cols = 100;
  Rng rng(77);
  const Matrix m = sample_mask(MaskSpec{Mode::train, p, &rng}, rows, cols);
  double zeros = 0.0;
  for (double v : m.values()) {
    CHECK((v == 0.0 || v == 1.0));
    zeros += v == 0.0;
  }
  const double n = static_cast<double>(rows * cols);
  // five standard deviations of Binomial(n, p)
  CHECK(std::abs(zeros - n * p) < 5.0 * std::sqrt(n * p * (1 - p)));

  Rng untouched(77), probe(77);
  const Matrix eval = sample_mask(MaskSpec{Mode::eval, p, &untouched}, rows, cols);
  CHECK(max_abs_diff(eval, Matrix(rows, cols, 1.0)) == 0.0);
  CHECK(untouched.next_u64() == probe.next_u64());

  Rng zero_p(77), probe2(77);
  sample_mask(MaskSpec{Mode::train, 0.0, &zero_p}, rows, cols);
  CHECK(zero_p.next_u64() == probe2.next_u64());

  CHECK_THROWS_AS(sample_mask(MaskSpec{Mode::train, 1.0, &rng}, 2, 2), ConfigError);
  CHECK_THROWS_AS(sample_mask(MaskSpec{Mode::train, 0.5, nullptr}, 2, 2), ContractError);
}

TEST_CASE("layer masks are drawn row first, then column") {
  Rng a(4), b(4);
  const LayerMasks masks = draw(a, 3, 5, 0.5);
  CHECK(masks.row.rows() == 3);
  CHECK(masks.row.cols() == 5);
  CHECK(masks.col.rows() == 5);
  CHECK(masks.col.cols() == 3);
  const Matrix row = sample_mask(MaskSpec{Mode::train, 0.5, &b}, 3, 5);
  const Matrix col = sample_mask(MaskSpec{Mode::train, 0.5, &b}, 5, 3);
  CHECK(masks.row == row);
  CHECK(masks.col == col);
}

TEST_CASE("a fully dropped row mask zeroes the update") {
  Rng rng(9);
  Instance in = random_instance(rng, 4, 4, 2, 1);
  GenFTHyper h;
  h.sigma2 = Activation::tanh;
  LayerMasks masks{Matrix(4, 4, 0.0), Matrix(4, 4, 1.0)};
  Tape tape;
  GeneratorVars vars{tape.constant(in.w0), tape.constant(in.shared.us), tape.constant(in.shared.vs),
                     tape.constant(in.layer.a), tape.constant(in.layer.b)};
  CHECK(max_abs(generate_delta(vars, h, Ablation{}, masks).value()) == 0.0);
}

TEST_CASE("hyperparameter validation") {
  GenFTHyper h;
  h.dropout = 1.0;
  CHECK_THROWS_AS(h.validate(), ConfigError);
  h.dropout = -0.1;
  CHECK_THROWS_AS(h.validate(), ConfigError);
  h.dropout = 0.5;
  CHECK_NOTHROW(h.validate());
}
