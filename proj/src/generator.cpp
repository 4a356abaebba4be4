#include "genft/generator.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include "genft/errors.hpp"

namespace genft {

namespace {

// (left * f1) * f2^T, or nullopt when the inner dimension is empty.
std::optional<Var> factored_product(Var left, Var f1, Var f2) {
  if (f1.value().cols() == 0) return std::nullopt;
  return matmul(matmul(left, f1), transpose(f2));
}

Var sum_terms(Tape& tape, std::optional<Var> x, std::optional<Var> y, std::size_t rows,
              std::size_t cols) {
  if (x && y) return add(*x, *y);
  if (x) return *x;
  if (y) return *y;
  return tape.constant(Matrix(rows, cols));
}

Var apply_mask(Var x, const Matrix& mask) {
  if (mask.empty()) return x;
  if (!mask.same_shape(x.value())) {
    throw DimensionError("mask " + shape_string(mask) + " does not match " +
                         shape_string(x.value()));
  }
  return hadamard(x, x.tape->constant(mask));
}

void check_factor_rows(const Matrix& factor, std::size_t rows, const char* what,
                       const Matrix& w0) {
  if (factor.rows() != rows) {
    throw DimensionError(std::string(what) + " " + shape_string(factor) +
                         " does not fit W0 " + shape_string(w0));
  }
}

}  // namespace

void GenFTHyper::validate() const {
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout p must lie in [0, 1), got " + std::to_string(dropout));
  }
  if (!std::isfinite(ratio)) throw ConfigError("ratio must be finite");
  if (!std::isfinite(scaling)) throw ConfigError("scaling must be finite");
}

Matrix sample_mask(const MaskSpec& spec, std::size_t rows, std::size_t cols) {
  if (!(spec.p >= 0.0 && spec.p < 1.0)) {
    throw ConfigError("mask drop fraction must lie in [0, 1), got " + std::to_string(spec.p));
  }
  Matrix mask(rows, cols, 1.0);
  if (spec.mode == Mode::eval || spec.p == 0.0) return mask;
  if (spec.rng == nullptr) throw ContractError("train-mode mask needs an Rng");
  const double keep = 1.0 - spec.p;
  for (double& v : mask.values()) v = spec.rng->bernoulli(keep) ? 1.0 : 0.0;
  return mask;
}

void Ablation::validate() const {
  if (no_row && no_column) {
    throw ConfigError("ablation removes both the row and the column transform; no generator remains");
  }
}

Ablation parse_ablation(std::string_view text) {
  Ablation out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    if (item == "none") continue;
    if (item == "no_shared") out.no_shared = true;
    else if (item == "no_specific") out.no_specific = true;
    else if (item == "no_row") out.no_row = true;
    else if (item == "no_column") out.no_column = true;
    else throw ConfigError("unknown ablation '" + item + "'");
  }
  return out;
}

std::string to_string(const Ablation& ablation) {
  std::string out;
  auto append = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  append(ablation.no_shared, "no_shared");
  append(ablation.no_specific, "no_specific");
  append(ablation.no_row, "no_row");
  append(ablation.no_column, "no_column");
  return out.empty() ? "none" : out;
}

Var row_transform(const GeneratorVars& vars, const GenFTHyper& hyper, const Matrix& mask) {
  const Matrix& w0 = vars.w0.value();
  check_factor_rows(vars.us.value(), w0.cols(), "Us", w0);
  check_factor_rows(vars.a.value(), w0.cols(), "A", w0);
  check_factor_rows(vars.b.value(), w0.cols(), "B", w0);
  auto shared = factored_product(vars.w0, vars.us, vars.us);
  auto specific = factored_product(vars.w0, vars.b, vars.a);
  Var pre = sum_terms(*vars.w0.tape, shared, specific, w0.rows(), w0.cols());
  return apply_mask(activate(hyper.sigma1, scale(pre, hyper.ratio)), mask);
}

Var col_transform(Var input, const GeneratorVars& vars, const GenFTHyper& hyper,
                  const Matrix& mask) {
  const Matrix& f = input.value();
  if (vars.vs.value().rows() != f.rows()) {
    throw DimensionError("Vs " + shape_string(vars.vs.value()) +
                         " does not fit column-transform input " + shape_string(f));
  }
  if (vars.a.value().cols() > 0 && vars.b.value().rows() != f.rows()) {
    throw DimensionError("column transform needs specific factors on the output dimension: B " +
                         shape_string(vars.b.value()) + " vs input " + shape_string(f));
  }
  Var ft = transpose(input);
  auto shared = factored_product(ft, vars.vs, vars.vs);
  auto specific = factored_product(ft, vars.b, vars.a);
  Var pre = sum_terms(*input.tape, shared, specific, f.cols(), f.rows());
  return apply_mask(activate(hyper.sigma2, pre), mask);
}

Var generate_delta(const GeneratorVars& vars, const GenFTHyper& hyper, const Ablation& ablation,
                   const LayerMasks& masks) {
  ablation.validate();
  if (vars.a.value().cols() != vars.b.value().cols()) {
    throw DimensionError("A " + shape_string(vars.a.value()) + " and B " +
                         shape_string(vars.b.value()) + " differ in specific dimension");
  }
  if (vars.us.value().cols() != vars.vs.value().cols()) {
    throw DimensionError("Us " + shape_string(vars.us.value()) + " and Vs " +
                         shape_string(vars.vs.value()) + " differ in shared dimension");
  }
  const Matrix& w0 = vars.w0.value();
  Tape& tape = *vars.w0.tape;
  GeneratorVars active = vars;
  if (ablation.no_shared) {
    active.us = tape.constant(Matrix(vars.us.value().rows(), 0));
    active.vs = tape.constant(Matrix(vars.vs.value().rows(), 0));
  }
  if (ablation.no_specific) {
    active.a = tape.constant(Matrix(vars.a.value().rows(), 0));
    active.b = tape.constant(Matrix(vars.b.value().rows(), 0));
  }
  Var features = ablation.no_row ? active.w0 : row_transform(active, hyper, masks.row);
  if (!ablation.no_column) features = col_transform(features, active, hyper, masks.col);

  const Matrix& fv = features.value();
  if (!fv.same_shape(w0)) {
    if (fv.rows() == w0.cols() && fv.cols() == w0.rows()) {
      features = transpose(features);
    } else {
      throw DimensionError("generated features " + shape_string(fv) + " cannot be oriented to W0 " +
                           shape_string(w0));
    }
  }
  return scale(features, hyper.scaling);
}

MaskShapes mask_shapes(std::size_t d_out, std::size_t d_in) { return {d_out, d_in, d_in, d_out}; }

LayerMasks sample_layer_masks(const MaskSpec& spec, std::size_t d_out, std::size_t d_in) {
  const MaskShapes s = mask_shapes(d_out, d_in);
  LayerMasks masks;
  masks.row = sample_mask(spec, s.row_rows, s.row_cols);
  masks.col = sample_mask(spec, s.col_rows, s.col_cols);
  return masks;
}

namespace {

GeneratorVars constants(Tape& tape, const Matrix& w0, const SharedFactors& shared,
                        const LayerFactors& layer) {
  return {tape.constant(w0), tape.constant(shared.us), tape.constant(shared.vs),
          tape.constant(layer.a), tape.constant(layer.b)};
}

}  // namespace

Matrix apply_row_transform(const Matrix& w0, const SharedFactors& shared, const LayerFactors& layer,
                           const GenFTHyper& hyper, const MaskSpec& mask) {
  Tape tape;
  const GeneratorVars vars = constants(tape, w0, shared, layer);
  const Matrix m = sample_mask(mask, w0.rows(), w0.cols());
  return row_transform(vars, hyper, m).value();
}

Matrix apply_col_transform(const Matrix& f_row, const SharedFactors& shared,
                           const LayerFactors& layer, const GenFTHyper& hyper,
                           const MaskSpec& mask) {
  Tape tape;
  const GeneratorVars vars = constants(tape, f_row, shared, layer);
  const Matrix m = sample_mask(mask, f_row.cols(), f_row.rows());
  return col_transform(vars.w0, vars, hyper, m).value();
}

Matrix generate_delta(const Matrix& w0, const SharedFactors& shared, const LayerFactors& layer,
                      const GenFTHyper& hyper, const MaskSpec& mask, const Ablation& ablation) {
  Tape tape;
  const GeneratorVars vars = constants(tape, w0, shared, layer);
  const LayerMasks masks = sample_layer_masks(mask, w0.rows(), w0.cols());
  return generate_delta(vars, hyper, ablation, masks).value();
}

}  // namespace genft
