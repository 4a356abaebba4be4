#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "genft/activation.hpp"
#include "genft/autodiff.hpp"
#include "genft/matrix.hpp"
#include "genft/rng.hpp"

namespace genft {

/// Generator hyperparameters shared by every layer of a group.
struct GenFTHyper {
  double ratio = 1.0;    // fraction of W0 fed into the row transform
  double scaling = 1.0;  // magnitude of the generated update
  double dropout = 0.0;  // mask drop fraction p, in [0, 1)
  Activation sigma1 = Activation::identity;
  Activation sigma2 = Activation::identity;
  bool bias_enabled = false;

  /// ConfigError when p is outside [0, 1) or ratio/scaling are not finite.
  void validate() const;
};

/// Cross-layer factors. `us` is D_in x a, `vs` is D_out x a.
struct SharedFactors {
  Matrix us;
  Matrix vs;

  std::size_t dim() const noexcept { return us.cols(); }
};

/// Per-layer factors, both D_in x b. The same pair feeds the row and the
/// column transform of its layer.
struct LayerFactors {
  Matrix a;
  Matrix b;
  std::size_t layer_index = 0;

  std::size_t dim() const noexcept { return a.cols(); }
};

enum class Mode { train, eval };

/// Source of the binary masks. In train mode entries are Bernoulli(1 - p)
/// with no 1/(1-p) rescaling; in eval mode the mask is all ones.
struct MaskSpec {
  Mode mode = Mode::eval;
  double p = 0.0;
  Rng* rng = nullptr;
};

Matrix sample_mask(const MaskSpec& spec, std::size_t rows, std::size_t cols);

/// Which generator pieces are removed.
struct Ablation {
  bool no_shared = false;
  bool no_specific = false;
  bool no_row = false;
  bool no_column = false;

  bool any() const noexcept { return no_shared || no_specific || no_row || no_column; }
  /// Removing both transforms leaves no generator.
  void validate() const;
  friend bool operator==(const Ablation&, const Ablation&) = default;
};

/// Comma separated list of no_shared, no_specific, no_row, no_column. Empty
/// or "none" means no ablation.
Ablation parse_ablation(std::string_view text);
std::string to_string(const Ablation& ablation);

/// Tape handles for one layer's generator inputs.
struct GeneratorVars {
  Var w0;
  Var us;
  Var vs;
  Var a;
  Var b;
};

/// Masks for one forward pass. An empty matrix stands for all ones.
struct LayerMasks {
  Matrix row;
  Matrix col;
};

/// sigma1(ratio * ((W0 Us) Us^T + (W0 B) A^T)) (.) M. The D_in x D_in matrix
/// Us Us^T + B A^T is never formed.
Var row_transform(const GeneratorVars& vars, const GenFTHyper& hyper, const Matrix& mask);

/// sigma2((F^T Vs) Vs^T + (F^T B) A^T) (.) M for an input F of shape
/// D_out x D_in. The specific term needs B on the output dimension, so it is
/// only defined for square W0 (DimensionError otherwise).
Var col_transform(Var input, const GeneratorVars& vars, const GenFTHyper& hyper,
                  const Matrix& mask);

/// scaling * orient(F_col). F_col keeps its orientation when it already has
/// W0's shape and is transposed otherwise (the non-square case).
Var generate_delta(const GeneratorVars& vars, const GenFTHyper& hyper, const Ablation& ablation,
                   const LayerMasks& masks);

/// Shapes of the masks generate_delta consumes for a D_out x D_in weight.
struct MaskShapes {
  std::size_t row_rows, row_cols, col_rows, col_cols;
};
MaskShapes mask_shapes(std::size_t d_out, std::size_t d_in);

/// Samples the row mask and then the column mask, in that order.
LayerMasks sample_layer_masks(const MaskSpec& spec, std::size_t d_out, std::size_t d_in);

// Plain-matrix entry points. Each samples its own mask from `mask`.
Matrix apply_row_transform(const Matrix& w0, const SharedFactors& shared, const LayerFactors& layer,
                           const GenFTHyper& hyper, const MaskSpec& mask);
Matrix apply_col_transform(const Matrix& f_row, const SharedFactors& shared,
                           const LayerFactors& layer, const GenFTHyper& hyper,
                           const MaskSpec& mask);
Matrix generate_delta(const Matrix& w0, const SharedFactors& shared, const LayerFactors& layer,
                      const GenFTHyper& hyper, const MaskSpec& mask,
                      const Ablation& ablation = {});

}  // namespace genft
