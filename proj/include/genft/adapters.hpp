#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "genft/autodiff.hpp"
#include "genft/generator.hpp"
#include "genft/init.hpp"
#include "genft/matrix.hpp"
#include "genft/rng.hpp"

namespace genft {

enum class AdapterKind { genft, lora };

std::string to_string(AdapterKind kind);
AdapterKind parse_adapter_kind(std::string_view name);

/// Either resample the masks on every train-mode forward, or draw them once
/// at construction and reuse them.
enum class MaskPolicy { resample, fixed };

std::string to_string(MaskPolicy policy);
MaskPolicy parse_mask_policy(std::string_view name);

struct GenFTSpec {
  std::size_t shared_dim = 0;    // a
  std::size_t specific_dim = 0;  // b
  GenFTHyper hyper;
  InitScheme init_a = InitScheme::kaiming_uniform;
  InitScheme init_b = InitScheme::zeros;
  InitScheme init_shared = InitScheme::kaiming_uniform;
  Ablation ablation;
  MaskPolicy mask_policy = MaskPolicy::resample;
};

struct LoraSpec {
  std::size_t rank = 0;
  double scaling = 1.0;
  InitScheme init_a = InitScheme::kaiming_uniform;
  InitScheme init_b = InitScheme::zeros;
};

/// A trainable tensor exposed to optimisers and gradient checks.
struct NamedParam {
  std::string name;
  Matrix* value;
};

struct LoraFactors {
  Matrix a;  // D_out x r
  Matrix b;  // r x D_in
};

/// Dense replacement for an adapted layer: one matmul per forward.
struct MergedLayer {
  Matrix weight;
  std::optional<Matrix> bias;

  Matrix forward(const Matrix& x) const;
};

/// Frozen base weights of one projection type across L layers, plus the
/// trainable adapter state for all of them.
///
/// A GenFT group owns one SharedFactors instance referenced by every layer;
/// a LoRA group owns an independent (A, B) pair per layer. The base weights
/// are never exposed for mutation except through set_base(), which only
/// accepts a matrix of the recorded shape.
class AdapterGroup {
 public:
  static AdapterGroup make_genft(std::string name, std::vector<Matrix> bases,
                                 const GenFTSpec& spec, Rng& rng);
  static AdapterGroup make_lora(std::string name, std::vector<Matrix> bases,
                                const LoraSpec& spec, Rng& rng);

  /// Rebuilds a group from stored factors (checkpoint loading). Bases are
  /// zero-filled until set_base() is called.
  static AdapterGroup restore_genft(std::string name, std::size_t layers, std::size_t d_out,
                                    std::size_t d_in, const GenFTSpec& spec, SharedFactors shared,
                                    std::vector<LayerFactors> factors,
                                    std::vector<Matrix> biases);
  static AdapterGroup restore_lora(std::string name, std::size_t layers, std::size_t d_out,
                                   std::size_t d_in, const LoraSpec& spec,
                                   std::vector<LoraFactors> factors);

  AdapterKind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  std::size_t layers() const noexcept { return bases_.size(); }
  std::size_t d_in() const noexcept { return d_in_; }
  std::size_t d_out() const noexcept { return d_out_; }
  /// LoRA rank, or a + b. Zero means the update is identically zero and the
  /// forward pass skips it.
  std::size_t latent_dim() const;

  const Matrix& base(std::size_t layer) const { return bases_.at(layer); }
  void set_base(std::size_t layer, Matrix w0);

  const GenFTSpec& genft_spec() const;
  const LoraSpec& lora_spec() const;
  const SharedFactors& shared() const;
  const LayerFactors& layer_factors(std::size_t layer) const;
  const LoraFactors& lora_factors(std::size_t layer) const;
  const std::vector<Matrix>& biases() const noexcept { return biases_; }
  const std::vector<LayerMasks>& fixed_masks() const noexcept { return fixed_masks_; }

  /// GenFT: Us, Vs, then A, B (and bias) per layer in ascending order.
  /// LoRA: A, B per layer.
  std::vector<NamedParam> trainable_parameters();
  /// Same order as trainable_parameters().
  std::vector<const Matrix*> parameter_values() const;
  std::size_t trainable_count() const;

  /// Masks for one forward over every layer: ascending layer, row then
  /// column. Eval mode gives empty (all-ones) masks; the fixed policy
  /// returns the stored masks in train mode.
  std::vector<LayerMasks> draw_masks(Mode mode, Rng& rng) const;

  /// Trainable parameters placed on a tape, same order as
  /// trainable_parameters(). With `differentiable == false` they are
  /// constants.
  struct Bound {
    std::vector<Var> params;
    std::vector<Var> bases;
  };
  Bound bind(Tape& tape, bool differentiable = true) const;

  Var delta(const Bound& bound, std::size_t layer, const LayerMasks& masks) const;
  /// W0 X + dW X (+ bias broadcast over columns).
  Var forward(const Bound& bound, std::size_t layer, Var x, const LayerMasks& masks) const;

  /// Eval-mode (deterministic) update.
  Matrix delta(std::size_t layer) const;
  Matrix forward(std::size_t layer, const Matrix& x, Mode mode, Rng* mask_rng) const;
  /// forward() for a group built with ablation flags; ConfigError if none.
  Matrix forward_ablated(std::size_t layer, const Matrix& x, Mode mode, Rng* mask_rng) const;

  MergedLayer merge(std::size_t layer) const;

 private:
  AdapterGroup() = default;
  std::size_t params_per_layer() const;
  std::size_t layer_param_offset(std::size_t layer) const;
  void check_layer(std::size_t layer) const;

  AdapterKind kind_ = AdapterKind::genft;
  std::string name_;
  std::size_t d_in_ = 0;
  std::size_t d_out_ = 0;
  std::vector<Matrix> bases_;

  std::optional<GenFTSpec> genft_spec_;
  SharedFactors shared_;
  std::vector<LayerFactors> factors_;
  std::vector<Matrix> biases_;
  std::vector<LayerMasks> fixed_masks_;

  std::optional<LoraSpec> lora_spec_;
  std::vector<LoraFactors> lora_;
};

/// Merging a merged layer is the identity.
inline const MergedLayer& merge(const MergedLayer& merged) { return merged; }

}  // namespace genft
