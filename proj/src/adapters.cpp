#include "genft/adapters.hpp"

#include "genft/errors.hpp"

namespace genft {

namespace {

Matrix init_or_empty(Rng& rng, InitScheme scheme, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) return Matrix(rows, cols);
  return init_matrix(rng, scheme, rows, cols);
}

void check_bases(const std::vector<Matrix>& bases, const std::string& name) {
  if (bases.empty()) throw ConfigError("adapter group '" + name + "' needs at least one layer");
  for (const Matrix& w : bases) {
    if (w.empty()) throw DimensionError("adapter group '" + name + "': empty base weight");
    if (!w.same_shape(bases.front())) {
      throw DimensionError("adapter group '" + name + "': base shapes differ, " +
                           shape_string(bases.front()) + " vs " + shape_string(w));
    }
  }
}

GenFTSpec normalise(GenFTSpec spec) {
  if (spec.ablation.no_shared) spec.shared_dim = 0;
  if (spec.ablation.no_specific) spec.specific_dim = 0;
  spec.ablation.no_shared = spec.shared_dim == 0;
  spec.ablation.no_specific = spec.specific_dim == 0;
  spec.ablation.validate();
  spec.hyper.validate();
  return spec;
}

}  // namespace

std::string to_string(AdapterKind kind) { return kind == AdapterKind::genft ? "genft" : "lora"; }

AdapterKind parse_adapter_kind(std::string_view name) {
  if (name == "genft") return AdapterKind::genft;
  if (name == "lora") return AdapterKind::lora;
  throw ConfigError("unknown adapter method '" + std::string(name) + "' (expected genft, lora)");
}

std::string to_string(MaskPolicy policy) {
  return policy == MaskPolicy::resample ? "resample" : "fixed";
}

MaskPolicy parse_mask_policy(std::string_view name) {
  if (name == "resample") return MaskPolicy::resample;
  if (name == "fixed") return MaskPolicy::fixed;
  throw ConfigError("unknown mask policy '" + std::string(name) + "' (expected resample, fixed)");
}

Matrix MergedLayer::forward(const Matrix& x) const {
  Matrix h = matmul(weight, x);
  if (bias) {
    for (std::size_t i = 0; i < h.rows(); ++i)
      for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) += (*bias)(i, 0);
  }
  return h;
}

AdapterGroup AdapterGroup::make_genft(std::string name, std::vector<Matrix> bases,
                                      const GenFTSpec& spec_in, Rng& rng) {
  check_bases(bases, name);
  const GenFTSpec spec = normalise(spec_in);
  AdapterGroup g;
  g.kind_ = AdapterKind::genft;
  g.name_ = std::move(name);
  g.d_out_ = bases.front().rows();
  g.d_in_ = bases.front().cols();
  g.bases_ = std::move(bases);
  g.genft_spec_ = spec;

  const std::size_t a = spec.shared_dim;
  const std::size_t b = spec.specific_dim;
  g.shared_.us = init_or_empty(rng, spec.init_shared, g.d_in_, a);
  g.shared_.vs = init_or_empty(rng, spec.init_shared, g.d_out_, a);
  for (std::size_t l = 0; l < g.bases_.size(); ++l) {
    LayerFactors f;
    f.layer_index = l;
    f.a = init_or_empty(rng, spec.init_a, g.d_in_, b);
    f.b = init_or_empty(rng, spec.init_b, g.d_in_, b);
    g.factors_.push_back(std::move(f));
    if (spec.hyper.bias_enabled) g.biases_.emplace_back(g.d_out_, 1);
  }
  if (spec.mask_policy == MaskPolicy::fixed) {
    const MaskSpec ms{Mode::train, spec.hyper.dropout, &rng};
    for (std::size_t l = 0; l < g.bases_.size(); ++l)
      g.fixed_masks_.push_back(sample_layer_masks(ms, g.d_out_, g.d_in_));
  }
  return g;
}

AdapterGroup AdapterGroup::make_lora(std::string name, std::vector<Matrix> bases,
                                     const LoraSpec& spec, Rng& rng) {
  check_bases(bases, name);
  AdapterGroup g;
  g.kind_ = AdapterKind::lora;
  g.name_ = std::move(name);
  g.d_out_ = bases.front().rows();
  g.d_in_ = bases.front().cols();
  g.bases_ = std::move(bases);
  g.lora_spec_ = spec;
  for (std::size_t l = 0; l < g.bases_.size(); ++l) {
    LoraFactors f;
    f.a = init_or_empty(rng, spec.init_a, g.d_out_, spec.rank);
    f.b = init_or_empty(rng, spec.init_b, spec.rank, g.d_in_);
    g.lora_.push_back(std::move(f));
  }
  return g;
}

AdapterGroup AdapterGroup::restore_genft(std::string name, std::size_t layers, std::size_t d_out,
                                         std::size_t d_in, const GenFTSpec& spec_in,
                                         SharedFactors shared, std::vector<LayerFactors> factors,
                                         std::vector<Matrix> biases) {
  const GenFTSpec spec = normalise(spec_in);
  const std::size_t a = spec.shared_dim;
  const std::size_t b = spec.specific_dim;
  auto expect = [&](const Matrix& m, std::size_t r, std::size_t c, const std::string& what) {
    if (m.rows() != r || m.cols() != c) {
      throw DimensionError(what + " is " + shape_string(m) + ", expected " + std::to_string(r) +
                           "x" + std::to_string(c));
    }
  };
  expect(shared.us, d_in, a, "Us");
  expect(shared.vs, d_out, a, "Vs");
  if (factors.size() != layers) throw DimensionError("layer factor count mismatch");
  for (std::size_t l = 0; l < layers; ++l) {
    expect(factors[l].a, d_in, b, "A" + std::to_string(l));
    expect(factors[l].b, d_in, b, "B" + std::to_string(l));
    factors[l].layer_index = l;
  }
  if (spec.hyper.bias_enabled) {
    if (biases.size() != layers) throw DimensionError("bias count mismatch");
    for (std::size_t l = 0; l < layers; ++l) expect(biases[l], d_out, 1, "bias" + std::to_string(l));
  } else if (!biases.empty()) {
    throw DimensionError("biases given for a group without bias");
  }
  AdapterGroup g;
  g.kind_ = AdapterKind::genft;
  g.name_ = std::move(name);
  g.d_out_ = d_out;
  g.d_in_ = d_in;
  g.bases_.assign(layers, Matrix(d_out, d_in));
  g.genft_spec_ = spec;
  g.shared_ = std::move(shared);
  g.factors_ = std::move(factors);
  g.biases_ = std::move(biases);
  return g;
}

AdapterGroup AdapterGroup::restore_lora(std::string name, std::size_t layers, std::size_t d_out,
                                        std::size_t d_in, const LoraSpec& spec,
                                        std::vector<LoraFactors> factors) {
  if (factors.size() != layers) throw DimensionError("layer factor count mismatch");
  for (const LoraFactors& f : factors) {
    if (f.a.rows() != d_out || f.a.cols() != spec.rank || f.b.rows() != spec.rank ||
        f.b.cols() != d_in) {
      throw DimensionError("LoRA factors " + shape_string(f.a) + ", " + shape_string(f.b) +
                           " do not match rank " + std::to_string(spec.rank));
    }
  }
  AdapterGroup g;
  g.kind_ = AdapterKind::lora;
  g.name_ = std::move(name);
  g.d_out_ = d_out;
  g.d_in_ = d_in;
  g.bases_.assign(layers, Matrix(d_out, d_in));
  g.lora_spec_ = spec;
  g.lora_ = std::move(factors);
  return g;
}

void AdapterGroup::check_layer(std::size_t layer) const {
  if (layer >= bases_.size()) {
    throw DimensionError("layer " + std::to_string(layer) + " out of range for group '" + name_ +
                         "' with " + std::to_string(bases_.size()) + " layers");
  }
}

void AdapterGroup::set_base(std::size_t layer, Matrix w0) {
  check_layer(layer);
  if (w0.rows() != d_out_ || w0.cols() != d_in_) {
    throw DimensionError("base weight " + shape_string(w0) + " does not match adapter " +
                         std::to_string(d_out_) + "x" + std::to_string(d_in_));
  }
  bases_[layer] = std::move(w0);
}

const GenFTSpec& AdapterGroup::genft_spec() const {
  if (!genft_spec_) throw ContractError("group '" + name_ + "' is not a GenFT group");
  return *genft_spec_;
}

const LoraSpec& AdapterGroup::lora_spec() const {
  if (!lora_spec_) throw ContractError("group '" + name_ + "' is not a LoRA group");
  return *lora_spec_;
}

const SharedFactors& AdapterGroup::shared() const {
  genft_spec();
  return shared_;
}

const LayerFactors& AdapterGroup::layer_factors(std::size_t layer) const {
  genft_spec();
  check_layer(layer);
  return factors_[layer];
}

const LoraFactors& AdapterGroup::lora_factors(std::size_t layer) const {
  lora_spec();
  check_layer(layer);
  return lora_[layer];
}

std::size_t AdapterGroup::latent_dim() const {
  if (kind_ == AdapterKind::lora) return lora_spec_->rank;
  return genft_spec_->shared_dim + genft_spec_->specific_dim;
}

std::size_t AdapterGroup::params_per_layer() const {
  if (kind_ == AdapterKind::lora) return 2;
  return genft_spec_->hyper.bias_enabled ? 3 : 2;
}

std::size_t AdapterGroup::layer_param_offset(std::size_t layer) const {
  return (kind_ == AdapterKind::genft ? 2 : 0) + layer * params_per_layer();
}

std::vector<NamedParam> AdapterGroup::trainable_parameters() {
  std::vector<NamedParam> out;
  if (kind_ == AdapterKind::genft) {
    out.push_back({name_ + ".Us", &shared_.us});
    out.push_back({name_ + ".Vs", &shared_.vs});
    for (std::size_t l = 0; l < factors_.size(); ++l) {
      const std::string prefix = name_ + ".layer" + std::to_string(l);
      out.push_back({prefix + ".A", &factors_[l].a});
      out.push_back({prefix + ".B", &factors_[l].b});
      if (genft_spec_->hyper.bias_enabled) out.push_back({prefix + ".bias", &biases_[l]});
    }
  } else {
    for (std::size_t l = 0; l < lora_.size(); ++l) {
      const std::string prefix = name_ + ".layer" + std::to_string(l);
      out.push_back({prefix + ".lora_A", &lora_[l].a});
      out.push_back({prefix + ".lora_B", &lora_[l].b});
    }
  }
  return out;
}

std::vector<const Matrix*> AdapterGroup::parameter_values() const {
  std::vector<const Matrix*> out;
  if (kind_ == AdapterKind::genft) {
    out.push_back(&shared_.us);
    out.push_back(&shared_.vs);
    for (std::size_t l = 0; l < factors_.size(); ++l) {
      out.push_back(&factors_[l].a);
      out.push_back(&factors_[l].b);
      if (genft_spec_->hyper.bias_enabled) out.push_back(&biases_[l]);
    }
  } else {
    for (const LoraFactors& f : lora_) {
      out.push_back(&f.a);
      out.push_back(&f.b);
    }
  }
  return out;
}

std::size_t AdapterGroup::trainable_count() const {
  std::size_t n = 0;
  for (const Matrix* m : parameter_values()) n += m->size();
  return n;
}

std::vector<LayerMasks> AdapterGroup::draw_masks(Mode mode, Rng& rng) const {
  if (kind_ == AdapterKind::lora || mode == Mode::eval) return std::vector<LayerMasks>(layers());
  if (genft_spec_->mask_policy == MaskPolicy::fixed) return fixed_masks_;
  const MaskSpec ms{Mode::train, genft_spec_->hyper.dropout, &rng};
  std::vector<LayerMasks> out;
  out.reserve(layers());
  for (std::size_t l = 0; l < layers(); ++l) out.push_back(sample_layer_masks(ms, d_out_, d_in_));
  return out;
}

AdapterGroup::Bound AdapterGroup::bind(Tape& tape, bool differentiable) const {
  Bound b;
  for (const Matrix* m : parameter_values())
    b.params.push_back(differentiable ? tape.leaf(*m) : tape.constant(*m));
  for (const Matrix& w : bases_) b.bases.push_back(tape.constant(w));
  return b;
}

Var AdapterGroup::delta(const Bound& bound, std::size_t layer, const LayerMasks& masks) const {
  check_layer(layer);
  const std::size_t off = layer_param_offset(layer);
  if (kind_ == AdapterKind::lora) {
    return scale(matmul(bound.params[off], bound.params[off + 1]), lora_spec_->scaling);
  }
  const GeneratorVars vars{bound.bases[layer], bound.params[0], bound.params[1],
                           bound.params[off], bound.params[off + 1]};
  return generate_delta(vars, genft_spec_->hyper, genft_spec_->ablation, masks);
}

Var AdapterGroup::forward(const Bound& bound, std::size_t layer, Var x,
                          const LayerMasks& masks) const {
  if (x.value().rows() != d_in_) {
    throw DimensionError("input " + shape_string(x.value()) + " does not match D_in " +
                         std::to_string(d_in_) + " of group '" + name_ + "'");
  }
  Var h = matmul(bound.bases[layer], x);
  if (latent_dim() > 0) h = add(h, matmul(delta(bound, layer, masks), x));
  if (kind_ == AdapterKind::genft && genft_spec_->hyper.bias_enabled) {
    h = add_column(h, bound.params[layer_param_offset(layer) + 2]);
  }
  return h;
}

Matrix AdapterGroup::delta(std::size_t layer) const {
  Tape tape;
  const Bound b = bind(tape, false);
  return delta(b, layer, LayerMasks{}).value();
}

Matrix AdapterGroup::forward(std::size_t layer, const Matrix& x, Mode mode, Rng* mask_rng) const {
  check_layer(layer);
  LayerMasks masks;
  if (mode == Mode::train && kind_ == AdapterKind::genft) {
    if (genft_spec_->mask_policy == MaskPolicy::fixed) {
      masks = fixed_masks_[layer];
    } else {
      if (mask_rng == nullptr) throw ContractError("train-mode forward needs a mask Rng");
      masks = sample_layer_masks({Mode::train, genft_spec_->hyper.dropout, mask_rng}, d_out_, d_in_);
    }
  }
  Tape tape;
  const Bound b = bind(tape, false);
  return forward(b, layer, tape.constant(x), masks).value();
}

Matrix AdapterGroup::forward_ablated(std::size_t layer, const Matrix& x, Mode mode,
                                     Rng* mask_rng) const {
  if (kind_ != AdapterKind::genft || !genft_spec_->ablation.any()) {
    throw ConfigError("forward_ablated on group '" + name_ + "' without ablation flags");
  }
  return forward(layer, x, mode, mask_rng);
}

MergedLayer AdapterGroup::merge(std::size_t layer) const {
  MergedLayer m;
  m.weight = add(bases_.at(layer), delta(layer));
  if (kind_ == AdapterKind::genft && genft_spec_->hyper.bias_enabled) m.bias = biases_[layer];
  return m;
}

}  // namespace genft
