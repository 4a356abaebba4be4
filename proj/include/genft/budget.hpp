#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace genft {

/// Dimensions of a set of adapted projections: `types` projection kinds,
/// each present in `layers` layers with D_out x D_in weights.
struct BudgetSpec {
  std::uint64_t layers = 1;
  std::uint64_t d_in = 0;
  std::uint64_t d_out = 0;
  std::uint64_t types = 1;
  std::uint64_t r = 0;  // LoRA rank
  std::uint64_t a = 0;  // shared dimension
  std::uint64_t b = 0;  // specific dimension
  bool bias = false;    // GenFT per-layer output bias

  static BudgetSpec square(std::uint64_t layers, std::uint64_t d, std::uint64_t types = 1) {
    BudgetSpec s;
    s.layers = layers;
    s.d_in = d;
    s.d_out = d;
    s.types = types;
    return s;
  }
};

/// L * r * (D_in + D_out) * types; 2LDr * types for square weights.
std::uint64_t count_lora(const BudgetSpec& spec);

/// (a (D_in + D_out) + 2 L b D_in) * types, plus L D_out types when bias is
/// enabled. Square weights without bias give (2Da + 2LDb) * types.
std::uint64_t count_genft(const BudgetSpec& spec);

/// Shared dimension that matches LoRA's budget: a = L (r - b). Throws
/// InfeasibleError when r < b.
std::uint64_t solve_shared_dim(std::uint64_t layers, std::uint64_t r, std::uint64_t b);

struct BudgetReport {
  std::uint64_t lora_params = 0;
  std::uint64_t genft_params = 0;
  std::uint64_t latent_dim = 0;  // a + b
  std::optional<std::uint64_t> solved_a;
  /// a + b > r; holds exactly when r > b and L > 1 under budget parity.
  bool inequality_holds = false;
};

/// Counts for `spec` as given. When `solve` is set, `a` is replaced by the
/// budget-matched shared dimension first.
BudgetReport budget_report(BudgetSpec spec, bool solve);

struct BudgetCurveRow {
  std::uint64_t dim = 0;
  std::uint64_t lora_params = 0;
  std::uint64_t genft_params = 0;
};

/// One row per latent dimension `dim` in [dim_min, dim_max]: LoRA at r = dim,
/// GenFT at a = dim - b with the given b. Dims below b are skipped.
std::vector<BudgetCurveRow> budget_curve(std::uint64_t layers, std::uint64_t d,
                                         std::uint64_t types, std::uint64_t b,
                                         std::uint64_t dim_min, std::uint64_t dim_max);

/// Header "dim,lora_params,genft_params".
void write_budget_csv(std::ostream& out, const std::vector<BudgetCurveRow>& rows);

}  // namespace genft
