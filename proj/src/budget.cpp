#include "genft/budget.hpp"

#include <ostream>
#include <string>

#include "genft/errors.hpp"

namespace genft {

std::uint64_t count_lora(const BudgetSpec& s) {
  return s.layers * s.r * (s.d_in + s.d_out) * s.types;
}

std::uint64_t count_genft(const BudgetSpec& s) {
  std::uint64_t per_type = s.a * (s.d_in + s.d_out) + 2 * s.layers * s.b * s.d_in;
  if (s.bias) per_type += s.layers * s.d_out;
  return per_type * s.types;
}

std::uint64_t solve_shared_dim(std::uint64_t layers, std::uint64_t r, std::uint64_t b) {
  if (r < b) {
    throw InfeasibleError("no nonnegative shared dimension matches the LoRA budget: r=" +
                          std::to_string(r) + " < b=" + std::to_string(b));
  }
  return layers * (r - b);
}

BudgetReport budget_report(BudgetSpec spec, bool solve) {
  BudgetReport rep;
  if (solve) {
    spec.a = solve_shared_dim(spec.layers, spec.r, spec.b);
    rep.solved_a = spec.a;
  }
  rep.lora_params = count_lora(spec);
  rep.genft_params = count_genft(spec);
  rep.latent_dim = spec.a + spec.b;
  rep.inequality_holds = rep.latent_dim > spec.r;
  return rep;
}

std::vector<BudgetCurveRow> budget_curve(std::uint64_t layers, std::uint64_t d,
                                         std::uint64_t types, std::uint64_t b,
                                         std::uint64_t dim_min, std::uint64_t dim_max) {
  if (dim_min > dim_max) throw ConfigError("budget_curve: empty dimension range");
  std::vector<BudgetCurveRow> rows;
  for (std::uint64_t dim = dim_min; dim <= dim_max; ++dim) {
    if (dim < b) continue;
    BudgetSpec s = BudgetSpec::square(layers, d, types);
    s.r = dim;
    s.a = dim - b;
    s.b = b;
    rows.push_back({dim, count_lora(s), count_genft(s)});
  }
  return rows;
}

void write_budget_csv(std::ostream& out, const std::vector<BudgetCurveRow>& rows) {
  out << "dim,lora_params,genft_params\n";
  for (const auto& r : rows) out << r.dim << ',' << r.lora_params << ',' << r.genft_params << '\n';
}

}  // namespace genft
