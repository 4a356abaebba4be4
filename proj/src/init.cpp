#include "genft/init.hpp"

#include <cmath>

#include "genft/errors.hpp"

namespace genft {

InitScheme parse_init_scheme(std::string_view name) {
  if (name == "kaiming_uniform" || name == "K-U") return InitScheme::kaiming_uniform;
  if (name == "xavier_uniform" || name == "X-U") return InitScheme::xavier_uniform;
  if (name == "normal" || name == "N") return InitScheme::normal;
  if (name == "zeros" || name == "Z") return InitScheme::zeros;
  throw ConfigError("unknown init scheme '" + std::string(name) +
                    "' (expected kaiming_uniform, xavier_uniform, normal, zeros)");
}

std::string to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kaiming_uniform: return "kaiming_uniform";
    case InitScheme::xavier_uniform: return "xavier_uniform";
    case InitScheme::normal: return "normal";
    case InitScheme::zeros: return "zeros";
  }
  return "zeros";
}

Matrix init_matrix(Rng& rng, InitScheme scheme, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw DimensionError("init_matrix: dimensions must be positive, got " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(rows, cols);
  const double fan_in = static_cast<double>(cols);
  const double fan_out = static_cast<double>(rows);
  switch (scheme) {
    case InitScheme::zeros:
      break;
    case InitScheme::kaiming_uniform: {
      const double bound = std::sqrt(6.0 / fan_in);
      for (double& v : m.values()) v = rng.uniform(-bound, bound);
      break;
    }
    case InitScheme::xavier_uniform: {
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& v : m.values()) v = rng.uniform(-bound, bound);
      break;
    }
    case InitScheme::normal:
      for (double& v : m.values()) v = rng.normal(0.0, kNormalInitStd);
      break;
  }
  return m;
}

}  // namespace genft
