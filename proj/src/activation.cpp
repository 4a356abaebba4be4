#include "genft/activation.hpp"

#include <cmath>
#include <numbers>

#include "genft/errors.hpp"

namespace genft {

Activation parse_activation(std::string_view name) {
  if (name == "relu" || name == "R") return Activation::relu;
  if (name == "leaky_relu" || name == "LR") return Activation::leaky_relu;
  if (name == "tanh" || name == "T") return Activation::tanh;
  if (name == "gelu" || name == "G") return Activation::gelu;
  if (name == "identity" || name == "I") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(name) +
                    "' (expected relu, leaky_relu, tanh, gelu, identity)");
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::gelu: return "gelu";
    case Activation::identity: return "identity";
  }
  return "identity";
}

double activate(Activation act, double x) {
  switch (act) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::leaky_relu: return x > 0.0 ? x : kLeakyReluSlope * x;
    case Activation::tanh: return std::tanh(x);
    case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    case Activation::identity: return x;
  }
  return x;
}

double activate_derivative(Activation act, double x) {
  switch (act) {
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return x > 0.0 ? 1.0 : kLeakyReluSlope;
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::gelu: {
      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return cdf + x * pdf;
    }
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

Matrix activation(Activation act, const Matrix& x) {
  if (act == Activation::identity) return x;
  Matrix out(x.rows(), x.cols());
  auto in = x.values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = activate(act, in[i]);
  return out;
}

}  // namespace genft
