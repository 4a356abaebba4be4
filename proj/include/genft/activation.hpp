#pragma once

#include <string>
#include <string_view>

#include "genft/matrix.hpp"

namespace genft {

/// The closed activation menu: ReLU, LeakyReLU (slope 0.01), Tanh, exact GeLU
/// and Identity. Every member maps 0 to 0.
enum class Activation { relu, leaky_relu, tanh, gelu, identity };

inline constexpr Activation kAllActivations[] = {Activation::relu, Activation::leaky_relu,
                                                 Activation::tanh, Activation::gelu,
                                                 Activation::identity};

inline constexpr double kLeakyReluSlope = 0.01;

/// Accepts the long names ("leaky_relu") and the short abbreviations
/// ("LR"). Throws ConfigError otherwise.
Activation parse_activation(std::string_view name);
std::string to_string(Activation act);

double activate(Activation act, double x);
double activate_derivative(Activation act, double x);

Matrix activation(Activation act, const Matrix& x);

}  // namespace genft
