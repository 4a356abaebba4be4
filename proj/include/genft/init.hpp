#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "genft/matrix.hpp"
#include "genft/rng.hpp"

namespace genft {

enum class InitScheme { kaiming_uniform, xavier_uniform, normal, zeros };

inline constexpr double kNormalInitStd = 0.02;

/// Long names or abbreviations (K-U, X-U, N, Z).
InitScheme parse_init_scheme(std::string_view name);
std::string to_string(InitScheme scheme);

/// fan_in is `cols`, fan_out is `rows` (the (out, in) weight convention).
///   kaiming_uniform: U(-sqrt(6/fan_in), +sqrt(6/fan_in))
///   xavier_uniform:  U(-sqrt(6/(fan_in+fan_out)), +...)
///   normal:          N(0, 0.02^2)
/// Entries are drawn row-major.
Matrix init_matrix(Rng& rng, InitScheme scheme, std::size_t rows, std::size_t cols);

}  // namespace genft
