#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "genft/matrix.hpp"
#include "genft/rng.hpp"

namespace testing {

inline genft::Matrix random_matrix(genft::Rng& rng, std::size_t rows, std::size_t cols,
                                   double scale = 1.0) {
  genft::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-scale, scale);
  return m;
}

// Triple loop in the textbook order, independent of the library kernel.
inline genft::Matrix naive_matmul(const genft::Matrix& a, const genft::Matrix& b) {
  genft::Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double acc = 0.0L;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += static_cast<long double>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<double>(acc);
    }
  return out;
}

inline genft::Matrix naive_transpose(const genft::Matrix& a) {
  genft::Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline double max_rel_diff(const genft::Matrix& a, const genft::Matrix& b) {
  double scale = 0.0;
  for (double v : b.values()) scale = std::max(scale, std::abs(v));
  return genft::max_abs_diff(a, b) / std::max(scale, 1e-300);
}

inline std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "genft_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace testing
