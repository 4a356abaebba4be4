#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace genft {

/// Dense row-major matrix of doubles.
///
/// Zero extents are allowed so that an empty factor (shared or specific
/// dimension 0) is an ordinary value: a D x 0 matrix multiplied by a 0 x D
/// matrix yields the D x D zero matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  static Matrix column(std::initializer_list<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// "RxC" for error messages.
std::string shape_string(const Matrix& m);

/// Caps the number of threads matmul may use. Row blocks are split across
/// threads; every output entry is still summed in ascending k order, so the
/// result is bit-identical for any thread count.
void set_matmul_threads(unsigned threads);
unsigned matmul_threads();

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
double sum(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);

/// FNV-1a over the raw bytes of shape and values; used to prove a matrix was
/// not touched.
std::uint64_t checksum(const Matrix& m);

// GFTM binary format: "GFTM", u32 rows, u32 cols, rows*cols f64, all
// little-endian.
void write_gftm(std::ostream& out, const Matrix& m);
Matrix read_gftm(std::istream& in);
void save_gftm(const std::string& path, const Matrix& m);
Matrix load_gftm(const std::string& path);

/// Comma separated, one matrix row per line, round-trip precision.
void write_csv(std::ostream& out, const Matrix& m);
void save_csv(const std::string& path, const Matrix& m);

}  // namespace genft
