#include "genft/matrix.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <thread>

#include "genft/errors.hpp"

namespace genft {

namespace {

std::atomic<unsigned> g_matmul_threads{1};

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

template <typename F>
Matrix zip(const Matrix& a, const Matrix& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Matrix out(a.rows(), a.cols());
  auto x = a.values();
  auto y = b.values();
  auto z = out.values();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = f(x[i], y[i]);
  return out;
}

void matmul_rows(const Matrix& a, const Matrix& b, Matrix& out, std::size_t row_begin,
                 std::size_t row_end) {
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* pc = out.values().data();
  for (std::size_t i = row_begin; i < row_end; ++i) {
    double* crow = pc + i * n;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = pa[i * inner + k];
      const double* brow = pb + k * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw IoError("GFTM: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw IoError("GFTM: truncated payload");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix: " + std::to_string(data_.size()) +
                         " values do not fill shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::initializer_list<double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values));
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void set_matmul_threads(unsigned threads) { g_matmul_threads = std::max(1u, threads); }
unsigned matmul_threads() { return g_matmul_threads; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a) + " x " +
                         shape_string(b));
  }
  Matrix out(a.rows(), b.cols());
  const unsigned threads = std::min<std::size_t>(g_matmul_threads, a.rows());
  const std::size_t work = a.rows() * a.cols() * b.cols();
  if (threads <= 1 || work < (1u << 16)) {
    matmul_rows(a, b, out, 0, a.rows());
    return out;
  }
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (a.rows() + threads - 1) / threads;
    for (std::size_t begin = 0; begin < a.rows(); begin += chunk) {
      const std::size_t end = std::min(a.rows(), begin + chunk);
      pool.emplace_back([&, begin, end] { matmul_rows(a, b, out, begin, end); });
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  return zip(a, b, "subtract", [](double x, double y) { return x - y; });
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  return zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}

Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

double sum(const Matrix& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return total;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.values().begin(), a.values().end(),
                     [](double v) { return std::isfinite(v); });
}

std::uint64_t checksum(const Matrix& m) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(m.rows());
  mix(m.cols());
  for (double v : m.values()) mix(std::bit_cast<std::uint64_t>(v));
  return h;
}

void write_gftm(std::ostream& out, const Matrix& m) {
  out.write("GFTM", 4);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw IoError("GFTM: write failed");
}

Matrix read_gftm(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "GFTM")
    throw IoError("GFTM: bad magic bytes");
  const std::uint32_t rows = get_u32(in);
  const std::uint32_t cols = get_u32(in);
  std::vector<double> data(static_cast<std::size_t>(rows) * cols);
  for (double& v : data) v = std::bit_cast<double>(get_u64(in));
  return Matrix(rows, cols, std::move(data));
}

void save_gftm(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_gftm(out, m);
}

Matrix load_gftm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_gftm(in);
}

void write_csv(std::ostream& out, const Matrix& m) {
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

void save_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_csv(out, m);
}

}  // namespace genft
