#pragma once

#include <stdexcept>

#include "genft/activation.hpp"
#include "genft/generator.hpp"
#include "support.hpp"

namespace testing {

inline genft::Matrix apply(genft::Activation act, const genft::Matrix& m) {
  genft::Matrix out = m;
  for (double& v : out.values()) v = genft::activate(act, v);
  return out;
}

inline genft::Matrix elementwise(const genft::Matrix& a, const genft::Matrix& b, double sign = 1.0) {
  genft::Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += sign * b.values()[i];
  return out;
}

inline genft::Matrix times(const genft::Matrix& a, const genft::Matrix& b) {
  genft::Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= b.values()[i];
  return out;
}

// U and V formed explicitly as D x D matrices, then the two transforms.
inline genft::Matrix naive_delta(const genft::Matrix& w0, const genft::SharedFactors& s,
                                 const genft::LayerFactors& l, const genft::GenFTHyper& h,
                                 const genft::LayerMasks& masks) {
  const std::size_t d_in = w0.cols(), d_out = w0.rows();
  genft::Matrix u = naive_matmul(s.us, naive_transpose(s.us));
  if (l.a.cols() > 0) u = elementwise(u, naive_matmul(l.b, naive_transpose(l.a)));
  genft::Matrix v = naive_matmul(s.vs, naive_transpose(s.vs));
  if (l.a.cols() > 0) v = elementwise(v, naive_matmul(l.b, naive_transpose(l.a)));
  if (u.rows() != d_in || v.rows() != d_out) throw std::logic_error("naive_delta: factor shapes");
  genft::Matrix pre_row = naive_matmul(w0, u);
  for (double& x : pre_row.values()) x *= h.ratio;
  const genft::Matrix f_row = times(apply(h.sigma1, pre_row), masks.row);
  const genft::Matrix f_col =
      times(apply(h.sigma2, naive_matmul(naive_transpose(f_row), v)), masks.col);
  genft::Matrix oriented = f_col.same_shape(w0) ? f_col : naive_transpose(f_col);
  for (double& x : oriented.values()) x *= h.scaling;
  return oriented;
}

}  // namespace testing
