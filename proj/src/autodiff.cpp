#include "genft/autodiff.hpp"

#include <cmath>
#include <limits>

#include "genft/errors.hpp"

namespace genft {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw ContractError(std::string(op) + ": operands belong to different tapes");
  }
  return *a.tape;
}

Tape& tape_of(Var a, const char* op) {
  if (a.tape == nullptr) throw ContractError(std::string(op) + ": unbound variable");
  return *a.tape;
}

Matrix column_sums_as_vector(const Matrix& g) {
  Matrix out(g.rows(), 1);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j);
    out(i, 0) = s;
  }
  return out;
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.rows(); ++i) mx = std::max(mx, logits(i, j));
    double z = 0.0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      p(i, j) = std::exp(logits(i, j) - mx);
      z += p(i, j);
    }
    for (std::size_t i = 0; i < logits.rows(); ++i) p(i, j) /= z;
  }
  return p;
}

}  // namespace

const Matrix& Var::value() const { return tape->value(*this); }
const Matrix& Var::grad() const { return tape->grad(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::constant(Matrix value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (!has_grads_ || !n.grad.same_shape(n.value)) {
    throw ContractError("grad requested before backward() covered node " + std::to_string(v.id));
  }
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  auto dst = n.grad.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  const Node& ln = nodes_.at(loss.id);
  if (ln.value.rows() != 1 || ln.value.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + shape_string(ln.value));
  }
  for (Node& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
  has_grads_ = true;
  nodes_[loss.id].grad(0, 0) = 1.0;

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::leaf:
      case Op::constant:
        break;
      case Op::matmul: {
        const Matrix& a = nodes_[n.in0].value;
        const Matrix& b = nodes_[n.in1].value;
        if (nodes_[n.in0].requires_grad) accumulate(n.in0, genft::matmul(g, genft::transpose(b)));
        if (nodes_[n.in1].requires_grad) accumulate(n.in1, genft::matmul(genft::transpose(a), g));
        break;
      }
      case Op::transpose:
        accumulate(n.in0, genft::transpose(g));
        break;
      case Op::add:
        accumulate(n.in0, g);
        accumulate(n.in1, g);
        break;
      case Op::sub:
        accumulate(n.in0, g);
        if (nodes_[n.in1].requires_grad) accumulate(n.in1, genft::scale(g, -1.0));
        break;
      case Op::scale:
        accumulate(n.in0, genft::scale(g, n.scalar));
        break;
      case Op::hadamard:
        if (nodes_[n.in0].requires_grad) accumulate(n.in0, genft::hadamard(g, nodes_[n.in1].value));
        if (nodes_[n.in1].requires_grad) accumulate(n.in1, genft::hadamard(g, nodes_[n.in0].value));
        break;
      case Op::activation: {
        const Matrix& x = nodes_[n.in0].value;
        Matrix dx(x.rows(), x.cols());
        auto xv = x.values();
        auto gv = g.values();
        auto out = dx.values();
        for (std::size_t i = 0; i < out.size(); ++i)
          out[i] = gv[i] * activate_derivative(n.act, xv[i]);
        accumulate(n.in0, dx);
        break;
      }
      case Op::sum: {
        const Matrix& x = nodes_[n.in0].value;
        accumulate(n.in0, Matrix(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::add_column:
        accumulate(n.in0, g);
        if (nodes_[n.in1].requires_grad) accumulate(n.in1, column_sums_as_vector(g));
        break;
      case Op::mean_squared_error: {
        const Matrix& pred = nodes_[n.in0].value;
        const Matrix& target = nodes_[n.in1].value;
        const double k = 2.0 * g(0, 0) / static_cast<double>(pred.size());
        Matrix d(pred.rows(), pred.cols());
        for (std::size_t i = 0; i < d.size(); ++i)
          d.values()[i] = k * (pred.values()[i] - target.values()[i]);
        accumulate(n.in0, d);
        break;
      }
      case Op::cross_entropy: {
        const Matrix& logits = nodes_[n.in0].value;
        Matrix d = softmax_columns(logits);
        const double k = g(0, 0) / static_cast<double>(logits.cols());
        for (std::size_t i = 0; i < d.size(); ++i)
          d.values()[i] = k * (d.values()[i] - n.aux.values()[i]);
        accumulate(n.in0, d);
        break;
      }
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b, "matmul");
  Tape::Node n;
  n.op = Tape::Op::matmul;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value = matmul(a.value(), b.value());
  n.requires_grad = t.requires_grad(a) || t.requires_grad(b);
  return t.push(std::move(n));
}

Var transpose(Var a) {
  Tape& t = tape_of(a, "transpose");
  Tape::Node n;
  n.op = Tape::Op::transpose;
  n.in0 = a.id;
  n.value = transpose(a.value());
  n.requires_grad = t.requires_grad(a);
  return t.push(std::move(n));
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b, "add");
  Tape::Node n;
  n.op = Tape::Op::add;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value = add(a.value(), b.value());
  n.requires_grad = t.requires_grad(a) || t.requires_grad(b);
  return t.push(std::move(n));
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b, "sub");
  Tape::Node n;
  n.op = Tape::Op::sub;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value = subtract(a.value(), b.value());
  n.requires_grad = t.requires_grad(a) || t.requires_grad(b);
  return t.push(std::move(n));
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a, "scale");
  Tape::Node n;
  n.op = Tape::Op::scale;
  n.in0 = a.id;
  n.scalar = s;
  n.value = scale(a.value(), s);
  n.requires_grad = t.requires_grad(a);
  return t.push(std::move(n));
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b, "hadamard");
  Tape::Node n;
  n.op = Tape::Op::hadamard;
  n.in0 = a.id;
  n.in1 = b.id;
  n.value = hadamard(a.value(), b.value());
  n.requires_grad = t.requires_grad(a) || t.requires_grad(b);
  return t.push(std::move(n));
}

Var activate(Activation act, Var x) {
  Tape& t = tape_of(x, "activate");
  Tape::Node n;
  n.op = Tape::Op::activation;
  n.in0 = x.id;
  n.act = act;
  n.value = activation(act, x.value());
  n.requires_grad = t.requires_grad(x);
  return t.push(std::move(n));
}

Var sum(Var a) {
  Tape& t = tape_of(a, "sum");
  Tape::Node n;
  n.op = Tape::Op::sum;
  n.in0 = a.id;
  n.value = Matrix(1, 1, sum(a.value()));
  n.requires_grad = t.requires_grad(a);
  return t.push(std::move(n));
}

Var add_column(Var m, Var bias) {
  Tape& t = same_tape(m, bias, "add_column");
  const Matrix& mv = m.value();
  const Matrix& bv = bias.value();
  if (bv.cols() != 1 || bv.rows() != mv.rows()) {
    throw DimensionError("add_column: bias " + shape_string(bv) + " does not match " +
                         shape_string(mv));
  }
  Tape::Node n;
  n.op = Tape::Op::add_column;
  n.in0 = m.id;
  n.in1 = bias.id;
  n.value = mv;
  for (std::size_t i = 0; i < mv.rows(); ++i)
    for (std::size_t j = 0; j < mv.cols(); ++j) n.value(i, j) += bv(i, 0);
  n.requires_grad = t.requires_grad(m) || t.requires_grad(bias);
  return t.push(std::move(n));
}

Var mean_squared_error(Var pred, Var target) {
  Tape& t = same_tape(pred, target, "mean_squared_error");
  const Matrix& p = pred.value();
  const Matrix& y = target.value();
  if (!p.same_shape(y)) {
    throw DimensionError("mean_squared_error: " + shape_string(p) + " vs " + shape_string(y));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p.values()[i] - y.values()[i];
    total += d * d;
  }
  Tape::Node n;
  n.op = Tape::Op::mean_squared_error;
  n.in0 = pred.id;
  n.in1 = target.id;
  n.value = Matrix(1, 1, p.empty() ? 0.0 : total / static_cast<double>(p.size()));
  n.requires_grad = t.requires_grad(pred);
  return t.push(std::move(n));
}

Var cross_entropy(Var logits, std::span<const std::size_t> labels, double label_smoothing) {
  Tape& t = tape_of(logits, "cross_entropy");
  const Matrix& z = logits.value();
  if (labels.size() != z.cols()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(z.cols()) + " samples");
  }
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigError("label_smoothing must lie in [0, 1)");
  }
  const std::size_t k = z.rows();
  Matrix target(k, z.cols(), label_smoothing / static_cast<double>(k));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] >= k) throw DimensionError("cross_entropy: label out of range");
    target(labels[j], j) += 1.0 - label_smoothing;
  }
  double total = 0.0;
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) mx = std::max(mx, z(i, j));
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::exp(z(i, j) - mx);
    const double log_z = mx + std::log(s);
    for (std::size_t i = 0; i < k; ++i) total -= target(i, j) * (z(i, j) - log_z);
  }
  Tape::Node n;
  n.op = Tape::Op::cross_entropy;
  n.in0 = logits.id;
  n.aux = std::move(target);
  n.value = Matrix(1, 1, total / static_cast<double>(z.cols()));
  n.requires_grad = t.requires_grad(logits);
  return t.push(std::move(n));
}

}  // namespace genft
