#include "senti/tensor.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <utility>

#include "senti/errors.hpp"

namespace senti {
namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

Tape& tape_of(Tensor t) {
  if (!t.valid()) throw Error("tensor handle is not attached to a tape");
  return *t.tape();
}

Tape& common_tape(Tensor a, Tensor b) {
  Tape& ta = tape_of(a);
  if (&ta != b.tape()) throw Error("tensors live on different tapes");
  return ta;
}

void require_same_shape(std::string_view op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

void require_axis(std::string_view op, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError(std::string(op) + ": axis must be 0 or 1");
}

// Row-wise softmax of m with max subtraction.
Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    const double peak = m.row(r).maxCoeff();
    out.row(r) = (m.row(r).array() - peak).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Matrix log_softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    const double peak = m.row(r).maxCoeff();
    const double log_z = peak + std::log((m.row(r).array() - peak).exp().sum());
    out.row(r) = (m.row(r).array() - log_z).matrix();
  }
  return out;
}

}  // namespace

const Matrix& Tensor::value() const { return tape_of(*this).value(id_); }

double Tensor::item() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(v));
  return v(0, 0);
}

Tensor Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Tensor(this, nodes_.size() - 1);
}

void Tape::check_owner(Tensor t) const {
  if (t.tape() != this || t.id() >= nodes_.size()) throw Error("tensor does not belong to this tape");
}

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.borrowed ? *n.borrowed : n.owned;
}

Tensor Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Tensor Tape::constant_view(const Matrix& value) {
  Node n;
  n.borrowed = &value;
  return push(std::move(n));
}

Tensor Tape::variable(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = recording_;
  return push(std::move(n));
}

Tensor Tape::parameter(const Matrix& value) {
  Node n;
  n.borrowed = &value;
  n.requires_grad = recording_;
  return push(std::move(n));
}

Tensor Tape::record(Matrix value, std::span<const Tensor> inputs, Backward backward,
                    std::string_view op_name) {
  if (!value.allFinite()) {
    throw NumericError(std::string(op_name) + ": non-finite value produced");
  }
  bool needs = false;
  for (Tensor in : inputs) {
    check_owner(in);
    needs = needs || nodes_[in.id()].requires_grad;
  }
  Node n;
  n.owned = std::move(value);
  if (recording_ && needs) {
    n.requires_grad = true;
    n.backward = std::move(backward);
  }
  return push(std::move(n));
}

bool Tape::requires_grad(Tensor t) const {
  check_owner(t);
  return nodes_[t.id()].requires_grad;
}

void Tape::accumulate(Tensor target, const Matrix& gradient) {
  Node& n = nodes_[target.id()];
  if (!n.requires_grad) return;
  const Matrix& v = value(target.id());
  require_same_shape("accumulate", v, gradient);
  if (n.has_grad) {
    n.grad += gradient;
  } else {
    n.grad = gradient;
    n.has_grad = true;
  }
}

void Tape::accumulate_row(Tensor target, Index row, const Matrix& gradient) {
  Node& n = nodes_[target.id()];
  if (!n.requires_grad) return;
  const Matrix& v = value(target.id());
  if (gradient.rows() != 1 || gradient.cols() != v.cols()) {
    throw ShapeError("accumulate_row: gradient " + shape_str(gradient) + " for table " + shape_str(v));
  }
  if (!n.has_grad) {
    n.grad = Matrix::Zero(v.rows(), v.cols());
    n.has_grad = true;
  }
  n.grad.row(row) += gradient;
}

void Tape::backward(Tensor loss) {
  check_owner(loss);
  if (!recording_) throw Error("backward on a tape that does not record gradients");
  if (backward_done_) throw Error("backward called twice without reset_gradients()");
  const Matrix& lv = value(loss.id());
  if (lv.size() != 1) throw ShapeError("backward needs a scalar loss, got " + shape_str(lv));

  if (nodes_[loss.id()].requires_grad) {
    Node& root = nodes_[loss.id()];
    root.grad = Matrix::Ones(1, 1);
    root.has_grad = true;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.has_grad && n.backward) n.backward(*this, n.grad, value(i));
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad && !n.has_grad) {
      const Matrix& v = value(i);
      n.grad = Matrix::Zero(v.rows(), v.cols());
      n.has_grad = true;
    }
  }
  backward_done_ = true;
}

const Matrix& Tape::grad(Tensor t) const {
  check_owner(t);
  const Node& n = nodes_[t.id()];
  if (!n.requires_grad) throw Error("gradient requested for a node that does not require one");
  if (!backward_done_) throw Error("gradient requested before backward()");
  return n.grad;
}

void Tape::reset_gradients() {
  for (Node& n : nodes_) {
    n.grad.resize(0, 0);
    n.has_grad = false;
  }
  backward_done_ = false;
}

Tensor matmul(Tensor a, Tensor b) {
  Tape& tape = common_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(av) + " x " + shape_str(bv));
  }
  return tape.record(
      av * bv, {a, b},
      [a, b](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(a, g * b.value().transpose());
        t.accumulate(b, a.value().transpose() * g);
      },
      "matmul");
}

Tensor transpose(Tensor x) {
  Tape& tape = tape_of(x);
  return tape.record(
      x.value().transpose(), {x},
      [x](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(x, g.transpose()); }, "transpose");
}

Tensor add(Tensor a, Tensor b) {
  Tape& tape = common_tape(a, b);
  require_same_shape("add", a.value(), b.value());
  return tape.record(
      a.value() + b.value(), {a, b},
      [a, b](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(a, g);
        t.accumulate(b, g);
      },
      "add");
}

Tensor sub(Tensor a, Tensor b) {
  Tape& tape = common_tape(a, b);
  require_same_shape("sub", a.value(), b.value());
  return tape.record(
      a.value() - b.value(), {a, b},
      [a, b](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(a, g);
        t.accumulate(b, -g);
      },
      "sub");
}

Tensor mul(Tensor a, Tensor b) {
  Tape& tape = common_tape(a, b);
  require_same_shape("mul", a.value(), b.value());
  return tape.record(
      a.value().cwiseProduct(b.value()), {a, b},
      [a, b](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(a, g.cwiseProduct(b.value()));
        t.accumulate(b, g.cwiseProduct(a.value()));
      },
      "mul");
}

Tensor add_rowwise(Tensor x, Tensor row) {
  Tape& tape = common_tape(x, row);
  const Matrix& xv = x.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw ShapeError("add_rowwise: row " + shape_str(rv) + " does not fit " + shape_str(xv));
  }
  Matrix out = xv.rowwise() + rv.row(0);
  return tape.record(
      std::move(out), {x, row},
      [x, row](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(x, g);
        t.accumulate(row, g.colwise().sum());
      },
      "add_rowwise");
}

Tensor scale(Tensor x, double factor) {
  Tape& tape = tape_of(x);
  return tape.record(
      x.value() * factor, {x},
      [x, factor](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(x, g * factor); }, "scale");
}

Tensor add_scalar(Tensor x, double shift) {
  Tape& tape = tape_of(x);
  return tape.record(
      (x.value().array() + shift).matrix(), {x},
      [x](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(x, g); }, "add_scalar");
}

Tensor square(Tensor x) {
  Tape& tape = tape_of(x);
  return tape.record(
      x.value().cwiseAbs2(), {x},
      [x](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(x, 2.0 * g.cwiseProduct(x.value()));
      },
      "square");
}

Tensor sigmoid(Tensor x) {
  Tape& tape = tape_of(x);
  Matrix out = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
  return tape.record(
      std::move(out), {x},
      [x](Tape& t, const Matrix& g, const Matrix& y) {
        t.accumulate(x, (g.array() * y.array() * (1.0 - y.array())).matrix());
      },
      "sigmoid");
}

Tensor tanh_act(Tensor x) {
  Tape& tape = tape_of(x);
  return tape.record(
      x.value().array().tanh().matrix(), {x},
      [x](Tape& t, const Matrix& g, const Matrix& y) {
        t.accumulate(x, (g.array() * (1.0 - y.array().square())).matrix());
      },
      "tanh");
}

Tensor exp_op(Tensor x) {
  Tape& tape = tape_of(x);
  return tape.record(
      x.value().array().exp().matrix(), {x},
      [x](Tape& t, const Matrix& g, const Matrix& y) { t.accumulate(x, g.cwiseProduct(y)); }, "exp");
}

Tensor log_op(Tensor x) {
  Tape& tape = tape_of(x);
  const Matrix& xv = x.value();
  if ((xv.array() <= 0.0).any()) throw DomainError("log: input has non-positive entries");
  return tape.record(
      xv.array().log().matrix(), {x},
      [x](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(x, (g.array() / x.value().array()).matrix());
      },
      "log");
}

Tensor softmax(Tensor x, int axis) {
  require_axis("softmax", axis);
  Tape& tape = tape_of(x);
  if (x.value().size() == 0) throw ShapeError("softmax: empty input");
  Matrix out = axis == 1 ? softmax_rows(x.value()) : Matrix(softmax_rows(x.value().transpose()).transpose());
  return tape.record(
      std::move(out), {x},
      [x, axis](Tape& t, const Matrix& g, const Matrix& y) {
        Matrix gx;
        if (axis == 1) {
          const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
          gx = y.cwiseProduct(g - dot.replicate(1, g.cols()));
        } else {
          const RowVector dot = g.cwiseProduct(y).colwise().sum();
          gx = y.cwiseProduct(g - dot.replicate(g.rows(), 1));
        }
        t.accumulate(x, gx);
      },
      "softmax");
}

Tensor log_softmax(Tensor x, int axis) {
  require_axis("log_softmax", axis);
  Tape& tape = tape_of(x);
  if (x.value().size() == 0) throw ShapeError("log_softmax: empty input");
  Matrix out = axis == 1 ? log_softmax_rows(x.value())
                         : Matrix(log_softmax_rows(x.value().transpose()).transpose());
  return tape.record(
      std::move(out), {x},
      [x, axis](Tape& t, const Matrix& g, const Matrix& y) {
        const Matrix p = y.array().exp().matrix();
        Matrix gx;
        if (axis == 1) {
          const Eigen::VectorXd total = g.rowwise().sum();
          gx = g - p.cwiseProduct(total.replicate(1, g.cols()));
        } else {
          const RowVector total = g.colwise().sum();
          gx = g - p.cwiseProduct(total.replicate(g.rows(), 1));
        }
        t.accumulate(x, gx);
      },
      "log_softmax");
}

Tensor concat(std::span<const Tensor> xs, int axis) {
  require_axis("concat", axis);
  if (xs.empty()) throw ShapeError("concat: no inputs");
  Tape& tape = tape_of(xs.front());
  Index rows = 0;
  Index cols = 0;
  for (const Tensor& x : xs) {
    if (x.tape() != &tape) throw Error("tensors live on different tapes");
    const Matrix& v = x.value();
    if (axis == 0) {
      if (rows > 0 && v.cols() != cols) throw ShapeError("concat: column counts differ at " + shape_str(v));
      cols = v.cols();
      rows += v.rows();
    } else {
      if (cols > 0 && v.rows() != rows) throw ShapeError("concat: row counts differ at " + shape_str(v));
      rows = v.rows();
      cols += v.cols();
    }
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (const Tensor& x : xs) {
    const Matrix& v = x.value();
    if (axis == 0) {
      out.middleRows(offset, v.rows()) = v;
      offset += v.rows();
    } else {
      out.middleCols(offset, v.cols()) = v;
      offset += v.cols();
    }
  }
  std::vector<Tensor> inputs(xs.begin(), xs.end());
  return tape.record(
      std::move(out), xs,
      [inputs, axis](Tape& t, const Matrix& g, const Matrix&) {
        Index off = 0;
        for (const Tensor& x : inputs) {
          const Index extent = axis == 0 ? x.rows() : x.cols();
          t.accumulate(x, axis == 0 ? Matrix(g.middleRows(off, extent)) : Matrix(g.middleCols(off, extent)));
          off += extent;
        }
      },
      "concat");
}

Tensor reduce_sum(Tensor x, int axis) {
  require_axis("reduce_sum", axis);
  Tape& tape = tape_of(x);
  const Matrix& v = x.value();
  Matrix out = axis == 0 ? Matrix(v.colwise().sum()) : Matrix(v.rowwise().sum());
  return tape.record(
      std::move(out), {x},
      [x, axis](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(x, axis == 0 ? Matrix(g.replicate(x.rows(), 1)) : Matrix(g.replicate(1, x.cols())));
      },
      "reduce_sum");
}

Tensor reduce_mean(Tensor x, int axis) {
  require_axis("reduce_mean", axis);
  const Index count = axis == 0 ? x.rows() : x.cols();
  return scale(reduce_sum(x, axis), 1.0 / static_cast<double>(count));
}

Tensor sum_all(Tensor x) {
  Tape& tape = tape_of(x);
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return tape.record(
      std::move(out), {x},
      [x](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
      },
      "sum_all");
}

Tensor pick(Tensor x, Index row, Index col) {
  Tape& tape = tape_of(x);
  const Matrix& v = x.value();
  if (row < 0 || row >= v.rows() || col < 0 || col >= v.cols()) {
    throw IndexError("pick: (" + std::to_string(row) + ", " + std::to_string(col) + ") outside " +
                     shape_str(v));
  }
  Matrix out(1, 1);
  out(0, 0) = v(row, col);
  return tape.record(
      std::move(out), {x},
      [x, row, col](Tape& t, const Matrix& g, const Matrix&) {
        Matrix gx = Matrix::Zero(x.rows(), x.cols());
        gx(row, col) = g(0, 0);
        t.accumulate(x, gx);
      },
      "pick");
}

Tensor embedding_lookup(Tensor table, Index index) {
  Tape& tape = tape_of(table);
  const Matrix& v = table.value();
  if (index < 0 || index >= v.rows()) {
    throw IndexError("embedding_lookup: index " + std::to_string(index) + " outside table of " +
                     std::to_string(v.rows()) + " rows");
  }
  return tape.record(
      Matrix(v.row(index)), {table},
      [table, index](Tape& t, const Matrix& g, const Matrix&) { t.accumulate_row(table, index, g); },
      "embedding_lookup");
}

Tensor dropout(Tensor x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  Tape& tape = tape_of(x);
  const Matrix& v = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(v.rows(), v.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
  Matrix out = v.cwiseProduct(mask);
  return tape.record(
      std::move(out), {x},
      [x, mask = std::move(mask)](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(x, g.cwiseProduct(mask));
      },
      "dropout");
}

}  // namespace senti
