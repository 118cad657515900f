#pragma once

// Dense 2-D tensors recorded on a reverse-mode gradient tape.
//
// Every quantity the model computes is a node on a Tape. Vectors are 1 x n
// rows, so affine maps read x * W with W laid out [in x out]. Leaves either
// own their value or borrow it from storage that outlives the tape (model
// parameters, feature grids).

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace senti {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

class Tape;

// Handle to one node on a Tape. Cheap to copy; valid while its tape lives.
class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  std::array<Index, 2> shape() const { return {rows(), cols()}; }
  // Value of a 1 x 1 tensor.
  double item() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Pushes the upstream gradient of a node into its inputs via
  // Tape::accumulate. `output` is the node's own forward value.
  using Backward = std::function<void(Tape&, const Matrix& upstream, const Matrix& output)>;

  // With record_gradients == false no closures are stored and parameter()
  // leaves are plain constants; used for inference.
  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  // Borrowed constant; `value` must outlive the tape.
  Tensor constant_view(const Matrix& value);
  // Owned leaf that receives a gradient.
  Tensor variable(Matrix value);
  // Borrowed leaf that receives a gradient; `value` must outlive the tape.
  Tensor parameter(const Matrix& value);

  // Appends an op node. Inputs must already be on this tape, which keeps the
  // node list in topological order. Throws NumericError on non-finite output.
  Tensor record(Matrix value, std::span<const Tensor> inputs, Backward backward,
                std::string_view op_name);
  Tensor record(Matrix value, std::initializer_list<Tensor> inputs, Backward backward,
                std::string_view op_name) {
    return record(std::move(value), std::span<const Tensor>(inputs.begin(), inputs.size()),
                  std::move(backward), op_name);
  }

  void accumulate(Tensor target, const Matrix& gradient);
  void accumulate_row(Tensor target, Index row, const Matrix& gradient);

  // Reverse sweep from a 1 x 1 loss. A second call without reset_gradients()
  // throws.
  void backward(Tensor loss);
  // Gradient of a node after backward(). Leaves that require a gradient but
  // were unreachable report zeros.
  const Matrix& grad(Tensor t) const;
  void reset_gradients();

  bool recording() const { return recording_; }
  bool requires_grad(Tensor t) const;
  std::size_t size() const { return nodes_.size(); }
  const Matrix& value(std::size_t id) const;

 private:
  struct Node {
    Matrix owned;
    const Matrix* borrowed = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
  };

  Tensor push(Node node);
  void check_owner(Tensor t) const;

  std::vector<Node> nodes_;
  bool recording_;
  bool backward_done_ = false;
};

// Linear algebra and elementwise ops. All register adjoints on the tape of
// their inputs.
Tensor matmul(Tensor a, Tensor b);
Tensor transpose(Tensor x);
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
// Adds the 1 x n row `row` to every row of the m x n matrix `x`.
Tensor add_rowwise(Tensor x, Tensor row);
Tensor scale(Tensor x, double factor);
Tensor add_scalar(Tensor x, double shift);
Tensor square(Tensor x);

Tensor sigmoid(Tensor x);
Tensor tanh_act(Tensor x);
Tensor exp_op(Tensor x);
// Throws DomainError unless every element is strictly positive.
Tensor log_op(Tensor x);

// axis 1 normalizes each row; axis 0 normalizes each column.
Tensor softmax(Tensor x, int axis = 1);
Tensor log_softmax(Tensor x, int axis = 1);

Tensor concat(std::span<const Tensor> xs, int axis);
// axis 0 sums over rows (result 1 x n); axis 1 sums over columns (m x 1).
Tensor reduce_sum(Tensor x, int axis);
Tensor reduce_mean(Tensor x, int axis);
Tensor sum_all(Tensor x);
// 1 x 1 view of element (row, col).
Tensor pick(Tensor x, Index row, Index col);

// Row `index` of `table` as a 1 x d tensor. Throws IndexError when out of range.
Tensor embedding_lookup(Tensor table, Index index);

// Inverted dropout: in training mode zero each element with probability
// `rate` and scale survivors by 1 / (1 - rate). Identity otherwise.
Tensor dropout(Tensor x, double rate, bool training, Rng& rng);

inline Tensor operator+(Tensor a, Tensor b) { return add(a, b); }
inline Tensor operator-(Tensor a, Tensor b) { return sub(a, b); }

// Uniform double in [0, 1) using the top 53 bits of one draw. Unlike
// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace senti
