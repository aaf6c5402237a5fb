#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hagen/tensor.hpp"

namespace hagen {

/// A named trainable tensor plus its gradient accumulator.
struct Parameter {
  Parameter(std::string name, Tensor value);

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor value;
  Tensor grad;
};

/// Insertion-ordered owner of parameters. References handed out stay valid
/// for the lifetime of the set.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Tensor value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  std::size_t numel() const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records one forward pass for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so reverse insertion order is a
/// valid topological order for the backward sweep. A tape is meant to be
/// discarded after its backward call; nothing is retained across steps.
class Tape {
 public:
  /// Receives the node's own output and the gradient flowing into it, and
  /// pushes contributions to its inputs through `grad_slot`.
  using BackwardFn = std::function<void(Tape&, const Tensor& out, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that tracks a gradient iff `value.grad_enabled()`; read it back with grad().
  Var input(Tensor value);
  /// Leaf bound to a Parameter; backward() accumulates into `p.grad`.
  Var parameter(Parameter& p);

  /// Appends an op result. The node requires a gradient iff any input does;
  /// otherwise `fn` is dropped.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);

  /// Reverse sweep from a single-element tensor. Gradients of earlier sweeps on
  /// this tape are discarded first; Parameter accumulators are added to.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id()); }

  /// Gradient accumulator of node `id`, allocated on first use, or nullptr when
  /// the node does not participate in differentiation.
  Tensor* grad_slot(std::size_t id);

  /// Gradient of the last backward() with respect to `v` (zeros if untouched).
  Tensor grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Binary elementwise ops require equal shapes; the
// only implicit broadcast is scalar-with-tensor through `scale`/`add_scalar`.
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// `s - a`, elementwise.
Var rsub_scalar(double s, Var a);

Var tanh(Var a);
/// Gradient at exactly 0 is 0.
Var relu(Var a);
Var sigmoid(Var a);

/// Row-wise softmax with max subtraction.
Var softmax_rows(Var a);

/// Sum of all entries, shape [1].
Var sum(Var a);

Var reshape(Var a, Shape shape);
/// Concatenates matrices with equal row counts along columns.
Var concat_cols(std::span<const Var> parts);
/// Columns [begin, end) of a matrix.
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// out[i] = a[index[i]]; gradient scatter-adds back.
Var gather(Var a, std::vector<std::size_t> index, Shape shape);
/// Matrix [r x c] plus vector [c] added to every row.
Var add_row_vector(Var a, Var bias);
/// Multiplies row i of a matrix by v[i] (a diagonal matrix applied from the left).
Var scale_rows(Var a, Var v);
/// Divides each row by its sum; rows summing to 0 become 0 (pseudo-inverse degree).
Var row_normalize(Var a);

/// Summed binary cross entropy between probabilities and 0/1 targets.
/// Probabilities are clamped to [eps, 1 - eps]; clamped entries pass no gradient.
Var bce_sum(Var probs, const Tensor& targets, double eps = 1e-7);

// Plain (non-recorded) helpers shared by ops, oracles and tests.
namespace kernels {
/// c = a * b for row-major matrices.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// c += op(a) * op(b); op transposes when the flag is set.
void gemm_acc(const Tensor& a, bool ta, const Tensor& b, bool tb, Tensor& c);
/// Caps the threads used by large matrix products (HAGEN_THREADS).
void set_max_threads(unsigned n);
unsigned max_threads();
}  // namespace kernels

}  // namespace hagen
