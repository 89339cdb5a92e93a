#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "resolv/errors.hpp"

namespace resolv {

using Matrix = Eigen::MatrixXd;

// Handle into a Tape's node list.
using Var = int;

// Named parameter gradients, keyed like the ParameterStore.
using GradMap = std::map<std::string, Matrix>;

// Reverse-mode differentiation over a recorded list of matrix operations.
// Each op below appends one node holding its forward value and a closure
// that scatters the node's incoming gradient to its operands. Gradients are
// accumulated, so a value used twice receives both contributions.
//
// Nodes that no gradient can reach (needs_grad false) carry no closure and
// cost nothing on the backward pass; inference can therefore run on a tape
// with all inputs imported as constants.
class Tape {
 public:
  // With check_finite, every forward value is verified finite at creation
  // (NonFinite otherwise). The cost is linear in tensor sizes and small
  // next to the matrix products themselves.
  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  // Core node constructor used by the free-function ops. `back` may be
  // empty when needs_grad is false.
  Var push(Matrix val, bool needs_grad, std::function<void(Tape&)> back);

  Var constant(Matrix val) { return push(std::move(val), false, nullptr); }

  // Imports a named parameter as a gradient-tracked leaf, memoized per
  // name: repeated imports of the same name return the same node, so its
  // gradient aggregates across all uses.
  Var import_param(const std::string& name, const Matrix& value);

  const Matrix& val(Var v) const { return nodes_[v].val; }
  bool needs_grad(Var v) const { return nodes_[v].needs_grad; }
  int rows(Var v) const { return static_cast<int>(nodes_[v].val.rows()); }
  int cols(Var v) const { return static_cast<int>(nodes_[v].val.cols()); }
  size_t size() const { return nodes_.size(); }

  // Gradient buffer of a node; zero-sized until something flowed into it.
  const Matrix& grad(Var v) const { return nodes_[v].grad; }

  // Adds g into v's gradient buffer (no-op when v does not need gradients).
  void accumulate(Var v, const Matrix& g);

  // Backpropagates from a 1x1 scalar node through all recorded operations.
  void backward(Var loss);

  // Gradients of every imported parameter that received one, by name.
  GradMap param_grads() const;

  // Drops all nodes and the import memo; capacity is retained. Used to
  // bound memory when running many forward-only model calls.
  void reset();

 private:
  struct Node {
    Matrix val;
    Matrix grad;  // zero-sized until touched
    bool needs_grad = false;
    std::function<void(Tape&)> back;
  };

  std::vector<Node> nodes_;
  std::map<std::string, Var> imported_;
  bool check_finite_;
};

// ---- primitive operations -------------------------------------------------
// All ops validate operand shapes (ShapeMismatch) and propagate needs_grad.

Var matmul(Tape& t, Var a, Var b);     // A·B
Var matmul_nt(Tape& t, Var a, Var b);  // A·Bᵀ
Var matmul_tn(Tape& t, Var a, Var b);  // Aᵀ·B
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var cmul(Tape& t, Var a, Var b);       // elementwise product
Var scale(Tape& t, Var a, double s);
Var add_row(Tape& t, Var a, Var b);    // broadcast 1xc row b over rows of a
Var tanh_op(Tape& t, Var a);
Var sigmoid_op(Tape& t, Var a);
Var concat_cols(Tape& t, Var a, Var b);
Var slice_cols(Tape& t, Var a, int begin, int len);
Var vstack(Tape& t, const std::vector<Var>& parts);
Var gather_rows(Tape& t, Var a, const std::vector<int>& idx);
// Rows of a scattered into a num_rows-tall zero matrix; colliding indices
// accumulate.
Var scatter_rows(Tape& t, Var a, const std::vector<int>& idx, int num_rows);
Var tile_rows(Tape& t, Var a, int copies);  // 1xc -> copies x c
Var mean_rows(Tape& t, Var a);              // r x c -> 1 x c
Var sum_all(Tape& t, Var a);                // 1x1
Var pick(Tape& t, Var a, int i, int j);     // 1x1 element

// Log-softmax over the cells where mask != 0, treated jointly as one
// distribution; masked cells output 0 and receive no gradient. The mask has
// the same shape as a and must select at least one cell.
Var masked_log_softmax(Tape& t, Var a, const Matrix& mask);

// Mean binary cross-entropy between logits z and targets in [0,1], computed
// in the softplus-stable form. Returns 1x1.
Var bce_logits_mean(Tape& t, Var z, const Matrix& targets);

}  // namespace resolv
