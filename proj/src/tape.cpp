#include "resolv/tape.hpp"

#include <cmath>
#include <utility>

namespace resolv {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeMismatch(msg);
}

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Var Tape::push(Matrix val, bool needs_grad, std::function<void(Tape&)> back) {
  if (check_finite_ && !val.allFinite())
    throw NonFinite("non-finite value at tape node " +
                    std::to_string(nodes_.size()));
  nodes_.push_back(Node{std::move(val), Matrix(), needs_grad,
                        needs_grad ? std::move(back) : nullptr});
  return static_cast<Var>(nodes_.size() - 1);
}

Var Tape::import_param(const std::string& name, const Matrix& value) {
  auto it = imported_.find(name);
  if (it != imported_.end()) return it->second;
  Var v = push(value, true, nullptr);
  imported_.emplace(name, v);
  return v;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v];
  if (!n.needs_grad) return;
  require(g.rows() == n.val.rows() && g.cols() == n.val.cols(),
          "gradient shape " + shape_of(g) + " vs value " + shape_of(n.val));
  if (n.grad.size() == 0)
    n.grad = Matrix::Zero(n.val.rows(), n.val.cols());
  n.grad += g;
}

void Tape::backward(Var loss) {
  require(nodes_[loss].val.rows() == 1 && nodes_[loss].val.cols() == 1,
          "backward target must be 1x1, got " + shape_of(nodes_[loss].val));
  if (!nodes_[loss].needs_grad) return;  // loss independent of parameters
  accumulate(loss, Matrix::Ones(1, 1));
  for (Var v = loss; v >= 0; --v) {
    Node& n = nodes_[v];
    if (n.grad.size() == 0 || !n.back) continue;
    n.back(*this);
  }
}

GradMap Tape::param_grads() const {
  GradMap out;
  for (const auto& [name, v] : imported_)
    if (nodes_[v].grad.size() != 0) out.emplace(name, nodes_[v].grad);
  return out;
}

void Tape::reset() {
  nodes_.clear();
  imported_.clear();
}

// ---- helpers ---------------------------------------------------------------

namespace {

bool any_grad(const Tape& t, Var a, Var b) {
  return t.needs_grad(a) || t.needs_grad(b);
}

}  // namespace

// ---- products --------------------------------------------------------------

Var matmul(Tape& t, Var a, Var b) {
  require(t.cols(a) == t.rows(b), "matmul " + std::to_string(t.cols(a)) +
                                      " vs " + std::to_string(t.rows(b)));
  Matrix out = t.val(a) * t.val(b);
  if (!any_grad(t, a, b)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, b, self](Tape& t) {
    const Matrix& g = t.grad(self);
    t.accumulate(a, g * t.val(b).transpose());
    t.accumulate(b, t.val(a).transpose() * g);
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  require(t.cols(a) == t.cols(b), "matmul_nt column mismatch");
  Matrix out = t.val(a) * t.val(b).transpose();
  if (!any_grad(t, a, b)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, b, self](Tape& t) {
    const Matrix& g = t.grad(self);
    t.accumulate(a, g * t.val(b));
    t.accumulate(b, g.transpose() * t.val(a));
  });
}

Var matmul_tn(Tape& t, Var a, Var b) {
  require(t.rows(a) == t.rows(b), "matmul_tn row mismatch");
  Matrix out = t.val(a).transpose() * t.val(b);
  if (!any_grad(t, a, b)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, b, self](Tape& t) {
    const Matrix& g = t.grad(self);
    t.accumulate(a, t.val(b) * g.transpose());
    t.accumulate(b, t.val(a) * g);
  });
}

// ---- pointwise -------------------------------------------------------------

Var add(Tape& t, Var a, Var b) {
  require(t.rows(a) == t.rows(b) && t.cols(a) == t.cols(b), "add shapes");
  Matrix out = t.val(a) + t.val(b);
  if (!any_grad(t, a, b)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, b, self](Tape& t) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, t.grad(self));
  });
}

Var sub(Tape& t, Var a, Var b) {
  require(t.rows(a) == t.rows(b) && t.cols(a) == t.cols(b), "sub shapes");
  Matrix out = t.val(a) - t.val(b);
  if (!any_grad(t, a, b)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, b, self](Tape& t) {
    t.accumulate(a, t.grad(self));
    t.accumulate(b, -t.grad(self));
  });
}

Var cmul(Tape& t, Var a, Var b) {
  require(t.rows(a) == t.rows(b) && t.cols(a) == t.cols(b), "cmul shapes");
  Matrix out = t.val(a).cwiseProduct(t.val(b));
  if (!any_grad(t, a, b)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, b, self](Tape& t) {
    const Matrix& g = t.grad(self);
    t.accumulate(a, g.cwiseProduct(t.val(b)));
    t.accumulate(b, g.cwiseProduct(t.val(a)));
  });
}

Var scale(Tape& t, Var a, double s) {
  Matrix out = t.val(a) * s;
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, s, self](Tape& t) {
    t.accumulate(a, t.grad(self) * s);
  });
}

Var add_row(Tape& t, Var a, Var b) {
  require(t.rows(b) == 1 && t.cols(a) == t.cols(b),
          "add_row wants a 1x" + std::to_string(t.cols(a)) + " row");
  Matrix out = t.val(a).rowwise() + t.val(b).row(0);
  if (!any_grad(t, a, b)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, b, self](Tape& t) {
    const Matrix& g = t.grad(self);
    t.accumulate(a, g);
    t.accumulate(b, g.colwise().sum());
  });
}

Var tanh_op(Tape& t, Var a) {
  Matrix out = t.val(a).array().tanh();
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, self](Tape& t) {
    const Matrix& y = t.val(self);
    t.accumulate(a, t.grad(self).cwiseProduct(
                        (1.0 - y.array().square()).matrix()));
  });
}

Var sigmoid_op(Tape& t, Var a) {
  // 1 / (1 + exp(-x)) computed via the numerically symmetric tanh identity.
  Matrix out = (0.5 * (t.val(a).array() * 0.5).tanh() + 0.5).matrix();
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, self](Tape& t) {
    const Matrix& y = t.val(self);
    t.accumulate(a, t.grad(self).cwiseProduct(
                        (y.array() * (1.0 - y.array())).matrix()));
  });
}

// ---- layout ----------------------------------------------------------------

Var concat_cols(Tape& t, Var a, Var b) {
  require(t.rows(a) == t.rows(b), "concat_cols row mismatch");
  Matrix out(t.rows(a), t.cols(a) + t.cols(b));
  out << t.val(a), t.val(b);
  if (!any_grad(t, a, b)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  int ca = t.cols(a), cb = t.cols(b);
  return t.push(std::move(out), true, [a, b, ca, cb, self](Tape& t) {
    const Matrix& g = t.grad(self);
    t.accumulate(a, g.leftCols(ca));
    t.accumulate(b, g.rightCols(cb));
  });
}

Var slice_cols(Tape& t, Var a, int begin, int len) {
  require(begin >= 0 && len >= 1 && begin + len <= t.cols(a),
          "slice_cols out of range");
  Matrix out = t.val(a).middleCols(begin, len);
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, begin, len, self](Tape& t) {
    Matrix g = Matrix::Zero(t.rows(a), t.cols(a));
    g.middleCols(begin, len) = t.grad(self);
    t.accumulate(a, g);
  });
}

Var vstack(Tape& t, const std::vector<Var>& parts) {
  require(!parts.empty(), "vstack of nothing");
  int cols = t.cols(parts[0]);
  int rows = 0;
  bool ng = false;
  for (Var p : parts) {
    require(t.cols(p) == cols, "vstack column mismatch");
    rows += t.rows(p);
    ng = ng || t.needs_grad(p);
  }
  Matrix out(rows, cols);
  int at = 0;
  for (Var p : parts) {
    out.middleRows(at, t.rows(p)) = t.val(p);
    at += t.rows(p);
  }
  if (!ng) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [parts, self](Tape& t) {
    const Matrix& g = t.grad(self);
    int at = 0;
    for (Var p : parts) {
      t.accumulate(p, g.middleRows(at, t.rows(p)));
      at += t.rows(p);
    }
  });
}

Var gather_rows(Tape& t, Var a, const std::vector<int>& idx) {
  for (int i : idx)
    require(i >= 0 && i < t.rows(a), "gather_rows index out of range");
  Matrix out(static_cast<int>(idx.size()), t.cols(a));
  for (size_t r = 0; r < idx.size(); ++r) out.row(r) = t.val(a).row(idx[r]);
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, idx, self](Tape& t) {
    const Matrix& g = t.grad(self);
    Matrix ga = Matrix::Zero(t.rows(a), t.cols(a));
    for (size_t r = 0; r < idx.size(); ++r) ga.row(idx[r]) += g.row(r);
    t.accumulate(a, ga);
  });
}

Var scatter_rows(Tape& t, Var a, const std::vector<int>& idx, int num_rows) {
  require(static_cast<int>(idx.size()) == t.rows(a),
          "scatter_rows wants one index per source row");
  for (int i : idx)
    require(i >= 0 && i < num_rows, "scatter_rows index out of range");
  Matrix out = Matrix::Zero(num_rows, t.cols(a));
  for (size_t r = 0; r < idx.size(); ++r) out.row(idx[r]) += t.val(a).row(r);
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, idx, self](Tape& t) {
    const Matrix& g = t.grad(self);
    Matrix ga(t.rows(a), t.cols(a));
    for (size_t r = 0; r < idx.size(); ++r) ga.row(r) = g.row(idx[r]);
    t.accumulate(a, ga);
  });
}

Var tile_rows(Tape& t, Var a, int copies) {
  require(t.rows(a) == 1 && copies >= 1, "tile_rows wants a row vector");
  Matrix out = t.val(a).replicate(copies, 1);
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, self](Tape& t) {
    t.accumulate(a, t.grad(self).colwise().sum());
  });
}

Var mean_rows(Tape& t, Var a) {
  require(t.rows(a) >= 1, "mean_rows of an empty matrix");
  Matrix out = t.val(a).colwise().mean();
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  int r = t.rows(a);
  return t.push(std::move(out), true, [a, r, self](Tape& t) {
    t.accumulate(a, t.grad(self).replicate(r, 1) / static_cast<double>(r));
  });
}

Var sum_all(Tape& t, Var a) {
  Matrix out(1, 1);
  out(0, 0) = t.val(a).sum();
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, self](Tape& t) {
    t.accumulate(a, Matrix::Constant(t.rows(a), t.cols(a),
                                     t.grad(self)(0, 0)));
  });
}

Var pick(Tape& t, Var a, int i, int j) {
  require(i >= 0 && i < t.rows(a) && j >= 0 && j < t.cols(a),
          "pick out of range");
  Matrix out(1, 1);
  out(0, 0) = t.val(a)(i, j);
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, i, j, self](Tape& t) {
    Matrix ga = Matrix::Zero(t.rows(a), t.cols(a));
    ga(i, j) = t.grad(self)(0, 0);
    t.accumulate(a, ga);
  });
}

// ---- reductions with custom math -------------------------------------------

Var masked_log_softmax(Tape& t, Var a, const Matrix& mask) {
  require(mask.rows() == t.rows(a) && mask.cols() == t.cols(a),
          "mask shape");
  const Matrix& x = t.val(a);
  double mx = -std::numeric_limits<double>::infinity();
  int live = 0;
  for (int j = 0; j < x.cols(); ++j)
    for (int i = 0; i < x.rows(); ++i)
      if (mask(i, j) != 0) {
        ++live;
        mx = std::max(mx, x(i, j));
      }
  require(live > 0, "masked_log_softmax with an all-masked input");
  double sum = 0;
  for (int j = 0; j < x.cols(); ++j)
    for (int i = 0; i < x.rows(); ++i)
      if (mask(i, j) != 0) sum += std::exp(x(i, j) - mx);
  double lse = mx + std::log(sum);
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (int j = 0; j < x.cols(); ++j)
    for (int i = 0; i < x.rows(); ++i)
      if (mask(i, j) != 0) out(i, j) = x(i, j) - lse;
  if (!t.needs_grad(a)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [a, mask, self](Tape& t) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.val(self);
    double gsum = 0;
    for (int j = 0; j < g.cols(); ++j)
      for (int i = 0; i < g.rows(); ++i)
        if (mask(i, j) != 0) gsum += g(i, j);
    Matrix ga = Matrix::Zero(g.rows(), g.cols());
    for (int j = 0; j < g.cols(); ++j)
      for (int i = 0; i < g.rows(); ++i)
        if (mask(i, j) != 0)
          ga(i, j) = g(i, j) - std::exp(y(i, j)) * gsum;
    t.accumulate(a, ga);
  });
}

Var bce_logits_mean(Tape& t, Var z, const Matrix& targets) {
  require(targets.rows() == t.rows(z) && targets.cols() == t.cols(z),
          "bce targets shape");
  const Matrix& zv = t.val(z);
  double total = 0;
  for (int j = 0; j < zv.cols(); ++j)
    for (int i = 0; i < zv.rows(); ++i) {
      double x = zv(i, j), y = targets(i, j);
      // softplus(x) - x*y, stable for large |x|
      total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
  double n = static_cast<double>(zv.size());
  Matrix out(1, 1);
  out(0, 0) = total / n;
  if (!t.needs_grad(z)) return t.push(std::move(out), false, nullptr);
  Var self = static_cast<Var>(t.size());
  return t.push(std::move(out), true, [z, targets, n, self](Tape& t) {
    double g = t.grad(self)(0, 0);
    const Matrix& zv = t.val(z);
    Matrix gz(zv.rows(), zv.cols());
    for (int j = 0; j < zv.cols(); ++j)
      for (int i = 0; i < zv.rows(); ++i) {
        double s = 0.5 * (1.0 + std::tanh(0.5 * zv(i, j)));  // sigmoid
        gz(i, j) = (s - targets(i, j)) * g / n;
      }
    t.accumulate(z, gz);
  });
}

}  // namespace resolv
