#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "resolv/rng.hpp"
#include "resolv/tape.hpp"

namespace resolv {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named dense parameters plus Adam state. Names form a slash-separated
// hierarchy ("embedder/lit_lstm/W_x") so whole modules can be counted,
// listed, or frozen by prefix.
class ParameterStore {
 public:
  // Registers a tensor with entries uniform in [-scale, scale]. Throws
  // Error on duplicate names.
  Matrix& define(const std::string& name, int rows, int cols, Rng& rng,
                 double scale);

  bool has(const std::string& name) const { return values_.count(name) > 0; }
  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;

  // Names with the given prefix, in lexicographic (deterministic) order.
  std::vector<std::string> names(const std::string& prefix = "") const;

  // Total scalar count over all tensors with the given prefix.
  int64_t count_parameters(const std::string& prefix = "") const;

  int64_t step_count() const { return step_; }

  // One Adam update over the named gradients. Tensors without a gradient
  // entry keep their value and moments. Throws Error on unknown names and
  // ShapeMismatch on misaligned gradients.
  void adam_step(const GradMap& grads, double lr, const AdamConfig& cfg = {});

  // Checkpoint container: magic, version, caller meta JSON, then named
  // tensors with shape headers and little-endian float64 payloads. Adam
  // moments ride along as "adam.m/<name>" / "adam.v/<name>" tensors and the
  // step counter lives in a reserved meta key, so resumed training matches
  // an uninterrupted run.
  void save(const std::string& path, const std::string& meta_json = "{}") const;
  static ParameterStore load(const std::string& path,
                             std::string* meta_json = nullptr);

 private:
  std::map<std::string, Matrix> values_;
  std::map<std::string, Matrix> m_, v_;  // Adam moments, lazily created
  int64_t step_ = 0;
};

// Imports a stored parameter into a tape as a gradient-tracked leaf.
inline Var param(Tape& t, const ParameterStore& s, const std::string& name) {
  return t.import_param(name, s.value(name));
}

// Scales all gradients by max_norm/norm when the global L2 norm exceeds
// max_norm. Returns the pre-clip norm.
double clip_gradients(GradMap& grads, double max_norm);

// Linear annealing to zero: lr0 * (1 - step/total), never negative.
double lr_schedule(double lr0, int64_t step, int64_t total);

// ---- layers -----------------------------------------------------------

enum class Act { kNone, kTanh, kSigmoid };

// Dense chain x -> dims[1] -> ... -> dims.back() with weights
// "<name>/W0..Wk" (dims[i] x dims[i+1], row-vector convention) and
// optional biases "<name>/b0..bk". Init scale 1/sqrt(fan_in).
void mlp_define(ParameterStore& s, const std::string& name,
                const std::vector<int>& dims, bool bias, Rng& rng);

// Applies the chain with `hidden` activation between layers and `output`
// activation after the last. Layer count is discovered from the store.
Var mlp_forward(Tape& t, const ParameterStore& s, const std::string& name,
                Var x, Act hidden, Act output = Act::kNone);

// Standard LSTM cell with packed gate order [input, forget, cell, output]:
// "<name>/W_x" (input_dim x 4d), "<name>/W_h" (d x 4d), "<name>/b" (1 x 4d).
void lstm_define(ParameterStore& s, const std::string& name, int input_dim,
                 int d, Rng& rng);

struct LstmState {
  Var h = -1;
  Var c = -1;
};

LstmState lstm_cell_step(Tape& t, const ParameterStore& s,
                         const std::string& name, Var x, LstmState state);

// ---- verification -----------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0;
  int checked = 0;
  std::string worst;  // "name(i,j)" of the worst coordinate

  bool pass(double tol) const { return checked > 0 && max_rel_err < tol; }
};

// Compares the analytic gradient of build_loss (a deterministic closure
// importing parameters from `params` and returning a 1x1 loss node) against
// central finite differences on up to samples_per_tensor random coordinates
// of every parameter the loss touches. Coordinates where both sides are
// below 1e-8 in magnitude count as exact.
GradCheckReport grad_check(ParameterStore& params,
                           const std::function<Var(Tape&)>& build_loss,
                           int samples_per_tensor, double eps, uint64_t seed);

}  // namespace resolv
