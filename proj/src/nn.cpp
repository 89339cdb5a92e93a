#include "resolv/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace resolv {

// ---- ParameterStore ---------------------------------------------------

Matrix& ParameterStore::define(const std::string& name, int rows, int cols,
                               Rng& rng, double scale) {
  if (values_.count(name))
    throw Error("parameter already defined: " + name);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.uniform_sym(scale);
  return values_.emplace(name, std::move(m)).first->second;
}

Matrix& ParameterStore::value(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

const Matrix& ParameterStore::value(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParameterStore::names(
    const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, m] : values_)
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
  return out;
}

int64_t ParameterStore::count_parameters(const std::string& prefix) const {
  int64_t total = 0;
  for (const auto& [name, m] : values_)
    if (name.compare(0, prefix.size(), prefix) == 0) total += m.size();
  return total;
}

void ParameterStore::adam_step(const GradMap& grads, double lr,
                               const AdamConfig& cfg) {
  ++step_;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (const auto& [name, g] : grads) {
    Matrix& theta = value(name);
    if (g.rows() != theta.rows() || g.cols() != theta.cols())
      throw ShapeMismatch("gradient shape for " + name);
    Matrix& m = m_.try_emplace(name, Matrix::Zero(theta.rows(), theta.cols()))
                    .first->second;
    Matrix& v = v_.try_emplace(name, Matrix::Zero(theta.rows(), theta.cols()))
                    .first->second;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v.array().matrix() +
        (1.0 - cfg.beta2) * g.array().square().matrix();
    theta.array() -= lr * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + cfg.eps);
  }
}

// ---- checkpoint container ----------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'S', 'L', 'V', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t get_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
uint64_t get_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void put_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  put_u32(out, static_cast<uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, static_cast<uint64_t>(m.rows()));
  put_u64(out, static_cast<uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

}  // namespace

void ParameterStore::save(const std::string& path,
                          const std::string& meta_json) const {
  // The step counter rides in a reserved meta wrapper so the caller's JSON
  // stays untouched.
  std::string meta = "{\"step\": " + std::to_string(step_) +
                     ", \"user\": " + meta_json + "}";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u64(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  uint64_t count = values_.size() + m_.size() + v_.size();
  put_u64(out, count);
  for (const auto& [name, m] : values_) put_tensor(out, name, m);
  for (const auto& [name, m] : m_) put_tensor(out, "adam.m/" + name, m);
  for (const auto& [name, m] : v_) put_tensor(out, "adam.v/" + name, m);
  if (!out) throw IoError("write failed for checkpoint " + path);
}

ParameterStore ParameterStore::load(const std::string& path,
                                    std::string* meta_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path);
  uint32_t version = get_u32(in);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " +
                  std::to_string(version));
  uint64_t meta_len = get_u64(in);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(meta_len));

  ParameterStore store;
  // Recover the step counter from the reserved wrapper.
  size_t at = meta.find("\"step\": ");
  if (at != std::string::npos)
    store.step_ = std::strtoll(meta.c_str() + at + 8, nullptr, 10);
  if (meta_json) {
    size_t u = meta.find("\"user\": ");
    *meta_json = u == std::string::npos
                     ? meta
                     : meta.substr(u + 8, meta.size() - (u + 8) - 1);
  }

  uint64_t count = get_u64(in);
  for (uint64_t k = 0; k < count; ++k) {
    uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint64_t rows = get_u64(in);
    uint64_t cols = get_u64(in);
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw IoError("truncated checkpoint " + path);
    if (name.rfind("adam.m/", 0) == 0)
      store.m_.emplace(name.substr(7), std::move(m));
    else if (name.rfind("adam.v/", 0) == 0)
      store.v_.emplace(name.substr(7), std::move(m));
    else
      store.values_.emplace(name, std::move(m));
  }
  return store;
}

// ---- optimizer helpers --------------------------------------------------

double clip_gradients(GradMap& grads, double max_norm) {
  double sq = 0;
  for (const auto& [name, g] : grads) sq += g.squaredNorm();
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    double s = max_norm / norm;
    for (auto& [name, g] : grads) g *= s;
  }
  return norm;
}

double lr_schedule(double lr0, int64_t step, int64_t total) {
  if (total <= 0) return lr0;
  double f = 1.0 - static_cast<double>(step) / static_cast<double>(total);
  return lr0 * std::max(0.0, f);
}

// ---- layers -------------------------------------------------------------

namespace {

Var activate(Tape& t, Var x, Act a) {
  switch (a) {
    case Act::kTanh:
      return tanh_op(t, x);
    case Act::kSigmoid:
      return sigmoid_op(t, x);
    case Act::kNone:
      return x;
  }
  throw Error("unreachable activation");
}

}  // namespace

void mlp_define(ParameterStore& s, const std::string& name,
                const std::vector<int>& dims, bool bias, Rng& rng) {
  if (dims.size() < 2) throw Error("mlp_define wants at least two dims");
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    double scale = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    s.define(name + "/W" + std::to_string(l), dims[l], dims[l + 1], rng,
             scale);
    if (bias)
      s.define(name + "/b" + std::to_string(l), 1, dims[l + 1], rng, scale);
  }
}

Var mlp_forward(Tape& t, const ParameterStore& s, const std::string& name,
                Var x, Act hidden, Act output) {
  Var cur = x;
  for (int l = 0;; ++l) {
    std::string w = name + "/W" + std::to_string(l);
    if (!s.has(w)) {
      if (l == 0) throw Error("mlp_forward: no layers under " + name);
      return cur;
    }
    // The previous layer turned out not to be the last: apply its hidden
    // activation before this one.
    if (l > 0) cur = activate(t, cur, hidden);
    cur = matmul(t, cur, param(t, s, w));
    std::string b = name + "/b" + std::to_string(l);
    if (s.has(b)) cur = add_row(t, cur, param(t, s, b));
    if (!s.has(name + "/W" + std::to_string(l + 1)))
      cur = activate(t, cur, output);
  }
}

void lstm_define(ParameterStore& s, const std::string& name, int input_dim,
                 int d, Rng& rng) {
  double sx = 1.0 / std::sqrt(static_cast<double>(input_dim));
  double sh = 1.0 / std::sqrt(static_cast<double>(d));
  s.define(name + "/W_x", input_dim, 4 * d, rng, sx);
  s.define(name + "/W_h", d, 4 * d, rng, sh);
  s.define(name + "/b", 1, 4 * d, rng, 0.0);
}

LstmState lstm_cell_step(Tape& t, const ParameterStore& s,
                         const std::string& name, Var x, LstmState state) {
  int d4 = static_cast<int>(s.value(name + "/b").cols());
  int d = d4 / 4;
  if (t.cols(state.h) != d || t.cols(state.c) != d)
    throw ShapeMismatch("lstm state width");
  Var z = add_row(t,
                  add(t, matmul(t, x, param(t, s, name + "/W_x")),
                      matmul(t, state.h, param(t, s, name + "/W_h"))),
                  param(t, s, name + "/b"));
  Var i = sigmoid_op(t, slice_cols(t, z, 0, d));
  Var f = sigmoid_op(t, slice_cols(t, z, d, d));
  Var g = tanh_op(t, slice_cols(t, z, 2 * d, d));
  Var o = sigmoid_op(t, slice_cols(t, z, 3 * d, d));
  Var c = add(t, cmul(t, f, state.c), cmul(t, i, g));
  Var h = cmul(t, o, tanh_op(t, c));
  return LstmState{h, c};
}

// ---- gradient verification ----------------------------------------------

GradCheckReport grad_check(ParameterStore& params,
                           const std::function<Var(Tape&)>& build_loss,
                           int samples_per_tensor, double eps, uint64_t seed) {
  GradMap analytic;
  {
    Tape t;
    Var loss = build_loss(t);
    t.backward(loss);
    analytic = t.param_grads();
  }
  auto eval = [&]() {
    Tape t(false);
    return t.val(build_loss(t))(0, 0);
  };

  GradCheckReport report;
  Rng rng(seed);
  for (const auto& [name, grad] : analytic) {
    Matrix& theta = params.value(name);
    int n = static_cast<int>(theta.size());
    int k = std::min(samples_per_tensor, n);
    for (int s = 0; s < k; ++s) {
      int flat = (n == k) ? s : rng.uniform_int(0, n - 1);
      int i = flat % static_cast<int>(theta.rows());
      int j = flat / static_cast<int>(theta.rows());
      double orig = theta(i, j);
      theta(i, j) = orig + eps;
      double up = eval();
      theta(i, j) = orig - eps;
      double down = eval();
      theta(i, j) = orig;
      double numeric = (up - down) / (2 * eps);
      double a = grad(i, j);
      ++report.checked;
      if (std::abs(a) < 1e-8 && std::abs(numeric) < 1e-8) continue;
      double rel = std::abs(a - numeric) / std::max(std::abs(a),
                                                    std::abs(numeric));
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = name + "(" + std::to_string(i) + "," +
                       std::to_string(j) + ")";
      }
    }
  }
  return report;
}

}  // namespace resolv
