#pragma once

// Layer building blocks over the autodiff graph, parameter
// registration and the Adam optimizer.

#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vqg/autodiff.hpp"
#include "vqg/common.hpp"

namespace vqg::nn {

using ad::Graph;
using ad::Parameter;
using ad::Var;

// Owns every trainable tensor of a model; serialization and the
// optimizer walk this registry in creation order.
class ParamStore {
 public:
  Parameter& create(const std::string& name, int rows, int cols) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter>(name, rows, cols));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }

  Parameter& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return *params_[it->second];
  }

  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }

  std::size_t count() const { return params_.size(); }

  void zero_grads() {
    for (auto& p : params_) p->zero_grad();
  }

  double grad_sq_norm() const {
    double s = 0.0;
    for (auto& p : params_) s += p->grad.sq_norm();
    return s;
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

inline void init_normal(Parameter& p, Rng& rng, double std) {
  for (auto& x : p.value.d) x = rng.normal(0.0, std);
}

// fan-in scaled init for linear maps
inline void init_linear(Parameter& w, Rng& rng) {
  const double std = 1.0 / std::sqrt(static_cast<double>(w.value.rows));
  init_normal(w, rng, std);
}

// y = x W + b, x is BxIn, W InxOut, b 1xOut
struct Linear {
  Parameter* w = nullptr;
  Parameter* b = nullptr;

  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in, int out) {
    w = &ps.create(name + ".w", in, out);
    b = &ps.create(name + ".b", 1, out);
  }

  void init(Rng& rng) { init_linear(*w, rng); }

  Var apply(Graph& g, Var x) const {
    return g.add_rowvec(g.matmul(x, g.param(*w)), g.param(*b));
  }

  int out_dim() const { return w->value.cols; }
};

// Single LSTM cell. Gate blocks are packed [i f g o] along the 4H axis.
struct LstmCell {
  Parameter* wx = nullptr;  // In x 4H
  Parameter* wh = nullptr;  // H x 4H
  Parameter* b = nullptr;   // 1 x 4H
  int hidden = 0;

  LstmCell() = default;
  LstmCell(ParamStore& ps, const std::string& name, int in, int h) : hidden(h) {
    wx = &ps.create(name + ".wx", in, 4 * h);
    wh = &ps.create(name + ".wh", h, 4 * h);
    b = &ps.create(name + ".b", 1, 4 * h);
  }

  void init(Rng& rng) {
    init_linear(*wx, rng);
    init_linear(*wh, rng);
  }

  struct State {
    Var h;
    Var c;
  };

  State step(Graph& g, Var x, State s) const {
    Var pre = g.add_rowvec(g.add(g.matmul(x, g.param(*wx)), g.matmul(s.h, g.param(*wh))),
                           g.param(*b));
    Var i = g.sigmoid(g.slice_cols(pre, 0, hidden));
    Var f = g.sigmoid(g.slice_cols(pre, hidden, hidden));
    Var cand = g.tanh(g.slice_cols(pre, 2 * hidden, hidden));
    Var o = g.sigmoid(g.slice_cols(pre, 3 * hidden, hidden));
    Var c = g.add(g.mul(f, s.c), g.mul(i, cand));
    Var h = g.mul(o, g.tanh(c));
    return {h, c};
  }

  // masked step: rows with mask 0 carry the previous state through
  // unchanged, so padding cannot leak into the final state
  State step_masked(Graph& g, Var x, State s, Var mask, Var inv_mask) const {
    State nx = step(g, x, s);
    Var h = g.add(g.mul_colvec(nx.h, mask), g.mul_colvec(s.h, inv_mask));
    Var c = g.add(g.mul_colvec(nx.c, mask), g.mul_colvec(s.c, inv_mask));
    return {h, c};
  }
};

// ====================================================================
//  Adam
// ====================================================================

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // returns the pre-clip global gradient norm
  double step(ParamStore& ps, double lr, double clip_norm) {
    const double gnorm = std::sqrt(ps.grad_sq_norm());
    double scale = 1.0;
    if (clip_norm > 0.0 && gnorm > clip_norm) scale = clip_norm / gnorm;
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (auto& p : ps.all()) {
      for (int i = 0; i < p->value.size(); ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        const double gi = p->grad[k] * scale;
        p->m[k] = cfg_.beta1 * p->m[k] + (1.0 - cfg_.beta1) * gi;
        p->v[k] = cfg_.beta2 * p->v[k] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = p->m[k] / bc1;
        const double vhat = p->v[k] / bc2;
        p->value[k] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
    return gnorm;
  }

  void reset() { t_ = 0; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace vqg::nn
