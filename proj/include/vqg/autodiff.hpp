#pragma once

// Reverse-mode autodiff on a per-batch tape. Forward values are
// computed eagerly; each op pushes a closure that pulls the node's
// gradient back into its parents. The tape is rebuilt every step,
// which keeps gradient routing explicit: a subgraph built on detached
// inputs simply has no path back to the encoder parameters.

#include <functional>
#include <string>
#include <vector>

#include "vqg/tensor.hpp"

namespace vqg::ad {

// Trainable tensor with accumulated gradient and Adam moments.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;

  Parameter() = default;
  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols), m(rows, cols), v(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Graph {
 public:
  // ---- leaves ----

  Var input(Tensor v) { return push(std::move(v), false, nullptr); }

  Var param(Parameter& p) { return push(p.value, true, &p); }

  Var detach(Var a) { return input(val(a)); }

  // ---- accessors ----

  const Tensor& val(Var a) const { return nodes_[static_cast<std::size_t>(a.id)].val; }

  const Tensor& grad(Var a) const { return nodes_[static_cast<std::size_t>(a.id)].grad; }

  double scalar(Var a) const {
    const Tensor& t = val(a);
    if (t.size() != 1) throw ShapeError("scalar: node is " + t.shape_str());
    return t.d[0];
  }

  std::size_t size() const { return nodes_.size(); }

  // ---- ops ----

  Var matmul(Var a, Var b) {
    Tensor out = matmul_values(val(a), val(b));
    Var r = push(std::move(out), needs(a) || needs(b), nullptr);
    if (needs(a) || needs(b))
      set_back(r, [this, a, b, r](const Tensor& g) {
        if (needs(a)) add_mul_bt(grad_ref(a), g, val(b));   // dA += G * B^T
        if (needs(b)) add_at_mul(grad_ref(b), val(a), g);   // dB += A^T * G
      });
    return r;
  }

  Var add(Var a, Var b) {
    check_same_shape(val(a), val(b), "add");
    Tensor out = val(a);
    const Tensor& bv = val(b);
    for (int i = 0; i < out.size(); ++i) out[static_cast<std::size_t>(i)] += bv[static_cast<std::size_t>(i)];
    Var r = push(std::move(out), needs(a) || needs(b), nullptr);
    if (needs(a) || needs(b))
      set_back(r, [this, a, b](const Tensor& g) {
        if (needs(a)) accumulate(grad_ref(a), g);
        if (needs(b)) accumulate(grad_ref(b), g);
      });
    return r;
  }

  Var sub(Var a, Var b) {
    check_same_shape(val(a), val(b), "sub");
    Tensor out = val(a);
    const Tensor& bv = val(b);
    for (int i = 0; i < out.size(); ++i) out[static_cast<std::size_t>(i)] -= bv[static_cast<std::size_t>(i)];
    Var r = push(std::move(out), needs(a) || needs(b), nullptr);
    if (needs(a) || needs(b))
      set_back(r, [this, a, b](const Tensor& g) {
        if (needs(a)) accumulate(grad_ref(a), g);
        if (needs(b)) {
          Tensor& gb = grad_ref(b);
          for (int i = 0; i < g.size(); ++i) gb[static_cast<std::size_t>(i)] -= g[static_cast<std::size_t>(i)];
        }
      });
    return r;
  }

  Var mul(Var a, Var b) {
    check_same_shape(val(a), val(b), "mul");
    Tensor out = val(a);
    const Tensor& bv = val(b);
    for (int i = 0; i < out.size(); ++i) out[static_cast<std::size_t>(i)] *= bv[static_cast<std::size_t>(i)];
    Var r = push(std::move(out), needs(a) || needs(b), nullptr);
    if (needs(a) || needs(b))
      set_back(r, [this, a, b](const Tensor& g) {
        if (needs(a)) {
          Tensor& ga = grad_ref(a);
          const Tensor& bv2 = val(b);
          for (int i = 0; i < g.size(); ++i)
            ga[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)] * bv2[static_cast<std::size_t>(i)];
        }
        if (needs(b)) {
          Tensor& gb = grad_ref(b);
          const Tensor& av = val(a);
          for (int i = 0; i < g.size(); ++i)
            gb[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)] * av[static_cast<std::size_t>(i)];
        }
      });
    return r;
  }

  // a (BxN) + b (1xN) broadcast over rows; the bias-add
  Var add_rowvec(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (bv.rows != 1 || bv.cols != av.cols)
      throw ShapeError("add_rowvec: " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out = av;
    for (int i = 0; i < out.rows; ++i)
      for (int j = 0; j < out.cols; ++j) out.at(i, j) += bv.at(0, j);
    Var r = push(std::move(out), needs(a) || needs(b), nullptr);
    if (needs(a) || needs(b))
      set_back(r, [this, a, b](const Tensor& g) {
        if (needs(a)) accumulate(grad_ref(a), g);
        if (needs(b)) {
          Tensor& gb = grad_ref(b);
          for (int i = 0; i < g.rows; ++i)
            for (int j = 0; j < g.cols; ++j) gb.at(0, j) += g.at(i, j);
        }
      });
    return r;
  }

  // a (BxN) * m (Bx1) broadcast over columns; used for sequence masks
  Var mul_colvec(Var a, Var m) {
    const Tensor& av = val(a);
    const Tensor& mv = val(m);
    if (mv.cols != 1 || mv.rows != av.rows)
      throw ShapeError("mul_colvec: " + av.shape_str() + " vs " + mv.shape_str());
    Tensor out = av;
    for (int i = 0; i < out.rows; ++i) {
      const double s = mv.at(i, 0);
      for (int j = 0; j < out.cols; ++j) out.at(i, j) *= s;
    }
    Var r = push(std::move(out), needs(a) || needs(m), nullptr);
    if (needs(a) || needs(m))
      set_back(r, [this, a, m](const Tensor& g) {
        if (needs(a)) {
          Tensor& ga = grad_ref(a);
          const Tensor& mv2 = val(m);
          for (int i = 0; i < g.rows; ++i) {
            const double s = mv2.at(i, 0);
            for (int j = 0; j < g.cols; ++j) ga.at(i, j) += g.at(i, j) * s;
          }
        }
        if (needs(m)) {
          Tensor& gm = grad_ref(m);
          const Tensor& av2 = val(a);
          for (int i = 0; i < g.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < g.cols; ++j) s += g.at(i, j) * av2.at(i, j);
            gm.at(i, 0) += s;
          }
        }
      });
    return r;
  }

  Var scale(Var a, double s) {
    Tensor out = val(a);
    for (auto& x : out.d) x *= s;
    Var r = push(std::move(out), needs(a), nullptr);
    if (needs(a))
      set_back(r, [this, a, s](const Tensor& g) {
        Tensor& ga = grad_ref(a);
        for (int i = 0; i < g.size(); ++i) ga[static_cast<std::size_t>(i)] += s * g[static_cast<std::size_t>(i)];
      });
    return r;
  }

  Var add_scalar(Var a, double s) {
    Tensor out = val(a);
    for (auto& x : out.d) x += s;
    Var r = push(std::move(out), needs(a), nullptr);
    if (needs(a)) set_back(r, [this, a](const Tensor& g) { accumulate(grad_ref(a), g); });
    return r;
  }

  Var tanh(Var a) {
    Tensor out = val(a);
    for (auto& x : out.d) x = std::tanh(x);
    Var r = push(std::move(out), needs(a), nullptr);
    if (needs(a))
      set_back(r, [this, a, r](const Tensor& g) {
        Tensor& ga = grad_ref(a);
        const Tensor& y = val(r);
        for (int i = 0; i < g.size(); ++i)
          ga[static_cast<std::size_t>(i)] +=
              g[static_cast<std::size_t>(i)] * (1.0 - y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)]);
      });
    return r;
  }

  Var sigmoid(Var a) {
    Tensor out = val(a);
    for (auto& x : out.d) x = 1.0 / (1.0 + std::exp(-x));
    Var r = push(std::move(out), needs(a), nullptr);
    if (needs(a))
      set_back(r, [this, a, r](const Tensor& g) {
        Tensor& ga = grad_ref(a);
        const Tensor& y = val(r);
        for (int i = 0; i < g.size(); ++i) {
          const double yi = y[static_cast<std::size_t>(i)];
          ga[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)] * yi * (1.0 - yi);
        }
      });
    return r;
  }

  Var exp(Var a) {
    Tensor out = val(a);
    for (auto& x : out.d) x = std::exp(x);
    Var r = push(std::move(out), needs(a), nullptr);
    if (needs(a))
      set_back(r, [this, a, r](const Tensor& g) {
        Tensor& ga = grad_ref(a);
        const Tensor& y = val(r);
        for (int i = 0; i < g.size(); ++i)
          ga[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
      });
    return r;
  }

  Var square(Var a) {
    Tensor out = val(a);
    for (auto& x : out.d) x *= x;
    Var r = push(std::move(out), needs(a), nullptr);
    if (needs(a))
      set_back(r, [this, a](const Tensor& g) {
        Tensor& ga = grad_ref(a);
        const Tensor& x = val(a);
        for (int i = 0; i < g.size(); ++i)
          ga[static_cast<std::size_t>(i)] += 2.0 * g[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
      });
    return r;
  }

  // zero gradient where the clamp binds
  Var clamp(Var a, double lo, double hi) {
    Tensor out = val(a);
    for (auto& x : out.d) x = std::min(hi, std::max(lo, x));
    Var r = push(std::move(out), needs(a), nullptr);
    if (needs(a))
      set_back(r, [this, a, lo, hi](const Tensor& g) {
        Tensor& ga = grad_ref(a);
        const Tensor& x = val(a);
        for (int i = 0; i < g.size(); ++i) {
          const double xi = x[static_cast<std::size_t>(i)];
          if (xi >= lo && xi <= hi) ga[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i)];
        }
      });
    return r;
  }

  Var concat_cols(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (av.rows != bv.rows)
      throw ShapeError("concat_cols: " + av.shape_str() + " vs " + bv.shape_str());
    Tensor out(av.rows, av.cols + bv.cols);
    for (int i = 0; i < av.rows; ++i) {
      for (int j = 0; j < av.cols; ++j) out.at(i, j) = av.at(i, j);
      for (int j = 0; j < bv.cols; ++j) out.at(i, av.cols + j) = bv.at(i, j);
    }
    Var r = push(std::move(out), needs(a) || needs(b), nullptr);
    if (needs(a) || needs(b))
      set_back(r, [this, a, b](const Tensor& g) {
        const int ac = val(a).cols;
        if (needs(a)) {
          Tensor& ga = grad_ref(a);
          for (int i = 0; i < ga.rows; ++i)
            for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += g.at(i, j);
        }
        if (needs(b)) {
          Tensor& gb = grad_ref(b);
          for (int i = 0; i < gb.rows; ++i)
            for (int j = 0; j < gb.cols; ++j) gb.at(i, j) += g.at(i, ac + j);
        }
      });
    return r;
  }

  Var slice_cols(Var a, int c0, int len) {
    const Tensor& av = val(a);
    if (c0 < 0 || c0 + len > av.cols) throw ShapeError("slice_cols: out of range");
    Tensor out(av.rows, len);
    for (int i = 0; i < av.rows; ++i)
      for (int j = 0; j < len; ++j) out.at(i, j) = av.at(i, c0 + j);
    Var r = push(std::move(out), needs(a), nullptr);
    if (needs(a))
      set_back(r, [this, a, c0](const Tensor& g) {
        Tensor& ga = grad_ref(a);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) ga.at(i, c0 + j) += g.at(i, j);
      });
    return r;
  }

  // row gather from an embedding table (VxH), ids length B -> BxH
  Var embed(Var table, const std::vector<int>& ids) {
    const Tensor& tv = val(table);
    Tensor out(static_cast<int>(ids.size()), tv.cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= tv.rows) throw DataError("embed: id out of range");
      for (int j = 0; j < tv.cols; ++j) out.at(static_cast<int>(i), j) = tv.at(ids[i], j);
    }
    Var r = push(std::move(out), needs(table), nullptr);
    if (needs(table))
      set_back(r, [this, table, ids](const Tensor& g) {
        Tensor& gt = grad_ref(table);
        for (std::size_t i = 0; i < ids.size(); ++i)
          for (int j = 0; j < g.cols; ++j) gt.at(ids[i], j) += g.at(static_cast<int>(i), j);
      });
    return r;
  }

  // per-row sum -> Bx1
  Var sum_cols(Var a) {
    const Tensor& av = val(a);
    Tensor out(av.rows, 1);
    for (int i = 0; i < av.rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < av.cols; ++j) s += av.at(i, j);
      out.at(i, 0) = s;
    }
    Var r = push(std::move(out), needs(a), nullptr);
    if (needs(a))
      set_back(r, [this, a](const Tensor& g) {
        Tensor& ga = grad_ref(a);
        for (int i = 0; i < ga.rows; ++i)
          for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += g.at(i, 0);
      });
    return r;
  }

  Var sum_all(Var a) {
    const Tensor& av = val(a);
    Tensor out(1, 1);
    double s = 0.0;
    for (double x : av.d) s += x;
    out.d[0] = s;
    Var r = push(std::move(out), needs(a), nullptr);
    if (needs(a))
      set_back(r, [this, a](const Tensor& g) {
        Tensor& ga = grad_ref(a);
        const double gs = g.d[0];
        for (auto& x : ga.d) x += gs;
      });
    return r;
  }

  Var mean_all(Var a) {
    const int n = val(a).size();
    return scale(sum_all(a), 1.0 / n);
  }

  // -log softmax(logits)[target] per row -> Bx1. Fused so the backward
  // is the numerically clean (softmax - onehot).
  Var xent_rows(Var logits, const std::vector<int>& targets) {
    const Tensor& lv = val(logits);
    if (static_cast<int>(targets.size()) != lv.rows)
      throw ShapeError("xent_rows: targets length vs logits rows");
    Tensor out(lv.rows, 1);
    for (int i = 0; i < lv.rows; ++i) {
      if (targets[static_cast<std::size_t>(i)] < 0 || targets[static_cast<std::size_t>(i)] >= lv.cols)
        throw DataError("xent_rows: target id out of range");
      double mx = lv.at(i, 0);
      for (int j = 1; j < lv.cols; ++j) mx = std::max(mx, lv.at(i, j));
      double z = 0.0;
      for (int j = 0; j < lv.cols; ++j) z += std::exp(lv.at(i, j) - mx);
      const double logz = std::log(z) + mx;
      out.at(i, 0) = logz - lv.at(i, targets[static_cast<std::size_t>(i)]);
    }
    Var r = push(std::move(out), needs(logits), nullptr);
    if (needs(logits))
      set_back(r, [this, logits, targets](const Tensor& g) {
        Tensor& gl = grad_ref(logits);
        const Tensor& lv2 = val(logits);
        for (int i = 0; i < lv2.rows; ++i) {
          const double gi = g.at(i, 0);
          if (gi == 0.0) continue;
          double mx = lv2.at(i, 0);
          for (int j = 1; j < lv2.cols; ++j) mx = std::max(mx, lv2.at(i, j));
          double z = 0.0;
          for (int j = 0; j < lv2.cols; ++j) z += std::exp(lv2.at(i, j) - mx);
          for (int j = 0; j < lv2.cols; ++j)
            gl.at(i, j) += gi * (std::exp(lv2.at(i, j) - mx) / z -
                                 (j == targets[static_cast<std::size_t>(i)] ? 1.0 : 0.0));
        }
      });
    return r;
  }

  // ---- backward ----

  void backward(Var root) {
    Node& rn = nodes_[static_cast<std::size_t>(root.id)];
    if (rn.val.size() != 1) throw ShapeError("backward: root must be scalar");
    touch_grad(root.id);
    nodes_[static_cast<std::size_t>(root.id)].grad.d[0] = 1.0;
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.grad.size() == 0) continue;
      if (n.back) n.back(n.grad);
      if (n.bound) {
        Tensor& pg = n.bound->grad;
        for (int k = 0; k < n.grad.size(); ++k) pg[static_cast<std::size_t>(k)] += n.grad[static_cast<std::size_t>(k)];
      }
    }
  }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    std::function<void(const Tensor&)> back;
    bool needs_grad = false;
    Parameter* bound = nullptr;
  };

  std::vector<Node> nodes_;

  Var push(Tensor v, bool ng, Parameter* bound) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = ng;
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  bool needs(Var a) const { return nodes_[static_cast<std::size_t>(a.id)].needs_grad; }

  void set_back(Var r, std::function<void(const Tensor&)> f) {
    nodes_[static_cast<std::size_t>(r.id)].back = std::move(f);
  }

  void touch_grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Tensor(n.val.rows, n.val.cols);
  }

  Tensor& grad_ref(Var a) {
    touch_grad(a.id);
    return nodes_[static_cast<std::size_t>(a.id)].grad;
  }

  static void accumulate(Tensor& dst, const Tensor& src) {
    for (int i = 0; i < dst.size(); ++i) dst[static_cast<std::size_t>(i)] += src[static_cast<std::size_t>(i)];
  }
};

}  // namespace vqg::ad
