#pragma once

// Diagonal-Gaussian latent heads for z-space and t-space,
// reparameterized sampling and the KL divergences. Posteriors are
// parameterized by (mu, log sigma); log sigma is clamped to +-8.
//
// The t-space KL as printed in the paper mixes sigma and sigma^2
// conventions; the standard diagonal-Gaussian form is used here and is
// validated against a Monte-Carlo estimator in the tests:
//   KL(p||q) = sum_d [ log(sq/sp) + (sp^2 + (mp-mq)^2) / (2 sq^2) - 1/2 ]

#include <cmath>
#include <string>
#include <vector>

#include "vqg/nn.hpp"

namespace vqg::latentcore {

using ad::Graph;
using ad::Var;
using nn::Linear;
using nn::ParamStore;

inline constexpr double kLogSigmaMin = -8.0;
inline constexpr double kLogSigmaMax = 8.0;

// ====================================================================
//  Value-level types
// ====================================================================

struct GaussianParams {
  Tensor mu;         // 1 x Z (or B x Z batched)
  Tensor log_sigma;  // same shape

  static GaussianParams standard_normal(int rows, int z) {
    return {Tensor(rows, z), Tensor(rows, z)};
  }
};

struct LatentSample {
  Tensor value;
  Tensor noise;
};

inline void check_gaussian(const GaussianParams& p) {
  check_same_shape(p.mu, p.log_sigma, "gaussian params");
  if (!p.mu.all_finite() || !p.log_sigma.all_finite())
    throw ShapeError("gaussian params contain non-finite entries");
}

// value = mu + exp(log_sigma) * eps, elementwise
inline LatentSample reparameterize(const GaussianParams& p, const Tensor& eps) {
  check_gaussian(p);
  check_same_shape(p.mu, eps, "reparameterize");
  LatentSample s{p.mu, eps};
  for (int i = 0; i < s.value.size(); ++i)
    s.value[static_cast<std::size_t>(i)] +=
        std::exp(p.log_sigma[static_cast<std::size_t>(i)]) * eps[static_cast<std::size_t>(i)];
  return s;
}

inline LatentSample reparameterize(const GaussianParams& p, std::uint64_t seed) {
  Tensor eps(p.mu.rows, p.mu.cols);
  Rng rng(seed);
  for (auto& x : eps.d) x = rng.normal();
  return reparameterize(p, eps);
}

inline double kl_between(const GaussianParams& p, const GaussianParams& q) {
  check_gaussian(p);
  check_gaussian(q);
  check_same_shape(p.mu, q.mu, "kl_between");
  double kl = 0.0;
  for (int i = 0; i < p.mu.size(); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double lsp = p.log_sigma[k], lsq = q.log_sigma[k];
    const double dm = p.mu[k] - q.mu[k];
    kl += (lsq - lsp) + (std::exp(2.0 * lsp) + dm * dm) * std::exp(-2.0 * lsq) * 0.5 - 0.5;
  }
  return kl;
}

inline double kl_to_standard_normal(const GaussianParams& p) {
  return kl_between(p, GaussianParams::standard_normal(p.mu.rows, p.mu.cols));
}

// ====================================================================
//  Graph-level head and KL
// ====================================================================

struct GaussianVars {
  Var mu;
  Var log_sigma;
};

// One linear layer each for mu and log sigma over [h_i ; h_x].
// Non-variational heads own no log-sigma parameters; they expose the
// clamp floor so downstream sampling degenerates to the mean.
struct LatentHead {
  Linear mu;
  Linear log_sigma;
  bool variational = true;
  int z = 0;

  LatentHead() = default;
  LatentHead(ParamStore& ps, const std::string& name, int hidden, int z_dim, bool var_flag)
      : variational(var_flag), z(z_dim) {
    mu = Linear(ps, name + ".mu", 2 * hidden, z_dim);
    if (variational) log_sigma = Linear(ps, name + ".log_sigma", 2 * hidden, z_dim);
  }

  void init(Rng& rng) {
    mu.init(rng);
    if (variational) log_sigma.init(rng);
  }

  GaussianVars apply(Graph& g, Var h_i, Var h_x) const {
    Var in = g.concat_cols(h_i, h_x);
    Var m = mu.apply(g, in);
    Var ls;
    if (variational)
      ls = g.clamp(log_sigma.apply(g, in), kLogSigmaMin, kLogSigmaMax);
    else
      ls = g.input(Tensor(g.val(m).rows, z, kLogSigmaMin));
    return {m, ls};
  }
};

inline Var reparameterize(Graph& g, const GaussianVars& p, const Tensor& eps) {
  return g.add(p.mu, g.mul(g.exp(p.log_sigma), g.input(eps)));
}

// per-row KL(p||q), summed over latent dims -> Bx1
inline Var kl_between_rows(Graph& g, const GaussianVars& p, const GaussianVars& q) {
  Var t1 = g.sub(q.log_sigma, p.log_sigma);
  Var var_p = g.exp(g.scale(p.log_sigma, 2.0));
  Var dmu2 = g.square(g.sub(p.mu, q.mu));
  Var ratio = g.mul(g.add(var_p, dmu2), g.exp(g.scale(q.log_sigma, -2.0)));
  Var per_dim = g.add_scalar(g.add(t1, g.scale(ratio, 0.5)), -0.5);
  return g.sum_cols(per_dim);
}

// per-row KL(p || N(0, I)) -> Bx1
inline Var kl_to_standard_rows(Graph& g, const GaussianVars& p) {
  Var var_p = g.exp(g.scale(p.log_sigma, 2.0));
  Var per_dim =
      g.add_scalar(g.add(g.scale(p.log_sigma, -1.0), g.scale(g.add(var_p, g.square(p.mu)), 0.5)),
                   -0.5);
  return g.sum_cols(per_dim);
}

}  // namespace vqg::latentcore
