#pragma once

// Small seeded models plus an independent loss used as the finite-difference
// oracle for the analytic gradients.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "prism/meta.hpp"
#include "prism/rng.hpp"
#include "prism/train.hpp"

namespace fixtures {

using prism::Matrix;
using prism::Vector;

struct Problem {
  prism::Dataset data;
  prism::Model model;
  prism::MetaConfig config;
  int window = 0;
};

inline Vector random_vector(prism::Rng &rng, int n, double scale = 1.0) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal() * scale;
  return v;
}

inline Matrix random_matrix(prism::Rng &rng, int r, int c, double scale = 1.0) {
  Matrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = rng.normal() * scale;
  return m;
}

/// A random model in prism (square P_f, learned scalars) or DME (rectangular
/// P_f, attention) form, with a dataset of `examples` samples of 1-4 tokens.
inline Problem small_problem(std::uint64_t seed, bool dme, prism::TaskKind kind, int facets, int meta_dim, int classes,
                             int examples, int window = 1) {
  prism::Rng rng(seed);
  Problem p;
  p.window = kind == prism::TaskKind::Tag ? window : 0;
  p.config.meta_dim = meta_dim;
  p.config.projection = dme ? prism::ProjectionKind::Unconstrained : prism::ProjectionKind::Orthogonal;
  p.config.combiner = dme ? prism::CombinerKind::Attention : prism::CombinerKind::LearnedScalar;
  for (int f = 0; f < facets; ++f) p.config.facet_dims.push_back(dme ? 2 + static_cast<int>(rng.index(4)) : meta_dim);

  auto &m = p.model.meta;
  for (int f = 0; f < facets; ++f) {
    m.projection.push_back(random_matrix(rng, meta_dim, p.config.facet_dims[f], 0.5));
    m.bias.push_back(random_vector(rng, meta_dim, 0.3));
  }
  m.alpha = random_vector(rng, facets, 0.7);
  m.attention = random_vector(rng, meta_dim, 0.5);
  m.attention_bias = rng.normal();
  const int input = prism::head_input_dim(p.config, kind, p.window);
  p.model.head.weight = random_matrix(rng, classes, input, 0.5);
  p.model.head.bias = random_vector(rng, classes, 0.2);

  auto &d = p.data;
  d.kind = kind;
  d.classes = classes;
  d.outside_tag = kind == prism::TaskKind::Tag ? 0 : -1;
  const int vocab = 6;
  for (int t = 0; t < vocab; ++t) {
    d.tokens.push_back("t" + std::to_string(t));
    std::vector<Vector> per;
    for (int f = 0; f < facets; ++f) per.push_back(random_vector(rng, p.config.facet_dims[f]));
    d.token_facets.push_back(per);
  }
  for (int e = 0; e < examples; ++e) {
    prism::Dataset::Sample s;
    const int len = 1 + static_cast<int>(rng.index(4));
    for (int i = 0; i < len; ++i) s.tokens.push_back(static_cast<int>(rng.index(vocab)));
    const int targets = kind == prism::TaskKind::Tag ? len : 1;
    for (int i = 0; i < targets; ++i) s.targets.push_back(static_cast<int>(rng.index(classes)));
    d.samples.push_back(s);
  }
  return p;
}

/// Meta-embedding computed directly from the combination formula.
inline Vector oracle_meta(const prism::Model &model, const prism::MetaConfig &config, const std::vector<Vector> &w) {
  const auto &m = model.meta;
  const int F = static_cast<int>(w.size());
  std::vector<Vector> t;
  for (int f = 0; f < F; ++f) t.push_back(m.projection[f] * w[f] + m.bias[f]);
  std::vector<double> weight(F);
  if (config.combiner == prism::CombinerKind::Attention) {
    double z = 0.0;
    for (int f = 0; f < F; ++f) z += std::exp(m.attention.dot(t[f]) + m.attention_bias);
    for (int f = 0; f < F; ++f) weight[f] = std::exp(m.attention.dot(t[f]) + m.attention_bias) / z;
  } else {
    for (int f = 0; f < F; ++f) weight[f] = m.alpha[f];
  }
  Vector out = Vector::Zero(config.meta_dim);
  for (int f = 0; f < F; ++f) out += weight[f] * t[f];
  return out;
}

/// Mean cross-entropy over examples (classification) or positions (tagging).
inline double oracle_loss(const Problem &p, const prism::Model &model) {
  double total = 0.0;
  std::size_t count = 0;
  const int d = p.config.meta_dim;
  auto nll = [&](const Vector &x, int gold) {
    const Vector z = model.head.weight * x + model.head.bias;
    const double mx = z.maxCoeff();
    double lse = 0.0;
    for (Eigen::Index c = 0; c < z.size(); ++c) lse += std::exp(z[c] - mx);
    return mx + std::log(lse) - z[gold];
  };
  for (const auto &s : p.data.samples) {
    std::vector<Vector> meta;
    for (int tok : s.tokens) meta.push_back(oracle_meta(model, p.config, p.data.token_facets[tok]));
    if (p.data.kind == prism::TaskKind::Classify) {
      Vector pooled = Vector::Zero(d);
      for (const auto &v : meta) pooled += v;
      pooled /= static_cast<double>(meta.size());
      total += nll(pooled, s.targets[0]);
      ++count;
    } else {
      const int n = static_cast<int>(meta.size());
      for (int i = 0; i < n; ++i) {
        Vector x = Vector::Zero(d * (2 * p.window + 1));
        for (int o = -p.window; o <= p.window; ++o) {
          if (i + o >= 0 && i + o < n) x.segment((o + p.window) * d, d) = meta[i + o];
        }
        total += nll(x, s.targets[i]);
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::vector<double> per_group;  // indexed by prism::Group
};

/// Central differences on every flattened parameter against backward() on the
/// full dataset. Relative error uses max(|a|, |n|, 1e-6) as the denominator.
inline GradientCheck check_gradients(const Problem &p, double h = 1e-5) {
  std::vector<std::size_t> all(p.data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto result = prism::backward(p.model, p.config, p.data, all, p.window);
  const auto analytic = prism::flatten(result.grads);
  const auto layout = prism::layout_of(p.model);
  auto theta = prism::flatten(p.model);
  GradientCheck out;
  out.per_group.assign(5, 0.0);
  prism::Model probe = p.model;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    // The attention parameters do not enter the scalar-weight combiner.
    if (p.config.combiner != prism::CombinerKind::Attention && layout.group[i] == prism::Group::Attention) continue;
    const double saved = theta[i];
    theta[i] = saved + h;
    prism::unflatten(theta, probe);
    const double up = oracle_loss(p, probe);
    theta[i] = saved - h;
    prism::unflatten(theta, probe);
    const double down = oracle_loss(p, probe);
    theta[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    const double rel = std::abs(numeric - analytic[i]) / denom;
    auto &g = out.per_group[static_cast<int>(layout.group[i])];
    g = std::max(g, rel);
    out.max_rel_error = std::max(out.max_rel_error, rel);
  }
  return out;
}

}  // namespace fixtures
