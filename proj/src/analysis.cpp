#include "prism/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "prism/error.hpp"
#include "prism/rng.hpp"
#include "prism/text.hpp"

namespace prism {

LabeledPointSet stack_transformed(const MetaParams &params, const MetaConfig &config, std::span<const Facet> facets,
                                  std::span<const std::string> sample_tokens) {
  validate(params, config);
  const int F = config.facet_count();
  if (static_cast<int>(facets.size()) != F) throw Error(Errc::DimensionMismatch, "facet count does not match config");
  LabeledPointSet out;
  out.points.resize(static_cast<Eigen::Index>(sample_tokens.size()) * F, config.meta_dim);
  out.labels.reserve(out.points.rows());
  Eigen::Index row = 0;
  for (int f = 0; f < F; ++f) {
    for (const auto &tok : sample_tokens) {
      const Vector w = facets[f].lookup(tok).vector;
      out.points.row(row++) = (params.projection[f] * w + params.bias[f]).transpose();
      out.labels.push_back(f);
    }
  }
  return out;
}

std::vector<std::string> shared_sample_tokens(std::span<const Facet> facets, std::size_t count) {
  if (facets.empty()) throw Error(Errc::NoFacets, "sampling needs at least one facet");
  std::vector<std::string> out;
  for (const auto &tok : facets.front().vocab()) {
    if (out.size() >= count) break;
    if (std::all_of(facets.begin(), facets.end(), [&](const Facet &f) { return f.contains(tok); })) out.push_back(tok);
  }
  return out;
}

namespace {

std::size_t distinct_rows(const RowMatrix &points) {
  std::set<std::vector<double>> seen;
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    seen.emplace(points.row(r).data(), points.row(r).data() + points.cols());
  }
  return seen.size();
}

double inertia_of(const RowMatrix &points, const RowMatrix &centroids, const std::vector<int> &labels) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < points.rows(); ++r) total += (points.row(r) - centroids.row(labels[r])).squaredNorm();
  return total;
}

// Nearest centroid; the current label wins ties so assignments only change on
// strict improvement.
bool assign(const RowMatrix &points, const RowMatrix &centroids, std::vector<int> &labels) {
  bool changed = false;
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    int best = labels[r];
    double best_d = best >= 0 ? (points.row(r) - centroids.row(best)).squaredNorm()
                              : std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (points.row(r) - centroids.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    if (best != labels[r]) {
      labels[r] = best;
      changed = true;
    }
  }
  return changed;
}

void update_centroids(const RowMatrix &points, RowMatrix &centroids, std::vector<int> &labels) {
  const auto k = centroids.rows();
  for (;;) {
    RowMatrix sums = RowMatrix::Zero(k, points.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
      sums.row(labels[r]) += points.row(r);
      ++counts[labels[r]];
    }
    const auto empty = std::find(counts.begin(), counts.end(), std::size_t{0});
    if (empty == counts.end()) {
      for (Eigen::Index c = 0; c < k; ++c) centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
      return;
    }
    // Re-seed the empty cluster with the point farthest from its centroid.
    for (Eigen::Index c = 0; c < k; ++c)
      if (counts[c] > 0) centroids.row(c) = sums.row(c) / static_cast<double>(counts[c]);
    Eigen::Index far = 0;
    double far_d = -1.0;
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
      const double d = (points.row(r) - centroids.row(labels[r])).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = r;
      }
    }
    const auto target = static_cast<int>(empty - counts.begin());
    labels[far] = target;
    centroids.row(target) = points.row(far);
  }
}

}  // namespace

KMeansResult kmeans(const RowMatrix &points, int k, std::uint64_t seed, int max_iters) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k <= 0 || static_cast<std::size_t>(k) > n) {
    throw Error(Errc::DegenerateInput, "k must be in [1, N]");
  }
  if (distinct_rows(points) < static_cast<std::size_t>(k)) {
    throw Error(Errc::DegenerateInput, "k exceeds the number of distinct points");
  }
  Rng rng(seed);
  KMeansResult res;
  res.centroids.resize(k, points.cols());

  // k-means++ seeding
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  auto add_center = [&](int c, Eigen::Index from) {
    res.centroids.row(c) = points.row(from);
    for (std::size_t r = 0; r < n; ++r) {
      d2[r] = std::min(d2[r], (points.row(static_cast<Eigen::Index>(r)) - res.centroids.row(c)).squaredNorm());
    }
  };
  add_center(0, static_cast<Eigen::Index>(rng.index(n)));
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    const double target = rng.uniform() * total;
    double run = 0.0;
    std::size_t pick = n;
    for (std::size_t r = 0; r < n; ++r) {
      if (d2[r] <= 0.0) continue;
      run += d2[r];
      pick = r;
      if (run > target) break;
    }
    add_center(c, static_cast<Eigen::Index>(pick));
  }

  res.labels.assign(n, -1);
  assign(points, res.centroids, res.labels);
  while (res.iterations < max_iters) {
    ++res.iterations;
    update_centroids(points, res.centroids, res.labels);
    res.inertia.push_back(inertia_of(points, res.centroids, res.labels));
    if (!assign(points, res.centroids, res.labels)) break;
  }
  return res;
}

namespace {

struct Contingency {
  std::vector<std::size_t> rows, cols;  // marginals
  std::map<std::pair<int, int>, std::size_t> cells;
  std::size_t n = 0;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error(Errc::LengthMismatch, "label vectors differ in length");
  Contingency t;
  t.n = a.size();
  std::map<int, int> ia, ib;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [ra, na] = ia.emplace(a[i], static_cast<int>(ia.size()));
    auto [rb, nb] = ib.emplace(b[i], static_cast<int>(ib.size()));
    if (na) t.rows.push_back(0);
    if (nb) t.cols.push_back(0);
    ++t.rows[ra->second];
    ++t.cols[rb->second];
    ++t.cells[{ra->second, rb->second}];
  }
  return t;
}

double entropy_of(const std::vector<std::size_t> &counts, std::size_t n) {
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log(p);
  }
  return h;
}

double mi_of(const Contingency &t) {
  const double n = static_cast<double>(t.n);
  double mi = 0.0;
  for (const auto &[ij, c] : t.cells) {
    const double nij = static_cast<double>(c);
    mi += nij / n * std::log(n * nij / (static_cast<double>(t.rows[ij.first]) * static_cast<double>(t.cols[ij.second])));
  }
  return mi;
}

double emi_of(const Contingency &t) {
  const auto n = static_cast<long long>(t.n);
  const double nd = static_cast<double>(n);
  const double lg_n = std::lgamma(nd + 1.0);
  double emi = 0.0;
  for (auto ai : t.rows) {
    for (auto bj : t.cols) {
      const auto a = static_cast<long long>(ai);
      const auto b = static_cast<long long>(bj);
      const double base = std::lgamma(a + 1.0) + std::lgamma(b + 1.0) + std::lgamma(nd - a + 1.0) +
                          std::lgamma(nd - b + 1.0) - lg_n;
      for (long long nij = std::max(1LL, a + b - n); nij <= std::min(a, b); ++nij) {
        const double x = static_cast<double>(nij);
        const double log_p = base - std::lgamma(x + 1.0) - std::lgamma(a - x + 1.0) - std::lgamma(b - x + 1.0) -
                             std::lgamma(nd - a - b + x + 1.0);
        emi += x / nd * std::log(nd * x / (static_cast<double>(a) * static_cast<double>(b))) * std::exp(log_p);
      }
    }
  }
  return emi;
}

bool same_partition(const Contingency &t) {
  return t.cells.size() == t.rows.size() && t.cells.size() == t.cols.size();
}

}  // namespace

double mutual_information(std::span<const int> a, std::span<const int> b) { return mi_of(contingency(a, b)); }

double entropy(std::span<const int> labels) {
  const auto t = contingency(labels, labels);
  return entropy_of(t.rows, t.n);
}

double expected_mutual_information(std::span<const int> a, std::span<const int> b) {
  return emi_of(contingency(a, b));
}

double ami(std::span<const int> a, std::span<const int> b) {
  const auto t = contingency(a, b);
  if (t.n < 2) throw Error(Errc::DegenerateInput, "AMI needs at least two points");
  if (same_partition(t)) return 1.0;
  const double mi = mi_of(t);
  const double emi = emi_of(t);
  const double mean_h = 0.5 * (entropy_of(t.rows, t.n) + entropy_of(t.cols, t.n));
  return (mi - emi) / (mean_h - emi);
}

ClusterReport separability_report(const LabeledPointSet &stack, std::span<const std::uint64_t> seeds, int max_iters) {
  ClusterReport report;
  report.k = static_cast<int>(std::set<int>(stack.labels.begin(), stack.labels.end()).size());
  if (report.k < 2) throw Error(Errc::DegenerateInput, "separability needs at least two facets");
  for (auto seed : seeds) {
    const auto km = kmeans(stack.points, report.k, seed, max_iters);
    report.seeds.push_back(seed);
    report.scores.push_back(ami(km.labels, stack.labels));
  }
  if (!report.scores.empty()) {
    const double n = static_cast<double>(report.scores.size());
    report.mean = std::accumulate(report.scores.begin(), report.scores.end(), 0.0) / n;
    double var = 0.0;
    for (double s : report.scores) var += (s - report.mean) * (s - report.mean);
    report.stddev = std::sqrt(var / n);
  }
  return report;
}

ClusterReport separability_report(const MetaParams &params, const MetaConfig &config, std::span<const Facet> facets,
                                  std::span<const std::string> sample_tokens, std::span<const std::uint64_t> seeds) {
  if (facets.size() < 2) throw Error(Errc::DegenerateInput, "separability needs at least two facets");
  return separability_report(stack_transformed(params, config, facets, sample_tokens), seeds);
}

double dot_preservation(const Matrix &p, std::span<const Vector> vectors) {
  if (p.rows() != p.cols()) throw Error(Errc::InvalidDimensions, "dot preservation needs a square matrix");
  std::vector<Vector> mapped;
  mapped.reserve(vectors.size());
  for (const auto &v : vectors) mapped.push_back(p * v);
  double worst = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i)
    for (std::size_t j = i; j < vectors.size(); ++j)
      worst = std::max(worst, std::abs(mapped[i].dot(mapped[j]) - vectors[i].dot(vectors[j])));
  return worst;
}

std::vector<Neighbor> nearest_neighbors(const MetaTable &table, const std::string &token, std::size_t n) {
  auto it = table.vocab.index.find(token);
  if (it == table.vocab.index.end()) throw Error(Errc::UnknownToken, "'" + token + "' not in table");
  const auto q = static_cast<Eigen::Index>(it->second);
  const double qn = table.rows.row(q).norm();
  std::vector<Neighbor> all;
  all.reserve(table.vocab.size());
  for (Eigen::Index r = 0; r < table.rows.rows(); ++r) {
    if (r == q) continue;
    const double rn = table.rows.row(r).norm();
    const double sim = (qn > 0.0 && rn > 0.0) ? table.rows.row(q).dot(table.rows.row(r)) / (qn * rn) : 0.0;
    all.push_back({table.vocab.tokens[static_cast<std::size_t>(r)], sim});
  }
  std::stable_sort(all.begin(), all.end(), [](const Neighbor &x, const Neighbor &y) { return x.similarity > y.similarity; });
  if (all.size() > n) all.resize(n);
  return all;
}

void write_points_csv(std::ostream &out, const LabeledPointSet &stack, std::span<const int> clusters) {
  for (Eigen::Index c = 0; c < stack.points.cols(); ++c) out << 'x' << (c + 1) << ',';
  out << "facet,cluster\n";
  for (Eigen::Index r = 0; r < stack.points.rows(); ++r) {
    for (Eigen::Index c = 0; c < stack.points.cols(); ++c) out << text::fmt(stack.points(r, c)) << ',';
    out << stack.labels[r] << ',' << (static_cast<std::size_t>(r) < clusters.size() ? clusters[r] : -1) << '\n';
  }
}

void write_separability_csv(std::ostream &out, const ClusterReport &report) {
  out << "seed,ami\n";
  for (std::size_t i = 0; i < report.scores.size(); ++i) out << report.seeds[i] << ',' << text::fmt(report.scores[i]) << '\n';
  out << "mean," << text::fmt(report.mean) << '\n';
  out << "stddev," << text::fmt(report.stddev) << '\n';
  out << "k," << report.k << '\n';
}

}  // namespace prism
