#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "prism/facet.hpp"
#include "prism/meta.hpp"

namespace prism {

/// Transformed facet vectors stacked with the facet each one came from.
struct LabeledPointSet {
  RowMatrix points;         // N x d'
  std::vector<int> labels;  // facet index per point
};

/// For every sample token and facet f, the point P_f w_f + b_f labelled f.
/// Points are grouped by facet, tokens in the given order.
LabeledPointSet stack_transformed(const MetaParams &params, const MetaConfig &config, std::span<const Facet> facets,
                                  std::span<const std::string> sample_tokens);

/// Up to `count` tokens present in every facet, in the first facet's row
/// order (text embedding files list tokens by descending frequency).
std::vector<std::string> shared_sample_tokens(std::span<const Facet> facets, std::size_t count);

struct KMeansResult {
  std::vector<int> labels;
  RowMatrix centroids;
  std::vector<double> inertia;  // after each Lloyd iteration
  int iterations = 0;
};

/// Lloyd's algorithm from a seeded k-means++ start. Empty clusters are
/// re-seeded with the point farthest from its current centroid.
KMeansResult kmeans(const RowMatrix &points, int k, std::uint64_t seed, int max_iters = 300);

double mutual_information(std::span<const int> a, std::span<const int> b);
double entropy(std::span<const int> labels);

/// E[MI] under the permutation (hypergeometric) model, exact summation.
double expected_mutual_information(std::span<const int> a, std::span<const int> b);

/// Adjusted mutual information with arithmetic-mean normalisation. Identical
/// partitions (up to relabelling) score 1; so do two trivial partitions.
double ami(std::span<const int> a, std::span<const int> b);

struct ClusterReport {
  std::vector<std::uint64_t> seeds;
  std::vector<double> scores;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  int k = 0;
};

ClusterReport separability_report(const LabeledPointSet &stack, std::span<const std::uint64_t> seeds,
                                  int max_iters = 300);

ClusterReport separability_report(const MetaParams &params, const MetaConfig &config, std::span<const Facet> facets,
                                  std::span<const std::string> sample_tokens, std::span<const std::uint64_t> seeds);

/// max over all pairs (u, v) of |<Pu, Pv> - <u, v>|, including u == v.
double dot_preservation(const Matrix &p, std::span<const Vector> vectors);

struct Neighbor {
  std::string token;
  double similarity = 0.0;
};

/// Top-n rows by cosine similarity, excluding the query; ties keep vocabulary
/// order. Zero rows have similarity 0.
std::vector<Neighbor> nearest_neighbors(const MetaTable &table, const std::string &token, std::size_t n);

void write_points_csv(std::ostream &out, const LabeledPointSet &stack, std::span<const int> clusters);
void write_separability_csv(std::ostream &out, const ClusterReport &report);

}  // namespace prism
