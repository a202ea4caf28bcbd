#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace prism {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FacetFormat {
  Plain,          // "token v1 ... vd" per line
  CountedHeader,  // "|V| d" header line, then plain records
  Auto,           // header detected when the first line is two integers
};

struct LookupResult {
  Vector vector;
  bool oov = false;
};

/// One source embedding set. Immutable after construction; the centroid is
/// computed once and cached.
class Facet {
 public:
  Facet(std::string name, std::vector<std::string> vocab, RowMatrix table);

  const std::string &name() const { return name_; }
  int dim() const { return static_cast<int>(table_.cols()); }
  std::size_t size() const { return vocab_.size(); }
  const std::vector<std::string> &vocab() const { return vocab_; }
  const RowMatrix &table() const { return table_; }
  const Vector &centroid() const { return centroid_; }

  bool contains(const std::string &token) const;
  /// Row index of `token`, or -1.
  std::ptrdiff_t find(const std::string &token) const;

  /// The token's row, or the facet centroid when the token is out of vocabulary.
  LookupResult lookup(const std::string &token) const;

 private:
  std::string name_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  RowMatrix table_;
  Vector centroid_;
};

/// Component-wise mean of the rows. Throws EmptyFacet on an empty table.
Vector centroid(const RowMatrix &table);

Facet parse_facet(std::istream &in, std::string name, FacetFormat format = FacetFormat::Auto);
Facet load_facet(const std::filesystem::path &path, FacetFormat format = FacetFormat::Auto,
                 std::string name = {});

/// Writes the counted-header text format with round-trip precision.
void write_facet(std::ostream &out, const std::vector<std::string> &vocab, const RowMatrix &table);

/// FNV-1a over the vocabulary and the raw bytes of the table.
std::uint64_t checksum(const Facet &facet);

struct VocabUnion {
  std::vector<std::string> tokens;              // byte-lexicographic, unique
  std::vector<std::vector<bool>> membership;    // membership[token][facet]
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return tokens.size(); }
  std::size_t facet_count() const { return membership.empty() ? 0 : membership.front().size(); }
};

VocabUnion union_vocab(std::span<const Facet> facets);

Facet zero_pad(const Facet &facet, int target_dim);

struct PcaOptions {
  int max_iters = 1000;
  double tol = 1e-10;
  std::uint64_t seed = 0x5eed;
};

struct PcaResult {
  Facet facet;
  bool degenerate_rank = false;  // fewer than target_dim eigenvalues above 1e-12
  int iterations = 0;
  Vector eigenvalues;            // Ritz values of the retained directions, descending
};

/// Projects the mean-centred table onto its top `target_dim` principal
/// directions, found by orthogonal iteration on the covariance.
PcaResult pca_compress(const Facet &facet, int target_dim, const PcaOptions &options = {});

}  // namespace prism
