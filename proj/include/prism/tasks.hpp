#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "prism/facet.hpp"

namespace prism {

struct ClassifiedExample {
  std::vector<std::string> tokens;
  int label = 0;
};

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<int> tags;
};

/// Dense label ids in first-seen order.
struct LabelIndex {
  std::vector<std::string> names;

  int intern(const std::string &name);
  int find(const std::string &name) const;  // -1 when absent
  int size() const { return static_cast<int>(names.size()); }
};

struct ClassificationSet {
  std::vector<ClassifiedExample> examples;
  LabelIndex labels;
};

struct TaggingSet {
  std::vector<TaggedSentence> sentences;
  LabelIndex tags;
};

/// "label<TAB>token token ..." per line; blank lines skipped. Pass an existing
/// index to keep label ids aligned across splits.
ClassificationSet read_classification(std::istream &in, LabelIndex labels = {});
ClassificationSet read_classification(const std::filesystem::path &path, LabelIndex labels = {});

/// CoNLL-like "token<TAB>tag" lines with blank-line sentence breaks.
TaggingSet read_tagged(std::istream &in, LabelIndex tags = {});
TaggingSet read_tagged(const std::filesystem::path &path, LabelIndex tags = {});

void write_classification(std::ostream &out, const ClassificationSet &set);
void write_tagged(std::ostream &out, const TaggingSet &set);

double accuracy(std::span<const int> predictions, std::span<const int> golds);

/// Token-level micro F1 that ignores the outside tag: a position is a true
/// positive when pred == gold != O, a false positive when pred != O and
/// pred != gold, a false negative when gold != O and pred != gold. Returns 1
/// when nothing is positive anywhere.
double micro_f1_without_o(std::span<const int> predicted, std::span<const int> gold, int outside_tag);

/// Concatenation of the meta-embeddings at offsets -k..k around `position`,
/// with zero blocks outside the sentence.
Vector window_features(std::span<const std::string> sentence, std::size_t position, int k, int meta_dim,
                       const std::function<Vector(const std::string &)> &meta_lookup);

// Seeded generators for desk-scale experiments.

struct SyntheticClassification {
  std::vector<Facet> facets;
  ClassificationSet train, val, test;
};

struct SyntheticTagging {
  std::vector<Facet> facets;
  TaggingSet train, val, test;
};

struct SeparableSpec {
  int facets = 3;
  int dim = 4;
  int vocab = 60;
  int train_examples = 40;
  int val_examples = 20;
  int test_examples = 20;
  int tokens_per_example = 3;
  int informative_facet = 0;
  double margin = 2.0;  // class-mean offset along the first axis of the informative facet
  double noise = 0.5;
  std::uint64_t seed = 1;
};

/// Two-class task whose label is recoverable from one facet only; the other
/// facets are label-independent noise.
SyntheticClassification make_separable(const SeparableSpec &spec);

struct TaggingSpec {
  int facets = 3;
  int dim = 4;
  int vocab = 60;
  int train_sentences = 40;
  int val_sentences = 15;
  int test_sentences = 15;
  int min_length = 3;
  int max_length = 8;
  int informative_facet = 0;
  double margin = 2.0;
  double noise = 0.5;
  std::uint64_t seed = 1;
};

/// Three tags {O, N, V}; each token carries a fixed tag that is decodable from
/// the informative facet only.
SyntheticTagging make_tagging(const TaggingSpec &spec);

struct RotatedSpec {
  int facets = 3;
  int dim = 20;
  int vocab = 200;
  int train_examples = 120;
  int val_examples = 40;
  int test_examples = 40;
  int tokens_per_example = 3;
  double offset = 3.0;  // norm of each facet-specific offset
  std::uint64_t seed = 1;
};

/// Facets that are distinct random rotations of one shared base space plus a
/// facet-specific offset; the label is the sign of the first base coordinate
/// of the example's mean token.
SyntheticClassification make_rotated(const RotatedSpec &spec);

/// Haar-ish random orthogonal matrix (Gram-Schmidt on a Gaussian block).
Matrix random_orthogonal(int dim, std::uint64_t seed);

}  // namespace prism
