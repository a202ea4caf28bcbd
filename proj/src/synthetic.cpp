#include "prism/error.hpp"
#include "prism/rng.hpp"
#include "prism/tasks.hpp"

namespace prism {

namespace {

std::vector<std::string> token_names(int vocab) {
  std::vector<std::string> out;
  out.reserve(vocab);
  for (int i = 0; i < vocab; ++i) out.push_back("w" + std::to_string(i));
  return out;
}

RowMatrix gaussian(Rng &rng, int rows, int cols, double scale) {
  RowMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

// Rows of the informative facet: margin * class_mean(token) + noise.
RowMatrix informative_table(Rng &rng, int vocab, int dim, double margin, double noise,
                            const std::function<Vector(int)> &class_mean) {
  RowMatrix m = gaussian(rng, vocab, dim, noise);
  for (int i = 0; i < vocab; ++i) m.row(i) += margin * class_mean(i).transpose();
  return m;
}

std::vector<int> tokens_of_class(int vocab, int classes, int cls) {
  std::vector<int> out;
  for (int i = cls; i < vocab; i += classes) out.push_back(i);
  return out;
}

}  // namespace

Matrix random_orthogonal(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Matrix q(dim, dim);
  for (int c = 0; c < dim; ++c)
    for (int r = 0; r < dim; ++r) q(r, c) = rng.normal();
  for (int c = 0; c < dim; ++c) {
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < c; ++j) q.col(c) -= q.col(j).dot(q.col(c)) * q.col(j);
    q.col(c).normalize();
  }
  return q;
}

SyntheticClassification make_separable(const SeparableSpec &spec) {
  if (spec.facets < 1 || spec.dim < 1 || spec.vocab < 2 || spec.informative_facet >= spec.facets) {
    throw Error(Errc::InvalidConfig, "separable generator: bad sizes");
  }
  const auto names = token_names(spec.vocab);
  SyntheticClassification out;
  for (int f = 0; f < spec.facets; ++f) {
    Rng rng(sub_seed(spec.seed, "facet" + std::to_string(f)));
    RowMatrix table = f == spec.informative_facet
                          ? informative_table(rng, spec.vocab, spec.dim, spec.margin, spec.noise,
                                              [&](int i) {
                                                return Vector(Vector::Unit(spec.dim, 0) * (i % 2 ? 1.0 : -1.0));
                                              })
                          : gaussian(rng, spec.vocab, spec.dim, 1.0);
    out.facets.emplace_back("f" + std::to_string(f), names, std::move(table));
  }
  LabelIndex labels;
  labels.intern("neg");
  labels.intern("pos");
  auto make_split = [&](std::string_view split, int count) {
    ClassificationSet set{{}, labels};
    Rng rng(sub_seed(spec.seed, split));
    for (int e = 0; e < count; ++e) {
      ClassifiedExample ex;
      ex.label = static_cast<int>(rng.index(2));
      const auto pool = tokens_of_class(spec.vocab, 2, ex.label);
      for (int t = 0; t < spec.tokens_per_example; ++t) ex.tokens.push_back(names[pool[rng.index(pool.size())]]);
      set.examples.push_back(std::move(ex));
    }
    return set;
  };
  out.train = make_split("train", spec.train_examples);
  out.val = make_split("val", spec.val_examples);
  out.test = make_split("test", spec.test_examples);
  return out;
}

SyntheticTagging make_tagging(const TaggingSpec &spec) {
  if (spec.facets < 1 || spec.dim < 3 || spec.vocab < 3 || spec.informative_facet >= spec.facets ||
      spec.min_length < 1 || spec.max_length < spec.min_length) {
    throw Error(Errc::InvalidConfig, "tagging generator: bad sizes (dim must be >= 3)");
  }
  const auto names = token_names(spec.vocab);
  SyntheticTagging out;
  for (int f = 0; f < spec.facets; ++f) {
    Rng rng(sub_seed(spec.seed, "facet" + std::to_string(f)));
    RowMatrix table = f == spec.informative_facet
                          ? informative_table(rng, spec.vocab, spec.dim, spec.margin, spec.noise,
                                              [&](int i) { return Vector(Vector::Unit(spec.dim, i % 3)); })
                          : gaussian(rng, spec.vocab, spec.dim, 1.0);
    out.facets.emplace_back("f" + std::to_string(f), names, std::move(table));
  }
  LabelIndex tags;
  tags.intern("O");
  tags.intern("N");
  tags.intern("V");
  auto make_split = [&](std::string_view split, int count) {
    TaggingSet set{{}, tags};
    Rng rng(sub_seed(spec.seed, split));
    for (int s = 0; s < count; ++s) {
      TaggedSentence sent;
      const int len = spec.min_length + static_cast<int>(rng.index(spec.max_length - spec.min_length + 1));
      for (int i = 0; i < len; ++i) {
        const auto tok = static_cast<int>(rng.index(spec.vocab));
        sent.tokens.push_back(names[tok]);
        sent.tags.push_back(tok % 3);
      }
      set.sentences.push_back(std::move(sent));
    }
    return set;
  };
  out.train = make_split("train", spec.train_sentences);
  out.val = make_split("val", spec.val_sentences);
  out.test = make_split("test", spec.test_sentences);
  return out;
}

SyntheticClassification make_rotated(const RotatedSpec &spec) {
  if (spec.facets < 1 || spec.dim < 1 || spec.vocab < 2) throw Error(Errc::InvalidConfig, "rotated generator: bad sizes");
  const auto names = token_names(spec.vocab);
  Rng base_rng(sub_seed(spec.seed, "base"));
  const RowMatrix base = gaussian(base_rng, spec.vocab, spec.dim, 1.0);
  SyntheticClassification out;
  for (int f = 0; f < spec.facets; ++f) {
    const Matrix rot = random_orthogonal(spec.dim, sub_seed(spec.seed, "rotation" + std::to_string(f)));
    Rng rng(sub_seed(spec.seed, "offset" + std::to_string(f)));
    Vector offset(spec.dim);
    for (int i = 0; i < spec.dim; ++i) offset[i] = rng.normal();
    offset *= spec.offset / offset.norm();
    RowMatrix table = (base * rot.transpose()).rowwise() + offset.transpose();
    out.facets.emplace_back("r" + std::to_string(f), names, std::move(table));
  }
  LabelIndex labels;
  labels.intern("neg");
  labels.intern("pos");
  auto make_split = [&](std::string_view split, int count) {
    ClassificationSet set{{}, labels};
    Rng rng(sub_seed(spec.seed, split));
    for (int e = 0; e < count; ++e) {
      ClassifiedExample ex;
      double first = 0.0;
      for (int t = 0; t < spec.tokens_per_example; ++t) {
        const auto tok = static_cast<int>(rng.index(spec.vocab));
        ex.tokens.push_back(names[tok]);
        first += base(tok, 0);
      }
      ex.label = first > 0.0 ? 1 : 0;
      set.examples.push_back(std::move(ex));
    }
    return set;
  };
  out.train = make_split("train", spec.train_examples);
  out.val = make_split("val", spec.val_examples);
  out.test = make_split("test", spec.test_examples);
  return out;
}

}  // namespace prism
