#include "prism/meta.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <ostream>

#include "prism/error.hpp"
#include "prism/parallel.hpp"
#include "prism/rng.hpp"
#include "prism/text.hpp"

namespace prism {

std::string_view to_string(ProjectionKind kind) {
  switch (kind) {
    case ProjectionKind::Identity: return "identity";
    case ProjectionKind::Selector: return "selector";
    case ProjectionKind::Unconstrained: return "unconstrained";
    case ProjectionKind::Orthogonal: return "orthogonal";
  }
  return "?";
}

std::string_view to_string(CombinerKind kind) {
  switch (kind) {
    case CombinerKind::FixedUniform: return "fixed_uniform";
    case CombinerKind::FixedUnit: return "fixed_unit";
    case CombinerKind::LearnedScalar: return "learned_scalar";
    case CombinerKind::Attention: return "attention";
  }
  return "?";
}

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Average: return "average";
    case BaselineKind::Concat: return "concat";
    case BaselineKind::Dme: return "dme";
    case BaselineKind::Prism: return "prism";
  }
  return "?";
}

BaselineKind parse_baseline(std::string_view name) {
  if (name == "average") return BaselineKind::Average;
  if (name == "concat") return BaselineKind::Concat;
  if (name == "dme") return BaselineKind::Dme;
  if (name == "prism") return BaselineKind::Prism;
  throw Error(Errc::InvalidConfig, "unknown mode '" + std::string(name) + "'");
}

ProjectionOverride parse_projection_override(std::string_view name) {
  if (name == "default") return ProjectionOverride::Default;
  if (name == "none") return ProjectionOverride::None;
  if (name == "unconstrained") return ProjectionOverride::Unconstrained;
  if (name == "orthogonal") return ProjectionOverride::Orthogonal;
  throw Error(Errc::InvalidConfig, "unknown projection override '" + std::string(name) + "'");
}

std::string_view to_string(ProjectionOverride o) {
  switch (o) {
    case ProjectionOverride::Default: return "default";
    case ProjectionOverride::None: return "none";
    case ProjectionOverride::Unconstrained: return "unconstrained";
    case ProjectionOverride::Orthogonal: return "orthogonal";
  }
  return "?";
}

void validate(const MetaConfig &config) {
  const int F = config.facet_count();
  if (F == 0) throw Error(Errc::InvalidDimensions, "no facets");
  if (config.meta_dim <= 0) throw Error(Errc::InvalidDimensions, "meta dimension must be positive");
  for (int d : config.facet_dims)
    if (d <= 0) throw Error(Errc::InvalidDimensions, "facet dimension must be positive");
  auto all_square = [&] {
    for (int d : config.facet_dims)
      if (d != config.meta_dim) return false;
    return true;
  };
  switch (config.projection) {
    case ProjectionKind::Identity:
      if (!all_square()) throw Error(Errc::InvalidDimensions, "identity projection needs every d_f == d'");
      break;
    case ProjectionKind::Orthogonal:
      if (!all_square()) throw Error(Errc::InvalidDimensions, "orthogonal projection needs square P_f (d_f == d')");
      break;
    case ProjectionKind::Selector: {
      if (config.combiner != CombinerKind::FixedUnit) {
        throw Error(Errc::InvalidDimensions, "selector projection is only valid with fixed unit weights");
      }
      const int total = std::accumulate(config.facet_dims.begin(), config.facet_dims.end(), 0);
      if (total != config.meta_dim) throw Error(Errc::InvalidDimensions, "selector needs d' == sum of d_f");
      break;
    }
    case ProjectionKind::Unconstrained:
      break;
  }
  if (!(config.beta > 0.0)) throw Error(Errc::InvalidDimensions, "retraction beta must be positive");
}

void validate(const MetaParams &params, const MetaConfig &config) {
  validate(config);
  const int F = config.facet_count();
  if (params.facet_count() != F || static_cast<int>(params.bias.size()) != F || params.alpha.size() != F) {
    throw Error(Errc::InvalidDimensions, "parameter facet count does not match config");
  }
  for (int f = 0; f < F; ++f) {
    if (params.projection[f].rows() != config.meta_dim || params.projection[f].cols() != config.facet_dims[f] ||
        params.bias[f].size() != config.meta_dim) {
      throw Error(Errc::InvalidDimensions, "facet " + std::to_string(f) + " parameter shape mismatch");
    }
  }
  if (params.attention.size() != config.meta_dim) {
    throw Error(Errc::InvalidDimensions, "attention vector must have length d'");
  }
}

Vector dme_weights(std::span<const Vector> transformed, const Vector &attention, double attention_bias) {
  const auto F = static_cast<Eigen::Index>(transformed.size());
  Vector scores(F);
  for (Eigen::Index f = 0; f < F; ++f) scores[f] = attention.dot(transformed[f]) + attention_bias;
  const double top = scores.maxCoeff();
  Vector w(F);
  for (Eigen::Index f = 0; f < F; ++f) w[f] = std::exp(scores[f] - top);
  return w / w.sum();
}

MetaForward meta_forward(const MetaParams &params, const MetaConfig &config, std::span<const Vector> facet_vectors) {
  const int F = config.facet_count();
  if (static_cast<int>(facet_vectors.size()) != F) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(F) + " facet vectors");
  }
  MetaForward out;
  out.transformed.reserve(F);
  for (int f = 0; f < F; ++f) {
    if (facet_vectors[f].size() != config.facet_dims[f]) {
      throw Error(Errc::DimensionMismatch, "facet " + std::to_string(f) + " vector has length " +
                                               std::to_string(facet_vectors[f].size()));
    }
    out.transformed.push_back(params.projection[f] * facet_vectors[f] + params.bias[f]);
  }
  switch (config.combiner) {
    case CombinerKind::FixedUniform:
      out.weights = Vector::Constant(F, 1.0 / F);
      break;
    case CombinerKind::FixedUnit:
      out.weights = Vector::Ones(F);
      break;
    case CombinerKind::LearnedScalar:
      out.weights = params.alpha;
      break;
    case CombinerKind::Attention:
      out.weights = dme_weights(out.transformed, params.attention, params.attention_bias);
      break;
  }
  out.output = Vector::Zero(config.meta_dim);
  for (int f = 0; f < F; ++f) out.output += out.weights[f] * out.transformed[f];
  return out;
}

Vector meta_embed(const MetaParams &params, const MetaConfig &config, std::span<const Vector> facet_vectors) {
  return meta_forward(params, config, facet_vectors).output;
}

Matrix orthogonal_retraction(const Matrix &p, double beta) {
  if (p.rows() != p.cols()) throw Error(Errc::InvalidDimensions, "retraction needs a square matrix");
  Matrix out = p + beta * (p - (p * p.transpose()) * p);
  if (!out.allFinite()) throw Error(Errc::NonFinite, "retraction overflowed; projection diverged");
  return out;
}

double orthogonality_error(const Matrix &p) {
  return (p * p.transpose() - Matrix::Identity(p.rows(), p.rows())).norm();
}

Baseline make_baseline(BaselineKind kind, std::span<const int> facet_dims, int meta_dim, std::uint64_t seed) {
  if (facet_dims.empty()) throw Error(Errc::InvalidDimensions, "no facets");
  const int F = static_cast<int>(facet_dims.size());
  const bool equal_dims = std::all_of(facet_dims.begin(), facet_dims.end(), [&](int d) { return d == facet_dims[0]; });
  Baseline b;
  b.config.facet_dims.assign(facet_dims.begin(), facet_dims.end());
  auto fill = [&](auto make_projection, double alpha) {
    for (int f = 0; f < F; ++f) {
      b.params.projection.push_back(make_projection(f));
      b.params.bias.push_back(Vector::Zero(b.config.meta_dim));
    }
    b.params.alpha = Vector::Constant(F, alpha);
    b.params.attention = Vector::Zero(b.config.meta_dim);
  };
  auto identity = [&](int f) { return Matrix::Identity(b.config.meta_dim, facet_dims[f]).eval(); };

  switch (kind) {
    case BaselineKind::Average:
      if (!equal_dims) throw Error(Errc::InvalidDimensions, "average needs equal facet dimensions");
      b.config.projection = ProjectionKind::Identity;
      b.config.combiner = CombinerKind::FixedUniform;
      b.config.meta_dim = facet_dims[0];
      fill(identity, 1.0 / F);
      b.frozen = {true, true, true, true};
      break;
    case BaselineKind::Concat: {
      b.config.projection = ProjectionKind::Selector;
      b.config.combiner = CombinerKind::FixedUnit;
      b.config.meta_dim = std::accumulate(facet_dims.begin(), facet_dims.end(), 0);
      int offset = 0;
      fill(
          [&](int f) {
            Matrix sel = Matrix::Zero(b.config.meta_dim, facet_dims[f]);
            sel.block(offset, 0, facet_dims[f], facet_dims[f]).setIdentity();
            offset += facet_dims[f];
            return sel;
          },
          1.0);
      b.frozen = {true, true, true, true};
      break;
    }
    case BaselineKind::Dme: {
      if (meta_dim <= 0) {
        if (!equal_dims) throw Error(Errc::InvalidDimensions, "dme with unequal facet dims needs an explicit d'");
        meta_dim = facet_dims[0];
      }
      b.config.projection = ProjectionKind::Unconstrained;
      b.config.combiner = CombinerKind::Attention;
      b.config.meta_dim = meta_dim;
      Rng rng(seed);
      fill(
          [&](int f) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(facet_dims[f]));
            Matrix p(meta_dim, facet_dims[f]);
            for (Eigen::Index c = 0; c < p.cols(); ++c)
              for (Eigen::Index r = 0; r < p.rows(); ++r) p(r, c) = rng.uniform(-scale, scale);
            return p;
          },
          1.0 / F);
      const double scale = 1.0 / std::sqrt(static_cast<double>(meta_dim));
      for (Eigen::Index i = 0; i < b.params.attention.size(); ++i) b.params.attention[i] = rng.uniform(-scale, scale);
      b.frozen = {false, false, true, false};
      break;
    }
    case BaselineKind::Prism:
      if (!equal_dims) throw Error(Errc::InvalidDimensions, "prism needs equal facet dimensions (square P_f)");
      b.config.projection = ProjectionKind::Orthogonal;
      b.config.combiner = CombinerKind::LearnedScalar;
      b.config.meta_dim = facet_dims[0];
      fill(identity, 1.0 / F);
      b.frozen = {false, false, false, true};
      break;
  }
  validate(b.params, b.config);
  return b;
}

void apply_override(Baseline &baseline, ProjectionOverride o) {
  if (o == ProjectionOverride::Default) return;
  const auto combiner = baseline.config.combiner;
  if (combiner != CombinerKind::LearnedScalar && combiner != CombinerKind::Attention) {
    throw Error(Errc::InvalidConfig, "projection override applies only to prism and dme modes");
  }
  switch (o) {
    case ProjectionOverride::None:
      baseline.config.projection = ProjectionKind::Identity;
      for (int f = 0; f < baseline.config.facet_count(); ++f) {
        baseline.params.projection[f] = Matrix::Identity(baseline.config.meta_dim, baseline.config.facet_dims[f]);
      }
      baseline.frozen.projection = true;
      break;
    case ProjectionOverride::Unconstrained:
      baseline.config.projection = ProjectionKind::Unconstrained;
      baseline.frozen.projection = false;
      break;
    case ProjectionOverride::Orthogonal:
      baseline.config.projection = ProjectionKind::Orthogonal;
      baseline.frozen.projection = false;
      break;
    case ProjectionOverride::Default:
      break;
  }
  validate(baseline.params, baseline.config);
}

std::vector<Vector> facet_lookups(std::span<const Facet> facets, const std::string &token) {
  std::vector<Vector> out;
  out.reserve(facets.size());
  for (const auto &f : facets) out.push_back(f.lookup(token).vector);
  return out;
}

MetaTable export_table(const MetaParams &params, const MetaConfig &config, std::span<const Facet> facets,
                       const VocabUnion &vocab, int threads) {
  validate(params, config);
  if (static_cast<int>(facets.size()) != config.facet_count()) {
    throw Error(Errc::DimensionMismatch, "facet count does not match config");
  }
  MetaTable table{vocab, RowMatrix(static_cast<Eigen::Index>(vocab.size()), config.meta_dim)};
  parallel_for(vocab.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto inputs = facet_lookups(facets, vocab.tokens[i]);
      table.rows.row(static_cast<Eigen::Index>(i)) = meta_embed(params, config, inputs).transpose();
    }
  });
  return table;
}

void write_table_text(std::ostream &out, const MetaTable &table) {
  write_facet(out, table.vocab.tokens, table.rows);
}

namespace {

constexpr char kTableMagic[6] = {'P', 'R', 'I', 'S', 'M', '1'};

template <typename T>
void put_le(std::ostream &out, T value) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char *>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream &in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char *>(bytes), sizeof(T))) throw Error(Errc::Io, "truncated binary table");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_table_binary(std::ostream &out, const MetaTable &table) {
  out.write(kTableMagic, sizeof kTableMagic);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(table.rows.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(table.rows.cols()));
  for (Eigen::Index r = 0; r < table.rows.rows(); ++r)
    for (Eigen::Index c = 0; c < table.rows.cols(); ++c) put_le<float>(out, static_cast<float>(table.rows(r, c)));
}

RowMatrix read_table_binary(std::istream &in) {
  char magic[sizeof kTableMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kTableMagic, sizeof magic) != 0) {
    throw Error(Errc::Io, "not a PRISM1 table");
  }
  const auto rows = get_le<std::uint64_t>(in);
  const auto cols = get_le<std::uint64_t>(in);
  RowMatrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) out(r, c) = get_le<float>(in);
  return out;
}

}  // namespace prism
