#include "prism/facet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "prism/error.hpp"
#include "prism/rng.hpp"
#include "prism/text.hpp"

namespace prism {

Vector centroid(const RowMatrix &table) {
  if (table.rows() == 0) throw Error(Errc::EmptyFacet, "centroid of an empty table");
  Vector sum = Vector::Zero(table.cols());
  for (Eigen::Index r = 0; r < table.rows(); ++r) sum += table.row(r).transpose();
  return sum / static_cast<double>(table.rows());
}

Facet::Facet(std::string name, std::vector<std::string> vocab, RowMatrix table)
    : name_(std::move(name)), vocab_(std::move(vocab)), table_(std::move(table)) {
  if (vocab_.empty()) throw Error(Errc::EmptyFacet, "facet '" + name_ + "' has no rows");
  if (static_cast<Eigen::Index>(vocab_.size()) != table_.rows()) {
    throw Error(Errc::DimensionMismatch, "facet '" + name_ + "': vocab and table row counts differ");
  }
  if (table_.cols() <= 0) throw Error(Errc::DimensionMismatch, "facet '" + name_ + "' has zero dimension");
  if (!table_.allFinite()) throw Error(Errc::NonFiniteValue, "facet '" + name_ + "' has non-finite entries");
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], i).second) {
      throw Error(Errc::DuplicateToken, "facet '" + name_ + "': token '" + vocab_[i] + "'");
    }
  }
  centroid_ = prism::centroid(table_);
}

bool Facet::contains(const std::string &token) const { return index_.contains(token); }

std::ptrdiff_t Facet::find(const std::string &token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

LookupResult Facet::lookup(const std::string &token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return {centroid_, true};
  return {table_.row(static_cast<Eigen::Index>(it->second)).transpose(), false};
}

namespace {

bool is_header(const std::vector<std::string_view> &fields) {
  return fields.size() == 2 && text::parse_int(fields[0]) && text::parse_int(fields[1]);
}

}  // namespace

Facet parse_facet(std::istream &in, std::string name, FacetFormat format) {
  std::vector<std::string> vocab;
  std::vector<double> values;
  long long dim = -1;
  long long declared_rows = -1;
  bool first = true;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::chomp(raw);
    auto fields = text::split_ws(line);
    if (fields.empty()) continue;
    if (first) {
      first = false;
      const bool header = format == FacetFormat::CountedHeader ||
                          (format == FacetFormat::Auto && is_header(fields));
      if (header) {
        if (!is_header(fields)) {
          throw Error(Errc::MalformedLine, name + ":" + std::to_string(line_no) + ": expected '<count> <dim>' header");
        }
        declared_rows = *text::parse_int(fields[0]);
        dim = *text::parse_int(fields[1]);
        if (dim <= 0 || declared_rows < 0) {
          throw Error(Errc::MalformedLine, name + ": invalid header values");
        }
        continue;
      }
    }
    const long long count = static_cast<long long>(fields.size()) - 1;
    if (dim < 0) dim = count;
    if (count != dim || dim == 0) {
      throw Error(Errc::DimensionMismatch, name + ":" + std::to_string(line_no) + ": expected " +
                                               std::to_string(dim) + " values, found " + std::to_string(count));
    }
    vocab.emplace_back(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto v = text::parse_double(fields[i]);
      if (!v) {
        throw Error(Errc::MalformedLine, name + ":" + std::to_string(line_no) + ": bad number '" +
                                             std::string(fields[i]) + "'");
      }
      if (!std::isfinite(*v)) {
        throw Error(Errc::NonFiniteValue, name + ":" + std::to_string(line_no));
      }
      values.push_back(*v);
    }
  }
  if (vocab.empty()) throw Error(Errc::EmptyFile, name + ": no embedding records");
  if (declared_rows >= 0 && declared_rows != static_cast<long long>(vocab.size())) {
    throw Error(Errc::MalformedLine, name + ": header declares " + std::to_string(declared_rows) +
                                         " records, found " + std::to_string(vocab.size()));
  }
  RowMatrix table = Eigen::Map<RowMatrix>(values.data(), static_cast<Eigen::Index>(vocab.size()),
                                          static_cast<Eigen::Index>(dim));
  return Facet(std::move(name), std::move(vocab), std::move(table));
}

Facet load_facet(const std::filesystem::path &path, FacetFormat format, std::string name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  if (name.empty()) name = path.stem().string();
  return parse_facet(in, std::move(name), format);
}

void write_facet(std::ostream &out, const std::vector<std::string> &vocab, const RowMatrix &table) {
  out << vocab.size() << ' ' << table.cols() << '\n';
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab[i];
    for (Eigen::Index c = 0; c < table.cols(); ++c) out << ' ' << text::fmt(table(static_cast<Eigen::Index>(i), c));
    out << '\n';
  }
}

std::uint64_t checksum(const Facet &facet) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void *data, std::size_t n) {
    const auto *p = static_cast<const unsigned char *>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto &tok : facet.vocab()) {
    feed(tok.data(), tok.size());
    feed("\n", 1);
  }
  feed(facet.table().data(), sizeof(double) * static_cast<std::size_t>(facet.table().size()));
  return h;
}

VocabUnion union_vocab(std::span<const Facet> facets) {
  if (facets.empty()) throw Error(Errc::NoFacets, "vocabulary union needs at least one facet");
  VocabUnion u;
  for (const auto &f : facets) u.tokens.insert(u.tokens.end(), f.vocab().begin(), f.vocab().end());
  // std::string comparison is byte-lexicographic (char_traits<char>::compare uses memcmp semantics).
  std::sort(u.tokens.begin(), u.tokens.end());
  u.tokens.erase(std::unique(u.tokens.begin(), u.tokens.end()), u.tokens.end());
  u.membership.reserve(u.tokens.size());
  u.index.reserve(u.tokens.size());
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    std::vector<bool> flags(facets.size());
    for (std::size_t f = 0; f < facets.size(); ++f) flags[f] = facets[f].contains(u.tokens[i]);
    u.membership.push_back(std::move(flags));
    u.index.emplace(u.tokens[i], i);
  }
  return u;
}

Facet zero_pad(const Facet &facet, int target_dim) {
  if (target_dim < facet.dim()) {
    throw Error(Errc::TargetSmallerThanSource, facet.name() + ": cannot pad dim " + std::to_string(facet.dim()) +
                                                   " down to " + std::to_string(target_dim));
  }
  if (target_dim == facet.dim()) return facet;
  RowMatrix padded = RowMatrix::Zero(facet.table().rows(), target_dim);
  padded.leftCols(facet.dim()) = facet.table();
  return Facet(facet.name() + "+pad" + std::to_string(target_dim), facet.vocab(), std::move(padded));
}

namespace {

// Modified Gram-Schmidt with re-orthogonalization. A column that collapses
// (norm below `floor`) is replaced by the matching column of `fallback`, then
// by standard basis vectors, so the block always stays full rank.
Matrix orthonormalize(Matrix z, const Matrix &fallback, double floor) {
  const Eigen::Index d = z.rows();
  const Eigen::Index k = z.cols();
  auto project_out = [&](Vector &v, Eigen::Index upto) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < upto; ++j) v -= z.col(j).dot(v) * z.col(j);
    }
  };
  for (Eigen::Index c = 0; c < k; ++c) {
    Vector v = z.col(c);
    project_out(v, c);
    double norm = v.norm();
    if (!(norm > floor)) {
      v = fallback.col(c);
      project_out(v, c);
      norm = v.norm();
      for (Eigen::Index e = 0; !(norm > 1e-8) && e < d; ++e) {
        v = Vector::Unit(d, e);
        project_out(v, c);
        norm = v.norm();
      }
    }
    z.col(c) = v / norm;
  }
  return z;
}

}  // namespace

PcaResult pca_compress(const Facet &facet, int target_dim, const PcaOptions &options) {
  const int d = facet.dim();
  const auto n = static_cast<Eigen::Index>(facet.size());
  if (target_dim <= 0 || target_dim > d || target_dim > n) {
    throw Error(Errc::TargetTooLarge, facet.name() + ": pca target " + std::to_string(target_dim) +
                                          " must be in [1, min(dim, |vocab|)]");
  }
  const RowMatrix centered = facet.table().rowwise() - facet.centroid().transpose();
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n);
  const double floor = 1e-11 * cov.norm();

  Rng rng(options.seed);
  Matrix start(d, target_dim);
  for (Eigen::Index c = 0; c < target_dim; ++c)
    for (Eigen::Index r = 0; r < d; ++r) start(r, c) = rng.normal();
  Matrix basis = orthonormalize(start, Matrix::Identity(d, target_dim), 1e-8);

  int iter = 0;
  double change = 0.0;
  bool converged = false;
  while (iter < options.max_iters) {
    ++iter;
    Matrix next = orthonormalize(cov * basis, basis, floor);
    change = (next * next.transpose() - basis * basis.transpose()).norm();
    basis = std::move(next);
    if (change < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(Errc::NoConvergence, facet.name() + ": subspace change " + std::to_string(change) + " after " +
                                         std::to_string(iter) + " sweeps");
  }

  // Rayleigh-Ritz inside the converged subspace orders the directions.
  Eigen::SelfAdjointEigenSolver<Matrix> ritz(basis.transpose() * cov * basis);
  Matrix rotation = ritz.eigenvectors().rowwise().reverse();
  Vector eigenvalues = ritz.eigenvalues().reverse();
  basis = basis * rotation;
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    Eigen::Index arg = 0;
    basis.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, c) < 0) basis.col(c) *= -1.0;
  }

  PcaResult result{
      Facet(facet.name() + "+pca" + std::to_string(target_dim) + "c", facet.vocab(), centered * basis),
      (eigenvalues.array() > 1e-12).count() < target_dim, iter, eigenvalues};
  return result;
}

}  // namespace prism
