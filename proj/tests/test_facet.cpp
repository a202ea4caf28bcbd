#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "prism/error.hpp"
#include "prism/facet.hpp"
#include "prism/rng.hpp"
#include "test_util.hpp"

using namespace prism;

namespace {

Facet parse(const std::string &text, FacetFormat fmt = FacetFormat::Auto) {
  std::istringstream in(text);
  return parse_facet(in, "t", fmt);
}

RowMatrix rows(std::initializer_list<std::initializer_list<double>> init) {
  RowMatrix m(static_cast<Eigen::Index>(init.size()), static_cast<Eigen::Index>(init.begin()->size()));
  Eigen::Index r = 0;
  for (const auto &row : init) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

// Gram matrix of the mean-centred rows.
Matrix centered_gram(const RowMatrix &t) {
  const RowMatrix c = t.rowwise() - t.colwise().mean();
  return c * c.transpose();
}

}  // namespace

TEST_CASE("plain and counted-header files parse to the same facet") {
  const auto plain = parse("a 1 0\nb 0 1");
  CHECK(plain.dim() == 2);
  CHECK(plain.vocab() == std::vector<std::string>{"a", "b"});
  const auto counted = parse("2 2\na 1 0\nb 0 1", FacetFormat::CountedHeader);
  CHECK(counted.vocab() == plain.vocab());
  CHECK(counted.table() == plain.table());
  const auto detected = parse("2 2\na 1 0\nb 0 1");
  CHECK(detected.table() == plain.table());
}

TEST_CASE("malformed facet files are rejected with the matching error") {
  CHECK(error_code([] { parse("a 1 0\na 2 3"); }) == Errc::DuplicateToken);
  CHECK(error_code([] { parse("a 1 0\nb 1"); }) == Errc::DimensionMismatch);
  CHECK(error_code([] { parse("a 1 nan"); }) == Errc::NonFiniteValue);
  CHECK(error_code([] { parse("a 1 inf"); }) == Errc::NonFiniteValue);
  CHECK(error_code([] { parse(""); }) == Errc::EmptyFile);
  CHECK(error_code([] { parse("\n\n"); }) == Errc::EmptyFile);
  CHECK(error_code([] { parse("0 3\n"); }) == Errc::EmptyFile);
  CHECK(error_code([] { parse("2 3\na 1 2 3\nb 1 2"); }) == Errc::DimensionMismatch);
}

TEST_CASE("source vectors are kept as given, without normalisation") {
  const auto f = parse("big 30 40\nsmall 0.3 0.4");
  CHECK(f.lookup("big").vector.norm() == doctest::Approx(50.0));
  CHECK(f.lookup("small").vector.norm() == doctest::Approx(0.5));
}

TEST_CASE("tokens are compared byte-exactly") {
  const auto f = parse("Apple 1 0\napple 0 1");
  CHECK(f.size() == 2);
  CHECK_FALSE(f.lookup("Apple").oov);
  CHECK(f.lookup("APPLE").oov);
}

TEST_CASE("centroid examples") {
  CHECK(centroid(rows({{1, 0}, {0, 1}})) == Vector((Vector(2) << 0.5, 0.5).finished()));
  CHECK(centroid(rows({{3, 4}})) == Vector((Vector(2) << 3, 4).finished()));
  CHECK(centroid(rows({{1, 1}, {-1, -1}})).isZero(0.0));
  CHECK(error_code([] { centroid(RowMatrix(0, 3)); }) == Errc::EmptyFacet);
}

TEST_CASE("lookup falls back to the centroid and is total") {
  const auto f = parse("a 1 0\nb 0 1");
  const auto known = f.lookup("a");
  CHECK_FALSE(known.oov);
  CHECK(known.vector == Vector::Unit(2, 0));
  const auto unknown = f.lookup("zzz");
  CHECK(unknown.oov);
  CHECK(unknown.vector == Vector::Constant(2, 0.5));
  const auto padded = zero_pad(f, 3);
  CHECK(padded.lookup("a").vector == Vector::Unit(3, 0));
  CHECK(padded.lookup("").vector.size() == 3);
}

TEST_CASE("union_vocab examples") {
  const auto ab = parse("a 1\nb 2");
  const auto bc = parse("c 1\nb 2");
  std::vector<Facet> two{ab, bc};
  const auto u = union_vocab(two);
  CHECK(u.tokens == std::vector<std::string>{"a", "b", "c"});
  CHECK(u.membership[0] == std::vector<bool>{true, false});
  CHECK(u.membership[1] == std::vector<bool>{true, true});

  std::vector<Facet> single{parse("z 1\ny 2\nx 3")};
  CHECK(union_vocab(single).tokens == std::vector<std::string>{"x", "y", "z"});

  std::vector<Facet> disjoint{parse("a 1"), parse("b 1")};
  const auto d = union_vocab(disjoint);
  CHECK(d.tokens == std::vector<std::string>{"a", "b"});
  CHECK(d.membership[0] == std::vector<bool>{true, false});
  CHECK(d.membership[1] == std::vector<bool>{false, true});

  CHECK(error_code([] { union_vocab(std::span<const Facet>{}); }) == Errc::NoFacets);
}

TEST_CASE("union_vocab is order-insensitive, idempotent and byte-sorted (property)") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto random_facet = [&](int n) {
      std::vector<std::string> vocab;
      while (static_cast<int>(vocab.size()) < n) {
        std::string tok(1 + rng.index(3), 'a');
        for (auto &ch : tok) ch = static_cast<char>("aBc\xc3\xa9Z"[rng.index(6)]);
        if (std::find(vocab.begin(), vocab.end(), tok) == vocab.end()) vocab.push_back(tok);
      }
      return Facet("r", vocab, RowMatrix::Random(n, 2));
    };
    std::vector<Facet> ab{random_facet(1 + static_cast<int>(rng.index(6))), random_facet(1 + static_cast<int>(rng.index(6)))};
    std::vector<Facet> ba{ab[1], ab[0]};
    const auto u1 = union_vocab(ab);
    CHECK(u1.tokens == union_vocab(ba).tokens);
    std::vector<Facet> aa{ab[0], ab[0]};
    std::vector<Facet> a{ab[0]};
    CHECK(union_vocab(aa).tokens == union_vocab(a).tokens);
    for (std::size_t i = 1; i < u1.tokens.size(); ++i) {
      CHECK(std::memcmp(u1.tokens[i - 1].data(), u1.tokens[i].data(),
                        std::min(u1.tokens[i - 1].size(), u1.tokens[i].size())) <= 0);
      CHECK(u1.tokens[i - 1] < u1.tokens[i]);
    }
    for (std::size_t i = 0; i < u1.size(); ++i) {
      CHECK((u1.membership[i][0] || u1.membership[i][1]));
    }
  }
}

TEST_CASE("zero_pad examples and errors") {
  const Facet f("f", {"x", "y"}, rows({{1, 2}, {3, -4}}));
  const auto p = zero_pad(f, 4);
  CHECK(p.dim() == 4);
  CHECK(p.lookup("x").vector == (Vector(4) << 1, 2, 0, 0).finished());
  CHECK(p.lookup("y").vector.norm() == f.lookup("y").vector.norm());
  CHECK(p.name() != f.name());
  CHECK(zero_pad(f, 2).table() == f.table());
  CHECK(error_code([&] { zero_pad(f, 1); }) == Errc::TargetSmallerThanSource);
}

TEST_CASE("padding and the OOV centroid commute (property)") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(6));
    const int d = 1 + static_cast<int>(rng.index(4));
    RowMatrix t(n, d);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) t(r, c) = rng.normal();
    std::vector<std::string> vocab;
    for (int i = 0; i < n; ++i) vocab.push_back("t" + std::to_string(i));
    const Facet f("f", vocab, t);
    const int target = d + static_cast<int>(rng.index(3));
    const auto padded = zero_pad(f, target);
    Vector expected = Vector::Zero(target);
    expected.head(d) = f.centroid();
    CHECK((padded.lookup("<oov>").vector - expected).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((padded.centroid() - centroid(padded.table())).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("pca_compress on a rank-1 table keeps centred dot products") {
  const Vector v = (Vector(3) << 1.0, -2.0, 0.5).finished();
  RowMatrix t(5, 3);
  const double scales[] = {1.0, -3.0, 0.5, 2.0, 7.0};
  for (int r = 0; r < 5; ++r) t.row(r) = scales[r] * v.transpose();
  const Facet f("r1", {"a", "b", "c", "d", "e"}, t);
  const auto res = pca_compress(f, 1);
  CHECK_FALSE(res.degenerate_rank);
  CHECK(res.facet.dim() == 1);
  CHECK((centered_gram(res.facet.table()) - centered_gram(t)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("pca_compress to the full dimension is an orthogonal change of basis") {
  Rng rng(5);
  RowMatrix t(12, 4);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 4; ++c) t(r, c) = rng.normal() * (c + 1);
  std::vector<std::string> vocab;
  for (int i = 0; i < 12; ++i) vocab.push_back("w" + std::to_string(i));
  const Facet f("full", vocab, t);
  const auto res = pca_compress(f, 4);
  CHECK((centered_gram(res.facet.table()) - centered_gram(t)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(res.facet.name().find("pca4c") != std::string::npos);
  // eigenvalues come out in descending order
  for (Eigen::Index i = 1; i < res.eigenvalues.size(); ++i) CHECK(res.eigenvalues[i - 1] >= res.eigenvalues[i]);
}

TEST_CASE("pca_compress keeps the dominant direction of a well-separated spectrum") {
  Rng rng(8);
  RowMatrix t(40, 5);
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 5; ++c) t(r, c) = rng.normal() * (c == 2 ? 10.0 : 0.5);
  std::vector<std::string> vocab;
  for (int i = 0; i < 40; ++i) vocab.push_back("w" + std::to_string(i));
  const auto res = pca_compress(Facet("s", vocab, t), 1);
  // Projection onto the principal axis ~ the centred third column.
  const Vector col = t.col(2).array() - t.col(2).mean();
  const double corr = std::abs(col.dot(res.facet.table().col(0))) / (col.norm() * res.facet.table().col(0).norm());
  CHECK(corr > 0.99);
}

TEST_CASE("pca_compress flags degenerate rank on identical rows") {
  const Facet f("same", {"a", "b", "c"}, rows({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
  const auto res = pca_compress(f, 2);
  CHECK(res.degenerate_rank);
  CHECK(res.facet.table().row(0) == res.facet.table().row(1));
  CHECK(res.facet.table().row(1) == res.facet.table().row(2));
}

TEST_CASE("pca_compress rejects oversize targets and reports non-convergence") {
  const Facet f("f", {"a", "b"}, rows({{1, 2, 3}, {4, 5, 6}}));
  CHECK(error_code([&] { pca_compress(f, 4); }) == Errc::TargetTooLarge);
  CHECK(error_code([&] { pca_compress(f, 3); }) == Errc::TargetTooLarge);  // more than |vocab|

  // Two nearly equal leading eigenvalues and a 1-sweep budget cannot converge.
  Rng rng(2);
  RowMatrix t(30, 3);
  for (int r = 0; r < 30; ++r)
    for (int c = 0; c < 3; ++c) t(r, c) = rng.normal();
  std::vector<std::string> vocab;
  for (int i = 0; i < 30; ++i) vocab.push_back("w" + std::to_string(i));
  PcaOptions opts;
  opts.max_iters = 1;
  CHECK(error_code([&] { pca_compress(Facet("g", vocab, t), 1, opts); }) == Errc::NoConvergence);
}

TEST_CASE("written facets load back exactly") {
  Rng rng(4);
  RowMatrix t(6, 3);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 3; ++c) t(r, c) = rng.normal() * 1e3;
  std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
  std::ostringstream out;
  write_facet(out, vocab, t);
  std::istringstream in(out.str());
  const auto back = parse_facet(in, "back", FacetFormat::CountedHeader);
  CHECK(back.table() == t);
  CHECK(checksum(back) == checksum(Facet("other-name", vocab, t)));
}
