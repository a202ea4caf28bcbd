#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "prism/rng.hpp"
#include "prism/tasks.hpp"
#include "test_util.hpp"

using namespace prism;

TEST_CASE("read_classification") {
  std::istringstream in("pos\tgood movie\n\nneg\tbad film\n");
  const auto set = read_classification(in);
  REQUIRE(set.examples.size() == 2);
  CHECK(set.labels.size() == 2);
  CHECK(set.labels.names == std::vector<std::string>{"pos", "neg"});
  CHECK(set.examples[0].tokens == std::vector<std::string>{"good", "movie"});
  CHECK(set.examples[1].label == 1);

  std::istringstream no_tab("pos good movie\n");
  CHECK(error_code([&] { read_classification(no_tab); }) == Errc::MalformedLine);
  std::istringstream no_tokens("pos\t   \n");
  CHECK(error_code([&] { read_classification(no_tokens); }) == Errc::EmptyTokenList);

  LabelIndex shared;
  shared.intern("neg");
  std::istringstream more("pos\tfine\n");
  const auto aligned = read_classification(more, shared);
  CHECK(aligned.examples[0].label == 1);
}

TEST_CASE("read_tagged") {
  std::istringstream in("dog\tB-N\nran\tO\n\n");
  const auto set = read_tagged(in);
  REQUIRE(set.sentences.size() == 1);
  CHECK(set.sentences[0].tokens == std::vector<std::string>{"dog", "ran"});
  CHECK(set.tags.names == std::vector<std::string>{"B-N", "O"});
  CHECK(set.sentences[0].tags == std::vector<int>{0, 1});

  std::istringstream two("a\tO\n\n\nb\tX\nc\tO");
  CHECK(read_tagged(two).sentences.size() == 2);

  std::istringstream three("a\tO\textra\n");
  CHECK(error_code([&] { read_tagged(three); }) == Errc::MalformedLine);
  std::istringstream empty("\n\n");
  CHECK(error_code([&] { read_tagged(empty); }) == Errc::EmptySentence);
}

TEST_CASE("writers round-trip through the readers") {
  const auto data = make_separable({});
  std::stringstream cls;
  write_classification(cls, data.train);
  const auto back = read_classification(cls);
  REQUIRE(back.examples.size() == data.train.examples.size());
  for (std::size_t i = 0; i < back.examples.size(); ++i) {
    CHECK(back.examples[i].tokens == data.train.examples[i].tokens);
    CHECK(back.labels.names[back.examples[i].label] == data.train.labels.names[data.train.examples[i].label]);
  }
  const auto tagging = make_tagging({});
  std::stringstream tag;
  write_tagged(tag, tagging.train);
  const auto tback = read_tagged(tag, tagging.train.tags);
  REQUIRE(tback.sentences.size() == tagging.train.sentences.size());
  for (std::size_t i = 0; i < tback.sentences.size(); ++i) {
    CHECK(tback.sentences[i].tokens == tagging.train.sentences[i].tokens);
    CHECK(tback.sentences[i].tags == tagging.train.sentences[i].tags);
  }
}

TEST_CASE("accuracy examples") {
  const std::vector<int> g{0, 1, 2, 1};
  CHECK(accuracy(g, g) == 1.0);
  const std::vector<int> none{1, 0, 0, 0};
  CHECK(accuracy(none, g) == 0.0);
  const std::vector<int> three{0, 1, 2, 0};
  CHECK(accuracy(three, g) == 0.75);
  const std::vector<int> shorter{0};
  CHECK(error_code([&] { accuracy(shorter, g); }) == Errc::LengthMismatch);
}

TEST_CASE("micro_f1_without_o examples") {
  // O = 0, B-N = 1, B-V = 2
  const std::vector<int> gold{1, 0, 2};
  const std::vector<int> pred{1, 2, 0};
  // TP at 0, FP at 1 (gold is O), FN at 2: 2 / (2 + 1 + 1)
  CHECK(micro_f1_without_o(pred, gold, 0) == doctest::Approx(0.5).epsilon(1e-15));
  // a wrong non-O label is both a false positive and a false negative
  const std::vector<int> g1{1}, p1{2};
  CHECK(micro_f1_without_o(p1, g1, 0) == 0.0);
  CHECK(micro_f1_without_o(gold, gold, 0) == 1.0);
  const std::vector<int> all_o{0, 0, 0};
  CHECK(micro_f1_without_o(all_o, all_o, 0) == 1.0);
  CHECK(micro_f1_without_o(all_o, gold, 0) == 0.0);
  const std::vector<int> shorter{0};
  CHECK(error_code([&] { micro_f1_without_o(shorter, gold, 0); }) == Errc::LengthMismatch);
}

TEST_CASE("metrics are order invariant and accuracy(x, x) = 1 (property)") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(30));
    std::vector<int> p(n), g(n);
    for (int i = 0; i < n; ++i) p[i] = static_cast<int>(rng.index(4)), g[i] = static_cast<int>(rng.index(4));
    CHECK(accuracy(p, p) == 1.0);
    const double f1 = micro_f1_without_o(p, g, 0);
    CHECK(f1 >= 0.0);
    CHECK(f1 <= 1.0);
    const auto i = rng.index(n), j = rng.index(n);
    std::swap(p[i], p[j]);
    std::swap(g[i], g[j]);
    CHECK(micro_f1_without_o(p, g, 0) == f1);
  }
}

TEST_CASE("window_features examples and length (property)") {
  const std::vector<std::string> sentence{"a", "b", "c"};
  auto lookup = [](const std::string &t) {
    Vector v(2);
    v << static_cast<double>(t[0] - 'a' + 1), -1.0;
    return v;
  };
  Vector own(2);
  own << 2, -1;
  CHECK(window_features(sentence, 1, 0, 2, lookup) == own);
  Vector first(6);
  first << 0, 0, 1, -1, 2, -1;
  CHECK(window_features(sentence, 0, 1, 2, lookup) == first);
  const std::vector<std::string> single{"c"};
  Vector centre = Vector::Zero(10);
  centre.segment(4, 2) << 3, -1;
  CHECK(window_features(single, 0, 2, 2, lookup) == centre);
  for (int k = 0; k < 5; ++k)
    for (std::size_t pos = 0; pos < sentence.size(); ++pos)
      CHECK(window_features(sentence, pos, k, 2, lookup).size() == 2 * (2 * k + 1));
}

TEST_CASE("separable generator: one informative facet, balanced shapes") {
  SeparableSpec spec;
  spec.seed = 3;
  const auto a = make_separable(spec);
  const auto b = make_separable(spec);
  REQUIRE(a.facets.size() == 3);
  CHECK(a.train.examples.size() == 40);
  CHECK(a.val.examples.size() == 20);
  CHECK(a.test.examples.size() == 20);
  CHECK(Matrix(a.facets[0].table()) == Matrix(b.facets[0].table()));
  // the informative facet's first coordinate carries the token class
  int agree = 0;
  for (int i = 0; i < spec.vocab; ++i) {
    const double x = a.facets[0].table()(i, 0);
    agree += (x > 0) == (i % 2 == 1);
  }
  CHECK(agree >= spec.vocab - 2);
  for (const auto &ex : a.train.examples) {
    CHECK(ex.tokens.size() == 3);
    for (const auto &t : ex.tokens) CHECK((std::stoi(t.substr(1)) % 2) == ex.label);
  }
}

TEST_CASE("tagging generator") {
  const auto t = make_tagging({});
  CHECK(t.train.sentences.size() == 40);
  CHECK(t.train.tags.find("O") >= 0);
  for (const auto &s : t.train.sentences) {
    CHECK(s.tokens.size() >= 3);
    CHECK(s.tokens.size() <= 8);
    CHECK(s.tags.size() == s.tokens.size());
  }
}

TEST_CASE("rotated generator builds distinct rotations of one base") {
  const auto r = make_rotated({});
  REQUIRE(r.facets.size() == 3);
  CHECK(r.facets[0].dim() == 20);
  CHECK(r.train.examples.size() == 120);
  // pairwise distances are shared across facets (rotation + offset is an isometry)
  const auto &f0 = r.facets[0].table();
  const auto &f1 = r.facets[1].table();
  for (int i = 0; i < 10; ++i) {
    CHECK((f0.row(i) - f0.row(i + 1)).norm() == doctest::Approx((f1.row(i) - f1.row(i + 1)).norm()).epsilon(1e-10));
  }
  CHECK((f0.row(0) - f1.row(0)).norm() > 1e-3);
}

TEST_CASE("random_orthogonal is orthogonal") {
  for (int d : {1, 2, 5, 20}) {
    const Matrix q = random_orthogonal(d, 7);
    CHECK((q * q.transpose() - Matrix::Identity(d, d)).norm() < 1e-12);
  }
}
