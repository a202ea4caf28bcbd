#include "prism/tasks.hpp"

#include <fstream>
#include <ostream>

#include "prism/error.hpp"
#include "prism/text.hpp"

namespace prism {

int LabelIndex::intern(const std::string &name) {
  const int id = find(name);
  if (id >= 0) return id;
  names.push_back(name);
  return static_cast<int>(names.size()) - 1;
}

int LabelIndex::find(const std::string &name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

ClassificationSet read_classification(std::istream &in, LabelIndex labels) {
  ClassificationSet set{{}, std::move(labels)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::chomp(raw);
    if (text::split_ws(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": expected 'label<TAB>tokens'");
    }
    const std::string label(line.substr(0, tab));
    if (label.empty()) throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": empty label");
    ClassifiedExample ex;
    for (auto tok : text::split_ws(line.substr(tab + 1))) ex.tokens.emplace_back(tok);
    if (ex.tokens.empty()) throw Error(Errc::EmptyTokenList, "line " + std::to_string(line_no));
    ex.label = set.labels.intern(label);
    set.examples.push_back(std::move(ex));
  }
  return set;
}

ClassificationSet read_classification(const std::filesystem::path &path, LabelIndex labels) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return read_classification(in, std::move(labels));
}

TaggingSet read_tagged(std::istream &in, LabelIndex tags) {
  TaggingSet set{{}, std::move(tags)};
  TaggedSentence current;
  auto flush = [&] {
    if (!current.tokens.empty()) set.sentences.push_back(std::move(current));
    current = {};
  };
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = text::chomp(raw);
    if (text::split_ws(line).empty()) {
      flush();
      continue;
    }
    const auto fields = text::split(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw Error(Errc::MalformedLine, "line " + std::to_string(line_no) + ": expected 'token<TAB>tag'");
    }
    current.tokens.emplace_back(fields[0]);
    current.tags.push_back(set.tags.intern(std::string(fields[1])));
  }
  flush();
  if (set.sentences.empty()) throw Error(Errc::EmptySentence, "no sentences in input");
  return set;
}

TaggingSet read_tagged(const std::filesystem::path &path, LabelIndex tags) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return read_tagged(in, std::move(tags));
}

void write_classification(std::ostream &out, const ClassificationSet &set) {
  for (const auto &ex : set.examples) {
    out << set.labels.names.at(ex.label) << '\t';
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) out << (i ? " " : "") << ex.tokens[i];
    out << '\n';
  }
}

void write_tagged(std::ostream &out, const TaggingSet &set) {
  for (std::size_t s = 0; s < set.sentences.size(); ++s) {
    if (s) out << '\n';
    const auto &sent = set.sentences[s];
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
      out << sent.tokens[i] << '\t' << set.tags.names.at(sent.tags[i]) << '\n';
    }
  }
}

double accuracy(std::span<const int> predictions, std::span<const int> golds) {
  if (predictions.size() != golds.size()) throw Error(Errc::LengthMismatch, "accuracy inputs differ in length");
  if (golds.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) hits += predictions[i] == golds[i];
  return static_cast<double>(hits) / static_cast<double>(golds.size());
}

double micro_f1_without_o(std::span<const int> predicted, std::span<const int> gold, int outside_tag) {
  if (predicted.size() != gold.size()) throw Error(Errc::LengthMismatch, "tag sequences differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int p = predicted[i];
    const int g = gold[i];
    if (p == g) {
      if (g != outside_tag) ++tp;
      continue;
    }
    if (p != outside_tag) ++fp;
    if (g != outside_tag) ++fn;
  }
  if (tp == 0 && fp == 0 && fn == 0) return 1.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

Vector window_features(std::span<const std::string> sentence, std::size_t position, int k, int meta_dim,
                       const std::function<Vector(const std::string &)> &meta_lookup) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(meta_dim) * (2 * k + 1));
  const auto n = static_cast<std::ptrdiff_t>(sentence.size());
  for (int off = -k; off <= k; ++off) {
    const auto at = static_cast<std::ptrdiff_t>(position) + off;
    if (at < 0 || at >= n) continue;
    out.segment(static_cast<Eigen::Index>(off + k) * meta_dim, meta_dim) = meta_lookup(sentence[at]);
  }
  return out;
}

}  // namespace prism
