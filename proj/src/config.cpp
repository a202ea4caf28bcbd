#include "prism/config.hpp"

#include <fstream>
#include <set>

#include "prism/error.hpp"

namespace prism {

namespace {

using nlohmann::json;

// Typed access to one JSON object; every key must be claimed by a getter
// before finish(), otherwise the config is rejected.
class ObjectReader {
 public:
  ObjectReader(const json &obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) fail("must be an object");
  }

  [[noreturn]] void fail(const std::string &msg) const { throw Error(Errc::InvalidConfig, where_ + ": " + msg); }

  bool has(const std::string &key) {
    claimed_.insert(key);
    return obj_.contains(key);
  }

  const json &raw(const std::string &key) {
    claimed_.insert(key);
    return obj_.at(key);
  }

  std::string string(const std::string &key, std::optional<std::string> fallback = std::nullopt) {
    if (!has(key)) {
      if (!fallback) fail("missing required key '" + key + "'");
      return *fallback;
    }
    const auto &v = obj_.at(key);
    if (!v.is_string()) fail("'" + key + "' must be a string");
    return v.get<std::string>();
  }

  template <typename T>
  T number(const std::string &key, T fallback) {
    if (!has(key)) return fallback;
    const auto &v = obj_.at(key);
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail("'" + key + "' must be an integer");
    } else {
      if (!v.is_number()) fail("'" + key + "' must be a number");
    }
    return v.get<T>();
  }

  bool boolean(const std::string &key, bool fallback) {
    if (!has(key)) return fallback;
    const auto &v = obj_.at(key);
    if (!v.is_boolean()) fail("'" + key + "' must be a boolean");
    return v.get<bool>();
  }

  void finish() const {
    for (const auto &[key, _] : obj_.items()) {
      if (!claimed_.contains(key)) fail("unknown key '" + key + "'");
    }
  }

 private:
  const json &obj_;
  std::string where_;
  std::set<std::string> claimed_;
};

std::filesystem::path existing(const std::filesystem::path &base, const std::string &p, const std::string &what) {
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  if (!std::filesystem::exists(path)) throw Error(Errc::InvalidConfig, what + ": path does not exist: " + path.string());
  return path;
}

FacetFormat parse_format(const std::string &s) {
  if (s == "auto") return FacetFormat::Auto;
  if (s == "plain") return FacetFormat::Plain;
  if (s == "counted") return FacetFormat::CountedHeader;
  throw Error(Errc::InvalidConfig, "facet format must be auto|plain|counted, got '" + s + "'");
}

Equalize parse_equalize(const std::string &s) {
  if (s == "none") return Equalize::None;
  if (s == "zero_pad") return Equalize::ZeroPad;
  if (s == "pca") return Equalize::Pca;
  throw Error(Errc::InvalidConfig, "equalize must be none|zero_pad|pca, got '" + s + "'");
}

SyntheticEntry parse_synthetic(const json &doc, std::uint64_t default_seed) {
  ObjectReader r(doc, "synthetic");
  SyntheticEntry e;
  const auto kind = r.string("generator");
  const auto seed = r.number<std::uint64_t>("seed", default_seed);
  if (kind == "separable") {
    e.kind = SyntheticEntry::Kind::Separable;
    auto &s = e.separable;
    s.seed = seed;
    s.facets = r.number("facets", s.facets);
    s.dim = r.number("dim", s.dim);
    s.vocab = r.number("vocab", s.vocab);
    s.train_examples = r.number("train_examples", s.train_examples);
    s.val_examples = r.number("val_examples", s.val_examples);
    s.test_examples = r.number("test_examples", s.test_examples);
    s.tokens_per_example = r.number("tokens_per_example", s.tokens_per_example);
    s.informative_facet = r.number("informative_facet", s.informative_facet);
    s.margin = r.number("margin", s.margin);
    s.noise = r.number("noise", s.noise);
  } else if (kind == "tagging") {
    e.kind = SyntheticEntry::Kind::Tagging;
    auto &s = e.tagging;
    s.seed = seed;
    s.facets = r.number("facets", s.facets);
    s.dim = r.number("dim", s.dim);
    s.vocab = r.number("vocab", s.vocab);
    s.train_sentences = r.number("train_sentences", s.train_sentences);
    s.val_sentences = r.number("val_sentences", s.val_sentences);
    s.test_sentences = r.number("test_sentences", s.test_sentences);
    s.min_length = r.number("min_length", s.min_length);
    s.max_length = r.number("max_length", s.max_length);
    s.informative_facet = r.number("informative_facet", s.informative_facet);
    s.margin = r.number("margin", s.margin);
    s.noise = r.number("noise", s.noise);
  } else if (kind == "rotated") {
    e.kind = SyntheticEntry::Kind::Rotated;
    auto &s = e.rotated;
    s.seed = seed;
    s.facets = r.number("facets", s.facets);
    s.dim = r.number("dim", s.dim);
    s.vocab = r.number("vocab", s.vocab);
    s.train_examples = r.number("train_examples", s.train_examples);
    s.val_examples = r.number("val_examples", s.val_examples);
    s.test_examples = r.number("test_examples", s.test_examples);
    s.tokens_per_example = r.number("tokens_per_example", s.tokens_per_example);
    s.offset = r.number("offset", s.offset);
  } else {
    r.fail("generator must be separable|tagging|rotated, got '" + kind + "'");
  }
  r.finish();
  return e;
}

}  // namespace

RunConfig parse_run_config(const json &doc, const std::filesystem::path &base_dir) {
  ObjectReader top(doc, "config");
  RunConfig cfg;
  cfg.raw = doc;
  cfg.seed = top.number<std::uint64_t>("seed", 1);
  cfg.mode = parse_baseline(top.string("mode", "prism"));
  cfg.projection = parse_projection_override(top.string("projection", "default"));
  cfg.meta_dim = top.number("meta_dim", 0);
  if (cfg.meta_dim < 0) top.fail("meta_dim must be >= 0");
  std::filesystem::path out = top.string("output_dir", "out");
  cfg.output_dir = out.is_relative() ? base_dir / out : out;

  {
    ObjectReader task(top.raw("task"), "task");
    const auto kind = task.string("kind");
    if (kind == "classify") {
      cfg.task = TaskKind::Classify;
    } else if (kind == "tag") {
      cfg.task = TaskKind::Tag;
    } else {
      task.fail("kind must be classify|tag");
    }
    cfg.train = TrainConfig::defaults_for(cfg.task);
    cfg.train.window = task.number("window", cfg.train.window);
    if (cfg.train.window < 0) task.fail("window must be >= 0");
    const bool has_paths = task.has("train") || task.has("val") || task.has("test");
    if (has_paths) {
      cfg.train_path = existing(base_dir, task.string("train"), "task.train");
      cfg.val_path = existing(base_dir, task.string("val"), "task.val");
      if (task.has("test")) cfg.test_path = existing(base_dir, task.string("test"), "task.test");
    }
    task.finish();
    if (top.has("synthetic")) {
      if (has_paths) top.fail("task paths and a synthetic generator are mutually exclusive");
      cfg.synthetic = parse_synthetic(top.raw("synthetic"), cfg.seed);
      const bool tagging = cfg.synthetic->kind == SyntheticEntry::Kind::Tagging;
      if (tagging != (cfg.task == TaskKind::Tag)) top.fail("synthetic generator does not match task.kind");
    } else if (!has_paths) {
      top.fail("either task.train/task.val paths or a synthetic generator is required");
    }
  }

  if (top.has("facets")) {
    const auto &arr = top.raw("facets");
    if (!arr.is_array()) top.fail("'facets' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      ObjectReader r(arr[i], "facets[" + std::to_string(i) + "]");
      FacetEntry e;
      e.path = existing(base_dir, r.string("path"), "facet path");
      e.name = r.string("name", e.path.stem().string());
      e.format = parse_format(r.string("format", "auto"));
      e.equalize = parse_equalize(r.string("equalize", "none"));
      e.target_dim = r.number("target_dim", 0);
      if (e.equalize != Equalize::None && e.target_dim <= 0) r.fail("equalize needs a positive target_dim");
      r.finish();
      cfg.facets.push_back(std::move(e));
    }
  }
  if (cfg.synthetic && !cfg.facets.empty()) top.fail("synthetic runs generate their own facets; drop 'facets'");
  if (!cfg.synthetic && cfg.facets.empty()) top.fail("at least one facet is required");

  if (top.has("train")) {
    ObjectReader t(top.raw("train"), "train");
    auto &tc = cfg.train;
    tc.learning_rate = t.number("learning_rate", tc.learning_rate);
    tc.plateau_factor = t.number("plateau_factor", tc.plateau_factor);
    tc.plateau_patience = t.number("plateau_patience", tc.plateau_patience);
    tc.max_epochs = t.number("max_epochs", tc.max_epochs);
    tc.batch_size = t.number("batch_size", tc.batch_size);
    cfg.beta = t.number("beta_retraction", cfg.beta);
    if (t.has("adam")) {
      ObjectReader a(t.raw("adam"), "train.adam");
      tc.adam.beta1 = a.number("beta1", tc.adam.beta1);
      tc.adam.beta2 = a.number("beta2", tc.adam.beta2);
      tc.adam.eps = a.number("eps", tc.adam.eps);
      a.finish();
    }
    if (t.has("freeze")) {
      ObjectReader f(t.raw("freeze"), "train.freeze");
      tc.freeze.projection = f.boolean("projection", false);
      tc.freeze.bias = f.boolean("bias", false);
      tc.freeze.alpha = f.boolean("alpha", false);
      tc.freeze.attention = f.boolean("attention", false);
      f.finish();
    }
    t.finish();
    if (!(tc.learning_rate >= 0.0)) t.fail("learning_rate must be >= 0");
    if (!(tc.plateau_factor > 0.0 && tc.plateau_factor < 1.0)) t.fail("plateau_factor must be in (0, 1)");
    if (tc.plateau_patience <= 0) t.fail("plateau_patience must be positive");
    if (tc.max_epochs < 0 || tc.batch_size <= 0) t.fail("max_epochs >= 0 and batch_size > 0 required");
    if (!(cfg.beta > 0.0)) t.fail("beta_retraction must be positive");
  }
  cfg.train.seed = cfg.seed;
  top.finish();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception &e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
  return parse_run_config(doc, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace prism
