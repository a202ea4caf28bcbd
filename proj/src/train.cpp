#include "prism/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "prism/error.hpp"
#include "prism/parallel.hpp"
#include "prism/rng.hpp"
#include "prism/text.hpp"

namespace prism {

std::string_view to_string(TaskKind kind) { return kind == TaskKind::Classify ? "classify" : "tag"; }

HeadParams init_head(int classes, int input_dim) {
  return {Matrix::Zero(classes, input_dim), Vector::Zero(classes)};
}

Gradients zeros_like(const Model &model) {
  Gradients g;
  for (const auto &p : model.meta.projection) g.meta.projection.push_back(Matrix::Zero(p.rows(), p.cols()));
  for (const auto &b : model.meta.bias) g.meta.bias.push_back(Vector::Zero(b.size()));
  g.meta.alpha = Vector::Zero(model.meta.alpha.size());
  g.meta.attention = Vector::Zero(model.meta.attention.size());
  g.meta.attention_bias = 0.0;
  g.head.weight = Matrix::Zero(model.head.weight.rows(), model.head.weight.cols());
  g.head.bias = Vector::Zero(model.head.bias.size());
  return g;
}

namespace {

// Visits every tensor in flattening order as (group, pointer, count).
template <typename ModelT, typename Fn>
void for_each_tensor(ModelT &model, Fn &&fn) {
  for (auto &p : model.meta.projection) fn(Group::Projection, p.data(), static_cast<std::size_t>(p.size()));
  for (auto &b : model.meta.bias) fn(Group::Bias, b.data(), static_cast<std::size_t>(b.size()));
  fn(Group::Alpha, model.meta.alpha.data(), static_cast<std::size_t>(model.meta.alpha.size()));
  fn(Group::Attention, model.meta.attention.data(), static_cast<std::size_t>(model.meta.attention.size()));
  fn(Group::Attention, &model.meta.attention_bias, std::size_t{1});
  fn(Group::Head, model.head.weight.data(), static_cast<std::size_t>(model.head.weight.size()));
  fn(Group::Head, model.head.bias.data(), static_cast<std::size_t>(model.head.bias.size()));
}

void accumulate(Gradients &into, const Gradients &from) {
  for (std::size_t f = 0; f < into.meta.projection.size(); ++f) {
    into.meta.projection[f] += from.meta.projection[f];
    into.meta.bias[f] += from.meta.bias[f];
  }
  into.meta.alpha += from.meta.alpha;
  into.meta.attention += from.meta.attention;
  into.meta.attention_bias += from.meta.attention_bias;
  into.head.weight += from.head.weight;
  into.head.bias += from.head.bias;
}

void scale(Gradients &g, double s) {
  for (std::size_t f = 0; f < g.meta.projection.size(); ++f) {
    g.meta.projection[f] *= s;
    g.meta.bias[f] *= s;
  }
  g.meta.alpha *= s;
  g.meta.attention *= s;
  g.meta.attention_bias *= s;
  g.head.weight *= s;
  g.head.bias *= s;
}

bool all_finite(const Gradients &g) {
  bool ok = std::isfinite(g.meta.attention_bias);
  for_each_tensor(const_cast<Gradients &>(g), [&](Group, const double *p, std::size_t n) {
    for (std::size_t i = 0; i < n && ok; ++i) ok = std::isfinite(p[i]);
  });
  return ok;
}

bool is_frozen(Group g, const FreezeFlags &frozen) {
  switch (g) {
    case Group::Projection: return frozen.projection;
    case Group::Bias: return frozen.bias;
    case Group::Alpha: return frozen.alpha;
    case Group::Attention: return frozen.attention;
    case Group::Head: return false;
  }
  return false;
}

Vector softmax(const Vector &z) {
  const double top = z.maxCoeff();
  Vector e(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) e[i] = std::exp(z[i] - top);  // scalar exp underflows to exact 0
  return e / e.sum();
}

int argmax(const Vector &v) {
  Eigen::Index arg = 0;
  v.maxCoeff(&arg);
  return static_cast<int>(arg);
}

template <typename SetT, typename SampleFn>
Dataset encode_common(const SetT &, std::span<const Facet> facets, TaskKind kind, std::size_t count,
                      SampleFn &&sample_tokens) {
  if (facets.empty()) throw Error(Errc::NoFacets, "encoding needs at least one facet");
  Dataset data;
  data.kind = kind;
  std::unordered_map<std::string, int> ids;
  data.samples.resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    const auto &toks = sample_tokens(s);
    if (toks.empty()) throw Error(Errc::EmptyExample, "sample " + std::to_string(s) + " has no tokens");
    for (const auto &tok : toks) {
      auto [it, inserted] = ids.emplace(tok, static_cast<int>(data.tokens.size()));
      if (inserted) {
        data.tokens.push_back(tok);
        data.token_facets.push_back(facet_lookups(facets, tok));
      }
      data.samples[s].tokens.push_back(it->second);
    }
  }
  return data;
}

// Per-position meta-layer evaluations of one sample.
std::vector<MetaForward> sample_meta(const Model &model, const MetaConfig &config, const Dataset &data,
                                     const Dataset::Sample &sample) {
  std::vector<MetaForward> out;
  out.reserve(sample.tokens.size());
  for (int id : sample.tokens) out.push_back(meta_forward(model.meta, config, data.token_facets[id]));
  return out;
}

Vector window_input(const std::vector<MetaForward> &meta, std::size_t pos, int window, int meta_dim) {
  Vector x = Vector::Zero(static_cast<Eigen::Index>(meta_dim) * (2 * window + 1));
  const auto n = static_cast<std::ptrdiff_t>(meta.size());
  for (int off = -window; off <= window; ++off) {
    const auto at = static_cast<std::ptrdiff_t>(pos) + off;
    if (at < 0 || at >= n) continue;
    x.segment(static_cast<Eigen::Index>(off + window) * meta_dim, meta_dim) = meta[at].output;
  }
  return x;
}

// Backprop of an upstream gradient g = dL/d meta(w) through one meta-layer evaluation.
void meta_backward(const MetaForward &fw, std::span<const Vector> inputs, const Vector &g, const Model &model,
                   const MetaConfig &config, Gradients &grads) {
  const int F = config.facet_count();
  if (config.combiner != CombinerKind::Attention) {
    for (int f = 0; f < F; ++f) {
      grads.meta.alpha[f] += g.dot(fw.transformed[f]);
      grads.meta.projection[f].noalias() += (fw.weights[f] * g) * inputs[f].transpose();
      grads.meta.bias[f] += fw.weights[f] * g;
    }
    return;
  }
  Vector u(F);
  for (int f = 0; f < F; ++f) u[f] = g.dot(fw.transformed[f]);
  const double mean_u = fw.weights.dot(u);
  for (int f = 0; f < F; ++f) {
    const double ds = fw.weights[f] * (u[f] - mean_u);
    grads.meta.attention += ds * fw.transformed[f];
    grads.meta.attention_bias += ds;
    const Vector dt = fw.weights[f] * g + ds * model.meta.attention;
    grads.meta.projection[f].noalias() += dt * inputs[f].transpose();
    grads.meta.bias[f] += dt;
  }
}

struct SampleResult {
  double loss = 0.0;
  std::size_t count = 0;
  bool clamped = false;
  Gradients grads;
};

SampleResult sample_backward(const Model &model, const MetaConfig &config, const Dataset &data, std::size_t index,
                             int window) {
  const auto &sample = data.samples[index];
  const int dm = config.meta_dim;
  SampleResult res;
  res.grads = zeros_like(model);
  const auto meta = sample_meta(model, config, data, sample);
  const auto n = meta.size();
  std::vector<Vector> upstream(n, Vector::Zero(dm));

  auto head_step = [&](const Vector &x, int gold) {
    const Vector probs = softmax(model.head.weight * x + model.head.bias);
    const auto ce = cross_entropy(probs, gold);
    res.loss += ce.loss;
    res.clamped = res.clamped || ce.clamped;
    Vector delta = probs;
    delta[gold] -= 1.0;
    res.grads.head.weight.noalias() += delta * x.transpose();
    res.grads.head.bias += delta;
    return Vector(model.head.weight.transpose() * delta);
  };

  if (data.kind == TaskKind::Classify) {
    Vector pooled = Vector::Zero(dm);
    for (const auto &m : meta) pooled += m.output;
    pooled /= static_cast<double>(n);
    const Vector gx = head_step(pooled, sample.targets.at(0));
    for (auto &u : upstream) u = gx / static_cast<double>(n);
    res.count = 1;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const Vector gx = head_step(window_input(meta, i, window, dm), sample.targets.at(i));
      for (int off = -window; off <= window; ++off) {
        const auto at = static_cast<std::ptrdiff_t>(i) + off;
        if (at < 0 || at >= static_cast<std::ptrdiff_t>(n)) continue;
        upstream[at] += gx.segment(static_cast<Eigen::Index>(off + window) * dm, dm);
      }
    }
    res.count = n;
  }
  for (std::size_t i = 0; i < n; ++i) {
    meta_backward(meta[i], data.token_facets[sample.tokens[i]], upstream[i], model, config, res.grads);
  }
  return res;
}

}  // namespace

FlatLayout layout_of(const Model &model) {
  FlatLayout layout;
  for_each_tensor(const_cast<Model &>(model),
                  [&](Group g, const double *, std::size_t n) { layout.group.insert(layout.group.end(), n, g); });
  return layout;
}

std::vector<double> flatten(const Model &model) {
  std::vector<double> out;
  for_each_tensor(const_cast<Model &>(model),
                  [&](Group, const double *p, std::size_t n) { out.insert(out.end(), p, p + n); });
  return out;
}

void unflatten(std::span<const double> values, Model &model) {
  std::size_t at = 0;
  for_each_tensor(model, [&](Group, double *p, std::size_t n) {
    if (at + n > values.size()) throw Error(Errc::DimensionMismatch, "flat parameter vector too short");
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(at), n, p);
    at += n;
  });
  if (at != values.size()) throw Error(Errc::DimensionMismatch, "flat parameter vector too long");
}

namespace {

int find_outside(const LabelIndex &tags) { return tags.find("O"); }

}  // namespace

Dataset encode(const ClassificationSet &set, std::span<const Facet> facets) {
  Dataset data = encode_common(set, facets, TaskKind::Classify, set.examples.size(),
                               [&](std::size_t s) -> const std::vector<std::string> & { return set.examples[s].tokens; });
  data.classes = set.labels.size();
  for (std::size_t s = 0; s < set.examples.size(); ++s) data.samples[s].targets = {set.examples[s].label};
  return data;
}

Dataset encode(const TaggingSet &set, std::span<const Facet> facets) {
  Dataset data = encode_common(set, facets, TaskKind::Tag, set.sentences.size(),
                               [&](std::size_t s) -> const std::vector<std::string> & { return set.sentences[s].tokens; });
  data.classes = set.tags.size();
  data.outside_tag = find_outside(set.tags);
  for (std::size_t s = 0; s < set.sentences.size(); ++s) {
    if (set.sentences[s].tags.size() != set.sentences[s].tokens.size()) {
      throw Error(Errc::LengthMismatch, "sentence " + std::to_string(s) + " tags and tokens differ in length");
    }
    data.samples[s].targets = set.sentences[s].tags;
  }
  return data;
}

TrainConfig TrainConfig::defaults_for(TaskKind task) {
  TrainConfig cfg;
  cfg.task = task;
  cfg.learning_rate = task == TaskKind::Tag ? 0.001 : 0.0004;
  return cfg;
}

int head_input_dim(const MetaConfig &config, TaskKind task, int window) {
  return task == TaskKind::Classify ? config.meta_dim : config.meta_dim * (2 * window + 1);
}

std::vector<Vector> forward(const Model &model, const MetaConfig &config, const Dataset &data, std::size_t sample,
                            int window) {
  const auto &s = data.samples.at(sample);
  if (s.tokens.empty()) throw Error(Errc::EmptyExample, "sample " + std::to_string(sample));
  const auto meta = sample_meta(model, config, data, s);
  std::vector<Vector> out;
  if (data.kind == TaskKind::Classify) {
    Vector pooled = Vector::Zero(config.meta_dim);
    for (const auto &m : meta) pooled += m.output;
    pooled /= static_cast<double>(meta.size());
    out.push_back(softmax(model.head.weight * pooled + model.head.bias));
  } else {
    for (std::size_t i = 0; i < meta.size(); ++i) {
      out.push_back(softmax(model.head.weight * window_input(meta, i, window, config.meta_dim) + model.head.bias));
    }
  }
  return out;
}

CrossEntropy cross_entropy(const Vector &probs, int gold) {
  constexpr double kFloor = 1e-12;
  const double p = probs[gold];
  if (p < kFloor) return {-std::log(kFloor), true};
  return {-std::log(p), false};
}

BatchResult backward(const Model &model, const MetaConfig &config, const Dataset &data,
                     std::span<const std::size_t> batch, int window, int threads) {
  std::vector<std::size_t> order(batch.begin(), batch.end());
  std::sort(order.begin(), order.end());
  std::vector<SampleResult> parts(order.size());
  parallel_for(order.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) parts[i] = sample_backward(model, config, data, order[i], window);
  });
  BatchResult out;
  out.grads = zeros_like(model);
  for (const auto &part : parts) {
    out.loss += part.loss;
    out.count += part.count;
    out.clamped = out.clamped || part.clamped;
    accumulate(out.grads, part.grads);
  }
  if (out.count > 0) {
    out.loss /= static_cast<double>(out.count);
    scale(out.grads, 1.0 / static_cast<double>(out.count));
  }
  if (!all_finite(out.grads)) throw Error(Errc::NonFiniteGradient, "non-finite gradient in batch");
  return out;
}

void step(AdamState &state, Model &model, const Gradients &grads, const MetaConfig &config, const FreezeFlags &frozen,
          double learning_rate, const AdamSettings &adam) {
  const auto layout = layout_of(model);
  auto params = flatten(model);
  const auto g = flatten(grads);
  if (g.size() != params.size()) throw Error(Errc::DimensionMismatch, "gradient shape does not match model");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.t = 0;
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (is_frozen(layout.group[i], frozen)) continue;
    if (!std::isfinite(g[i])) throw Error(Errc::NonFinite, "non-finite gradient entering the optimizer");
    state.m[i] = adam.beta1 * state.m[i] + (1.0 - adam.beta1) * g[i];
    state.v[i] = adam.beta2 * state.v[i] + (1.0 - adam.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + adam.eps);
  }
  unflatten(params, model);
  if (config.projection == ProjectionKind::Orthogonal && !frozen.projection) {
    for (auto &p : model.meta.projection) p = orthogonal_retraction(p, config.beta);
  }
}

double PlateauSchedule::step(double metric) {
  if (metric > best_) {
    best_ = metric;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= patience_) {
    lr_ *= factor_;
    bad_epochs_ = 0;
  }
  return lr_;
}

Evaluation evaluate(const Model &model, const MetaConfig &config, const Dataset &data, int window) {
  Evaluation ev;
  ev.mean_weights = Vector::Zero(config.facet_count());
  std::size_t tokens = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto &sample = data.samples[s];
    const auto meta = sample_meta(model, config, data, sample);
    for (const auto &m : meta) ev.mean_weights += m.weights;
    tokens += meta.size();
    if (data.kind == TaskKind::Classify) {
      Vector pooled = Vector::Zero(config.meta_dim);
      for (const auto &m : meta) pooled += m.output;
      pooled /= static_cast<double>(meta.size());
      ev.predictions.push_back(argmax(model.head.weight * pooled + model.head.bias));
      ev.golds.push_back(sample.targets.at(0));
    } else {
      for (std::size_t i = 0; i < meta.size(); ++i) {
        ev.predictions.push_back(
            argmax(model.head.weight * window_input(meta, i, window, config.meta_dim) + model.head.bias));
        ev.golds.push_back(sample.targets.at(i));
      }
    }
  }
  if (tokens > 0) ev.mean_weights /= static_cast<double>(tokens);
  ev.metric = data.kind == TaskKind::Classify ? accuracy(ev.predictions, ev.golds)
                                              : micro_f1_without_o(ev.predictions, ev.golds, data.outside_tag);
  return ev;
}

namespace {

Vector ortho_errors(const Model &model) {
  Vector out(model.meta.facet_count());
  for (int f = 0; f < model.meta.facet_count(); ++f) {
    const auto &p = model.meta.projection[f];
    out[f] = p.rows() == p.cols() ? orthogonality_error(p) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace

TrainRun train(const Dataset &train_set, const Dataset &val_set, const Model &initial, const MetaConfig &config,
               const FreezeFlags &frozen, const TrainConfig &cfg, const StepObserver &observer) {
  if (train_set.size() == 0 || val_set.size() == 0) throw Error(Errc::EmptyDataset, "training needs non-empty splits");
  if (train_set.kind != cfg.task || val_set.kind != cfg.task) {
    throw Error(Errc::InvalidConfig, "dataset kind does not match the configured task");
  }
  validate(initial.meta, config);
  const int input_dim = head_input_dim(config, cfg.task, cfg.window);
  if (initial.head.weight.cols() != input_dim || initial.head.weight.rows() != train_set.classes ||
      initial.head.bias.size() != train_set.classes) {
    throw Error(Errc::InvalidDimensions, "head shape does not match task");
  }
  if (cfg.batch_size <= 0 || cfg.max_epochs < 0) throw Error(Errc::InvalidConfig, "batch size and epochs");

  TrainRun run;
  const auto shuffle_seed = sub_seed(cfg.seed, "shuffle");
  run.seeds.emplace_back("shuffle", shuffle_seed);
  Rng shuffle_rng(shuffle_seed);

  Model model = initial;
  AdamState adam;
  PlateauSchedule schedule(cfg.learning_rate, cfg.plateau_factor, cfg.plateau_patience);
  const bool track_ortho = config.projection == ProjectionKind::Orthogonal;
  double best_metric = -std::numeric_limits<double>::infinity();
  run.best = model;
  long long global_step = 0;

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);
    const double lr = schedule.lr();
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      auto result = backward(model, config, train_set, batch, cfg.window, cfg.threads);
      loss_sum += result.loss * static_cast<double>(result.count);
      loss_count += result.count;
      step(adam, model, result.grads, config, frozen, lr, cfg.adam);
      ++global_step;
      if (track_ortho) run.max_step_ortho_error = std::max(run.max_step_ortho_error, ortho_errors(model).maxCoeff());
      if (observer) observer(global_step, model);
    }
    const auto eval = evaluate(model, config, val_set, cfg.window);
    run.history.push_back({epoch, loss_sum / static_cast<double>(loss_count), eval.metric, lr, eval.mean_weights,
                           ortho_errors(model)});
    if (eval.metric > best_metric) {
      best_metric = eval.metric;
      run.best = model;
      run.best_epoch = epoch;
    }
    schedule.step(eval.metric);
  }
  run.last = model;
  return run;
}

TrainRun train(const Dataset &train_set, const Dataset &val_set, const Baseline &start, const TrainConfig &cfg,
               const StepObserver &observer) {
  Model initial;
  initial.meta = start.params;
  initial.head = init_head(train_set.classes, head_input_dim(start.config, cfg.task, cfg.window));
  return train(train_set, val_set, initial, start.config, start.frozen | cfg.freeze, cfg, observer);
}

void write_history_csv(std::ostream &out, const TrainRun &run) {
  const auto F = run.history.empty() ? 0 : run.history.front().alpha.size();
  out << "epoch,loss,val_metric,lr";
  for (Eigen::Index f = 1; f <= F; ++f) out << ",alpha_" << f;
  for (Eigen::Index f = 1; f <= F; ++f) out << ",ortho_err_" << f;
  out << '\n';
  for (const auto &r : run.history) {
    out << r.epoch << ',' << text::fmt(r.loss) << ',' << text::fmt(r.val_metric) << ',' << text::fmt(r.learning_rate);
    for (Eigen::Index f = 0; f < F; ++f) out << ',' << text::fmt(r.alpha[f]);
    for (Eigen::Index f = 0; f < F; ++f) out << ',' << text::fmt(r.ortho_error[f]);
    out << '\n';
  }
}

}  // namespace prism
