#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prism/facet.hpp"
#include "prism/meta.hpp"
#include "prism/tasks.hpp"

namespace prism {

enum class TaskKind { Classify, Tag };

std::string_view to_string(TaskKind kind);

/// Affine output layer: C x D weights and C biases. D is d' for the pooled
/// classifier and d' * (2k + 1) for the window tagger.
struct HeadParams {
  Matrix weight;
  Vector bias;
};

/// Zero weights and biases: the head starts as a uniform classifier.
HeadParams init_head(int classes, int input_dim);

struct Model {
  MetaParams meta;
  HeadParams head;
};

/// Same shapes as the model; attention_bias holds d L / d b_att.
using Gradients = Model;

Gradients zeros_like(const Model &model);

/// Parameter groups in flattening order.
enum class Group { Projection, Bias, Alpha, Attention, Head };

struct FlatLayout {
  std::vector<Group> group;  // one entry per scalar
  std::size_t size() const { return group.size(); }
};

FlatLayout layout_of(const Model &model);
std::vector<double> flatten(const Model &model);
void unflatten(std::span<const double> values, Model &model);

/// A dataset with every token resolved against the (frozen) facets once.
struct Dataset {
  TaskKind kind = TaskKind::Classify;
  int classes = 0;
  int outside_tag = -1;  // tagging only
  std::vector<std::string> tokens;
  std::vector<std::vector<Vector>> token_facets;  // per token id: F facet vectors (centroid for OOV)
  struct Sample {
    std::vector<int> tokens;   // ids into `tokens`
    std::vector<int> targets;  // one label (classification) or one tag per token
  };
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

Dataset encode(const ClassificationSet &set, std::span<const Facet> facets);
Dataset encode(const TaggingSet &set, std::span<const Facet> facets);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  TaskKind task = TaskKind::Classify;
  int window = 2;  // tagger half-width k
  double learning_rate = 0.0004;
  double plateau_factor = 0.1;
  int plateau_patience = 2;
  int max_epochs = 20;
  int batch_size = 1;
  std::uint64_t seed = 1;
  AdamSettings adam;
  FreezeFlags freeze;  // OR'd with the baseline's own frozen groups
  int threads = 1;

  /// lr 0.001 for tagging, 0.0004 for classification.
  static TrainConfig defaults_for(TaskKind task);
};

int head_input_dim(const MetaConfig &config, TaskKind task, int window);

/// Class probabilities for one sample: one vector for the pooled classifier,
/// one per position for the tagger.
std::vector<Vector> forward(const Model &model, const MetaConfig &config, const Dataset &data, std::size_t sample,
                            int window);

struct CrossEntropy {
  double loss = 0.0;
  bool clamped = false;  // probs[gold] was below 1e-12
};

CrossEntropy cross_entropy(const Vector &probs, int gold);

struct BatchResult {
  double loss = 0.0;  // mean over examples (or over positions when tagging)
  Gradients grads;
  std::size_t count = 0;
  bool clamped = false;
};

/// Loss and analytic gradients for a batch. Indices are reduced in sorted
/// order, so the result does not depend on their order or on `threads`.
BatchResult backward(const Model &model, const MetaConfig &config, const Dataset &data,
                     std::span<const std::size_t> batch, int window, int threads = 1);

/// Adam moments over the flattened parameter vector.
struct AdamState {
  std::vector<double> m, v;
  long long t = 0;
};

/// One optimizer update on every unfrozen group, then (Orthogonal projection
/// only) a single retraction of each unfrozen P_f.
void step(AdamState &state, Model &model, const Gradients &grads, const MetaConfig &config, const FreezeFlags &frozen,
          double learning_rate, const AdamSettings &adam);

/// Reduce-on-plateau for a higher-is-better metric.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, double factor, int patience) : lr_(lr), factor_(factor), patience_(patience) {}

  /// Feeds one epoch's validation metric and returns the learning rate for
  /// the next epoch.
  double step(double metric);
  double lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

struct Evaluation {
  double metric = 0.0;           // accuracy, or micro-F1 without O when tagging
  std::vector<int> predictions;  // flattened over positions when tagging
  std::vector<int> golds;
  Vector mean_weights;           // mean effective alpha_f over evaluated tokens
};

Evaluation evaluate(const Model &model, const MetaConfig &config, const Dataset &data, int window);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_metric = 0.0;
  double learning_rate = 0.0;
  Vector alpha;        // effective facet weights (mean attention weights for DME)
  Vector ortho_error;  // per facet, for square P_f (NaN otherwise)
};

struct TrainRun {
  std::vector<EpochRecord> history;
  Model best;
  Model last;
  int best_epoch = 0;
  double max_step_ortho_error = 0.0;  // over every step, Orthogonal mode only
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
};

/// Called after every optimizer step with the 1-based global step index.
using StepObserver = std::function<void(long long, const Model &)>;

TrainRun train(const Dataset &train_set, const Dataset &val_set, const Model &initial, const MetaConfig &config,
               const FreezeFlags &frozen, const TrainConfig &cfg, const StepObserver &observer = {});

/// Zero-initialised head; freeze flags from the baseline.
TrainRun train(const Dataset &train_set, const Dataset &val_set, const Baseline &start, const TrainConfig &cfg,
               const StepObserver &observer = {});

void write_history_csv(std::ostream &out, const TrainRun &run);

}  // namespace prism
