#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prism/facet.hpp"

namespace prism {

enum class ProjectionKind { Identity, Selector, Unconstrained, Orthogonal };
enum class CombinerKind { FixedUniform, FixedUnit, LearnedScalar, Attention };
enum class BaselineKind { Average, Concat, Dme, Prism };

std::string_view to_string(ProjectionKind kind);
std::string_view to_string(CombinerKind kind);
std::string_view to_string(BaselineKind kind);
BaselineKind parse_baseline(std::string_view name);

/// Which parameter groups the optimizer may touch.
struct FreezeFlags {
  bool projection = false;
  bool bias = false;
  bool alpha = false;
  bool attention = false;

  FreezeFlags operator|(const FreezeFlags &o) const {
    return {projection || o.projection, bias || o.bias, alpha || o.alpha, attention || o.attention};
  }
  bool operator==(const FreezeFlags &) const = default;
};

struct MetaConfig {
  ProjectionKind projection = ProjectionKind::Orthogonal;
  CombinerKind combiner = CombinerKind::LearnedScalar;
  std::vector<int> facet_dims;
  int meta_dim = 0;
  double beta = 0.001;  // retraction strength

  int facet_count() const { return static_cast<int>(facet_dims.size()); }
};

/// Throws InvalidDimensions when the projection/combiner pairing or the
/// dimensions are inconsistent.
void validate(const MetaConfig &config);

/// Learnable tensors of the combination layer: P_f, b_f, alpha_f and, for
/// attention, the scoring vector and its bias.
struct MetaParams {
  std::vector<Matrix> projection;  // meta_dim x d_f each
  std::vector<Vector> bias;        // meta_dim each
  Vector alpha;                    // F
  Vector attention;                // meta_dim
  double attention_bias = 0.0;

  int facet_count() const { return static_cast<int>(projection.size()); }
};

void validate(const MetaParams &params, const MetaConfig &config);

/// Intermediate values of one meta-embedding evaluation, kept for backprop.
struct MetaForward {
  std::vector<Vector> transformed;  // P_f w_f + b_f
  Vector weights;                   // effective alpha_f
  Vector output;
};

/// Softmax over s_f = a . t_f + b_att, computed with max-subtraction.
Vector dme_weights(std::span<const Vector> transformed, const Vector &attention, double attention_bias);

MetaForward meta_forward(const MetaParams &params, const MetaConfig &config, std::span<const Vector> facet_vectors);

/// sum_f alpha_f (P_f w_f + b_f), with alpha fixed, learned or attention-computed.
Vector meta_embed(const MetaParams &params, const MetaConfig &config, std::span<const Vector> facet_vectors);

/// P + beta (P - P P^T P); identical to (1 + beta) P - beta (P P^T) P, but
/// exact at orthogonal fixed points.
Matrix orthogonal_retraction(const Matrix &p, double beta);

/// ||P P^T - I||_F
double orthogonality_error(const Matrix &p);

struct Baseline {
  MetaConfig config;
  MetaParams params;
  FreezeFlags frozen;
};

/// Builds the configuration and initial parameters for one of the four
/// combination schemes. `meta_dim` is only consulted for DME (0 means "use the
/// common facet dimension"); the others derive it from the facets.
Baseline make_baseline(BaselineKind kind, std::span<const int> facet_dims, int meta_dim = 0,
                       std::uint64_t seed = 0);

/// Ablation of the projection constraint on top of a prism baseline.
enum class ProjectionOverride { Default, None, Unconstrained, Orthogonal };
ProjectionOverride parse_projection_override(std::string_view name);
std::string_view to_string(ProjectionOverride o);
void apply_override(Baseline &baseline, ProjectionOverride o);

/// Precomputed meta-embeddings: one meta_dim row per vocabulary token.
struct MetaTable {
  VocabUnion vocab;
  RowMatrix rows;
};

std::vector<Vector> facet_lookups(std::span<const Facet> facets, const std::string &token);

MetaTable export_table(const MetaParams &params, const MetaConfig &config, std::span<const Facet> facets,
                       const VocabUnion &vocab, int threads = 1);

void write_table_text(std::ostream &out, const MetaTable &table);
/// Raw sidecar: "PRISM1", u64 |V|, u64 d', then float32 rows, little-endian.
void write_table_binary(std::ostream &out, const MetaTable &table);
RowMatrix read_table_binary(std::istream &in);

}  // namespace prism
