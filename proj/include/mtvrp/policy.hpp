// Copyright 2026 The mtvrp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtvrp/core.hpp"
#include "mtvrp/env.hpp"

namespace mtvrp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class NormMode { none, instance };

/// Node feature width: (x, y, demand, early, late).
inline constexpr int kNodeFeatureDim = 5;
/// Attribute vector width: (remaining capacity, time, route length, open).
inline constexpr int kAttributeDim = 4;

struct ModelConfig {
  int embed_dim = 128;
  int n_layers = 6;
  int n_heads = 8;
  int ff_hidden = 512;
  double clip = 10.0;
  NormMode norm = NormMode::instance;
  int feature_dim = kNodeFeatureDim;

  [[nodiscard]] int head_dim() const noexcept { return embed_dim / n_heads; }
  /// Throws UsageError on inconsistent shapes.
  void validate() const;

  /// d = 64, 3 layers, 8 heads, feed-forward width 256.
  static ModelConfig tiny();
  /// d = 8, 1 layer, 2 heads, feed-forward width 16; used by gradient checks.
  static ModelConfig micro();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string_view to_string(NormMode mode) noexcept;
NormMode norm_mode_from_string(std::string_view name);

/// All row-vector convention: activations are (rows x features) and every
/// weight maps by right-multiplication, so W^Q here is the transpose of the
/// usual column-vector projection.
struct EncoderLayerParams {
  Matrix wq, wk, wv, wo;
  Matrix ff_w1, ff_b1, ff_w2, ff_b2;
  Matrix norm1_gain, norm1_bias, norm2_gain, norm2_bias;  ///< empty when norm == none
};

struct DecoderParams {
  Matrix wq_context;  ///< (embed_dim + kAttributeDim) x embed_dim
  Matrix wk, wv, wo;
  Matrix wk_logit;  ///< key projection of the single-head pointer layer
};

struct PolicyParams {
  ModelConfig config;
  Matrix input_w, input_b;
  std::vector<EncoderLayerParams> layers;
  DecoderParams decoder;

  /// Calls f(path, matrix) for every tensor in a fixed order. Paths start
  /// with "encoder." or "decoder.".
  template <typename F>
  void visit(F&& f);
  template <typename F>
  void visit(F&& f) const;

  [[nodiscard]] std::size_t parameter_count() const;
  /// Same shapes, all zeros.
  [[nodiscard]] PolicyParams zeros_like() const;
  void set_zero();
  /// this += alpha * other (shapes must match).
  void axpy(double alpha, const PolicyParams& other);
  void scale(double alpha);
  /// FNV-1a over the raw bytes of tensors whose path starts with `prefix`.
  [[nodiscard]] std::uint64_t checksum(std::string_view prefix = "") const;
};

bool is_encoder_path(std::string_view path) noexcept;

/// Uniform(-1/sqrt(d_h), 1/sqrt(d_h)) for every tensor except normalization
/// gains (1) and biases (0). Deterministic in the seed.
PolicyParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Closed-form parameter count for a configuration.
std::size_t expected_parameter_count(const ModelConfig& config);

/// Rows are nodes (depot first): (x, y, d, e, l); time-window columns are 0
/// when TW is inactive; the depot window is [0, T].
Matrix node_features(const Instance& instance);

// ---- attention primitives -------------------------------------------------

struct AttentionResult {
  Matrix output;   ///< queries x value_dim
  Matrix weights;  ///< queries x keys
};

/// Scaled dot-product attention. `mask` (queries x keys, row-major, nonzero =
/// excluded) is optional; each row must keep at least one key.
AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v,
                          std::span<const char> mask = {});

/// Multi-head attention: heads split the projected columns evenly, outputs are
/// concatenated and projected by wo.
Matrix mha(const Matrix& queries_in, const Matrix& keys_in, const Matrix& wq, const Matrix& wk,
           const Matrix& wv, const Matrix& wo, int heads, std::span<const char> mask = {});

// ---- encoder ---------------------------------------------------------------

struct NormCache {
  Matrix xhat;
  Eigen::RowVectorXd inv_std;
};

struct EncoderLayerCache {
  Matrix input, q, k, v;
  std::vector<Matrix> attn;  ///< per head, nodes x nodes
  Matrix concat, x1, h_mid, z, r, x2;
  NormCache norm1, norm2;
};

struct EncoderCache {
  Matrix features;
  std::vector<EncoderLayerCache> layers;
  Matrix embeddings;
};

/// Node embeddings (nodes x embed_dim).
Matrix encode(const Matrix& features, const PolicyParams& params);
EncoderCache encode_with_cache(const Matrix& features, const PolicyParams& params);
/// Accumulates encoder parameter gradients for upstream d(embeddings).
void encode_backward(const EncoderCache& cache, const Matrix& d_embeddings,
                     const PolicyParams& params, PolicyParams& grads);

// ---- decoder ---------------------------------------------------------------

/// Per-instance projections of the static embeddings.
struct DecoderKeys {
  Matrix k, v, k_logit;
};

DecoderKeys precompute_decoder(const Matrix& embeddings, const PolicyParams& params);

/// One decoding step for a batch of trajectories over the same instance.
struct DecoderStep {
  std::vector<int> current;
  Matrix context;  ///< rows x (embed_dim + kAttributeDim)
  Matrix q;
  Matrix attn;     ///< rows x (heads * nodes)
  Matrix glimpse;  ///< concatenated head outputs
  Matrix hc;       ///< context-MHA output
  Matrix tanh_z;   ///< tanh of the scaled pointer compatibilities
  Matrix probs;
  std::vector<char> mask;  ///< rows x nodes, nonzero = excluded
};

/// Fills `step.context .. step.probs` from step.current, `attrs` and
/// step.mask. Masked probabilities are exactly 0.
void decoder_forward(const Matrix& embeddings, const DecoderKeys& keys, const Matrix& attrs,
                     const PolicyParams& params, DecoderStep& step);

/// Gradients of sum_r weights[r] * log probs(r, actions[r]).
struct DecoderGrads {
  Matrix k, v, k_logit;  ///< accumulated over steps; projected in finish()
  Matrix embeddings;     ///< direct contributions via the current-node context
};

DecoderGrads make_decoder_grads(int nodes, int embed_dim);

void decoder_backward(const DecoderStep& step, std::span<const int> actions,
                      std::span<const double> weights, const DecoderKeys& keys,
                      const PolicyParams& params, PolicyParams& grads, DecoderGrads& dgrads);

/// Pushes the accumulated key/value gradients through the projections.
/// Returns d(embeddings).
Matrix finish_decoder_backward(const Matrix& embeddings, const DecoderGrads& dgrads,
                               const PolicyParams& params, PolicyParams& grads);

/// Probability of each node as the next visit.
std::vector<double> decode_step(const Matrix& embeddings, int current, const AttributeVector& attrs,
                                const MaskVector& mask, const PolicyParams& params);

struct SequenceGradient {
  double log_prob = 0.0;
  PolicyParams grad;
};

/// log p(sequence | first node) and its exact gradient. The first element is
/// the forced start and is not scored; depot returns are 0; the final return
/// of closed routes may be omitted. Throws ValidationError if the sequence
/// selects a masked node.
SequenceGradient log_prob_and_grad(const Instance& instance, std::span<const int> sequence,
                                   const PolicyParams& params, const FeasibilityRules& rules = {});

/// Forward-only version of the above.
double sequence_log_prob(const Instance& instance, std::span<const int> sequence,
                         const PolicyParams& params, const FeasibilityRules& rules = {});

// ---- template definitions ---------------------------------------------------

namespace detail {
template <typename Params, typename F>
void visit_params(Params& p, F&& f) {
  f(std::string("encoder.input.weight"), p.input_w);
  f(std::string("encoder.input.bias"), p.input_b);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string base = "encoder.layers." + std::to_string(i) + ".";
    f(base + "mha.wq", l.wq);
    f(base + "mha.wk", l.wk);
    f(base + "mha.wv", l.wv);
    f(base + "mha.wo", l.wo);
    if (p.config.norm == NormMode::instance) {
      f(base + "norm1.gain", l.norm1_gain);
      f(base + "norm1.bias", l.norm1_bias);
    }
    f(base + "ff.w1", l.ff_w1);
    f(base + "ff.b1", l.ff_b1);
    f(base + "ff.w2", l.ff_w2);
    f(base + "ff.b2", l.ff_b2);
    if (p.config.norm == NormMode::instance) {
      f(base + "norm2.gain", l.norm2_gain);
      f(base + "norm2.bias", l.norm2_bias);
    }
  }
  f(std::string("decoder.context.wq"), p.decoder.wq_context);
  f(std::string("decoder.mha.wk"), p.decoder.wk);
  f(std::string("decoder.mha.wv"), p.decoder.wv);
  f(std::string("decoder.mha.wo"), p.decoder.wo);
  f(std::string("decoder.pointer.wk"), p.decoder.wk_logit);
}
}  // namespace detail

template <typename F>
void PolicyParams::visit(F&& f) {
  detail::visit_params(*this, f);
}

template <typename F>
void PolicyParams::visit(F&& f) const {
  detail::visit_params(*this, f);
}

}  // namespace mtvrp
