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

#include "mtvrp/policy.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "mtvrp/errors.hpp"
#include "mtvrp/rng.hpp"

namespace mtvrp {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kMaskedLogit = -1e9;

template <typename Params>
auto tensor_list(Params& p) {
  using Ptr = std::conditional_t<std::is_const_v<Params>, const Matrix*, Matrix*>;
  std::vector<Ptr> out;
  p.visit([&](const std::string&, auto& m) { out.push_back(&m); });
  return out;
}

/// Row-wise softmax of `scores` restricted to unmasked entries, in place.
/// Masked entries become exactly 0.
template <typename Derived>
void masked_softmax_rows(Eigen::MatrixBase<Derived>& scores, const char* mask) {
  const auto rows = scores.rows();
  const auto cols = scores.cols();
  for (Eigen::Index r = 0; r < rows; ++r) {
    const char* m = mask ? mask + r * cols : nullptr;
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < cols; ++c)
      if (!m || !m[c]) top = std::max(top, scores(r, c));
    double sum = 0.0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (m && m[c]) {
        scores(r, c) = 0.0;
      } else {
        const double e = std::exp(scores(r, c) - top);
        scores(r, c) = e;
        sum += e;
      }
    }
    scores.row(r) /= sum;
  }
}

Matrix instance_norm_forward(const Matrix& x, const Matrix& gain, const Matrix& bias, NormCache& cache) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Matrix centered = x.rowwise() - mean;
  const Eigen::RowVectorXd var = centered.array().square().colwise().sum() / n;
  cache.inv_std = (var.array() + kNormEps).rsqrt();
  cache.xhat = centered.array().rowwise() * cache.inv_std.array();
  Matrix y = cache.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix instance_norm_backward(const Matrix& dy, const NormCache& cache, const Matrix& gain,
                              Matrix& dgain, Matrix& dbias) {
  const auto n = static_cast<double>(dy.rows());
  dgain.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
  const Eigen::RowVectorXd sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).colwise().sum();
  Matrix dx = (n * dxhat).rowwise() - sum_dxhat;
  dx -= (cache.xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
  dx = dx.array().rowwise() * (cache.inv_std.array() / n);
  return dx;
}

/// d(scores) of a softmax given its output and upstream d(weights).
Matrix softmax_backward(const Matrix& weights, const Matrix& dweights) {
  const Eigen::VectorXd dot = (weights.array() * dweights.array()).rowwise().sum();
  Matrix ds = dweights.colwise() - dot;
  return weights.cwiseProduct(ds);
}

}  // namespace

// ---- configuration ----------------------------------------------------------

void ModelConfig::validate() const {
  if (embed_dim < 1 || n_heads < 1 || n_layers < 0 || ff_hidden < 1 || feature_dim < 1)
    throw UsageError("model dimensions must be positive");
  if (embed_dim % n_heads != 0)
    throw UsageError(fmt::format("embed_dim {} not divisible by {} heads", embed_dim, n_heads));
  if (!(clip > 0.0)) throw UsageError("clip must be positive");
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.embed_dim = 64;
  c.n_layers = 3;
  c.n_heads = 8;
  c.ff_hidden = 256;
  return c;
}

ModelConfig ModelConfig::micro() {
  ModelConfig c;
  c.embed_dim = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.ff_hidden = 16;
  return c;
}

std::string_view to_string(NormMode mode) noexcept {
  return mode == NormMode::instance ? "instance" : "none";
}

NormMode norm_mode_from_string(std::string_view name) {
  if (name == "instance") return NormMode::instance;
  if (name == "none") return NormMode::none;
  throw UsageError(fmt::format("unknown normalization '{}' (expected none|instance)", name));
}

// ---- parameters -------------------------------------------------------------

bool is_encoder_path(std::string_view path) noexcept { return path.starts_with("encoder."); }

std::size_t PolicyParams::parameter_count() const {
  std::size_t count = 0;
  visit([&](const std::string&, const Matrix& m) { count += static_cast<std::size_t>(m.size()); });
  return count;
}

PolicyParams PolicyParams::zeros_like() const {
  PolicyParams out = *this;
  out.set_zero();
  return out;
}

void PolicyParams::set_zero() {
  visit([](const std::string&, Matrix& m) { m.setZero(); });
}

void PolicyParams::axpy(double alpha, const PolicyParams& other) {
  auto mine = tensor_list(*this);
  auto theirs = tensor_list(other);
  if (mine.size() != theirs.size()) throw InvariantError("parameter layouts differ");
  for (std::size_t i = 0; i < mine.size(); ++i) *mine[i] += alpha * *theirs[i];
}

void PolicyParams::scale(double alpha) {
  visit([&](const std::string&, Matrix& m) { m *= alpha; });
}

std::uint64_t PolicyParams::checksum(std::string_view prefix) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  visit([&](const std::string& path, const Matrix& m) {
    if (!path.starts_with(prefix)) return;
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  });
  return h;
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t d = c.embed_dim;
  const std::size_t ff = c.ff_hidden;
  std::size_t per_layer = 4 * d * d + (d * ff + ff) + (ff * d + d);
  if (c.norm == NormMode::instance) per_layer += 4 * d;
  const std::size_t input = c.feature_dim * d + d;
  const std::size_t decoder = (d + kAttributeDim) * d + 4 * d * d;
  return input + per_layer * c.n_layers + decoder;
}

PolicyParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const int d = config.embed_dim;
  PolicyParams p;
  p.config = config;
  p.input_w = Matrix::Zero(config.feature_dim, d);
  p.input_b = Matrix::Zero(1, d);
  p.layers.resize(config.n_layers);
  for (auto& l : p.layers) {
    l.wq = l.wk = l.wv = l.wo = Matrix::Zero(d, d);
    l.ff_w1 = Matrix::Zero(d, config.ff_hidden);
    l.ff_b1 = Matrix::Zero(1, config.ff_hidden);
    l.ff_w2 = Matrix::Zero(config.ff_hidden, d);
    l.ff_b2 = Matrix::Zero(1, d);
    if (config.norm == NormMode::instance) {
      l.norm1_gain = l.norm2_gain = Matrix::Ones(1, d);
      l.norm1_bias = l.norm2_bias = Matrix::Zero(1, d);
    }
  }
  p.decoder.wq_context = Matrix::Zero(d + kAttributeDim, d);
  p.decoder.wk = p.decoder.wv = p.decoder.wo = p.decoder.wk_logit = Matrix::Zero(d, d);

  const RandomStream root(seed, "init");
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  p.visit([&](const std::string& path, Matrix& m) {
    if (path.find(".norm") != std::string::npos) return;
    RandomStream s = root.substream(path);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s.uniform(-bound, bound);
  });
  return p;
}

Matrix node_features(const Instance& in) {
  const int nodes = in.node_count();
  Matrix f = Matrix::Zero(nodes, kNodeFeatureDim);
  for (int i = 0; i < nodes; ++i) {
    f(i, 0) = in.coords[i].x;
    f(i, 1) = in.coords[i].y;
    f(i, 2) = in.demands[i];
    if (in.attrs.time_windows) {
      f(i, 3) = in.tw_early[i];
      f(i, 4) = in.tw_late[i];
    }
  }
  return f;
}

// ---- attention ----------------------------------------------------------------

AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v, std::span<const char> mask) {
  AttentionResult r;
  r.weights = (q * k.transpose()) * (1.0 / std::sqrt(static_cast<double>(q.cols())));
  masked_softmax_rows(r.weights, mask.empty() ? nullptr : mask.data());
  r.output = r.weights * v;
  return r;
}

Matrix mha(const Matrix& queries_in, const Matrix& keys_in, const Matrix& wq, const Matrix& wk,
           const Matrix& wv, const Matrix& wo, int heads, std::span<const char> mask) {
  const Matrix q = queries_in * wq;
  const Matrix k = keys_in * wk;
  const Matrix v = keys_in * wv;
  const auto dk = q.cols() / heads;
  const auto dv = v.cols() / heads;
  Matrix concat(q.rows(), v.cols());
  for (int h = 0; h < heads; ++h) {
    const auto r = attention(q.middleCols(h * dk, dk), k.middleCols(h * dk, dk),
                             v.middleCols(h * dv, dv), mask);
    concat.middleCols(h * dv, dv) = r.output;
  }
  return concat * wo;
}

// ---- encoder ------------------------------------------------------------------

EncoderCache encode_with_cache(const Matrix& features, const PolicyParams& p) {
  const auto& cfg = p.config;
  const int heads = cfg.n_heads;
  const int dk = cfg.head_dim();
  const bool norm = cfg.norm == NormMode::instance;
  EncoderCache c;
  c.features = features;
  Matrix h = features * p.input_w;
  h.rowwise() += p.input_b.row(0);
  c.layers.resize(p.layers.size());
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const auto& l = p.layers[li];
    auto& lc = c.layers[li];
    lc.input = h;
    lc.q = h * l.wq;
    lc.k = h * l.wk;
    lc.v = h * l.wv;
    lc.concat.resize(h.rows(), h.cols());
    lc.attn.resize(heads);
    for (int hd = 0; hd < heads; ++hd) {
      auto r = attention(lc.q.middleCols(hd * dk, dk), lc.k.middleCols(hd * dk, dk),
                         lc.v.middleCols(hd * dk, dk));
      lc.concat.middleCols(hd * dk, dk) = r.output;
      lc.attn[hd] = std::move(r.weights);
    }
    lc.x1 = h + lc.concat * l.wo;
    lc.h_mid = norm ? instance_norm_forward(lc.x1, l.norm1_gain, l.norm1_bias, lc.norm1) : lc.x1;
    lc.z = lc.h_mid * l.ff_w1;
    lc.z.rowwise() += l.ff_b1.row(0);
    lc.r = lc.z.cwiseMax(0.0);
    lc.x2 = lc.h_mid + lc.r * l.ff_w2;
    lc.x2.rowwise() += l.ff_b2.row(0);
    h = norm ? instance_norm_forward(lc.x2, l.norm2_gain, l.norm2_bias, lc.norm2) : lc.x2;
  }
  c.embeddings = std::move(h);
  return c;
}

Matrix encode(const Matrix& features, const PolicyParams& params) {
  return encode_with_cache(features, params).embeddings;
}

void encode_backward(const EncoderCache& c, const Matrix& d_embeddings, const PolicyParams& p,
                     PolicyParams& g) {
  const int heads = p.config.n_heads;
  const int dk = p.config.head_dim();
  const bool norm = p.config.norm == NormMode::instance;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix dh = d_embeddings;
  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& l = p.layers[li];
    auto& gl = g.layers[li];
    const auto& lc = c.layers[li];

    const Matrix dx2 = norm ? instance_norm_backward(dh, lc.norm2, l.norm2_gain, gl.norm2_gain, gl.norm2_bias) : dh;
    gl.ff_w2.noalias() += lc.r.transpose() * dx2;
    gl.ff_b2.row(0) += dx2.colwise().sum();
    Matrix dz = dx2 * l.ff_w2.transpose();
    dz = dz.cwiseProduct((lc.z.array() > 0.0).cast<double>().matrix());
    gl.ff_w1.noalias() += lc.h_mid.transpose() * dz;
    gl.ff_b1.row(0) += dz.colwise().sum();
    const Matrix dh_mid = dx2 + dz * l.ff_w1.transpose();

    const Matrix dx1 = norm ? instance_norm_backward(dh_mid, lc.norm1, l.norm1_gain, gl.norm1_gain, gl.norm1_bias) : dh_mid;
    gl.wo.noalias() += lc.concat.transpose() * dx1;
    const Matrix dconcat = dx1 * l.wo.transpose();
    Matrix dq(dconcat.rows(), dconcat.cols());
    Matrix dk_(dconcat.rows(), dconcat.cols());
    Matrix dv(dconcat.rows(), dconcat.cols());
    for (int hd = 0; hd < heads; ++hd) {
      const Matrix& a = lc.attn[hd];
      const Matrix dout = dconcat.middleCols(hd * dk, dk);
      const Matrix da = dout * lc.v.middleCols(hd * dk, dk).transpose();
      dv.middleCols(hd * dk, dk) = a.transpose() * dout;
      const Matrix ds = softmax_backward(a, da) * scale;
      dq.middleCols(hd * dk, dk) = ds * lc.k.middleCols(hd * dk, dk);
      dk_.middleCols(hd * dk, dk) = ds.transpose() * lc.q.middleCols(hd * dk, dk);
    }
    gl.wq.noalias() += lc.input.transpose() * dq;
    gl.wk.noalias() += lc.input.transpose() * dk_;
    gl.wv.noalias() += lc.input.transpose() * dv;
    dh = dx1 + dq * l.wq.transpose() + dk_ * l.wk.transpose() + dv * l.wv.transpose();
  }
  g.input_w.noalias() += c.features.transpose() * dh;
  g.input_b.row(0) += dh.colwise().sum();
}

// ---- decoder ------------------------------------------------------------------

DecoderKeys precompute_decoder(const Matrix& embeddings, const PolicyParams& p) {
  return {embeddings * p.decoder.wk, embeddings * p.decoder.wv, embeddings * p.decoder.wk_logit};
}

void decoder_forward(const Matrix& embeddings, const DecoderKeys& keys, const Matrix& attrs,
                     const PolicyParams& p, DecoderStep& s) {
  const auto rows = static_cast<Eigen::Index>(s.current.size());
  const auto nodes = embeddings.rows();
  const int d = p.config.embed_dim;
  const int heads = p.config.n_heads;
  const int dk = p.config.head_dim();
  const char* mask = s.mask.data();

  s.context.resize(rows, d + kAttributeDim);
  for (Eigen::Index r = 0; r < rows; ++r) {
    s.context.row(r).head(d) = embeddings.row(s.current[r]);
    s.context.row(r).tail(kAttributeDim) = attrs.row(r);
  }
  s.q.noalias() = s.context * p.decoder.wq_context;
  s.attn.resize(rows, heads * nodes);
  s.glimpse.resize(rows, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  for (int h = 0; h < heads; ++h) {
    auto a = s.attn.middleCols(h * nodes, nodes);
    a.noalias() = s.q.middleCols(h * dk, dk) * keys.k.middleCols(h * dk, dk).transpose();
    a *= scale;
    masked_softmax_rows(a, mask);
    s.glimpse.middleCols(h * dk, dk).noalias() = a * keys.v.middleCols(h * dk, dk);
  }
  s.hc.noalias() = s.glimpse * p.decoder.wo;
  s.tanh_z.noalias() = s.hc * keys.k_logit.transpose();
  s.tanh_z = (s.tanh_z * (1.0 / std::sqrt(static_cast<double>(d)))).array().tanh();

  s.probs.resize(rows, nodes);
  const double clip = p.config.clip;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index j = 0; j < nodes; ++j)
      s.probs(r, j) = mask[r * nodes + j] ? kMaskedLogit : clip * s.tanh_z(r, j);
  masked_softmax_rows(s.probs, mask);
}

DecoderGrads make_decoder_grads(int nodes, int embed_dim) {
  return {Matrix::Zero(nodes, embed_dim), Matrix::Zero(nodes, embed_dim),
          Matrix::Zero(nodes, embed_dim), Matrix::Zero(nodes, embed_dim)};
}

void decoder_backward(const DecoderStep& s, std::span<const int> actions, std::span<const double> weights,
                      const DecoderKeys& keys, const PolicyParams& p, PolicyParams& g,
                      DecoderGrads& dg) {
  const auto rows = static_cast<Eigen::Index>(s.current.size());
  const auto nodes = s.probs.cols();
  const int d = p.config.embed_dim;
  const int heads = p.config.n_heads;
  const int dk = p.config.head_dim();
  const double clip = p.config.clip;
  const double scale_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double scale_k = 1.0 / std::sqrt(static_cast<double>(dk));

  // d log p_a / d u_j = onehot(a) - p.
  Matrix dz(rows, nodes);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double w = weights[r];
    for (Eigen::Index j = 0; j < nodes; ++j) {
      const double du = w * ((j == actions[r] ? 1.0 : 0.0) - s.probs(r, j));
      const double t = s.tanh_z(r, j);
      dz(r, j) = s.mask[r * nodes + j] ? 0.0 : du * clip * (1.0 - t * t) * scale_d;
    }
  }
  const Matrix dhc = dz * keys.k_logit;
  dg.k_logit.noalias() += dz.transpose() * s.hc;
  g.decoder.wo.noalias() += s.glimpse.transpose() * dhc;
  const Matrix dglimpse = dhc * p.decoder.wo.transpose();

  Matrix dq(rows, d);
  for (int h = 0; h < heads; ++h) {
    const Matrix a = s.attn.middleCols(h * nodes, nodes);
    const Matrix dout = dglimpse.middleCols(h * dk, dk);
    const Matrix da = dout * keys.v.middleCols(h * dk, dk).transpose();
    dg.v.middleCols(h * dk, dk).noalias() += a.transpose() * dout;
    const Matrix ds = softmax_backward(a, da) * scale_k;
    dq.middleCols(h * dk, dk).noalias() = ds * keys.k.middleCols(h * dk, dk);
    dg.k.middleCols(h * dk, dk).noalias() += ds.transpose() * s.q.middleCols(h * dk, dk);
  }
  g.decoder.wq_context.noalias() += s.context.transpose() * dq;
  const Matrix dcontext = dq * p.decoder.wq_context.transpose();
  for (Eigen::Index r = 0; r < rows; ++r) dg.embeddings.row(s.current[r]) += dcontext.row(r).head(d);
}

Matrix finish_decoder_backward(const Matrix& embeddings, const DecoderGrads& dg, const PolicyParams& p,
                               PolicyParams& g) {
  g.decoder.wk.noalias() += embeddings.transpose() * dg.k;
  g.decoder.wv.noalias() += embeddings.transpose() * dg.v;
  g.decoder.wk_logit.noalias() += embeddings.transpose() * dg.k_logit;
  Matrix de = dg.embeddings;
  de.noalias() += dg.k * p.decoder.wk.transpose();
  de.noalias() += dg.v * p.decoder.wv.transpose();
  de.noalias() += dg.k_logit * p.decoder.wk_logit.transpose();
  return de;
}

std::vector<double> decode_step(const Matrix& embeddings, int current, const AttributeVector& attrs,
                                const MaskVector& mask, const PolicyParams& params) {
  if (mask.unmasked_count() == 0) throw InvariantError("decode_step: every node is masked");
  const DecoderKeys keys = precompute_decoder(embeddings, params);
  DecoderStep s;
  s.current = {current};
  s.mask = mask.masked;
  Matrix a(1, kAttributeDim);
  for (int i = 0; i < kAttributeDim; ++i) a(0, i) = attrs[i];
  decoder_forward(embeddings, keys, a, params, s);
  return {s.probs.data(), s.probs.data() + s.probs.size()};
}

// ---- sequence scoring -----------------------------------------------------------

namespace {

/// Walks `sequence` one decoder step at a time; calls on_step(step, action)
/// after each forward pass.
template <typename OnStep>
void walk_sequence(const RoutingEnv& env, std::span<const int> sequence, const Matrix& embeddings,
                   const DecoderKeys& keys, const PolicyParams& params, OnStep&& on_step) {
  if (sequence.empty()) throw ValidationError("empty sequence");
  const int start = sequence[0];
  if (!env.feasible_start(start))
    throw ValidationError(fmt::format("sequence starts at infeasible node {}", start));
  RolloutState state = env.reset(start);
  MaskVector mask;
  std::size_t k = 1;
  while (!state.done) {
    env.feasible_mask(state, mask);
    int action;
    if (k < sequence.size()) {
      action = sequence[k++];
    } else if (!env.instance().attrs.open && state.current != 0 &&
               state.visited_customers == env.instance().customer_count()) {
      action = 0;
    } else {
      throw ValidationError("sequence ends before every customer is visited");
    }
    if (action < 0 || action >= env.instance().node_count() || mask.is_masked(action))
      throw ValidationError(fmt::format("sequence selects masked node {} at position {}", action, k - 1));
    DecoderStep s;
    s.current = {state.current};
    s.mask = mask.masked;
    const auto av = env.attribute_vector(state);
    Matrix a(1, kAttributeDim);
    for (int i = 0; i < kAttributeDim; ++i) a(0, i) = av[i];
    decoder_forward(embeddings, keys, a, params, s);
    on_step(s, action);
    env.advance(state, action);
  }
  if (k < sequence.size()) throw ValidationError("sequence continues after completion");
}

}  // namespace

SequenceGradient log_prob_and_grad(const Instance& instance, std::span<const int> sequence,
                                   const PolicyParams& params, const FeasibilityRules& rules) {
  const RoutingEnv env(instance, rules);
  const EncoderCache enc = encode_with_cache(node_features(instance), params);
  const DecoderKeys keys = precompute_decoder(enc.embeddings, params);
  SequenceGradient out{0.0, params.zeros_like()};
  DecoderGrads dg = make_decoder_grads(instance.node_count(), params.config.embed_dim);
  const double one = 1.0;
  walk_sequence(env, sequence, enc.embeddings, keys, params, [&](const DecoderStep& s, int action) {
    out.log_prob += std::log(s.probs(0, action));
    decoder_backward(s, std::span(&action, 1), std::span(&one, 1), keys, params, out.grad, dg);
  });
  const Matrix de = finish_decoder_backward(enc.embeddings, dg, params, out.grad);
  encode_backward(enc, de, params, out.grad);
  return out;
}

double sequence_log_prob(const Instance& instance, std::span<const int> sequence,
                         const PolicyParams& params, const FeasibilityRules& rules) {
  const RoutingEnv env(instance, rules);
  const Matrix embeddings = encode(node_features(instance), params);
  const DecoderKeys keys = precompute_decoder(embeddings, params);
  double total = 0.0;
  walk_sequence(env, sequence, embeddings, keys, params,
                [&](const DecoderStep& s, int action) { total += std::log(s.probs(0, action)); });
  return total;
}

}  // namespace mtvrp
