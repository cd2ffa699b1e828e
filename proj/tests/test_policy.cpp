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

#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mtvrp/checkpoint.hpp"
#include "mtvrp/errors.hpp"
#include "mtvrp/instancegen.hpp"
#include "mtvrp/policy.hpp"
#include "mtvrp/rollout.hpp"
#include "mtvrp/rng.hpp"
#include "reference_model.hpp"
#include "test_util.hpp"

using namespace mtvrp;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  RandomStream s(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s.uniform(-1.0, 1.0);
  return m;
}

Matrix permute_rows(const Matrix& m, const std::vector<int>& perm) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) out.row(i) = m.row(perm[i]);
  return out;
}

std::vector<int> greedy_sequence(const Instance& in, const PolicyParams& p) {
  RolloutOptions opt;
  opt.n_starts = 1;
  return multistart_rollout(in, p, opt).trajectories[0].sequence;
}

}  // namespace

TEST_CASE("attention: one key returns its value for any query") {
  const Matrix q = random_matrix(3, 4, 1);
  const Matrix k = random_matrix(1, 4, 2);
  const Matrix v = random_matrix(1, 5, 3);
  const auto r = attention(q, k, v);
  for (int i = 0; i < 3; ++i) CHECK((r.output.row(i) - v.row(0)).norm() < 1e-15);
}

TEST_CASE("attention: orthogonal query averages the values") {
  Matrix q(1, 2);
  q << 1.0, 0.0;
  Matrix k(3, 2);
  k << 0.0, 1.0, 0.0, -2.0, 0.0, 5.0;
  const Matrix v = random_matrix(3, 2, 4);
  const auto r = attention(q, k, v);
  CHECK((r.output.row(0) - v.colwise().mean()).norm() < 1e-15);
}

TEST_CASE("attention: scores (ln 3, 0) give weights (0.75, 0.25)") {
  // q.k / sqrt(1) = ln 3 for the first key, 0 for the second.
  Matrix q(1, 1);
  q << std::log(3.0);
  Matrix k(2, 1);
  k << 1.0, 0.0;
  Matrix v(2, 1);
  v << 1.0, 0.0;
  const auto r = attention(q, k, v);
  CHECK(r.weights(0, 0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(r.weights(0, 1) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("mha with one head is attention followed by the output projection") {
  const Matrix x = random_matrix(5, 4, 10);
  const Matrix wq = random_matrix(4, 4, 11), wk = random_matrix(4, 4, 12), wv = random_matrix(4, 4, 13),
               wo = random_matrix(4, 4, 14);
  const Matrix got = mha(x, x, wq, wk, wv, wo, 1);
  const Matrix want = attention(x * wq, x * wk, x * wv).output * wo;
  CHECK((got - want).norm() < 1e-12);
  CHECK(mha(x, x, wq, wk, wv, Matrix::Zero(4, 4), 2).norm() == 0.0);
}

TEST_CASE("mha is equivariant to node permutations") {
  const Matrix x = random_matrix(6, 8, 20);
  const Matrix wq = random_matrix(8, 8, 21), wk = random_matrix(8, 8, 22), wv = random_matrix(8, 8, 23),
               wo = random_matrix(8, 8, 24);
  const std::vector<int> perm{3, 0, 5, 1, 4, 2};
  const Matrix a = permute_rows(mha(x, x, wq, wk, wv, wo, 2), perm);
  const Matrix b = mha(permute_rows(x, perm), permute_rows(x, perm), wq, wk, wv, wo, 2);
  CHECK((a - b).norm() < 1e-12);
}

TEST_CASE("encoder: shapes, zero parameters and permutation equivariance") {
  for (const auto norm : {NormMode::none, NormMode::instance}) {
    ModelConfig cfg = ModelConfig::micro();
    cfg.norm = norm;
    PolicyParams p = init_params(cfg, 5);
    GenConfig g;
    g.n = 7;
    g.seed = 3;
    const Instance in = gen_variant("VRPTW", g);
    const Matrix f = node_features(in);
    const Matrix e = encode(f, p);
    CHECK(e.rows() == 8);
    CHECK(e.cols() == cfg.embed_dim);

    const std::vector<int> perm{0, 4, 2, 7, 1, 6, 5, 3};
    CHECK((permute_rows(e, perm) - encode(permute_rows(f, perm), p)).norm() < 1e-10);

    if (norm == NormMode::none) {
      p.set_zero();
      CHECK(encode(f, p).norm() == 0.0);
    }
  }
}

TEST_CASE("node features zero-pad inactive attributes and keep the depot row") {
  auto in = testing::make_instance({{0.3, 0.4}, {0.6, 0.8}}, {0.2, 0.1});
  Matrix f = node_features(in);
  CHECK(f.rows() == 3);
  CHECK(f.cols() == kNodeFeatureDim);
  CHECK(f.col(3).norm() == 0.0);
  CHECK(f.col(4).norm() == 0.0);
  testing::add_windows(in, {1.0, 2.0}, {1.2, 2.2}, 0.1, 4.6);
  f = node_features(in);
  CHECK(f(0, 4) == 4.6);
  CHECK(f(2, 3) == 2.0);
}

TEST_CASE("parameter counts") {
  CHECK(init_params(ModelConfig{}, 1).parameter_count() == expected_parameter_count(ModelConfig{}));
  const double full = static_cast<double>(init_params(ModelConfig{}, 1).parameter_count());
  CHECK(std::abs(full - 1.35e6) / 1.35e6 < 0.10);

  // d=8, N=1, h=2, ff=16, hand count:
  // input 5*8+8 = 48; layer 4*64 + (8*16+16) + (16*8+8) + 4*8 = 568;
  // decoder (8+4)*8 + 4*64 = 352.
  CHECK(init_params(ModelConfig::micro(), 1).parameter_count() == 48 + 568 + 352);
}

TEST_CASE("init is deterministic per seed and bounded") {
  const auto a = init_params(ModelConfig::micro(), 9);
  const auto b = init_params(ModelConfig::micro(), 9);
  const auto c = init_params(ModelConfig::micro(), 10);
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());
  const double bound = 1.0 / std::sqrt(8.0);
  a.visit([&](const std::string& name, const Matrix& m) {
    if (name.find(".norm") != std::string::npos) return;
    CHECK(m.cwiseAbs().maxCoeff() <= bound);
  });
}

TEST_CASE("decode_step: distribution on unmasked nodes only") {
  const auto p = init_params(ModelConfig::micro(), 2);
  GenConfig g;
  g.n = 6;
  g.seed = 8;
  const Instance in = gen_variant("CVRP", g);
  const Matrix e = encode(node_features(in), p);
  MaskVector m;
  m.masked = {1, 0, 1, 0, 0, 1, 0};
  m.reasons.assign(7, 0);
  const auto probs = decode_step(e, 2, {0.5, 0, 0, 0}, m, p);
  double total = 0.0;
  for (int j = 0; j < 7; ++j) {
    if (m.masked[j]) CHECK(probs[j] == 0.0);
    total += probs[j];
  }
  CHECK(std::abs(total - 1.0) < 1e-9);

  SUBCASE("single unmasked node gets probability 1") {
    m.masked = {1, 1, 1, 1, 0, 1, 1};
    CHECK(decode_step(e, 2, {0.5, 0, 0, 0}, m, p)[4] == 1.0);
  }
  SUBCASE("zero pointer keys give a uniform distribution") {
    auto q = p;
    q.decoder.wk_logit.setZero();
    m.masked = {1, 0, 1, 0, 1, 1, 0};
    const auto u = decode_step(e, 2, {0.5, 0, 0, 0}, m, q);
    CHECK(u[1] == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(u[3] == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(u[6] == doctest::Approx(1.0 / 3).epsilon(1e-14));
  }
  SUBCASE("fully masked input is rejected") {
    m.masked.assign(7, 1);
    CHECK_THROWS_AS((void)decode_step(e, 2, {0.5, 0, 0, 0}, m, p), InvariantError);
  }
}

TEST_CASE("clipping bounds the logits to [-10, 10]") {
  // Huge weights saturate tanh; the probability ratio can never exceed e^20.
  auto p = init_params(ModelConfig::micro(), 3);
  p.scale(50.0);
  GenConfig g;
  g.n = 9;
  g.seed = 1;
  const Instance in = gen_variant("CVRP", g);
  const Matrix e = encode(node_features(in), p);
  MaskVector m;
  m.masked.assign(10, 0);
  m.masked[0] = 1;
  m.reasons.assign(10, 0);
  const auto probs = decode_step(e, 0, {1, 0, 0, 0}, m, p);
  double lo = 1.0, hi = 0.0;
  for (int j = 1; j < 10; ++j) {
    lo = std::min(lo, probs[j]);
    hi = std::max(hi, probs[j]);
  }
  CHECK(std::log(hi / lo) <= 20.0 + 1e-9);
}

TEST_CASE("perturbing a masked node's embedding leaves the step distribution unchanged") {
  const auto p = init_params(ModelConfig::micro(), 4);
  GenConfig g;
  g.n = 6;
  g.seed = 2;
  const Instance in = gen_variant("CVRP", g);
  Matrix e = encode(node_features(in), p);
  MaskVector m;
  m.masked = {1, 0, 0, 1, 0, 0, 0};
  m.reasons.assign(7, 0);
  const auto before = decode_step(e, 2, {0.4, 0, 0, 0}, m, p);
  e.row(3) += random_matrix(1, 8, 77);
  const auto after = decode_step(e, 2, {0.4, 0, 0, 0}, m, p);
  for (int j = 0; j < 7; ++j) CHECK(before[j] == after[j]);
}

TEST_CASE("single customer: log-probability and gradient are zero") {
  const auto p = init_params(ModelConfig::micro(), 6);
  const auto in = testing::make_instance({{0.3, 0.4}}, {0.5});
  const auto r = log_prob_and_grad(in, std::vector<int>{1, 0}, p);
  CHECK(r.log_prob == 0.0);
  double norm = 0.0;
  r.grad.visit([&](const std::string&, const Matrix& m) { norm += m.squaredNorm(); });
  CHECK(norm == 0.0);
}

TEST_CASE("a masked node in the sequence is rejected") {
  const auto p = init_params(ModelConfig::micro(), 6);
  const auto in = testing::make_instance({{0.3, 0.4}, {0.1, 0.1}}, {0.7, 0.7});
  CHECK_THROWS_AS((void)log_prob_and_grad(in, std::vector<int>{1, 2}, p), ValidationError);
  CHECK_NOTHROW((void)log_prob_and_grad(in, std::vector<int>{1, 0, 2}, p));
}

namespace {

/// Central differences of the independent long-double forward pass against
/// the analytic gradient, per tensor.
void gradient_check(const Instance& in, const ModelConfig& cfg, std::uint64_t seed) {
  const PolicyParams p = init_params(cfg, seed);
  const auto seq = greedy_sequence(in, p);
  const auto analytic = log_prob_and_grad(in, seq, p);
  CHECK(analytic.log_prob == doctest::Approx(sequence_log_prob(in, seq, p)).epsilon(1e-12));
  const auto ref = testing::reference_log_prob(testing::to_reference(p), cfg, node_features(in),
                                               testing::reference_steps(in, seq));
  CHECK(analytic.log_prob == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));

  for (const auto& t : testing::finite_difference_check(in, seq, p, analytic.grad, 1e-5, 1e-8)) {
    INFO(t.name, " relative error ", t.relative_error, " fd ", t.fd_norm, " an ", t.analytic_norm);
    CHECK(t.relative_error < 1e-4);
  }
}

}  // namespace

TEST_CASE("finite differences match the analytic gradient (CVRP, instance norm)") {
  GenConfig g;
  g.n = 4;
  g.seed = 11;
  gradient_check(gen_variant("CVRP", g), ModelConfig::micro(), 21);
}

TEST_CASE("instance norm makes the feed-forward output bias inert") {
  GenConfig g;
  g.n = 5;
  g.seed = 13;
  const Instance in = gen_variant("CVRP", g);
  PolicyParams p = init_params(ModelConfig::micro(), 23);
  const auto seq = greedy_sequence(in, p);
  const auto grad = log_prob_and_grad(in, seq, p);
  CHECK(grad.grad.layers[0].ff_b2.norm() < 1e-12);
  const double before = sequence_log_prob(in, seq, p);
  p.layers[0].ff_b2.array() += 0.3;
  CHECK(sequence_log_prob(in, seq, p) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("finite differences match the analytic gradient (OVRPBLTW, no norm)") {
  GenConfig g;
  g.n = 4;
  g.seed = 12;
  ModelConfig cfg = ModelConfig::micro();
  cfg.norm = NormMode::none;
  gradient_check(gen_variant("OVRPBLTW", g), cfg, 22);
}

TEST_CASE("batched rollout backward equals the sum of per-sequence gradients") {
  const auto p = init_params(ModelConfig::micro(), 30);
  GenConfig g;
  g.n = 6;
  g.seed = 5;
  const Instance in = gen_variant("VRPBLTW", g);
  RolloutOptions opt;
  opt.mode = DecodeMode::sample;
  opt.seed = 99;
  opt.record = true;
  const RolloutBatch batch = multistart_rollout(in, p, opt);
  std::vector<double> w;
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) w.push_back(0.3 * static_cast<double>(i) - 0.7);

  PolicyParams batched = p.zeros_like();
  rollout_backward(batch, w, p, batched);
  PolicyParams reference = p.zeros_like();
  for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
    const auto& t = batch.trajectories[i];
    const auto r = log_prob_and_grad(in, t.sequence, p);
    CHECK(r.log_prob == doctest::Approx(t.log_prob).epsilon(1e-12));
    reference.axpy(w[i], r.grad);
  }
  PolicyParams diff = batched;
  diff.axpy(-1.0, reference);
  double dn = 0.0, rn = 0.0;
  diff.visit([&](const std::string&, const Matrix& m) { dn += m.squaredNorm(); });
  reference.visit([&](const std::string&, const Matrix& m) { rn += m.squaredNorm(); });
  CHECK(std::sqrt(dn) <= 1e-10 * std::sqrt(rn));
}

TEST_CASE("checkpoints round-trip byte for byte") {
  for (NormMode norm : {NormMode::instance, NormMode::none}) {
    ModelConfig cfg = ModelConfig::micro();
    cfg.norm = norm;
    Checkpoint ck{init_params(cfg, 40), Json::object()};
    ck.metadata["note"] = "x";
    const std::string bytes = serialize_checkpoint(ck);
    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back.params.config == cfg);
    CHECK(back.params.checksum() == ck.params.checksum());
    CHECK(back.metadata["note"] == "x");
    CHECK(serialize_checkpoint(back) == bytes);
  }
}

TEST_CASE("corrupt checkpoints report the byte offset") {
  const std::string bytes = serialize_checkpoint({init_params(ModelConfig::micro(), 1), Json::object()});
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS((void)deserialize_checkpoint(bad), doctest::Contains("byte 0"), IoError);
  bad = bytes;
  bad[8] = 7;
  CHECK_THROWS_WITH_AS((void)deserialize_checkpoint(bad), doctest::Contains("byte 8"), IoError);
  CHECK_THROWS_WITH_AS((void)deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), doctest::Contains("byte"),
                       IoError);
}
