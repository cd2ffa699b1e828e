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

#include "mtvrp/rollout.hpp"

#include <fmt/format.h>

#include <cmath>

#include "mtvrp/errors.hpp"
#include "mtvrp/rng.hpp"

namespace mtvrp {

std::size_t RolloutBatch::best_index() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < trajectories.size(); ++i)
    if (trajectories[i].cost < trajectories[best].cost) best = i;
  return best;
}

std::vector<int> feasible_starts(const RoutingEnv& env, int limit) {
  std::vector<int> out;
  const int n = env.instance().customer_count();
  for (int j = 1; j <= n && static_cast<int>(out.size()) < limit; ++j)
    if (env.feasible_start(j)) out.push_back(j);
  return out;
}

namespace {

int argmax_row(const Matrix& probs, Eigen::Index r, const char* mask) {
  int best = -1;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    if (mask[j]) continue;
    if (best < 0 || probs(r, j) > probs(r, best)) best = static_cast<int>(j);
  }
  return best;
}

int sample_row(const Matrix& probs, Eigen::Index r, const char* mask, RandomStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    if (mask[j]) continue;
    last = static_cast<int>(j);
    acc += probs(r, j);
    if (u < acc) return last;
  }
  return last;  // rounding left u just above the total mass
}

}  // namespace

RolloutBatch multistart_rollout(const Instance& instance, const PolicyParams& params,
                                const RolloutOptions& opt, const FeasibilityRules& rules) {
  const RoutingEnv env(instance, rules);
  const int nodes = instance.node_count();
  const bool forced = opt.mode == DecodeMode::forced;

  std::vector<int> starts;
  if (forced) {
    for (const auto& seq : opt.sequences) {
      if (seq.empty()) throw ValidationError("forced rollout with an empty sequence");
      starts.push_back(seq[0]);
    }
  } else {
    const int limit = opt.n_starts > 0 ? opt.n_starts : instance.customer_count();
    starts = feasible_starts(env, limit);
  }
  if (starts.empty()) throw ValidationError(fmt::format("'{}' has no feasible start", instance.name));

  RolloutBatch batch;
  batch.mode = opt.mode;
  const auto count = starts.size();
  batch.trajectories.resize(count);

  Matrix embeddings;
  if (opt.record) {
    batch.encoder = encode_with_cache(node_features(instance), params);
    embeddings = batch.encoder.embeddings;
  } else {
    embeddings = encode(node_features(instance), params);
  }
  DecoderKeys keys = precompute_decoder(embeddings, params);

  std::vector<RolloutState> states(count);
  std::vector<RandomStream> rngs;
  const RandomStream root(opt.seed, "rollout");
  for (std::size_t i = 0; i < count; ++i) {
    states[i] = env.reset(starts[i]);
    batch.trajectories[i].start = starts[i];
    batch.trajectories[i].sequence.push_back(starts[i]);
    if (opt.mode == DecodeMode::sample) rngs.push_back(root.substream(i));
  }
  std::vector<std::size_t> cursor(count, 1);

  std::vector<int> active;
  MaskVector mask;
  DecoderStep step;
  Matrix attrs;
  while (true) {
    active.clear();
    for (std::size_t i = 0; i < count; ++i)
      if (!states[i].done) active.push_back(static_cast<int>(i));
    if (active.empty()) break;
    const auto rows = static_cast<Eigen::Index>(active.size());

    step.current.resize(active.size());
    step.mask.resize(active.size() * static_cast<std::size_t>(nodes));
    attrs.resize(rows, kAttributeDim);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& s = states[active[r]];
      env.feasible_mask(s, mask);
      std::copy(mask.masked.begin(), mask.masked.end(), step.mask.begin() + r * nodes);
      step.current[r] = s.current;
      const auto a = env.attribute_vector(s);
      for (int k = 0; k < kAttributeDim; ++k) attrs(r, k) = a[k];
    }
    decoder_forward(embeddings, keys, attrs, params, step);

    std::vector<int> actions(active.size());
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int t = active[r];
      const char* m = step.mask.data() + r * nodes;
      int a;
      if (opt.mode == DecodeMode::greedy) {
        a = argmax_row(step.probs, r, m);
      } else if (opt.mode == DecodeMode::sample) {
        a = sample_row(step.probs, r, m, rngs[t]);
      } else {
        const auto& seq = opt.sequences[t];
        if (cursor[t] < seq.size()) {
          a = seq[cursor[t]++];
        } else if (!instance.attrs.open && states[t].visited_customers == instance.customer_count()) {
          a = 0;
        } else {
          throw ValidationError(fmt::format("forced sequence {} ends before every customer is visited", t));
        }
        if (a < 0 || a >= nodes || m[a])
          throw ValidationError(fmt::format("forced sequence {} selects masked node {}", t, a));
      }
      if (opt.trace) opt.trace(t, a, env.attribute_vector(states[t]), env.feasible_mask(states[t]));
      actions[r] = a;
      auto& traj = batch.trajectories[t];
      traj.log_prob += std::log(step.probs(r, a));
      traj.sequence.push_back(a);
      env.advance(states[t], a);
    }
    if (opt.record) {
      batch.steps.push_back(step);
      batch.step_rows.push_back(active);
      batch.step_actions.push_back(std::move(actions));
    }
  }

  if (forced)
    for (std::size_t i = 0; i < count; ++i)
      if (cursor[i] < opt.sequences[i].size())
        throw ValidationError(fmt::format("forced sequence {} continues after completion", i));

  for (auto& traj : batch.trajectories) {
    traj.solution = solution_from_sequence(traj.sequence);
    traj.solution.instance_id = instance.name;
    traj.cost = solution_cost(traj.solution, instance, env.distances());
  }
  if (opt.record) batch.keys = std::move(keys);
  return batch;
}

void rollout_backward(const RolloutBatch& batch, std::span<const double> weights, const PolicyParams& params,
                      PolicyParams& grads, bool include_encoder) {
  if (batch.steps.empty() && !batch.trajectories.empty() && batch.encoder.embeddings.size() == 0)
    throw InvariantError("rollout_backward needs a recorded batch");
  if (weights.size() != batch.trajectories.size())
    throw InvariantError("rollout_backward: one weight per trajectory expected");
  const Matrix& embeddings = batch.encoder.embeddings;
  DecoderGrads dg = make_decoder_grads(static_cast<int>(embeddings.rows()), params.config.embed_dim);
  std::vector<double> row_weights;
  for (std::size_t k = 0; k < batch.steps.size(); ++k) {
    const auto& rows = batch.step_rows[k];
    row_weights.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) row_weights[r] = weights[rows[r]];
    decoder_backward(batch.steps[k], batch.step_actions[k], row_weights, batch.keys, params, grads, dg);
  }
  const Matrix de = finish_decoder_backward(embeddings, dg, params, grads);
  if (include_encoder) encode_backward(batch.encoder, de, params, grads);
}

}  // namespace mtvrp
