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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtvrp/instance_io.hpp"
#include "mtvrp/policy.hpp"

namespace mtvrp {

// ---- CVRPLIB ------------------------------------------------------------------

/// Parses NAME, DIMENSION, CAPACITY, NODE_COORD_SECTION, DEMAND_SECTION,
/// DEPOT_SECTION and EOF. Coordinates are min-max scaled into [0,1]^2 with the
/// instance bounding box (one common scale for both axes keeps distances
/// proportional); demands are divided by CAPACITY. The depot is moved to
/// index 0. Throws ValidationError on malformed input.
Instance parse_cvrplib(std::string_view text);
Instance read_cvrplib(const std::filesystem::path& path);

// ---- gaps and references -------------------------------------------------------

/// 100 * (cost - reference) / reference. Throws UsageError if reference <= 0.
double gap(double cost, double reference);

struct ReferenceRecord {
  std::string source;  ///< HGS, LKH3, BKS or published
  std::string method;
  std::string variant;
  int n = 0;
  double value = 0.0;
  std::string provenance;
};

/// Loads {"version":1,"records":[...]}; every record needs a positive value
/// and a provenance string.
std::vector<ReferenceRecord> load_references(const std::filesystem::path& path);
std::optional<double> find_reference(const std::vector<ReferenceRecord>& records, std::string_view method,
                                     std::string_view variant, int n);

// ---- embeddings ----------------------------------------------------------------

struct EmbeddingSample {
  std::string variant;
  std::vector<double> vector;  ///< decoder context-MHA output, length embed_dim
};

/// Greedy single-start decoding over `instances`; every decoding step yields
/// one candidate vector and k of them are drawn uniformly without
/// replacement (all of them if fewer than k exist).
std::vector<EmbeddingSample> collect_embeddings(const PolicyParams& params, const std::vector<Instance>& instances,
                                                int k, std::uint64_t seed);

/// Symmetric Hausdorff distance between finite point sets (rows). Throws
/// UsageError on an empty set or mismatched dimensions.
double hausdorff(const Matrix& a, const Matrix& b);
Matrix to_matrix(const std::vector<EmbeddingSample>& samples);

// ---- evaluation suite ----------------------------------------------------------

struct EvalConfig {
  std::vector<std::string> variants;
  int n = 20;
  int count = 100;
  std::vector<std::string> solvers{"ni", "fi", "greedy", "aug8"};
  /// A solver in the list (per-instance gaps) or a reference method from
  /// the reference file (gap of the mean). Empty: no gaps.
  std::string reference;
  std::uint64_t seed = 0;
  FeasibilityRules rules;
  bool parallel = true;

  void validate() const;
};

struct EvalRow {
  std::string variant;
  std::string solver;
  int instance = 0;
  double cost = 0.0;
  bool feasible = true;
  double wall_ms = 0.0;
};

struct EvalSummary {
  std::string variant;
  std::string solver;
  double mean_cost = 0.0;
  std::optional<double> gap;  ///< percent against the configured reference
  int infeasible = 0;
  double wall_ms = 0.0;  ///< total
};

struct EvalReport {
  std::vector<EvalRow> rows;  ///< count x variants x solvers
  std::vector<EvalSummary> summary;
};

/// Generates `count` instances per variant and runs every solver on them.
/// `params` may be null when no neural solver is requested. Throws
/// ValidationError when a reference row is missing.
EvalReport eval_suite(const PolicyParams* params, const EvalConfig& config,
                      const std::vector<ReferenceRecord>& references = {});

std::string report_csv(const EvalReport& report);
std::string summary_csv(const EvalReport& report);
Json report_json(const EvalReport& report);
/// Horizontal bars of the summary gaps, one group per variant.
std::string gap_bar_svg(const EvalReport& report);

}  // namespace mtvrp
