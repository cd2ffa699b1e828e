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

#include "mtvrp/bench.hpp"

#include <fmt/format.h>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "mtvrp/baselines.hpp"
#include "mtvrp/errors.hpp"
#include "mtvrp/infer.hpp"
#include "mtvrp/instancegen.hpp"
#include "mtvrp/rng.hpp"
#include "mtvrp/rollout.hpp"

namespace mtvrp {

// ---- CVRPLIB ------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& token, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("line {}: '{}' is not a number", line, token));
  }
}

}  // namespace

Instance parse_cvrplib(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string name;
  int dimension = -1;
  double capacity = -1.0;
  std::map<int, Point> coords;
  std::map<int, double> demands;
  std::vector<int> depots;
  enum class Section { header, coords, demands, depot } section = Section::header;
  bool saw_coords = false, saw_demands = false, saw_depot = false, saw_eof = false;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line == "EOF") {
      saw_eof = true;
      break;
    }
    if (line == "NODE_COORD_SECTION") {
      section = Section::coords;
      saw_coords = true;
      continue;
    }
    if (line == "DEMAND_SECTION") {
      section = Section::demands;
      saw_demands = true;
      continue;
    }
    if (line == "DEPOT_SECTION") {
      section = Section::depot;
      saw_depot = true;
      continue;
    }
    std::istringstream ls(line);
    if (section == Section::header || line.find(':') != std::string::npos) {
      const auto colon = line.find(':');
      if (colon == std::string::npos) throw ValidationError(fmt::format("line {}: expected KEY : VALUE", line_no));
      const std::string key = trim(std::string_view(line).substr(0, colon));
      const std::string value = trim(std::string_view(line).substr(colon + 1));
      if (key == "NAME") name = value;
      else if (key == "DIMENSION") dimension = static_cast<int>(parse_number(value, line_no));
      else if (key == "CAPACITY") capacity = parse_number(value, line_no);
      else if (key == "EDGE_WEIGHT_TYPE" && value != "EUC_2D")
        throw ValidationError(fmt::format("line {}: unsupported EDGE_WEIGHT_TYPE {}", line_no, value));
      section = Section::header;
      continue;
    }
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (section == Section::coords) {
      if (tok.size() != 3) throw ValidationError(fmt::format("line {}: expected 'id x y'", line_no));
      coords[static_cast<int>(parse_number(tok[0], line_no))] = {parse_number(tok[1], line_no),
                                                                 parse_number(tok[2], line_no)};
    } else if (section == Section::demands) {
      if (tok.size() != 2) throw ValidationError(fmt::format("line {}: expected 'id demand'", line_no));
      const double d = parse_number(tok[1], line_no);
      if (d != std::floor(d) || d < 0)
        throw ValidationError(fmt::format("line {}: demand '{}' is not a nonnegative integer", line_no, tok[1]));
      demands[static_cast<int>(parse_number(tok[0], line_no))] = d;
    } else {
      for (const auto& t : tok) {
        const int id = static_cast<int>(parse_number(t, line_no));
        if (id == -1) break;
        depots.push_back(id);
      }
    }
  }
  if (!saw_coords) throw ValidationError("missing NODE_COORD_SECTION");
  if (!saw_demands) throw ValidationError("missing DEMAND_SECTION");
  if (!saw_depot) throw ValidationError("missing DEPOT_SECTION");
  if (!saw_eof) throw ValidationError("missing EOF");
  if (dimension < 2) throw ValidationError("missing or invalid DIMENSION");
  if (!(capacity > 0)) throw ValidationError("missing or invalid CAPACITY");
  if (depots.size() != 1) throw ValidationError(fmt::format("expected exactly one depot, found {}", depots.size()));
  if (static_cast<int>(coords.size()) != dimension || static_cast<int>(demands.size()) != dimension)
    throw ValidationError(fmt::format("DIMENSION {} but {} coordinates and {} demands", dimension, coords.size(),
                                      demands.size()));
  const int depot = depots[0];
  if (!coords.contains(depot)) throw ValidationError(fmt::format("depot {} has no coordinates", depot));

  double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const auto& [id, p] : coords) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-300});

  Instance inst;
  inst.name = name.empty() ? "cvrplib" : name;
  std::vector<int> order{depot};
  for (const auto& [id, p] : coords)
    if (id != depot) order.push_back(id);
  for (int id : order) {
    if (!demands.contains(id)) throw ValidationError(fmt::format("node {} has no demand", id));
    const Point p = coords[id];
    inst.coords.push_back({(p.x - xmin) / span, (p.y - ymin) / span});
    inst.demands.push_back(demands[id] / capacity);
  }
  if (inst.demands[0] != 0.0) throw ValidationError("depot demand must be 0");
  inst.attrs = AttributeSet{};
  validate_instance(inst);
  return inst;
}

Instance read_cvrplib(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_cvrplib(ss.str());
}

// ---- gaps and references -------------------------------------------------------

double gap(double cost, double reference) {
  if (!(reference > 0.0)) throw UsageError(fmt::format("gap needs a positive reference, got {}", reference));
  return 100.0 * (cost - reference) / reference;
}

std::vector<ReferenceRecord> load_references(const std::filesystem::path& path) {
  const Json j = read_json(path);
  std::vector<ReferenceRecord> out;
  try {
    if (j.at("version").get<int>() != 1) throw IoError("unsupported reference file version");
    for (const auto& r : j.at("records")) {
      ReferenceRecord rec;
      rec.source = r.at("source").get<std::string>();
      rec.method = r.value("method", rec.source);
      rec.variant = r.at("variant").get<std::string>();
      rec.n = r.at("n").get<int>();
      rec.value = r.at("value").get<double>();
      rec.provenance = r.at("provenance").get<std::string>();
      if (!(rec.value > 0.0) || rec.provenance.empty())
        throw IoError(fmt::format("reference {} {} n={}: value must be positive and provenance set", rec.method,
                                  rec.variant, rec.n));
      out.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return out;
}

std::optional<double> find_reference(const std::vector<ReferenceRecord>& records, std::string_view method,
                                     std::string_view variant, int n) {
  for (const auto& r : records)
    if (r.method == method && r.variant == variant && r.n == n) return r.value;
  return std::nullopt;
}

// ---- embeddings ----------------------------------------------------------------

std::vector<EmbeddingSample> collect_embeddings(const PolicyParams& params, const std::vector<Instance>& instances,
                                                int k, std::uint64_t seed) {
  std::vector<EmbeddingSample> pool;
  for (const auto& inst : instances) {
    RolloutOptions opt;
    opt.mode = DecodeMode::greedy;
    opt.n_starts = 1;
    opt.record = true;
    const RolloutBatch batch = multistart_rollout(inst, params, opt);
    const std::string variant = inst.attrs.variant_name();
    for (const auto& step : batch.steps)
      for (Eigen::Index r = 0; r < step.hc.rows(); ++r)
        pool.push_back({variant, std::vector<double>(step.hc.row(r).data(), step.hc.row(r).data() + step.hc.cols())});
  }
  if (k >= static_cast<int>(pool.size())) return pool;
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  RandomStream rng(seed, "embeddings");
  rng.shuffle(std::span(idx));
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  std::vector<EmbeddingSample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(std::move(pool[i]));
  return out;
}

Matrix to_matrix(const std::vector<EmbeddingSample>& samples) {
  if (samples.empty()) return {};
  Matrix m(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(samples[0].vector.size()));
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = 0; j < samples[i].vector.size(); ++j) m(i, j) = samples[i].vector[j];
  return m;
}

namespace {

double directed_hausdorff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.rows() && nearest > worst; ++j)
      nearest = std::min(nearest, (a.row(i) - b.row(j)).squaredNorm());
    worst = std::max(worst, nearest);
  }
  return std::sqrt(worst);
}

}  // namespace

double hausdorff(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw UsageError("hausdorff: empty point set");
  if (a.cols() != b.cols()) throw UsageError("hausdorff: dimension mismatch");
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

// ---- evaluation suite ----------------------------------------------------------

namespace {

constexpr std::string_view kSolvers[] = {"ni", "fi", "greedy", "aug8", "bruteforce"};

bool is_neural(std::string_view s) { return s == "greedy" || s == "aug8"; }

}  // namespace

void EvalConfig::validate() const {
  if (variants.empty()) throw UsageError("no variants to evaluate");
  for (const auto& v : variants) (void)AttributeSet::from_variant(v);
  if (n < 1 || count < 1) throw UsageError("n and count must be >= 1");
  if (solvers.empty()) throw UsageError("no solvers to evaluate");
  for (const auto& s : solvers)
    if (std::find(std::begin(kSolvers), std::end(kSolvers), s) == std::end(kSolvers))
      throw UsageError(fmt::format("unknown solver '{}' (expected ni|fi|greedy|aug8|bruteforce)", s));
  const bool brute = std::find(solvers.begin(), solvers.end(), "bruteforce") != solvers.end();
  if (brute && n > kBruteForceMaxCustomers)
    throw UsageError(fmt::format("bruteforce needs n <= {}", kBruteForceMaxCustomers));
}

EvalReport eval_suite(const PolicyParams* params, const EvalConfig& config,
                      const std::vector<ReferenceRecord>& references) {
  config.validate();
  for (const auto& s : config.solvers)
    if (is_neural(s) && params == nullptr) throw UsageError(fmt::format("solver '{}' needs a checkpoint", s));
  const bool ref_is_solver =
      std::find(config.solvers.begin(), config.solvers.end(), config.reference) != config.solvers.end();
  if (!config.reference.empty() && !ref_is_solver)
    for (const auto& v : config.variants)
      if (!find_reference(references, config.reference, v, config.n))
        throw ValidationError(
            fmt::format("no reference row for {} {} n={}", config.reference, v, config.n));

  const int solvers = static_cast<int>(config.solvers.size());
  EvalReport report;
  report.rows.resize(static_cast<std::size_t>(config.variants.size()) * config.count * solvers);
  const RandomStream root(config.seed, "eval");

  for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
    const std::string& variant = config.variants[vi];
    auto run = [&](int i) {
      GenConfig gen;
      gen.n = config.n;
      gen.seed = root.substream(variant).substream(static_cast<std::uint64_t>(i)).next();
      const Instance inst = gen_variant(variant, gen);
      for (int s = 0; s < solvers; ++s) {
        const std::string& solver = config.solvers[s];
        const auto t0 = std::chrono::steady_clock::now();
        Solution sol;
        double cost = 0.0;
        bool feasible = true;
        InferenceConfig ic;
        ic.rules = config.rules;
        if (solver == "ni" || solver == "fi" || solver == "bruteforce") {
          const BaselineResult r = solver == "ni"   ? nearest_insertion(inst, config.rules)
                                   : solver == "fi" ? farthest_insertion(inst, config.rules)
                                                    : brute_force(inst, config.rules);
          sol = r.solution;
          cost = r.cost;
          feasible = r.feasible;
        } else {
          const SolveResult r = solver == "greedy" ? greedy_solve(inst, *params, ic) : solve_aug8(inst, *params, ic);
          sol = r.solution;
          cost = r.cost;
        }
        if (feasible) feasible = validate_solution(sol, inst, config.rules).feasible();
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const std::size_t slot = (vi * config.count + i) * solvers + s;
        report.rows[slot] = {variant, solver, i, cost, feasible, ms};
      }
    };
    if (config.parallel) {
      std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < config.count; ++i) {
        try {
          run(i);
        } catch (...) {
#pragma omp critical
          if (!error) error = std::current_exception();
        }
      }
      if (error) std::rethrow_exception(error);
    } else {
      for (int i = 0; i < config.count; ++i) run(i);
    }
  }

  for (std::size_t vi = 0; vi < config.variants.size(); ++vi) {
    const std::string& variant = config.variants[vi];
    const int ref_index = ref_is_solver
        ? static_cast<int>(std::find(config.solvers.begin(), config.solvers.end(), config.reference) -
                           config.solvers.begin())
        : -1;
    for (int s = 0; s < solvers; ++s) {
      EvalSummary sum;
      sum.variant = variant;
      sum.solver = config.solvers[s];
      double cost_total = 0.0, gap_total = 0.0;
      int feasible = 0, gaps = 0;
      for (int i = 0; i < config.count; ++i) {
        const auto& row = report.rows[(vi * config.count + i) * solvers + s];
        sum.wall_ms += row.wall_ms;
        if (!row.feasible) {
          ++sum.infeasible;
          continue;
        }
        cost_total += row.cost;
        ++feasible;
        if (ref_index >= 0) {
          const auto& ref = report.rows[(vi * config.count + i) * solvers + ref_index];
          if (ref.feasible && ref.cost > 0.0) {
            gap_total += gap(row.cost, ref.cost);
            ++gaps;
          }
        }
      }
      sum.mean_cost = feasible > 0 ? cost_total / feasible : std::numeric_limits<double>::quiet_NaN();
      if (ref_index >= 0 && gaps > 0) sum.gap = gap_total / gaps;
      if (!config.reference.empty() && !ref_is_solver && feasible > 0)
        sum.gap = gap(sum.mean_cost, *find_reference(references, config.reference, variant, config.n));
      report.summary.push_back(std::move(sum));
    }
  }
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "variant,solver,instance,cost,feasible,wall_ms\n";
  for (const auto& r : report.rows)
    out += fmt::format("{},{},{},{:.17g},{},{:.3f}\n", r.variant, r.solver, r.instance, r.cost,
                       r.feasible ? 1 : 0, r.wall_ms);
  return out;
}

std::string summary_csv(const EvalReport& report) {
  std::string out = "variant,solver,mean_cost,gap_percent,infeasible,wall_ms\n";
  for (const auto& s : report.summary)
    out += fmt::format("{},{},{:.6f},{},{},{:.3f}\n", s.variant, s.solver, s.mean_cost,
                       s.gap ? fmt::format("{:.4f}", *s.gap) : std::string(), s.infeasible, s.wall_ms);
  return out;
}

Json report_json(const EvalReport& report) {
  Json j;
  Json summary = Json::array();
  for (const auto& s : report.summary) {
    Json e;
    e["variant"] = s.variant;
    e["solver"] = s.solver;
    e["mean_cost"] = s.mean_cost;
    e["gap_percent"] = s.gap ? Json(*s.gap) : Json(nullptr);
    e["infeasible"] = s.infeasible;
    e["wall_ms"] = s.wall_ms;
    summary.push_back(std::move(e));
  }
  j["summary"] = std::move(summary);
  Json rows = Json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"variant", r.variant},
                    {"solver", r.solver},
                    {"instance", r.instance},
                    {"cost", r.cost},
                    {"feasible", r.feasible},
                    {"wall_ms", r.wall_ms}});
  j["rows"] = std::move(rows);
  return j;
}

std::string gap_bar_svg(const EvalReport& report) {
  constexpr int kBar = 16, kLabel = 180, kWidth = 420, kPad = 10;
  double top = 1e-9;
  for (const auto& s : report.summary)
    if (s.gap) top = std::max(top, std::abs(*s.gap));
  const int height = kPad * 2 + static_cast<int>(report.summary.size()) * (kBar + 4);
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n",
      kLabel + kWidth + 80, height);
  int y = kPad;
  static const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3"};
  std::map<std::string, int> colour;
  for (const auto& s : report.summary) {
    const int c = colour.emplace(s.solver, static_cast<int>(colour.size()) % 5).first->second;
    const double g = s.gap.value_or(0.0);
    const int w = static_cast<int>(std::round(std::abs(g) / top * kWidth));
    out += fmt::format("  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{} {}</text>\n", kLabel - 6, y + kBar - 4,
                       s.variant, s.solver);
    out += fmt::format("  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", kLabel, y, w, kBar,
                       palette[c]);
    out += fmt::format("  <text x=\"{}\" y=\"{}\">{}</text>\n", kLabel + w + 4, y + kBar - 4,
                       s.gap ? fmt::format("{:.2f}%", g) : std::string("n/a"));
    y += kBar + 4;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace mtvrp
