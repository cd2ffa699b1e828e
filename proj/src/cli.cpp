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

#include "mtvrp/cli.hpp"

#include <fmt/format.h>
#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mtvrp/baselines.hpp"
#include "mtvrp/bench.hpp"
#include "mtvrp/checkpoint.hpp"
#include "mtvrp/errors.hpp"
#include "mtvrp/infer.hpp"
#include "mtvrp/instance_io.hpp"
#include "mtvrp/instancegen.hpp"
#include "mtvrp/rng.hpp"
#include "mtvrp/train.hpp"

#ifndef MTVRP_BUILD_ID
#define MTVRP_BUILD_ID "unknown"
#endif
#ifndef MTVRP_SOURCE_DATA_DIR
#define MTVRP_SOURCE_DATA_DIR ""
#endif

namespace mtvrp {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path data_dir() {
  if (const char* env = std::getenv("MTVRP_DATA_DIR"); env && *env) return env;
  return "mtvrp-data";
}

fs::path default_references() {
  const fs::path local = data_dir() / "reference_values.json";
  if (fs::exists(local)) return local;
  return fs::path(MTVRP_SOURCE_DATA_DIR) / "reference_values.json";
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", p.parent_path().string(), ec.message()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot write {}", path.string()));
  f << text;
  if (!f) throw IoError(fmt::format("write failed for {}", path.string()));
}

/// Collects the run description and writes it once at the end.
struct Manifest {
  Json j;
  fs::path path;

  Manifest(std::string command, const std::vector<std::string>& args) {
    j["command"] = std::move(command);
    j["argv"] = args;
    j["build_id"] = MTVRP_BUILD_ID;
    j["threads"] = omp_get_max_threads();
    j["started"] = utc_now();
    j["config"] = Json::object();
    j["seeds"] = Json::object();
    j["outputs"] = Json::array();
  }

  void output(const fs::path& p) { j["outputs"].push_back(p.string()); }

  void write() {
    j["finished"] = utc_now();
    if (path.empty()) path = data_dir() / "manifests" / fmt::format("{}-{}.json", j["command"].get<std::string>(),
                                                                    std::chrono::system_clock::now().time_since_epoch().count());
    ensure_parent(path);
    write_json(j, path);
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(AttributeSet::from_variant(item).variant_name());
  return out;
}

struct ModelOptions {
  std::string preset = "default";
  int embed_dim = 0, layers = -1, heads = 0, ff_hidden = 0;
  std::string norm;

  void add(CLI::App* app) {
    app->add_option("--model", preset, "Preset: default | tiny | micro")->check(CLI::IsMember({"default", "tiny", "micro"}));
    app->add_option("--embed-dim", embed_dim, "Override embedding width");
    app->add_option("--layers", layers, "Override encoder layers");
    app->add_option("--heads", heads, "Override attention heads");
    app->add_option("--ff-hidden", ff_hidden, "Override feed-forward width");
    app->add_option("--norm", norm, "none | instance")->check(CLI::IsMember({"none", "instance"}));
  }

  [[nodiscard]] ModelConfig build() const {
    ModelConfig c = preset == "tiny" ? ModelConfig::tiny() : preset == "micro" ? ModelConfig::micro() : ModelConfig{};
    if (embed_dim > 0) c.embed_dim = embed_dim;
    if (layers >= 0) c.n_layers = layers;
    if (heads > 0) c.n_heads = heads;
    if (ff_hidden > 0) c.ff_hidden = ff_hidden;
    if (!norm.empty()) c.norm = norm_mode_from_string(norm);
    c.validate();
    return c;
  }
};

struct TrainOptions {
  std::string tasks = "CVRP,VRPTW,OVRP,VRPB,VRPL";
  int n = 20;
  int epochs = 10000;
  int instances = 10000;
  int batch = 64;
  double lr = 1e-4;
  double wd = 1e-6;
  int n_starts = 0;
  bool no_lookahead = false;
  bool capacity_band = false;
  bool serial = false;
  std::string metrics;
  std::string checkpoint_out;

  void add(CLI::App* app, bool finetune) {
    app->add_option("--tasks", tasks, "Comma-separated variant names");
    app->add_option("--n", n, "Customers per training instance")->check(CLI::PositiveNumber);
    app->add_option("--epochs", epochs, "Epochs")->check(CLI::NonNegativeNumber);
    app->add_option("--instances-per-epoch", instances, "Instances per epoch")->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch, "Instances per batch")->check(CLI::PositiveNumber);
    app->add_option("--lr", lr, "Learning rate")->check(CLI::NonNegativeNumber);
    app->add_option("--weight-decay", wd, "Decoupled weight decay")->check(CLI::NonNegativeNumber);
    app->add_option("--n-starts", n_starts, "Trajectories per instance (0 = n)")->check(CLI::NonNegativeNumber);
    app->add_flag("--no-limit-lookahead", no_lookahead, "Duration-limit mask without the return leg");
    app->add_flag("--capacity-band", capacity_band, "Also require remaining capacity <= 1");
    app->add_flag("--serial", serial, "Instance-major serial gradient loop");
    app->add_option("--metrics", metrics, "Per-epoch metrics (JSON lines)");
    app->add_option("--checkpoint-out", checkpoint_out, "Checkpoint to write")->required();
    if (finetune) {
      epochs = 200;
      lr = 1e-5;
    }
  }

  [[nodiscard]] TrainConfig build(std::uint64_t seed) const {
    TrainConfig c;
    c.tasks = split_list(tasks);
    c.n = n;
    c.epochs = epochs;
    c.instances_per_epoch = instances;
    c.batch_size = batch;
    c.lr = lr;
    c.weight_decay = wd;
    c.n_starts = n_starts;
    c.seed = seed;
    c.rules.limit_return_lookahead = !no_lookahead;
    c.rules.capacity_upper_bound = capacity_band;
    c.parallel = !serial;
    c.validate();
    return c;
  }
};

void run_training(PolicyParams& params, const TrainConfig& config, const TrainOptions& opt, Manifest& manifest,
                  std::ostream& err, bool finetune_run) {
  std::ofstream metrics;
  if (!opt.metrics.empty()) {
    ensure_parent(opt.metrics);
    metrics.open(opt.metrics);
    if (!metrics) throw IoError(fmt::format("cannot write {}", opt.metrics));
    manifest.output(opt.metrics);
  }
  auto on_epoch = [&](const EpochMetrics& m) {
    if (metrics) metrics << epoch_metrics_to_json(m).dump() << '\n' << std::flush;
    std::string line = fmt::format("epoch {} ({:.1f} s)", m.epoch, m.wall_ms / 1000.0);
    for (const auto& [task, t] : m.tasks) line += fmt::format("  {} {:.4f}", task, t.mean_cost);
    err << line << '\n';
  };
  if (finetune_run)
    finetune(params, config, on_epoch);
  else
    train(params, config, on_epoch);
  Checkpoint ck{params, Json::object()};
  ck.metadata["train"] = train_config_to_json(config);
  ensure_parent(opt.checkpoint_out);
  save_checkpoint(ck, opt.checkpoint_out);
  manifest.output(opt.checkpoint_out);
  err << fmt::format("encoder checksum {:016x}, decoder checksum {:016x}\n", params.checksum("encoder."),
                     params.checksum("decoder."));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-task attention policy for vehicle routing variants"};
  app.require_subcommand(1);
  int threads = 0;
  std::uint64_t seed = 0;
  std::string manifest_path;
  app.add_option("--threads", threads, "OpenMP threads (default: all cores; 1 = bit-deterministic)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Root seed");
  app.add_option("--manifest", manifest_path, "Run manifest path");

  // generate
  auto* gen = app.add_subcommand("generate", "Write random instances");
  std::string gen_variant_name = "CVRP", gen_out;
  int gen_n = 20, gen_count = 1, gen_capacity = 0;
  gen->add_option("--variant", gen_variant_name, "Variant name, e.g. OVRPBLTW");
  gen->add_option("--n", gen_n, "Customers")->check(CLI::PositiveNumber);
  gen->add_option("--count", gen_count, "Instances")->check(CLI::PositiveNumber);
  gen->add_option("--capacity", gen_capacity, "Raw vehicle capacity (default depends on n)");
  gen->add_option("--out-dir", gen_out, "Output directory (default $MTVRP_DATA_DIR/instances)");
  gen->add_option("--seed", seed, "Root seed");

  // train
  auto* tr = app.add_subcommand("train", "Multi-task REINFORCE training");
  TrainOptions tr_opt;
  ModelOptions model_opt;
  std::string tr_init;
  tr_opt.add(tr, false);
  model_opt.add(tr);
  tr->add_option("--checkpoint-in", tr_init, "Continue from this checkpoint");
  tr->add_option("--seed", seed, "Root seed");

  // finetune
  auto* ft = app.add_subcommand("finetune", "Fine-tune a trained checkpoint on new variants");
  TrainOptions ft_opt;
  std::string ft_in, ft_mode = "decoder";
  ft_opt.add(ft, true);
  ft->add_option("--checkpoint-in", ft_in, "Pretrained checkpoint")->required();
  ft->add_option("--mode", ft_mode, "decoder | full")->check(CLI::IsMember({"decoder", "decoder_only", "full"}));
  ft->add_option("--seed", seed, "Root seed");

  // solve
  auto* sv = app.add_subcommand("solve", "Solve one instance");
  std::string sv_instance, sv_checkpoint, sv_solver = "model", sv_mode = "greedy", sv_out, sv_trace;
  bool sv_aug8 = false, sv_no_lookahead = false;
  int sv_samples = 1, sv_starts = 0;
  sv->add_option("--instance", sv_instance, "Instance JSON")->required();
  sv->add_option("--checkpoint", sv_checkpoint, "Model checkpoint (model solver)");
  sv->add_option("--solver", sv_solver, "model | ni | fi | bruteforce")
      ->check(CLI::IsMember({"model", "ni", "fi", "bruteforce"}));
  sv->add_option("--mode", sv_mode, "greedy | sample")->check(CLI::IsMember({"greedy", "sample"}));
  sv->add_option("--samples", sv_samples, "Sampled rollouts per start")->check(CLI::PositiveNumber);
  sv->add_option("--n-starts", sv_starts, "Starts (0 = n)")->check(CLI::NonNegativeNumber);
  sv->add_flag("--aug8", sv_aug8, "Best of the 8 square symmetries");
  sv->add_flag("--no-limit-lookahead", sv_no_lookahead, "Duration-limit mask without the return leg");
  sv->add_option("--out", sv_out, "Solution JSON (default: stdout)");
  sv->add_option("--trace", sv_trace, "Per-step (node, attributes, mask) JSON lines");
  sv->add_option("--seed", seed, "Root seed");

  // bench
  auto* bn = app.add_subcommand("bench", "Evaluation suite, CVRPLIB files and embedding similarity");
  std::string bn_variants = "CVRP,VRPTW,OVRP,VRPB,VRPL,VRPBTW,VRPBL,OVRPL,OVRPLTW,OVRPBTW,OVRPBLTW";
  std::string bn_solvers = "ni,fi,greedy,aug8", bn_checkpoint, bn_reference, bn_refs, bn_out;
  std::vector<std::string> bn_cvrplib;
  int bn_n = 20, bn_count = 100, bn_embeddings = 0;
  bool bn_serial = false;
  bn->add_option("--variants", bn_variants, "Comma-separated variant names");
  bn->add_option("--solvers", bn_solvers, "Comma-separated: ni,fi,greedy,aug8,bruteforce");
  bn->add_option("--n", bn_n, "Customers")->check(CLI::PositiveNumber);
  bn->add_option("--count", bn_count, "Instances per variant")->check(CLI::PositiveNumber);
  bn->add_option("--checkpoint", bn_checkpoint, "Model checkpoint");
  bn->add_option("--reference", bn_reference, "Solver or reference method used for gaps");
  bn->add_option("--references", bn_refs, "Reference values JSON");
  bn->add_option("--cvrplib", bn_cvrplib, "CVRPLIB files to solve instead of generated instances");
  bn->add_option("--embeddings", bn_embeddings, "Decoder samples per variant for Hausdorff distances");
  bn->add_flag("--serial", bn_serial, "Evaluate instances serially");
  bn->add_option("--out-dir", bn_out, "Report directory (default $MTVRP_DATA_DIR/bench)");
  bn->add_option("--seed", seed, "Root seed");

  // inspect
  auto* in = app.add_subcommand("inspect", "Summarize a checkpoint, instance or solution file");
  std::string in_file, in_instance;
  in->add_option("file", in_file, "File to inspect")->required();
  in->add_option("--instance", in_instance, "Instance for a solution file (recomputes its cost)");

  std::vector<std::string> argv_storage{"mtvrp"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
    return kExitUsage;
  }
  if (threads > 0) omp_set_num_threads(threads);

  const std::string command = app.get_subcommands().front()->get_name();
  Manifest manifest(command, args);
  if (!manifest_path.empty()) manifest.path = manifest_path;
  manifest.j["seeds"]["root"] = seed;

  if (gen->parsed()) {
    const fs::path dir = gen_out.empty() ? data_dir() / "instances" : fs::path(gen_out);
    GenConfig cfg;
    cfg.n = gen_n;
    if (gen_capacity > 0) cfg.capacity_raw = gen_capacity;
    const std::string variant = AttributeSet::from_variant(gen_variant_name).variant_name();
    manifest.j["config"] = {{"variant", variant}, {"n", gen_n}, {"count", gen_count}, {"capacity", cfg.capacity()}};
    const RandomStream root(seed, "generate");
    Json seeds = Json::array();
    fs::create_directories(dir);
    for (int i = 0; i < gen_count; ++i) {
      cfg.seed = root.substream(static_cast<std::uint64_t>(i)).next();
      seeds.push_back(cfg.seed);
      const Instance inst = gen_variant(variant, cfg);
      const fs::path p = dir / fmt::format("{}-n{}-{:04d}.json", variant, gen_n, i);
      write_instance(inst, p);
      manifest.output(p);
    }
    manifest.j["seeds"]["instances"] = std::move(seeds);
    if (manifest.path.empty()) manifest.path = dir / "manifest.json";
    manifest.write();
    err << fmt::format("wrote {} {} instances to {}\n", gen_count, variant, dir.string());
    return kExitOk;
  }

  if (tr->parsed()) {
    const TrainConfig config = tr_opt.build(seed);
    PolicyParams params;
    if (!tr_init.empty()) {
      params = load_checkpoint(tr_init).params;
    } else {
      params = init_params(model_opt.build(), RandomStream(seed, "model").next());
    }
    manifest.j["config"] = {{"train", train_config_to_json(config)}, {"model", config_to_json(params.config)}};
    if (manifest.path.empty()) manifest.path = tr_opt.checkpoint_out + ".manifest.json";
    run_training(params, config, tr_opt, manifest, err, false);
    manifest.write();
    return kExitOk;
  }

  if (ft->parsed()) {
    TrainConfig config = ft_opt.build(seed);
    config.finetune_mode = finetune_mode_from_string(ft_mode);
    PolicyParams params = load_checkpoint(ft_in).params;
    manifest.j["config"] = {{"train", train_config_to_json(config)}, {"model", config_to_json(params.config)},
                            {"checkpoint_in", ft_in}};
    err << fmt::format("encoder checksum before {:016x}\n", params.checksum("encoder."));
    if (manifest.path.empty()) manifest.path = ft_opt.checkpoint_out + ".manifest.json";
    run_training(params, config, ft_opt, manifest, err, true);
    manifest.write();
    return kExitOk;
  }

  if (sv->parsed()) {
    if (sv_aug8 && sv_solver != "model") throw UsageError("--aug8 only applies to --solver model");
    if (sv_solver != "model" && (sv->count("--mode") || sv->count("--samples") || !sv_trace.empty()))
      throw UsageError("--mode, --samples and --trace only apply to --solver model");
    if (sv_solver == "model" && sv_checkpoint.empty()) throw UsageError("--solver model needs --checkpoint");
    if (!sv_trace.empty() && sv_aug8) throw UsageError("--trace cannot be combined with --aug8");
    const Instance inst = read_instance(sv_instance);
    FeasibilityRules rules;
    rules.limit_return_lookahead = !sv_no_lookahead;
    manifest.j["config"] = {{"instance", sv_instance}, {"solver", sv_solver}, {"mode", sv_mode},
                            {"aug8", sv_aug8}, {"samples", sv_samples}, {"n_starts", sv_starts},
                            {"checkpoint", sv_checkpoint}};
    const auto t0 = std::chrono::steady_clock::now();
    SolutionRecord rec;
    rec.variant = inst.attrs.variant_name();
    if (sv_solver == "model") {
      const PolicyParams params = load_checkpoint(sv_checkpoint).params;
      InferenceConfig ic;
      ic.mode = sv_mode == "sample" ? DecodeMode::sample : DecodeMode::greedy;
      ic.samples = sv_samples;
      ic.augment8 = sv_aug8;
      ic.n_starts = sv_starts;
      ic.seed = RandomStream(seed, "solve").next();
      ic.rules = rules;
      if (!sv_trace.empty()) {
        std::ofstream trace(sv_trace);
        if (!trace) throw IoError(fmt::format("cannot write {}", sv_trace));
        RolloutOptions opt;
        opt.mode = ic.mode == DecodeMode::sample ? DecodeMode::sample : DecodeMode::greedy;
        opt.n_starts = sv_starts;
        opt.seed = ic.seed;
        opt.trace = [&](int t, int node, const AttributeVector& a, const MaskVector& m) {
          Json line;
          line["trajectory"] = t;
          line["node"] = node;
          line["attrs"] = a;
          std::vector<int> mask(m.masked.begin(), m.masked.end());
          line["mask"] = mask;
          trace << line.dump() << '\n';
        };
        (void)multistart_rollout(inst, params, opt, rules);
        manifest.output(sv_trace);
      }
      const SolveResult r = solve(inst, params, ic);
      rec.solution = r.solution;
      rec.cost = r.cost;
    } else {
      const BaselineResult r = sv_solver == "ni"   ? nearest_insertion(inst, rules)
                               : sv_solver == "fi" ? farthest_insertion(inst, rules)
                                                   : brute_force(inst, rules);
      if (!r.feasible) throw ValidationError(fmt::format("'{}' has no feasible solution", inst.name));
      rec.solution = r.solution;
      rec.cost = r.cost;
    }
    rec.solution.instance_id = inst.name;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const Verdict v = validate_solution(rec.solution, inst, rules);
    if (!v.feasible()) throw InvariantError(fmt::format("solver returned an infeasible solution: {}", v.message));
    const Json j = solution_to_json(rec);
    if (sv_out.empty()) {
      out << j.dump(2) << '\n';
    } else {
      ensure_parent(sv_out);
      write_json(j, sv_out);
      manifest.output(sv_out);
      if (manifest.path.empty()) manifest.path = sv_out + ".manifest.json";
    }
    manifest.write();
    err << fmt::format("{} cost {:.6f} ({} routes, {:.1f} ms)\n", rec.variant, rec.cost, rec.solution.routes.size(),
                       rec.wall_ms);
    return kExitOk;
  }

  if (bn->parsed()) {
    const fs::path dir = bn_out.empty() ? data_dir() / "bench" : fs::path(bn_out);
    fs::create_directories(dir);
    std::optional<PolicyParams> params;
    if (!bn_checkpoint.empty()) params = load_checkpoint(bn_checkpoint).params;
    std::vector<std::string> solvers;
    {
      std::stringstream ss(bn_solvers);
      for (std::string s; std::getline(ss, s, ',');)
        if (!s.empty()) solvers.push_back(s);
    }
    manifest.j["config"] = {{"variants", bn_variants}, {"solvers", solvers}, {"n", bn_n}, {"count", bn_count},
                            {"reference", bn_reference}, {"checkpoint", bn_checkpoint}, {"cvrplib", bn_cvrplib},
                            {"embeddings", bn_embeddings}};
    if (manifest.path.empty()) manifest.path = dir / "manifest.json";

    if (!bn_cvrplib.empty()) {
      std::string csv = "file,name,n,solver,cost,feasible,wall_ms\n";
      for (const auto& file : bn_cvrplib) {
        const Instance inst = read_cvrplib(file);
        for (const auto& s : solvers) {
          const auto t0 = std::chrono::steady_clock::now();
          Solution sol;
          if (s == "ni") sol = nearest_insertion(inst).solution;
          else if (s == "fi") sol = farthest_insertion(inst).solution;
          else if (s == "bruteforce") sol = brute_force(inst).solution;
          else {
            if (!params) throw UsageError(fmt::format("solver '{}' needs --checkpoint", s));
            sol = s == "aug8" ? solve_aug8(inst, *params).solution : greedy_solve(inst, *params).solution;
          }
          const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
          csv += fmt::format("{},{},{},{},{:.6f},{},{:.3f}\n", file, inst.name, inst.customer_count(), s,
                             solution_cost(sol, inst), validate_solution(sol, inst).feasible() ? 1 : 0, ms);
        }
      }
      write_text(dir / "cvrplib.csv", csv);
      manifest.output(dir / "cvrplib.csv");
      manifest.write();
      return kExitOk;
    }

    EvalConfig ec;
    ec.variants = split_list(bn_variants);
    ec.n = bn_n;
    ec.count = bn_count;
    ec.solvers = solvers;
    ec.reference = bn_reference;
    ec.seed = seed;
    ec.parallel = !bn_serial;
    std::vector<ReferenceRecord> refs;
    const bool ref_is_solver = std::find(solvers.begin(), solvers.end(), bn_reference) != solvers.end();
    if (!bn_reference.empty() && !ref_is_solver)
      refs = load_references(bn_refs.empty() ? default_references() : fs::path(bn_refs));
    const EvalReport report = eval_suite(params ? &*params : nullptr, ec, refs);
    write_text(dir / "report.csv", report_csv(report));
    write_text(dir / "summary.csv", summary_csv(report));
    write_json(report_json(report), dir / "report.json");
    write_text(dir / "gaps.svg", gap_bar_svg(report));
    for (const char* f : {"report.csv", "summary.csv", "report.json", "gaps.svg"}) manifest.output(dir / f);
    out << summary_csv(report);

    if (bn_embeddings > 0) {
      if (!params) throw UsageError("--embeddings needs --checkpoint");
      std::vector<Matrix> clouds;
      const RandomStream root(seed, "embeddings");
      for (const auto& v : ec.variants) {
        std::vector<Instance> insts;
        for (int i = 0; i < bn_count; ++i) {
          GenConfig g;
          g.n = bn_n;
          g.seed = root.substream(v).substream(static_cast<std::uint64_t>(i)).next();
          insts.push_back(gen_variant(v, g));
        }
        clouds.push_back(to_matrix(collect_embeddings(*params, insts, bn_embeddings, root.substream(v).next())));
      }
      Json h;
      h["variants"] = ec.variants;
      Json rows = Json::array();
      for (const auto& a : clouds) {
        Json row = Json::array();
        for (const auto& b : clouds) row.push_back(hausdorff(a, b));
        rows.push_back(std::move(row));
      }
      h["hausdorff"] = std::move(rows);
      write_json(h, dir / "hausdorff.json");
      manifest.output(dir / "hausdorff.json");
    }
    manifest.write();
    return kExitOk;
  }

  // inspect
  {
    std::ifstream f(in_file, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot open {}", in_file));
    char magic[8] = {};
    f.read(magic, sizeof(magic));
    f.close();
    manifest.j["config"] = {{"file", in_file}, {"instance", in_instance}};
    if (std::string(magic, 8) == "MTVRPCK1") {
      const Checkpoint ck = load_checkpoint(in_file);
      const auto& c = ck.params.config;
      out << fmt::format("checkpoint version {}\n", kCheckpointVersion);
      out << fmt::format("model: embed_dim {} layers {} heads {} ff_hidden {} clip {} norm {}\n", c.embed_dim,
                         c.n_layers, c.n_heads, c.ff_hidden, c.clip, to_string(c.norm));
      out << fmt::format("parameters: {} ({:.2f}M)\n", ck.params.parameter_count(),
                         static_cast<double>(ck.params.parameter_count()) / 1e6);
      ck.params.visit([&](const std::string& name, const Matrix& m) {
        out << fmt::format("  {:<32} {}x{}\n", name, m.rows(), m.cols());
      });
      out << fmt::format("encoder checksum {:016x}\ndecoder checksum {:016x}\n", ck.params.checksum("encoder."),
                         ck.params.checksum("decoder."));
      if (!ck.metadata.empty()) out << "metadata: " << ck.metadata.dump() << '\n';
    } else {
      const Json j = read_json(in_file);
      if (j.contains("routes")) {
        const SolutionRecord rec = solution_from_json(j);
        out << fmt::format("solution: variant {} routes {} stored cost {:.6f} wall {:.1f} ms\n", rec.variant,
                           rec.solution.routes.size(), rec.cost, rec.wall_ms);
        if (!in_instance.empty()) {
          const Instance inst = read_instance(in_instance);
          const double cost = solution_cost(rec.solution, inst);
          const Verdict v = validate_solution(rec.solution, inst);
          out << fmt::format("recomputed cost {:.6f} (difference {:.3g}), {}\n", cost, cost - rec.cost,
                             v.feasible() ? std::string("feasible") : v.message);
          if (!v.feasible() || std::abs(cost - rec.cost) > 1e-6) {
            manifest.write();
            return kExitValidation;
          }
        }
      } else {
        const Instance inst = instance_from_json(j);
        validate_instance(inst);
        double dmin = 1e300, dmax = -1e300;
        int backhauls = 0;
        for (int i = 1; i < inst.node_count(); ++i) {
          dmin = std::min(dmin, inst.demands[i]);
          dmax = std::max(dmax, inst.demands[i]);
          backhauls += inst.demands[i] < 0;
        }
        out << fmt::format("instance '{}': variant {} customers {} seed {}\n", inst.name,
                           inst.attrs.variant_name(), inst.customer_count(), inst.seed);
        out << fmt::format("demand range [{:.4f}, {:.4f}], backhauls {}\n", dmin, dmax, backhauls);
        if (inst.attrs.time_windows) out << fmt::format("horizon T = {}\n", inst.depot_horizon);
        if (inst.duration_limit) out << fmt::format("duration limit L = {}\n", *inst.duration_limit);
      }
    }
    manifest.write();
    return kExitOk;
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return run(args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace mtvrp
