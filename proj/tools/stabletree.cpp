// stabletree command-line front end.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "stabletree/builder/builder.hpp"
#include "stabletree/core/dataset_io.hpp"
#include "stabletree/core/tree_io.hpp"
#include "stabletree/error.hpp"
#include "stabletree/eval/eval.hpp"
#include "stabletree/oracle/external.hpp"
#include "stabletree/oracle/forest.hpp"
#include "stabletree/synth/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stabletree;

namespace {

enum Exit : int { ok = 0, usage = 2, data = 3, oracle_io = 4, internal = 5 };

class Clock {
 public:
  void phase(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    if (!current_.empty()) timings_[current_] += std::chrono::duration<double>(now - start_).count();
    current_ = name;
    start_ = now;
  }
  json finish() {
    phase("");
    return timings_;
  }

 private:
  std::string current_;
  std::chrono::steady_clock::time_point start_;
  json timings_ = json::object();
};

/// Provenance record written next to each artifact as <artifact>.manifest.json.
struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  json inputs = json::object();
  json outputs = json::object();

  void input(const std::string& role, const fs::path& path) {
    inputs[role] = {{"path", path.string()}, {"digest", core::digest_hex(core::file_digest(path))}};
  }
  void output(const std::string& role, const fs::path& path) {
    outputs[role] = {{"path", path.string()}, {"digest", core::digest_hex(core::file_digest(path))}};
  }
  void write(const fs::path& artifact, Clock& clock) {
    json j{{"tool", "stabletree"},
           {"version", STABLETREE_VERSION},
           {"command", command},
           {"argv", argv},
           {"config", config},
           {"inputs", inputs},
           {"outputs", outputs}};
    j["timings_seconds"] = clock.finish();
    const fs::path path = artifact.string() + ".manifest.json";
    core::write_text_file(path, j.dump(2) + "\n");
  }
};

struct OracleArgs {
  std::string forest;
  std::string external;
  double external_timeout = 60.0;
};

void add_oracle_options(CLI::App* cmd, OracleArgs& args) {
  auto* f = cmd->add_option("--oracle", args.forest, "Forest artifact from fit-oracle");
  auto* e = cmd->add_option("--external-oracle", args.external,
                            "Shell command serving the JSON-lines oracle protocol");
  f->excludes(e);
  cmd->add_option("--oracle-timeout", args.external_timeout, "Seconds to wait for an external oracle reply")
      ->check(CLI::PositiveNumber);
}

oracle::OracleHandle open_oracle(const OracleArgs& args, const core::Schema& schema, std::size_t threads,
                                 Manifest& manifest) {
  if (!args.forest.empty()) {
    auto forest = oracle::RandomForest::load(args.forest);
    if (forest->schema() != schema) throw SchemaError("forest '" + args.forest + "' was fitted on a different schema");
    forest->set_threads(threads);
    manifest.input("oracle", args.forest);
    return forest;
  }
  if (!args.external.empty()) {
    manifest.config["external_oracle"] = args.external;
    return std::make_shared<oracle::ExternalProcessOracle>(
        args.external, schema.class_count(), schema.column_count(),
        std::chrono::milliseconds(static_cast<long long>(args.external_timeout * 1000.0)));
  }
  throw ConfigError("one of --oracle or --external-oracle is required");
}

struct BuildArgs {
  builder::BuildConfig cfg;
  std::string leaf_mode = "mean";
  bool no_top_up = false;
  bool cart = false;
};

void add_build_options(CLI::App* cmd, BuildArgs& args) {
  auto& c = args.cfg;
  cmd->add_option("--alpha", c.alpha, "Better-split test level; 1 disables testing")->capture_default_str();
  cmd->add_option("--nps", c.n_ps_max, "Per-node pseudo-sample cutoff")->capture_default_str();
  cmd->add_option("--n-initial", c.n_initial, "Pseudo samples drawn at a node before the first test")
      ->capture_default_str();
  cmd->add_option("--max-depth", c.max_depth, "Maximal depth, root = 1")->capture_default_str();
  cmd->add_option("--growth-cap", c.growth_cap, "Largest sample growth factor per round")->capture_default_str();
  cmd->add_option("--max-rounds", c.max_rounds, "Escalation rounds per node")->capture_default_str();
  cmd->add_option("--min-node-anchors", c.min_node_anchors, "Original rows needed to split a node")
      ->capture_default_str();
  cmd->add_option("--purity-epsilon", c.purity_epsilon, "Leaf when the reducible impurity is below this")
      ->capture_default_str();
  cmd->add_option("--prune-q", c.prune_q, "FDR level for discarding clearly worse rivals")->capture_default_str();
  cmd->add_option("--bandwidth-factor", c.sampler.bandwidth_factor, "Kernel bandwidth multiplier")
      ->capture_default_str();
  cmd->add_option("--ordinal-jump-prob", c.sampler.ordinal_jump_prob, "Ordinal neighbour jump probability")
      ->capture_default_str();
  cmd->add_option("--max-rejection-factor", c.sampler.max_rejection_factor,
                  "Rejections allowed per requested pseudo sample")
      ->capture_default_str();
  cmd->add_flag("--hard-labels", c.hard_labels, "Use one-hot oracle labels instead of probabilities");
  cmd->add_option("--leaf-mode", args.leaf_mode, "Leaf probabilities: mean (soft labels) or vote")
      ->check(CLI::IsMember({"mean", "vote"}))
      ->capture_default_str();
  cmd->add_flag("--inherit-samples", c.inherit_samples, "Children start from the parent's pseudo sample");
  cmd->add_flag("--no-top-up", args.no_top_up, "Do not refill inherited pools to --n-initial");
  cmd->add_flag("--cart-baseline", args.cart,
                "Greedy CART on one root pseudo sample of --nps rows (no testing)");
  cmd->add_option("--seed", c.seed, "Root seed")->capture_default_str();
}

builder::BuildConfig resolve(BuildArgs& args, std::size_t threads) {
  auto cfg = args.cfg;
  cfg.leaf_mode = args.leaf_mode == "vote" ? builder::LeafMode::HardVote : builder::LeafMode::SoftMean;
  cfg.top_up = !args.no_top_up;
  if (args.cart) cfg = builder::cart_baseline(cfg);
  cfg.sampler.threads = threads;
  cfg.validate();
  return cfg;
}

json config_json(const builder::BuildConfig& c) {
  return {{"alpha", c.alpha},
          {"n_initial", c.n_initial},
          {"n_ps_max", c.n_ps_max},
          {"growth_cap", c.growth_cap},
          {"max_rounds", c.max_rounds},
          {"max_depth", c.max_depth},
          {"min_node_anchors", c.min_node_anchors},
          {"purity_epsilon", c.purity_epsilon},
          {"prune_q", c.prune_q},
          {"hard_labels", c.hard_labels},
          {"leaf_mode", c.leaf_mode == builder::LeafMode::HardVote ? "vote" : "mean"},
          {"inherit_samples", c.inherit_samples},
          {"top_up", c.top_up},
          {"seed", c.seed},
          {"bandwidth_factor", c.sampler.bandwidth_factor},
          {"ordinal_jump_prob", c.sampler.ordinal_jump_prob},
          {"max_rejection_factor", c.sampler.max_rejection_factor}};
}

int run(int argc, char** argv) {
  CLI::App app{"Distill a black-box classifier into a stable decision tree"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", STABLETREE_VERSION);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  Manifest manifest;
  for (int i = 1; i < argc; ++i) manifest.argv.emplace_back(argv[i]);
  Clock clock;
  clock.phase("setup");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw labeled rows from the built-in synthetic design");
  std::size_t sim_n = 1000;
  std::uint64_t sim_seed = 0;
  std::string sim_out, sim_schema_out;
  sim->add_option("--n", sim_n, "Rows")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--seed", sim_seed, "Seed")->capture_default_str();
  sim->add_option("--out", sim_out, "CSV output")->required();
  sim->add_option("--schema-out", sim_schema_out, "Schema JSON output");
  sim->add_flag("--no-labels", "Write covariates only");

  // fit-oracle
  auto* fit = app.add_subcommand("fit-oracle", "Fit a random forest oracle");
  std::string fit_data, fit_schema, fit_out;
  oracle::ForestConfig fcfg;
  std::size_t fit_max_depth = 0, fit_mtry = 0;
  fit->add_option("--data", fit_data, "Labeled CSV")->required();
  fit->add_option("--schema", fit_schema, "Schema JSON")->required();
  fit->add_option("--out", fit_out, "Forest artifact")->required();
  fit->add_option("--trees", fcfg.tree_count, "Number of trees")->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_option("--max-depth", fit_max_depth, "Tree depth limit; 0 = unlimited")->capture_default_str();
  fit->add_option("--min-leaf", fcfg.min_leaf, "Minimum rows per leaf")->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit->add_option("--mtry", fit_mtry, "Features tried per split; 0 = ceil(sqrt(m))")->capture_default_str();
  fit->add_flag("--no-bootstrap", "Fit every tree on all rows");
  fit->add_flag("--allow-constant", fcfg.allow_constant, "Accept single-class data as a constant oracle");
  fit->add_option("--seed", fcfg.seed, "Seed")->capture_default_str();

  // distill
  auto* dis = app.add_subcommand("distill", "Build a stabilized approximation tree");
  OracleArgs dis_oracle;
  BuildArgs dis_build;
  std::string dis_data, dis_schema, dis_out;
  add_oracle_options(dis, dis_oracle);
  add_build_options(dis, dis_build);
  dis->add_option("--data", dis_data, "Original rows (CSV) used as kernel anchors")->required();
  dis->add_option("--schema", dis_schema, "Schema JSON")->required();
  dis->add_option("--out", dis_out, "Tree JSON output")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Compare a tree with its oracle on test rows");
  OracleArgs ev_oracle;
  std::string ev_tree, ev_data, ev_out;
  std::size_t ev_fresh = 0;
  std::uint64_t ev_seed = 0;
  add_oracle_options(ev, ev_oracle);
  ev->add_option("--tree", ev_tree, "Tree JSON")->required();
  auto* ev_data_opt = ev->add_option("--test-data", ev_data, "Test CSV (labels optional)");
  auto* ev_fresh_opt =
      ev->add_option("--fresh-synth", ev_fresh, "Draw this many fresh rows from the synthetic design instead");
  ev_data_opt->excludes(ev_fresh_opt);
  ev->add_option("--seed", ev_seed, "Seed for --fresh-synth")->capture_default_str();
  ev->add_option("--out", ev_out, "Report JSON output")->required();

  // stability
  auto* st = app.add_subcommand("stability", "Histogram tree structures over replicate builds");
  OracleArgs st_oracle;
  BuildArgs st_build;
  std::string st_data, st_schema, st_out, st_csv;
  std::size_t st_replicates = 20;
  std::vector<std::size_t> st_depths{1, 2, 3, 4};
  double st_tolerance = 1e-3;
  add_oracle_options(st, st_oracle);
  add_build_options(st, st_build);
  st->add_option("--data", st_data, "Original rows (CSV)")->required();
  st->add_option("--schema", st_schema, "Schema JSON")->required();
  st->add_option("--out", st_out, "Report JSON output")->required();
  st->add_option("--keys-csv", st_csv, "Per-replicate structure keys as CSV");
  st->add_option("--replicates", st_replicates, "Replicate builds (seeds seed+1..seed+R)")->capture_default_str();
  st->add_option("--depths", st_depths, "Split layers to compare")->delimiter(',')->capture_default_str();
  st->add_option("--tolerance", st_tolerance, "Threshold rounding as a fraction of each column's range")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  st->add_flag("--fixed-seed", "Use --seed for every replicate");

  // export
  auto* ex = app.add_subcommand("export", "Render a tree as Graphviz DOT or canonical JSON");
  std::string ex_tree, ex_out, ex_format = "dot";
  ex->add_option("--tree", ex_tree, "Tree JSON")->required();
  ex->add_option("--format", ex_format, "dot or json")->check(CLI::IsMember({"dot", "json"}))->capture_default_str();
  ex->add_option("--out", ex_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Exit::ok : Exit::usage;
  }
  manifest.config["threads"] = threads;

  if (sim->parsed()) {
    manifest.command = "simulate";
    manifest.config.update({{"n", sim_n}, {"seed", sim_seed}});
    clock.phase("simulate");
    auto data = synth::sample_synthetic(sim_n, sim_seed);
    if (sim->count("--no-labels") > 0) data.labels.reset();
    clock.phase("write");
    core::write_csv(sim_out, data);
    manifest.output("data", sim_out);
    if (!sim_schema_out.empty()) {
      core::write_schema(data.schema, sim_schema_out);
      manifest.output("schema", sim_schema_out);
    }
    manifest.write(sim_out, clock);
    return Exit::ok;
  }

  if (fit->parsed()) {
    manifest.command = "fit-oracle";
    if (fit_max_depth > 0) fcfg.max_depth = fit_max_depth;
    if (fit_mtry > 0) fcfg.features_per_split = fit_mtry;
    fcfg.bootstrap = fit->count("--no-bootstrap") == 0;
    fcfg.threads = threads;
    clock.phase("read");
    const auto schema = core::read_schema(fit_schema);
    const auto data = core::read_csv(fit_data, schema, core::LabelPolicy::Required);
    manifest.input("data", fit_data);
    manifest.input("schema", fit_schema);
    clock.phase("fit");
    const auto forest = oracle::fit_forest(data, fcfg);
    spdlog::info("fitted {} trees, OOB accuracy {:.4f}", forest->trees().size(), forest->oob_accuracy());
    clock.phase("write");
    forest->save(fit_out);
    manifest.config.update({{"trees", fcfg.tree_count},
                            {"max_depth", fit_max_depth},
                            {"min_leaf", fcfg.min_leaf},
                            {"mtry", fit_mtry},
                            {"bootstrap", fcfg.bootstrap},
                            {"allow_constant", fcfg.allow_constant},
                            {"seed", fcfg.seed}});
    manifest.outputs["oob_accuracy"] = forest->oob_accuracy();
    manifest.output("forest", fit_out);
    manifest.write(fit_out, clock);
    std::cout << "OOB accuracy " << forest->oob_accuracy() << '\n';
    return Exit::ok;
  }

  if (dis->parsed()) {
    manifest.command = "distill";
    const auto cfg = resolve(dis_build, threads);
    manifest.config.update(config_json(cfg));
    clock.phase("read");
    const auto schema = core::read_schema(dis_schema);
    const auto data = core::read_csv(dis_data, schema, core::LabelPolicy::Ignore);
    manifest.input("data", dis_data);
    manifest.input("schema", dis_schema);
    const auto oracle = open_oracle(dis_oracle, schema, threads, manifest);
    clock.phase("build");
    const auto tree = builder::build_tree(data, *oracle, cfg);
    clock.phase("write");
    core::write_tree(tree, dis_out);
    manifest.output("tree", dis_out);
    manifest.write(dis_out, clock);
    std::cout << "tree: depth " << tree.depth() << ", " << tree.internal_count() << " splits, " << tree.leaf_count()
              << " leaves\n";
    return Exit::ok;
  }

  if (ev->parsed()) {
    manifest.command = "evaluate";
    clock.phase("read");
    const auto tree = core::read_tree(ev_tree);
    manifest.input("tree", ev_tree);
    core::Dataset test;
    if (!ev_data.empty()) {
      test = core::read_csv(ev_data, tree.schema(), core::LabelPolicy::Optional);
      manifest.input("test_data", ev_data);
    } else if (ev_fresh > 0) {
      if (tree.schema() != synth::schema()) throw SchemaError("--fresh-synth needs a tree over the synthetic schema");
      test = synth::sample_synthetic(ev_fresh, ev_seed);
      manifest.config.update({{"fresh_synth", ev_fresh}, {"seed", ev_seed}});
    } else {
      throw ConfigError("one of --test-data or --fresh-synth is required");
    }
    const auto oracle = open_oracle(ev_oracle, tree.schema(), threads, manifest);
    clock.phase("evaluate");
    const auto report = eval::mimic_accuracy(tree, *oracle, test.rows);
    json j = eval::to_json(report);
    std::string text = eval::to_text(report);
    if (test.has_labels()) {
      const double tree_acc = eval::predictive_accuracy(tree, test);
      const double oracle_acc = eval::predictive_accuracy(*oracle, test);
      j["tree_accuracy"] = tree_acc;
      j["oracle_accuracy"] = oracle_acc;
      text += "tree accuracy    " + std::to_string(tree_acc) + "\noracle accuracy  " + std::to_string(oracle_acc) + "\n";
    }
    clock.phase("write");
    core::write_text_file(ev_out, j.dump(2) + "\n");
    manifest.output("report", ev_out);
    manifest.write(ev_out, clock);
    std::cout << text;
    return Exit::ok;
  }

  if (st->parsed()) {
    manifest.command = "stability";
    if (st_replicates < 2) throw ConfigError("--replicates must be at least 2");
    const auto cfg = resolve(st_build, threads);
    manifest.config.update(config_json(cfg));
    manifest.config.update({{"replicates", st_replicates}, {"depths", st_depths}, {"tolerance", st_tolerance}});
    clock.phase("read");
    const auto schema = core::read_schema(st_schema);
    const auto data = core::read_csv(st_data, schema, core::LabelPolicy::Ignore);
    manifest.input("data", st_data);
    manifest.input("schema", st_schema);
    const auto oracle = open_oracle(st_oracle, schema, 1, manifest);
    eval::StabilityOptions opts;
    opts.tolerances = eval::default_tolerances(data, st_tolerance);
    opts.fixed_seed = st->count("--fixed-seed") > 0;
    opts.threads = threads;
    clock.phase("build");
    const auto report = eval::stability_experiment(data, *oracle, cfg, st_replicates, st_depths, opts);
    clock.phase("write");
    core::write_text_file(st_out, eval::to_json(report).dump(2) + "\n");
    manifest.output("report", st_out);
    if (!st_csv.empty()) {
      core::write_text_file(st_csv, eval::keys_csv(report));
      manifest.output("keys_csv", st_csv);
    }
    manifest.write(st_out, clock);
    std::cout << eval::to_text(report);
    return Exit::ok;
  }

  if (ex->parsed()) {
    manifest.command = "export";
    manifest.config["format"] = ex_format;
    clock.phase("read");
    const auto tree = core::read_tree(ex_tree);
    manifest.input("tree", ex_tree);
    clock.phase("write");
    core::write_text_file(ex_out, ex_format == "dot" ? core::tree_to_dot(tree) : core::tree_to_string(tree));
    manifest.output("export", ex_out);
    manifest.write(ex_out, clock);
    return Exit::ok;
  }
  return Exit::usage;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("stabletree");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* level = std::getenv("STABLETREE_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return Exit::usage;
  } catch (const OracleIoError& e) {
    spdlog::error("oracle: {}", e.what());
    return Exit::oracle_io;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return Exit::data;
  } catch (const DegenerateOracleError& e) {
    spdlog::error("{}", e.what());
    return Exit::data;
  } catch (const SamplerStarvationError& e) {
    spdlog::error("{}", e.what());
    return Exit::data;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return Exit::internal;
  }
}
