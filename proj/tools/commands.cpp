#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphuil/benchgen.hpp"
#include "graphuil/error.hpp"
#include "graphuil/evaluation.hpp"
#include "graphuil/graph.hpp"
#include "graphuil/rng.hpp"
#include "graphuil/training.hpp"

namespace graphuil::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;
constexpr std::uint64_t kTagEvalSeed = 0x65736565ULL;

/// Bad flag values discovered after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const char* kConfigHelp =
    "Config file (--config FILE): one `key = value` per line, keys are the long\n"
    "flag names without dashes, `#` starts a comment. Flags given on the\n"
    "command line win over the file; the file wins over built-in defaults.";

// ---------------------------------------------------------------------------
// config file

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    if (key.empty()) throw UsageError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

/// Splices config-file entries in as `--key=value` right after the
/// subcommand, skipping keys the command line already sets.
std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::string file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) file = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) file = args[i].substr(9);
  }
  if (file.empty() || args.size() < 2) return args;
  std::vector<std::string> injected;
  for (const auto& [key, value] : read_config_file(file)) {
    if (key == "config") continue;
    if (!has_flag(args, "--" + key)) injected.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 2, injected.begin(), injected.end());
  return args;
}

// ---------------------------------------------------------------------------
// output helpers

std::string num(double x) { return ojson(x).dump(); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ojson read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

struct Run {
  std::string command;
  std::vector<std::string> argv;
  std::chrono::steady_clock::time_point start{std::chrono::steady_clock::now()};
  ojson inputs = ojson::object();
  ojson outputs = ojson::object();

  void write_manifest(const fs::path& dir, const ojson& config, std::uint64_t seed) const {
    ojson m;
    m["schema_version"] = kSchemaVersion;
    m["command"] = command;
    m["argv"] = argv;
    m["config"] = config;
    m["seed"] = seed;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["tool_version"] = kToolVersion;
    m["duration_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text(dir / "manifest.json", m.dump(2) + "\n");
  }
};

/// Runs tasks 0..n-1 on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------
// shared flag groups

struct TrainFlags {
  TrainConfig cfg;
  std::string ablation{"full"};
  std::string features{"walk_skipgram"};
  std::string skip{"concat"};
  std::string attention_self{"on"};
  std::string feature_file1;
  std::string feature_file2;
  std::uint64_t seed{0};
};

void add_train_flags(CLI::App* c, TrainFlags& f) {
  c->add_option("--alpha", f.cfg.alpha, "Weight of the reconstruction (global) loss")->capture_default_str();
  c->add_option("--beta", f.cfg.beta, "Weight of the first-order proximity (local) loss")->capture_default_str();
  c->add_option("--epochs", f.cfg.epochs, "Maximum training epochs")->capture_default_str();
  c->add_option("--lr", f.cfg.lr, "Adam learning rate")->capture_default_str();
  c->add_option("--patience", f.cfg.patience, "Early-stop patience in epochs (0 disables)")->capture_default_str();
  c->add_option("--ablation", f.ablation, "full|no_local|no_global|no_reconstruction|gta_only|lta_only")
      ->capture_default_str();
  c->add_option("--features", f.features, "Initial features: walk_skipgram|spectral|random|file")
      ->capture_default_str();
  c->add_option("--input-dim", f.cfg.encoder.input_dim, "Initial feature dimension")->capture_default_str();
  c->add_option("--hidden-dim", f.cfg.encoder.hidden_dim, "Encoder layer and embedding dimension")
      ->capture_default_str();
  c->add_option("--attention-dim", f.cfg.encoder.attention_dim, "Attention projection dimension")
      ->capture_default_str();
  c->add_option("--layers", f.cfg.encoder.layers, "Aggregation layers")->capture_default_str();
  c->add_option("--skip", f.skip, "Layer output join: concat|sum")->capture_default_str();
  c->add_option("--attention-self", f.attention_self, "Include each node in its own attention support: on|off")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  c->add_option("--mapper-hidden-layers", f.cfg.mapper.hidden_layers, "Hidden layers in the mapping MLP")
      ->capture_default_str();
  c->add_option("--walks-per-node", f.cfg.features.walk.walks_per_node)->capture_default_str();
  c->add_option("--walk-length", f.cfg.features.walk.walk_length)->capture_default_str();
  c->add_option("--window", f.cfg.features.walk.window)->capture_default_str();
  c->add_option("--walk-negatives", f.cfg.features.walk.negatives)->capture_default_str();
  c->add_option("--walk-epochs", f.cfg.features.walk.epochs)->capture_default_str();
  c->add_option("--feature-file1", f.feature_file1, "Feature file for the first network (--features file)");
  c->add_option("--feature-file2", f.feature_file2, "Feature file for the second network (--features file)");
  c->add_flag("--feature-ids", f.cfg.features.file_has_ids, "Feature file rows start with the node id");
  c->add_option("--seed", f.seed, "Master seed")->capture_default_str();
}

TrainConfig resolve_train(const TrainFlags& f) {
  TrainConfig cfg = f.cfg;
  try {
    cfg.seed = f.seed;
    cfg.features.method = parse_feature_method(f.features);
    cfg.features.dim = cfg.encoder.input_dim;
    cfg.encoder.skip = parse_skip_mode(f.skip);
    cfg.encoder.attention_self = f.attention_self == "on";
    cfg.mapper.input_dim = cfg.mapper.hidden_dim = cfg.mapper.output_dim = cfg.encoder.hidden_dim;
    cfg.feature_files = {f.feature_file1, f.feature_file2};
    cfg = make_ablation(cfg, parse_ablation(f.ablation));
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

struct EvalFlags {
  EvalConfig cfg;
  std::string classifier{"logistic"};
};

void add_eval_flags(CLI::App* c, EvalFlags& f) {
  c->add_option("--repeats", f.cfg.repeats, "Classification repeats")->capture_default_str();
  c->add_option("--classifier", f.classifier, "Pair classifier: logistic|mlp")->capture_default_str();
  c->add_option("--classifier-hidden", f.cfg.classifier.hidden, "Hidden units of the mlp classifier")
      ->capture_default_str();
  c->add_option("--classifier-epochs", f.cfg.classifier.epochs)->capture_default_str();
  c->add_option("--classifier-lr", f.cfg.classifier.lr)->capture_default_str();
}

EvalConfig resolve_eval(const EvalFlags& f, std::uint64_t seed) {
  EvalConfig cfg = f.cfg;
  try {
    cfg.classifier.kind = parse_classifier_kind(f.classifier);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (cfg.repeats == 0) throw UsageError("--repeats must be positive");
  cfg.seed = derive_seed(seed, {kTagEvalSeed});
  return cfg;
}

ojson to_json(const EvalConfig& cfg) {
  return {{"repeats", cfg.repeats},
          {"classifier", to_string(cfg.classifier.kind)},
          {"classifier_hidden", cfg.classifier.hidden},
          {"classifier_epochs", cfg.classifier.epochs},
          {"classifier_lr", cfg.classifier.lr}};
}

std::string history_jsonl(const std::vector<EpochRecord>& history) {
  std::string out;
  for (const auto& r : history) out += graphuil::to_json(r).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// gen

struct GenFlags {
  BenchSpec spec;
  std::string model{"ba"};
  std::string out;
};

int cmd_gen(const GenFlags& f, Run& run) {
  BenchSpec spec = f.spec;
  try {
    spec.model = parse_base_model(f.model);
    spec.validate();
    if (std::floor(spec.overlap * static_cast<double>(spec.n)) < 10) {
      throw std::invalid_argument("overlap * n must be at least 10");
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const BenchInstance inst = generate_instance(spec);
  write_instance(inst, f.out);
  run.outputs = {{"instance", f.out},
                 {"files", {"g1.edges", "g2.edges", "anchors.tsv", "spec.json"}}};
  run.write_manifest(f.out, graphuil::to_json(spec), spec.seed);
  std::cout << "wrote " << f.out << ": |V1|=" << inst.g1.num_nodes() << " |V2|=" << inst.g2.num_nodes()
            << " anchors=" << inst.anchors.size() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainCmdFlags {
  TrainFlags train;
  std::string instance;
  std::string out;
  bool resume{false};
  std::size_t checkpoint_every{0};
  bool quiet{false};
};

int cmd_train(const TrainCmdFlags& f, const CLI::App& app, Run& run) {
  const BenchInstance inst = read_instance(f.instance);
  TrainConfig cfg = resolve_train(f.train);
  const fs::path out = f.out;

  std::optional<Checkpoint> resumed;
  if (f.resume) {
    if (!fs::exists(out / "model.json")) throw std::runtime_error("--resume: no checkpoint in " + out.string());
    resumed = load_checkpoint(out);
    const std::size_t epochs = cfg.epochs;
    cfg = resumed->config;
    if (app.count("--epochs") > 0) cfg.epochs = epochs;
  }

  Trainer trainer(inst.g1, inst.g2, inst.anchors, cfg);
  if (resumed) trainer.set_state(std::move(resumed->state));
  auto save = [&] {
    save_checkpoint(out, trainer.config(), trainer.state(), trainer.model());
    write_text(out / "history.jsonl", history_jsonl(trainer.state().history));
  };
  trainer.on_epoch = [&](const EpochRecord& r) {
    if (!f.quiet && (r.epoch % 50 == 0)) {
      std::cerr << "epoch " << r.epoch << " total " << r.loss.total << " match " << r.loss.match << " val "
                << r.val_match << "\n";
    }
    if (f.checkpoint_every > 0 && (r.epoch + 1) % f.checkpoint_every == 0) save();
  };
  trainer.run();
  save();

  run.inputs = {{"instance", f.instance}};
  run.outputs = {{"checkpoint", out.string()},
                 {"files", {"model.params", "model.json", "history.jsonl"}}};
  run.write_manifest(out, graphuil::to_json(trainer.config()), cfg.seed);
  std::cout << "trained " << trainer.state().history.size() << " epochs, best epoch " << trainer.state().best_epoch
            << ", val match " << trainer.state().best_val << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalCmdFlags {
  EvalFlags eval;
  std::string checkpoint;
  std::string instance;
  std::string out;
  std::string compare;
  std::uint64_t seed{0};
};

std::string metrics_csv_header() {
  return "label,alpha,beta,accuracy_mean,accuracy_std,f1_mean,f1_std,micro_f1_mean,repeats\n";
}

std::string metrics_csv_row(const std::string& label, double alpha, double beta, const EvalMetrics& m) {
  const auto acc = m.accuracy_summary();
  const auto f1 = m.f1_summary();
  return label + "," + num(alpha) + "," + num(beta) + "," + num(acc.mean) + "," + num(acc.std) + "," +
         num(f1.mean) + "," + num(f1.std) + "," + num(m.micro_f1_summary().mean) + "," +
         std::to_string(m.accuracy.size()) + "\n";
}

std::vector<double> accuracies_from_json(const ojson& j) {
  std::vector<double> out;
  for (const auto& r : j.at("repeats")) out.push_back(r.at("accuracy").get<double>());
  return out;
}

ojson t_test_json(const std::string& vs, std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) return {{"vs", vs}, {"t", nullptr}, {"df", nullptr}, {"p", nullptr}};
  ojson j = {{"vs", vs}};
  j.update(graphuil::to_json(welch_t_test(a, b)));
  return j;
}

int cmd_eval(const EvalCmdFlags& f, Run& run) {
  const EvalConfig ecfg = resolve_eval(f.eval, f.seed);
  if (!fs::exists(fs::path(f.checkpoint) / "model.json")) {
    throw std::runtime_error("missing checkpoint: " + f.checkpoint);
  }
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  const BenchInstance inst = read_instance(f.instance);
  if (static_cast<std::size_t>(ckpt.model.embeddings_sn1.rows()) != inst.g1.num_nodes() ||
      static_cast<std::size_t>(ckpt.model.embeddings_sn2.rows()) != inst.g2.num_nodes()) {
    throw std::runtime_error("checkpoint node counts do not match the instance");
  }
  const EvalMetrics m = repeat_eval(ckpt.model, inst.anchors, ecfg);

  ojson config = {{"train", graphuil::to_json(ckpt.config)}, {"eval", to_json(ecfg)}};
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = config;
  j.update(graphuil::to_json(m));
  if (!f.compare.empty()) {
    const auto other = accuracies_from_json(read_json(f.compare));
    j["t_test"] = t_test_json(f.compare, m.accuracy, other);
  } else {
    j["t_test"] = nullptr;
  }
  const fs::path out = f.out;
  write_text(out / "metrics.json", j.dump(2) + "\n");
  write_text(out / "metrics.csv",
             metrics_csv_header() + metrics_csv_row(to_string(ckpt.config.ablation), ckpt.config.alpha,
                                                    ckpt.config.beta, m));
  run.inputs = {{"checkpoint", f.checkpoint}, {"instance", f.instance}};
  if (!f.compare.empty()) run.inputs["compare"] = f.compare;
  run.outputs = {{"dir", out.string()}, {"files", {"metrics.json", "metrics.csv"}}};
  run.write_manifest(out, config, f.seed);
  const auto acc = m.accuracy_summary();
  const auto f1 = m.f1_summary();
  std::cout << "accuracy " << acc.mean << " +- " << acc.std << ", f1 " << f1.mean << " +- " << f1.std << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// ablate / grid

struct SuiteFlags {
  TrainFlags train;
  EvalFlags eval;
  std::string instance;
  std::string out;
  std::size_t jobs{default_jobs()};
};

struct Cell {
  TrainConfig cfg;
  EvalMetrics metrics;
  std::vector<EpochRecord> history;
};

void run_cells(std::vector<Cell>& cells, const BenchInstance& inst, const EvalConfig& ecfg, std::size_t jobs) {
  // Initial features depend only on the graphs, the feature spec and the seed,
  // so every cell shares one computation.
  const std::array<Matrix, 2> features = initial_features(inst.g1, inst.g2, cells.front().cfg);
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    const TrainedModel model = train(inst.g1, inst.g2, inst.anchors, cells[i].cfg, &features);
    cells[i].metrics = repeat_eval(model, inst.anchors, ecfg);
    cells[i].history = model.history;
  });
}

int cmd_ablate(const SuiteFlags& f, Run& run) {
  TrainFlags tf = f.train;
  tf.ablation = "full";
  const TrainConfig base = resolve_train(tf);
  const EvalConfig ecfg = resolve_eval(f.eval, f.train.seed);
  const BenchInstance inst = read_instance(f.instance);

  std::vector<Cell> cells;
  for (Ablation a : kAllAblations) cells.push_back({make_ablation(base, a), {}, {}});
  run_cells(cells, inst, ecfg, f.jobs);

  const fs::path out = f.out;
  std::string csv = "variant,alpha,beta,accuracy_mean,accuracy_std,f1_mean,f1_std,t,df,p\n";
  ojson variants = ojson::array();
  const auto& full = cells.front().metrics.accuracy;
  for (const auto& c : cells) {
    const std::string name = to_string(c.cfg.ablation);
    const ojson tt = t_test_json("full", full, c.metrics.accuracy);
    const auto acc = c.metrics.accuracy_summary();
    const auto f1 = c.metrics.f1_summary();
    auto field = [](const ojson& v) { return v.is_null() ? std::string() : v.dump(); };
    csv += name + "," + num(c.cfg.alpha) + "," + num(c.cfg.beta) + "," + num(acc.mean) + "," + num(acc.std) + "," +
           num(f1.mean) + "," + num(f1.std) + "," + field(tt["t"]) + "," + field(tt["df"]) + "," + field(tt["p"]) +
           "\n";
    ojson v = {{"variant", name}, {"config", graphuil::to_json(c.cfg)}};
    v.update(graphuil::to_json(c.metrics));
    v["t_test"] = tt;
    variants.push_back(v);
    write_text(out / name / "history.jsonl", history_jsonl(c.history));
  }
  ojson j = {{"schema_version", kSchemaVersion}, {"variants", variants}};
  write_text(out / "ablation.json", j.dump(2) + "\n");
  write_text(out / "ablation.csv", csv);
  run.inputs = {{"instance", f.instance}};
  run.outputs = {{"dir", out.string()}, {"files", {"ablation.csv", "ablation.json"}}};
  run.write_manifest(out, {{"train", graphuil::to_json(base)}, {"eval", to_json(ecfg)}}, f.train.seed);
  std::cout << csv;
  return kOk;
}

struct GridFlags {
  SuiteFlags suite;
  std::vector<double> alphas{0.01, 0.1, 1, 10, 100};
  std::vector<double> betas{0.01, 0.1, 1, 10, 100};
};

int cmd_grid(const GridFlags& f, Run& run) {
  TrainFlags tf = f.suite.train;
  tf.ablation = "full";
  const TrainConfig base = resolve_train(tf);
  const EvalConfig ecfg = resolve_eval(f.suite.eval, f.suite.train.seed);
  for (double v : f.alphas) {
    if (!(v >= 0.0)) throw UsageError("--alphas values must be non-negative");
  }
  for (double v : f.betas) {
    if (!(v >= 0.0)) throw UsageError("--betas values must be non-negative");
  }
  const BenchInstance inst = read_instance(f.suite.instance);

  std::vector<Cell> cells;
  for (double a : f.alphas) {
    for (double b : f.betas) {
      TrainConfig c = base;
      c.alpha = a;
      c.beta = b;
      cells.push_back({c, {}, {}});
    }
  }
  run_cells(cells, inst, ecfg, f.suite.jobs);

  std::string csv = "alpha,beta,accuracy_mean,f1_mean\n";
  ojson rows = ojson::array();
  for (const auto& c : cells) {
    csv += num(c.cfg.alpha) + "," + num(c.cfg.beta) + "," + num(c.metrics.accuracy_summary().mean) + "," +
           num(c.metrics.f1_summary().mean) + "\n";
    ojson r = {{"alpha", c.cfg.alpha}, {"beta", c.cfg.beta}};
    r.update(graphuil::to_json(c.metrics));
    rows.push_back(r);
  }
  const fs::path out = f.suite.out;
  write_text(out / "grid.csv", csv);
  write_text(out / "grid.json", ojson({{"schema_version", kSchemaVersion}, {"cells", rows}}).dump(2) + "\n");
  run.inputs = {{"instance", f.suite.instance}};
  run.outputs = {{"dir", out.string()}, {"files", {"grid.csv", "grid.json"}}};
  ojson config = {{"train", graphuil::to_json(base)}, {"eval", to_json(ecfg)}, {"alphas", f.alphas},
                  {"betas", f.betas}};
  run.write_manifest(out, config, f.suite.train.seed);
  std::cout << csv;
  return kOk;
}

// ---------------------------------------------------------------------------
// stats / replay

int cmd_stats(const std::string& path, std::size_t min_degree) {
  const EdgeListLoad load = load_edge_list(path);
  const Graph g = min_degree > 0 ? prune_low_degree(load.graph, min_degree) : load.graph;
  std::cout << stats_json(graph_stats(g)) << "\n";
  if (load.self_loops_dropped > 0) std::cerr << "dropped " << load.self_loops_dropped << " self-loops\n";
  return kOk;
}

std::vector<std::string> replay_args(const fs::path& manifest, const std::string& out_override) {
  const ojson m = read_json(manifest);
  auto args = m.at("argv").get<std::vector<std::string>>();
  if (out_override.empty()) return args;
  bool replaced = false;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out" && i + 1 < args.size()) {
      args[i + 1] = out_override;
      replaced = true;
    } else if (args[i].rfind("--out=", 0) == 0) {
      args[i] = "--out=" + out_override;
      replaced = true;
    }
  }
  if (!replaced) args.push_back("--out=" + out_override);
  return args;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args) {
  std::vector<std::string> args;
  try {
    args = apply_config(raw_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  CLI::App app{"User identity linkage across two networks with multi-stage aggregation encoders.", "graphuil"};
  app.footer(kConfigHelp);
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  std::string config_file;
  auto add_config = [&](CLI::App* c) { c->add_option("--config", config_file, "Flat key = value config file"); };

  GenFlags gen;
  auto* c_gen = app.add_subcommand("gen", "Generate a synthetic two-network benchmark instance");
  c_gen->add_option("--model", gen.model, "Base graph model: ba|ws|sbm")->capture_default_str();
  c_gen->add_option("--n", gen.spec.n, "Base node count")->capture_default_str();
  c_gen->add_option("--m", gen.spec.m, "ba: edges per new node")->capture_default_str();
  c_gen->add_option("--k", gen.spec.k, "ws: ring degree")->capture_default_str();
  c_gen->add_option("--p-rewire", gen.spec.p_rewire, "ws: rewiring probability")->capture_default_str();
  c_gen->add_option("--blocks", gen.spec.blocks, "sbm: block count")->capture_default_str();
  c_gen->add_option("--p-in", gen.spec.p_in, "sbm: within-block edge probability")->capture_default_str();
  c_gen->add_option("--p-out", gen.spec.p_out, "sbm: cross-block edge probability")->capture_default_str();
  c_gen->add_option("--overlap", gen.spec.overlap, "Fraction of base nodes in both views")->capture_default_str();
  c_gen->add_option("--noise", gen.spec.edge_noise, "Fraction of each view's edges rewired")->capture_default_str();
  c_gen->add_option("--train-frac", gen.spec.train_frac)->capture_default_str();
  c_gen->add_option("--val-frac", gen.spec.val_frac)->capture_default_str();
  c_gen->add_option("--test-frac", gen.spec.test_frac)->capture_default_str();
  c_gen->add_option("--seed", gen.spec.seed, "Master seed")->capture_default_str();
  c_gen->add_option("--out", gen.out, "Instance directory")->required();
  add_config(c_gen);

  TrainCmdFlags tr;
  auto* c_train = app.add_subcommand("train", "Train both encoders and the mapper on an instance");
  add_train_flags(c_train, tr.train);
  c_train->add_option("--instance", tr.instance, "Instance directory")->required();
  c_train->add_option("--out", tr.out, "Checkpoint directory")->required();
  c_train->add_flag("--resume", tr.resume, "Continue from the checkpoint in --out");
  c_train->add_option("--checkpoint-every", tr.checkpoint_every, "Also checkpoint every N epochs")
      ->capture_default_str();
  c_train->add_flag("--quiet", tr.quiet, "No progress lines");
  add_config(c_train);

  EvalCmdFlags ev;
  auto* c_eval = app.add_subcommand("eval", "Score a checkpoint with the pair classification protocol");
  add_eval_flags(c_eval, ev.eval);
  c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  c_eval->add_option("--instance", ev.instance, "Instance directory")->required();
  c_eval->add_option("--out", ev.out, "Output directory")->required();
  c_eval->add_option("--compare", ev.compare, "metrics.json to t-test against");
  c_eval->add_option("--seed", ev.seed, "Master seed")->capture_default_str();
  add_config(c_eval);

  SuiteFlags ab;
  auto* c_ablate = app.add_subcommand("ablate", "Train and evaluate every ablation variant");
  add_train_flags(c_ablate, ab.train);
  add_eval_flags(c_ablate, ab.eval);
  c_ablate->add_option("--instance", ab.instance, "Instance directory")->required();
  c_ablate->add_option("--out", ab.out, "Output directory")->required();
  c_ablate->add_option("--jobs", ab.jobs, "Concurrent training runs")->capture_default_str();
  add_config(c_ablate);

  GridFlags gr;
  auto* c_grid = app.add_subcommand("grid", "Sweep the loss weights alpha and beta");
  add_train_flags(c_grid, gr.suite.train);
  add_eval_flags(c_grid, gr.suite.eval);
  c_grid->add_option("--instance", gr.suite.instance, "Instance directory")->required();
  c_grid->add_option("--out", gr.suite.out, "Output directory")->required();
  c_grid->add_option("--jobs", gr.suite.jobs, "Concurrent training runs")->capture_default_str();
  c_grid->add_option("--alphas", gr.alphas, "alpha values")->delimiter(',')->capture_default_str();
  c_grid->add_option("--betas", gr.betas, "beta values")->delimiter(',')->capture_default_str();
  add_config(c_grid);

  std::string stats_graph;
  std::size_t stats_min_degree = 0;
  auto* c_stats = app.add_subcommand("stats", "Print node/edge/degree/sparsity statistics of an edge list");
  c_stats->add_option("--graph", stats_graph, "Edge list file")->required();
  c_stats->add_option("--min-degree", stats_min_degree, "Prune nodes below this degree first")
      ->capture_default_str();

  std::string replay_manifest;
  std::string replay_out;
  auto* c_replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  c_replay->add_option("manifest", replay_manifest, "manifest.json")->required();
  c_replay->add_option("--out", replay_out, "Write outputs here instead of the recorded directory");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  Run run;
  run.argv = raw_args;
  try {
    if (*c_gen) {
      run.command = "gen";
      return cmd_gen(gen, run);
    }
    if (*c_train) {
      run.command = "train";
      return cmd_train(tr, *c_train, run);
    }
    if (*c_eval) {
      run.command = "eval";
      return cmd_eval(ev, run);
    }
    if (*c_ablate) {
      run.command = "ablate";
      return cmd_ablate(ab, run);
    }
    if (*c_grid) {
      run.command = "grid";
      return cmd_grid(gr, run);
    }
    if (*c_stats) return cmd_stats(stats_graph, stats_min_degree);
    if (*c_replay) return run_cli(replay_args(replay_manifest, replay_out));
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace graphuil::cli
