#include "graphuil/training.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "graphuil/error.hpp"
#include "graphuil/rng.hpp"

namespace graphuil {

namespace {

constexpr std::uint64_t kTagFeatures = 0x66656174ULL;
constexpr std::uint64_t kTagEncoder = 0x656e63ULL;
constexpr std::uint64_t kTagMapper = 0x6d6170ULL;
constexpr std::uint64_t kTagNegatives = 0x6e6567ULL;
constexpr int kCheckpointVersion = 1;

const char* kSn1 = "sn1.";
const char* kSn2 = "sn2.";
const char* kMap = "map.";

}  // namespace

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_local: return "no_local";
    case Ablation::no_global: return "no_global";
    case Ablation::no_reconstruction: return "no_reconstruction";
    case Ablation::gta_only: return "gta_only";
    case Ablation::lta_only: return "lta_only";
  }
  return "?";
}

Ablation parse_ablation(const std::string& s) {
  for (Ablation a : kAllAblations) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown ablation: " + s);
}

void TrainConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("alpha and beta must be non-negative");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (epochs == 0) throw std::invalid_argument("epochs must be positive");
  encoder.validate();
  if (mapper.input_dim != encoder.hidden_dim || mapper.output_dim != encoder.hidden_dim) {
    throw std::invalid_argument("mapper input/output dims must equal the encoder output dim");
  }
  if (features.method == FeatureMethod::file && (feature_files[0].empty() || feature_files[1].empty())) {
    throw std::invalid_argument("file features need one feature file per network");
  }
  const bool zero_alpha = ablation == Ablation::no_global || ablation == Ablation::no_reconstruction;
  const bool zero_beta = ablation == Ablation::no_local || ablation == Ablation::no_reconstruction;
  if ((zero_alpha && alpha != 0.0) || (zero_beta && beta != 0.0)) {
    throw std::invalid_argument("ablation " + to_string(ablation) + " conflicts with alpha/beta");
  }
  if ((ablation == Ablation::gta_only && encoder.aggregators != Aggregators::gta_only) ||
      (ablation == Ablation::lta_only && encoder.aggregators != Aggregators::lta_only)) {
    throw std::invalid_argument("ablation " + to_string(ablation) + " conflicts with the encoder aggregators");
  }
}

TrainConfig make_ablation(TrainConfig cfg, Ablation kind) {
  switch (kind) {
    case Ablation::full: return cfg;
    case Ablation::no_local: cfg.beta = 0.0; break;
    case Ablation::no_global: cfg.alpha = 0.0; break;
    case Ablation::no_reconstruction:
      cfg.alpha = 0.0;
      cfg.beta = 0.0;
      break;
    case Ablation::gta_only: cfg.encoder.aggregators = Aggregators::gta_only; break;
    case Ablation::lta_only: cfg.encoder.aggregators = Aggregators::lta_only; break;
    default: throw std::invalid_argument("unknown ablation kind");
  }
  cfg.ablation = kind;
  return cfg;
}

nlohmann::ordered_json to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["alpha"] = cfg.alpha;
  j["beta"] = cfg.beta;
  j["epochs"] = cfg.epochs;
  j["lr"] = cfg.lr;
  j["seed"] = cfg.seed;
  j["patience"] = cfg.patience;
  j["ablation"] = to_string(cfg.ablation);
  const auto& f = cfg.features;
  j["features"] = {{"method", to_string(f.method)},
                   {"dim", f.dim},
                   {"walks_per_node", f.walk.walks_per_node},
                   {"walk_length", f.walk.walk_length},
                   {"window", f.walk.window},
                   {"negatives", f.walk.negatives},
                   {"epochs", f.walk.epochs},
                   {"learning_rate", f.walk.learning_rate},
                   {"file_has_ids", f.file_has_ids},
                   {"files", {cfg.feature_files[0].string(), cfg.feature_files[1].string()}}};
  const auto& e = cfg.encoder;
  j["encoder"] = {{"input_dim", e.input_dim},
                  {"hidden_dim", e.hidden_dim},
                  {"attention_dim", e.attention_dim},
                  {"layers", e.layers},
                  {"attention_self", e.attention_self},
                  {"aggregators", to_string(e.aggregators)},
                  {"skip", to_string(e.skip)}};
  const auto& m = cfg.mapper;
  j["mapper"] = {{"input_dim", m.input_dim},
                 {"hidden_dim", m.hidden_dim},
                 {"output_dim", m.output_dim},
                 {"hidden_layers", m.hidden_layers}};
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.alpha = j.at("alpha").get<double>();
  cfg.beta = j.at("beta").get<double>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.lr = j.at("lr").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.patience = j.at("patience").get<std::size_t>();
  cfg.ablation = parse_ablation(j.at("ablation").get<std::string>());
  const auto& f = j.at("features");
  cfg.features.method = parse_feature_method(f.at("method").get<std::string>());
  cfg.features.dim = f.at("dim").get<std::size_t>();
  cfg.features.walk.walks_per_node = f.at("walks_per_node").get<std::size_t>();
  cfg.features.walk.walk_length = f.at("walk_length").get<std::size_t>();
  cfg.features.walk.window = f.at("window").get<std::size_t>();
  cfg.features.walk.negatives = f.at("negatives").get<std::size_t>();
  cfg.features.walk.epochs = f.at("epochs").get<std::size_t>();
  cfg.features.walk.learning_rate = f.at("learning_rate").get<double>();
  cfg.features.file_has_ids = f.at("file_has_ids").get<bool>();
  cfg.feature_files[0] = f.at("files").at(0).get<std::string>();
  cfg.feature_files[1] = f.at("files").at(1).get<std::string>();
  const auto& e = j.at("encoder");
  cfg.encoder.input_dim = e.at("input_dim").get<std::size_t>();
  cfg.encoder.hidden_dim = e.at("hidden_dim").get<std::size_t>();
  cfg.encoder.attention_dim = e.at("attention_dim").get<std::size_t>();
  cfg.encoder.layers = e.at("layers").get<std::size_t>();
  cfg.encoder.attention_self = e.at("attention_self").get<bool>();
  cfg.encoder.aggregators = parse_aggregators(e.at("aggregators").get<std::string>());
  cfg.encoder.skip = parse_skip_mode(e.at("skip").get<std::string>());
  const auto& m = j.at("mapper");
  cfg.mapper.input_dim = m.at("input_dim").get<std::size_t>();
  cfg.mapper.hidden_dim = m.at("hidden_dim").get<std::size_t>();
  cfg.mapper.output_dim = m.at("output_dim").get<std::size_t>();
  cfg.mapper.hidden_layers = m.at("hidden_layers").get<std::size_t>();
  return cfg;
}

nlohmann::ordered_json to_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["global_sn1"] = r.loss.global_sn1;
  j["global_sn2"] = r.loss.global_sn2;
  j["local_sn1"] = r.loss.local_sn1;
  j["local_sn2"] = r.loss.local_sn2;
  j["match"] = r.loss.match;
  j["total"] = r.loss.total;
  j["alpha"] = r.loss.alpha;
  j["beta"] = r.loss.beta;
  j["val_match"] = r.val_match;
  j["val_ratio"] = r.val_ratio;
  return j;
}

namespace {

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.loss.global_sn1 = j.at("global_sn1").get<double>();
  r.loss.global_sn2 = j.at("global_sn2").get<double>();
  r.loss.local_sn1 = j.at("local_sn1").get<double>();
  r.loss.local_sn2 = j.at("local_sn2").get<double>();
  r.loss.match = j.at("match").get<double>();
  r.loss.total = j.at("total").get<double>();
  r.loss.alpha = j.at("alpha").get<double>();
  r.loss.beta = j.at("beta").get<double>();
  r.val_match = j.at("val_match").get<double>();
  r.val_ratio = j.at("val_ratio").get<double>();
  return r;
}

}  // namespace

Matrix TrainedModel::mapped_sn1() const { return mapper_forward(embeddings_sn1, mapper); }

std::array<Matrix, 2> initial_features(const Graph& g1, const Graph& g2, const TrainConfig& cfg) {
  std::array<Matrix, 2> out;
  const Graph* graphs[2] = {&g1, &g2};
  for (std::size_t k = 0; k < 2; ++k) {
    FeatureInitSpec spec = cfg.features;
    spec.dim = cfg.encoder.input_dim;
    spec.seed = derive_seed(cfg.seed, {kTagFeatures, k + 1});
    if (spec.method == FeatureMethod::file) spec.file = cfg.feature_files[k];
    out[k] = init_features(*graphs[k], spec);
  }
  return out;
}

Trainer::Trainer(const Graph& g1, const Graph& g2, const AnchorLinkSet& anchors, const TrainConfig& cfg,
                 const std::array<Matrix, 2>* features)
    : g1_(&g1),
      g2_(&g2),
      cfg_(make_ablation(cfg, cfg.ablation)),
      train_anchors_(anchors.in_split(Split::train)),
      val_anchors_(anchors.in_split(Split::val)),
      ctx1_(g1, cfg_.encoder.attention_self),
      ctx2_(g2, cfg_.encoder.attention_self) {
  cfg_.validate();
  anchors.validate(g1.num_nodes(), g2.num_nodes());
  if (train_anchors_.empty()) throw std::invalid_argument("training needs at least one training anchor");
  if (g1.num_edges() == 0 || g2.num_edges() == 0) throw std::invalid_argument("both networks need edges");
  features_ = features ? *features : initial_features(g1, g2, cfg_);
  const auto dim = static_cast<Eigen::Index>(cfg_.encoder.input_dim);
  if (features_[0].rows() != static_cast<Eigen::Index>(g1.num_nodes()) || features_[0].cols() != dim ||
      features_[1].rows() != static_cast<Eigen::Index>(g2.num_nodes()) || features_[1].cols() != dim) {
    throw DimensionError("initial features do not match the graphs and encoder input dim");
  }
  for (const auto& name : disabled_blocks(cfg_.encoder)) {
    frozen_.push_back(kSn1 + name);
    frozen_.push_back(kSn2 + name);
  }
  state_ = initial_state();
}

TrainState Trainer::initial_state() const {
  TrainState s;
  s.params.append(init_encoder(cfg_.encoder, derive_seed(cfg_.seed, {kTagEncoder, 1})), kSn1);
  s.params.append(init_encoder(cfg_.encoder, derive_seed(cfg_.seed, {kTagEncoder, 2})), kSn2);
  s.params.append(init_mapper(cfg_.mapper, derive_seed(cfg_.seed, {kTagMapper})), kMap);
  AdamConfig adam;
  adam.lr = cfg_.lr;
  s.adam = AdamState::init(s.params, adam);
  s.best_params = s.params;
  return s;
}

void Trainer::set_state(TrainState state) {
  if (!state.params.same_layout(state_.params)) throw DimensionError("resumed parameters do not match the model");
  state_ = std::move(state);
}

std::array<NegSampleMask, 2> Trainer::negatives(std::size_t epoch) const {
  return {negative_sample(*g1_, derive_seed(cfg_.seed, {kTagNegatives, epoch, 1})),
          negative_sample(*g2_, derive_seed(cfg_.seed, {kTagNegatives, epoch, 2}))};
}

Trainer::Terms Trainer::forward(Tape& tape, const BoundParams& bound, const std::array<NegSampleMask, 2>& masks) const {
  Terms t;
  t.x1 = encode(ctx1_, tape.constant(features_[0]), bound, cfg_.encoder, kSn1);
  t.x2 = encode(ctx2_, tape.constant(features_[1]), bound, cfg_.encoder, kSn2);
  t.g1 = global_loss(t.x1, masks[0]);
  t.g2 = global_loss(t.x2, masks[1]);
  t.l1 = local_loss(*g1_, t.x1);
  t.l2 = local_loss(*g2_, t.x2);
  t.match = match_loss(train_anchors_, t.x1, t.x2, bound, kMap);
  // Zero-weighted terms stay off the gradient path; their values are still logged.
  t.total = t.match;
  if (cfg_.alpha != 0.0) t.total = ad::add(t.total, ad::scale(ad::add(t.g1, t.g2), cfg_.alpha));
  if (cfg_.beta != 0.0) t.total = ad::add(t.total, ad::scale(ad::add(t.l1, t.l2), cfg_.beta));
  return t;
}

LossBuilder Trainer::objective(std::size_t epoch) const {
  return [this, masks = negatives(epoch)](Tape& tape, const BoundParams& bound) {
    return forward(tape, bound, masks).total;
  };
}

void Trainer::step() {
  const std::size_t epoch = state_.next_epoch;
  const auto masks = negatives(epoch);

  Tape tape;
  BoundParams bound(tape, state_.params, frozen_);
  const auto [x1, x2, g1, g2, l1, l2, match, total] = forward(tape, bound, masks);

  EpochRecord rec;
  rec.epoch = epoch;
  rec.loss = total_loss(tape.scalar(g1), tape.scalar(g2), tape.scalar(l1), tape.scalar(l2), tape.scalar(match),
                        cfg_.alpha, cfg_.beta);
  const std::pair<const char*, double> terms[] = {{"global_sn1", rec.loss.global_sn1},
                                                  {"global_sn2", rec.loss.global_sn2},
                                                  {"local_sn1", rec.loss.local_sn1},
                                                  {"local_sn2", rec.loss.local_sn2},
                                                  {"match", rec.loss.match},
                                                  {"total", rec.loss.total}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) throw DivergenceError(static_cast<int>(epoch), name);
  }

  if (val_anchors_.empty()) {
    rec.val_match = rec.loss.match;
  } else {
    std::vector<NodeId> left;
    std::vector<NodeId> right;
    for (const auto& a : val_anchors_) {
      left.push_back(a.sn1);
      right.push_back(a.sn2);
    }
    const Matrix mapped = tape.value(mapper_forward(ad::gather_rows(x1, left), bound, kMap));
    const Matrix& y = tape.value(x2);
    double paired = 0.0;
    double all = 0.0;
    for (std::size_t a = 0; a < left.size(); ++a) {
      const auto ra = static_cast<Eigen::Index>(a);
      for (std::size_t b = 0; b < right.size(); ++b) {
        const double d = (mapped.row(ra) - y.row(right[b])).squaredNorm();
        all += d;
        if (a == b) paired += d;
      }
    }
    rec.val_match = paired;
    const double chance = all / static_cast<double>(left.size());
    rec.val_ratio = left.size() >= 2 && chance > 0.0 ? paired / chance : rec.loss.total;
    if (!std::isfinite(rec.val_match)) throw DivergenceError(static_cast<int>(epoch), "val_match");
  }
  if (val_anchors_.size() < 2) rec.val_ratio = rec.loss.total;

  // The record describes the parameters that produced it, so the snapshot is
  // taken before the update.
  if (rec.val_ratio < state_.best_val) {
    state_.best_val = rec.val_ratio;
    state_.best_epoch = epoch;
    state_.best_params = state_.params;
    state_.since_best = 0;
  } else {
    ++state_.since_best;
  }

  tape.backward(total);
  adam_step(state_.params, bound.gradients(), state_.adam);

  state_.history.push_back(rec);
  ++state_.next_epoch;
  if (cfg_.patience > 0 && state_.since_best >= cfg_.patience) state_.stopped = true;
  if (on_epoch) on_epoch(rec);
}

void Trainer::run(std::optional<std::size_t> until_epoch) {
  while (!finished() && (!until_epoch || state_.next_epoch < *until_epoch)) step();
}

TrainedModel Trainer::model() const {
  TrainedModel m;
  m.config = cfg_;
  const ParamSet& p = state_.history.empty() ? state_.params : state_.best_params;
  m.encoder_sn1 = p.extract(kSn1);
  m.encoder_sn2 = p.extract(kSn2);
  m.mapper = p.extract(kMap);
  m.embeddings_sn1 = encode(ctx1_, features_[0], m.encoder_sn1, cfg_.encoder);
  m.embeddings_sn2 = encode(ctx2_, features_[1], m.encoder_sn2, cfg_.encoder);
  m.history = state_.history;
  m.best_epoch = state_.best_epoch;
  m.best_val = state_.best_val;
  return m;
}

TrainedModel train(const Graph& g1, const Graph& g2, const AnchorLinkSet& anchors, const TrainConfig& cfg,
                   const std::array<Matrix, 2>* features) {
  Trainer trainer(g1, g2, anchors, cfg, features);
  trainer.run();
  return trainer.model();
}

void save_checkpoint(const std::filesystem::path& dir, const TrainConfig& cfg, const TrainState& state,
                     const TrainedModel& model) {
  std::filesystem::create_directories(dir);
  ParamSet all;
  all.append(state.params, "cur.");
  all.append(state.best_params, "best.");
  all.append(state.adam.m, "adam.m.");
  all.append(state.adam.v, "adam.v.");
  all.add("emb.sn1", model.embeddings_sn1);
  all.add("emb.sn2", model.embeddings_sn2);
  save_params(all, dir / "model.params");

  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointVersion;
  j["config"] = to_json(cfg);
  j["adam"] = {{"t", state.adam.t},
               {"lr", state.adam.config.lr},
               {"beta1", state.adam.config.beta1},
               {"beta2", state.adam.config.beta2},
               {"eps", state.adam.config.eps}};
  j["next_epoch"] = state.next_epoch;
  j["best_val"] = std::isfinite(state.best_val) ? nlohmann::ordered_json(state.best_val) : nullptr;
  j["best_epoch"] = state.best_epoch;
  j["since_best"] = state.since_best;
  j["stopped"] = state.stopped;
  j["params_checksum"] = params_checksum(state.params);
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& r : state.history) hist.push_back(to_json(r));
  j["history"] = std::move(hist);
  std::ofstream out(dir / "model.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "model.json").string());
  out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw std::runtime_error("missing checkpoint: " + (dir / "model.json").string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model.json: ") + e.what());
  }
  if (j.at("format_version").get<int>() != kCheckpointVersion) {
    throw ParseError("model.json: unsupported checkpoint version");
  }
  const ParamSet all = load_params(dir / "model.params");

  Checkpoint c;
  c.config = train_config_from_json(j.at("config"));
  c.state.params = all.extract("cur.");
  c.state.best_params = all.extract("best.");
  c.state.adam.m = all.extract("adam.m.");
  c.state.adam.v = all.extract("adam.v.");
  const auto& a = j.at("adam");
  c.state.adam.t = a.at("t").get<std::int64_t>();
  c.state.adam.config.lr = a.at("lr").get<double>();
  c.state.adam.config.beta1 = a.at("beta1").get<double>();
  c.state.adam.config.beta2 = a.at("beta2").get<double>();
  c.state.adam.config.eps = a.at("eps").get<double>();
  c.state.next_epoch = j.at("next_epoch").get<std::size_t>();
  c.state.best_val =
      j.at("best_val").is_null() ? std::numeric_limits<double>::infinity() : j.at("best_val").get<double>();
  c.state.best_epoch = j.at("best_epoch").get<std::size_t>();
  c.state.since_best = j.at("since_best").get<std::size_t>();
  c.state.stopped = j.at("stopped").get<bool>();
  for (const auto& r : j.at("history")) c.state.history.push_back(epoch_record_from_json(r));

  c.model.config = c.config;
  c.model.encoder_sn1 = c.state.best_params.extract(kSn1);
  c.model.encoder_sn2 = c.state.best_params.extract(kSn2);
  c.model.mapper = c.state.best_params.extract(kMap);
  c.model.embeddings_sn1 = all.at("emb.sn1");
  c.model.embeddings_sn2 = all.at("emb.sn2");
  c.model.history = c.state.history;
  c.model.best_epoch = c.state.best_epoch;
  c.model.best_val = c.state.best_val;
  return c;
}

}  // namespace graphuil
