#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphuil/adam.hpp"
#include "graphuil/anchors.hpp"
#include "graphuil/feature_init.hpp"
#include "graphuil/msa.hpp"
#include "graphuil/objectives.hpp"

namespace graphuil {

enum class Ablation { full, no_local, no_global, no_reconstruction, gta_only, lta_only };

inline constexpr std::array<Ablation, 6> kAllAblations = {Ablation::full,      Ablation::no_local,
                                                          Ablation::no_global, Ablation::no_reconstruction,
                                                          Ablation::gta_only,  Ablation::lta_only};

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

struct TrainConfig {
  double alpha{10.0};
  double beta{1.0};
  std::size_t epochs{1000};
  double lr{0.01};
  std::uint64_t seed{0};
  /// Early stop after this many epochs without a new best validation score
  /// (see EpochRecord::val_ratio). 0 disables early stopping.
  std::size_t patience{50};
  Ablation ablation{Ablation::full};
  /// Shared by both networks; each network gets its own derived seed. For the
  /// file method, feature_files names one file per network.
  FeatureInitSpec features;
  std::array<std::filesystem::path, 2> feature_files;
  EncoderConfig encoder;
  MapperConfig mapper;

  void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// cfg with the ablation applied: no_local ⇒ β = 0, no_global ⇒ α = 0,
/// no_reconstruction ⇒ α = β = 0, gta_only / lta_only ⇒ the other
/// aggregator path disabled and frozen. `full` leaves cfg unchanged.
TrainConfig make_ablation(TrainConfig cfg, Ablation kind);

struct EpochRecord {
  std::size_t epoch{0};
  LossBreakdown loss;
  /// Match loss over validation anchors.
  double val_match{0.0};
  /// val_match divided by its value if every validation SN1 node were paired
  /// with the average validation SN2 node: Σ_a ||f(x_a) − y_a||² /
  /// ((1/v) Σ_a Σ_b ||f(x_a) − y_b||²). Scale-free, so a shrinking embedding
  /// cannot fake progress; 1 means chance. Model selection uses this value.
  /// Falls back to the total loss with fewer than two validation anchors.
  double val_ratio{0.0};
};

nlohmann::ordered_json to_json(const EpochRecord& r);

/// Everything needed to continue training bit-for-bit.
struct TrainState {
  ParamSet params;  // "sn1.*", "sn2.*", "map.*"
  AdamState adam;
  std::size_t next_epoch{0};
  ParamSet best_params;
  double best_val{std::numeric_limits<double>::infinity()};  // best val_ratio
  std::size_t best_epoch{0};
  std::size_t since_best{0};
  bool stopped{false};
  std::vector<EpochRecord> history;
};

struct TrainedModel {
  TrainConfig config;
  ParamSet encoder_sn1;
  ParamSet encoder_sn2;
  ParamSet mapper;
  Matrix embeddings_sn1;
  Matrix embeddings_sn2;
  std::vector<EpochRecord> history;
  std::size_t best_epoch{0};
  double best_val{0.0};

  /// Mapper applied to every first-network embedding.
  Matrix mapped_sn1() const;
};

/// Initial features for both networks under cfg.
std::array<Matrix, 2> initial_features(const Graph& g1, const Graph& g2, const TrainConfig& cfg);

class Trainer {
 public:
  /// Features are computed from cfg unless supplied. The graphs must outlive
  /// the trainer.
  Trainer(const Graph& g1, const Graph& g2, const AnchorLinkSet& anchors, const TrainConfig& cfg,
          const std::array<Matrix, 2>* features = nullptr);

  const TrainConfig& config() const noexcept { return cfg_; }
  const TrainState& state() const noexcept { return state_; }
  void set_state(TrainState state);

  /// Fresh parameters and optimizer state for the configured seed.
  TrainState initial_state() const;

  /// Runs epochs until cfg.epochs, early stop, or `until_epoch` (exclusive).
  void run(std::optional<std::size_t> until_epoch = std::nullopt);
  bool finished() const noexcept { return state_.stopped || state_.next_epoch >= cfg_.epochs; }

  /// Best-validation snapshot with its embeddings.
  TrainedModel model() const;

  /// The weighted objective of `epoch` (its negative samples included) over a
  /// parameter set laid out like state().params.
  LossBuilder objective(std::size_t epoch) const;

  /// Called after every epoch.
  std::function<void(const EpochRecord&)> on_epoch;

 private:
  struct Terms {
    Var x1, x2, g1, g2, l1, l2, match, total;
  };
  std::array<NegSampleMask, 2> negatives(std::size_t epoch) const;
  Terms forward(Tape& tape, const BoundParams& bound, const std::array<NegSampleMask, 2>& masks) const;
  void step();

  const Graph* g1_;
  const Graph* g2_;
  TrainConfig cfg_;
  std::vector<AnchorPair> train_anchors_;
  std::vector<AnchorPair> val_anchors_;
  std::array<Matrix, 2> features_;
  GraphContext ctx1_;
  GraphContext ctx2_;
  std::vector<std::string> frozen_;
  TrainState state_;
};

/// Full-batch joint training of both encoders and the mapper.
TrainedModel train(const Graph& g1, const Graph& g2, const AnchorLinkSet& anchors, const TrainConfig& cfg,
                   const std::array<Matrix, 2>* features = nullptr);

/// Checkpoint directory: model.params (parameter container) + model.json
/// (config echo, optimizer counters, loss history).
void save_checkpoint(const std::filesystem::path& dir, const TrainConfig& cfg, const TrainState& state,
                     const TrainedModel& model);

struct Checkpoint {
  TrainConfig config;
  TrainState state;
  TrainedModel model;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace graphuil
