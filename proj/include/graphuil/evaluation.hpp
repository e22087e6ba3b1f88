#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "graphuil/anchors.hpp"
#include "graphuil/params.hpp"
#include "graphuil/training.hpp"

namespace graphuil {

/// Candidate identity pairs as classifier inputs [f(x′_i) ⊕ x′_j].
struct PairDataset {
  Matrix features;  // one row per pair
  std::vector<int> labels;
  std::vector<AnchorPair> pairs;
  Split split{Split::test};
  /// Fewer negatives than positives could be drawn.
  bool imbalanced{false};

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t positives() const;
};

/// One positive per anchor of `split`, then as many negatives drawn uniformly
/// from (split SN1 nodes) × (split SN2 nodes) minus the true pairs. Both
/// classes thus share the same nodes, and no other split is read. `mapped`
/// holds f(x′) for every first-network node, `x2` the second-network
/// embeddings. Throws when the split has no anchors or too few non-anchor
/// pairs exist.
PairDataset build_pair_dataset(const AnchorLinkSet& anchors, Split split, const Matrix& mapped, const Matrix& x2,
                               std::uint64_t seed);

enum class ClassifierKind { logistic, mlp };
std::string to_string(ClassifierKind k);
ClassifierKind parse_classifier_kind(const std::string& s);

struct ClassifierConfig {
  ClassifierKind kind{ClassifierKind::logistic};
  std::size_t hidden{64};  // mlp only
  std::size_t epochs{200};
  double lr{0.01};
};

struct Classifier {
  ClassifierConfig config;
  /// logistic: "w" (d×1), "b" (1×1). mlp adds "w_h" (d×hidden), "b_h" (1×hidden).
  ParamSet params;

  /// P(label = 1) per row.
  std::vector<double> predict_proba(const Matrix& features) const;
};

/// Full-batch Adam on mean binary cross-entropy. Logistic weights start at
/// zero; mlp hidden weights are Glorot-initialized from `seed`.
Classifier train_classifier(const PairDataset& train, const ClassifierConfig& cfg, std::uint64_t seed);

struct Confusion {
  std::size_t tp{0};
  std::size_t fp{0};
  std::size_t fn{0};
  std::size_t tn{0};
};

struct Scores {
  double accuracy{0.0};
  double f1{0.0};        // positive class
  double micro_f1{0.0};  // pooled over both classes
};

Scores scores_from_confusion(const Confusion& c);

/// Threshold 0.5: probability above 0.5 predicts a link.
Confusion confusion(const std::vector<double>& proba, const std::vector<int>& labels);
Scores evaluate(const Classifier& clf, const PairDataset& test);

struct MeanStd {
  double mean{0.0};
  double std{0.0};  // sample standard deviation; 0 for a single value
};
MeanStd mean_std(std::span<const double> xs);

struct EvalMetrics {
  std::vector<double> accuracy;
  std::vector<double> f1;
  std::vector<double> micro_f1;

  MeanStd accuracy_summary() const { return mean_std(accuracy); }
  MeanStd f1_summary() const { return mean_std(f1); }
  MeanStd micro_f1_summary() const { return mean_std(micro_f1); }
};

struct EvalConfig {
  std::size_t repeats{10};
  std::uint64_t seed{0};
  ClassifierConfig classifier;
};

/// Each repeat draws fresh negatives for the train and test pair sets and
/// re-trains the classifier, all from repeat-indexed seeds. The classifier
/// fits train-split pairs and is scored on test-split pairs.
EvalMetrics repeat_eval(const TrainedModel& model, const AnchorLinkSet& anchors, const EvalConfig& cfg);

struct TTestResult {
  double t{0.0};
  double df{0.0};
  double p{1.0};
  /// Both samples have zero variance.
  bool degenerate{false};
};

/// Welch's unequal-variance two-sample t-test, two-sided.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

nlohmann::ordered_json to_json(const EvalMetrics& m);
nlohmann::ordered_json to_json(const TTestResult& t);

}  // namespace graphuil
