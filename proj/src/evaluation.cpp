#include "graphuil/evaluation.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "graphuil/autodiff.hpp"
#include "graphuil/error.hpp"
#include "graphuil/rng.hpp"

namespace graphuil {

namespace {

constexpr std::uint64_t kTagEval = 0x6576616cULL;

}  // namespace

std::size_t PairDataset::positives() const {
  std::size_t n = 0;
  for (int l : labels) n += l == 1;
  return n;
}

PairDataset build_pair_dataset(const AnchorLinkSet& anchors, Split split, const Matrix& mapped, const Matrix& x2,
                               std::uint64_t seed) {
  const std::vector<AnchorPair> pos = anchors.in_split(split);
  if (pos.empty()) throw std::invalid_argument("split " + to_string(split) + " has no anchors");
  if (mapped.cols() != x2.cols()) throw DimensionError("mapped and second-network embeddings differ in width");
  const std::size_t s = pos.size();
  if (s * s - s < s) throw std::invalid_argument("too few non-anchor pairs to balance split " + to_string(split));

  std::unordered_set<std::uint64_t> taken;
  auto key = [](NodeId a, NodeId b) { return (static_cast<std::uint64_t>(a) << 32) | b; };
  for (const auto& p : pos) {
    if (p.sn1 >= mapped.rows() || p.sn2 >= x2.rows()) throw std::invalid_argument("anchor outside the embeddings");
    taken.insert(key(p.sn1, p.sn2));
  }

  PairDataset d;
  d.split = split;
  d.pairs = pos;
  d.labels.assign(s, 1);
  Rng rng = make_rng(seed, {kTagEval, 0x6e6567ULL});
  while (d.pairs.size() < 2 * s) {
    const NodeId i = pos[uniform_index(rng, s)].sn1;
    const NodeId j = pos[uniform_index(rng, s)].sn2;
    if (!taken.insert(key(i, j)).second) continue;
    d.pairs.push_back({i, j});
    d.labels.push_back(0);
  }

  const Eigen::Index c = mapped.cols();
  d.features.resize(static_cast<Eigen::Index>(d.pairs.size()), 2 * c);
  for (std::size_t r = 0; r < d.pairs.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    d.features.row(row).head(c) = mapped.row(d.pairs[r].sn1);
    d.features.row(row).tail(c) = x2.row(d.pairs[r].sn2);
  }
  return d;
}

std::string to_string(ClassifierKind k) { return k == ClassifierKind::logistic ? "logistic" : "mlp"; }

ClassifierKind parse_classifier_kind(const std::string& s) {
  if (s == "logistic") return ClassifierKind::logistic;
  if (s == "mlp") return ClassifierKind::mlp;
  throw std::invalid_argument("unknown classifier: " + s);
}

namespace {

Var classifier_logits(Var x, const BoundParams& p, ClassifierKind kind) {
  Var h = x;
  if (kind == ClassifierKind::mlp) h = ad::relu(ad::add_bias(ad::matmul(x, p["w_h"]), p["b_h"]));
  return ad::add_bias(ad::matmul(h, p["w"]), p["b"]);
}

}  // namespace

std::vector<double> Classifier::predict_proba(const Matrix& features) const {
  Tape tape;
  BoundParams bound(tape, params, {}, false);
  const Matrix& y = tape.value(ad::sigmoid(classifier_logits(tape.constant(features), bound, config.kind)));
  return {y.data(), y.data() + y.size()};
}

Classifier train_classifier(const PairDataset& train, const ClassifierConfig& cfg, std::uint64_t seed) {
  if (train.size() == 0) throw std::invalid_argument("train_classifier: empty dataset");
  const auto d = train.features.cols();
  Classifier clf;
  clf.config = cfg;
  if (cfg.kind == ClassifierKind::mlp) {
    const auto h = static_cast<Eigen::Index>(cfg.hidden);
    Rng rng = make_rng(seed, {kTagEval, 0x636c66ULL});
    const double limit = std::sqrt(6.0 / static_cast<double>(d + h));
    Matrix w(d, h);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = limit * (2.0 * uniform01(rng) - 1.0);
    clf.params.add("w_h", std::move(w));
    clf.params.add("b_h", Matrix::Zero(1, h));
    clf.params.add("w", Matrix::Zero(h, 1));
  } else {
    clf.params.add("w", Matrix::Zero(d, 1));
  }
  clf.params.add("b", Matrix::Zero(1, 1));

  Matrix targets(static_cast<Eigen::Index>(train.size()), 1);
  for (std::size_t i = 0; i < train.size(); ++i) targets(static_cast<Eigen::Index>(i), 0) = train.labels[i];

  AdamConfig adam;
  adam.lr = cfg.lr;
  AdamState state = AdamState::init(clf.params, adam);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    Tape tape;
    BoundParams bound(tape, clf.params);
    const Var loss = ad::bce_with_logits(classifier_logits(tape.constant(train.features), bound, cfg.kind), targets);
    tape.backward(loss);
    adam_step(clf.params, bound.gradients(), state);
  }
  return clf;
}

Scores scores_from_confusion(const Confusion& c) {
  Scores s;
  const double all = static_cast<double>(c.tp + c.fp + c.fn + c.tn);
  s.accuracy = all > 0 ? static_cast<double>(c.tp + c.tn) / all : 0.0;
  const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
  s.f1 = denom > 0 ? 2.0 * static_cast<double>(c.tp) / denom : 0.0;
  // Pooling both classes, every error is one FP and one FN, so micro-F1 is
  // the accuracy; computed from its definition anyway.
  const double micro_tp = static_cast<double>(c.tp + c.tn);
  const double micro_err = static_cast<double>(c.fp + c.fn);
  s.micro_f1 = micro_tp + micro_err > 0 ? 2.0 * micro_tp / (2.0 * micro_tp + 2.0 * micro_err) : 0.0;
  return s;
}

Confusion confusion(const std::vector<double>& proba, const std::vector<int>& labels) {
  if (proba.size() != labels.size()) throw DimensionError("confusion: prediction and label counts differ");
  Confusion c;
  for (std::size_t i = 0; i < proba.size(); ++i) {
    const bool pred = proba[i] > 0.5;
    const bool truth = labels[i] == 1;
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Scores evaluate(const Classifier& clf, const PairDataset& test) {
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  return scores_from_confusion(confusion(clf.predict_proba(test.features), test.labels));
}

MeanStd mean_std(std::span<const double> xs) {
  MeanStd m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return m;
}

EvalMetrics repeat_eval(const TrainedModel& model, const AnchorLinkSet& anchors, const EvalConfig& cfg) {
  if (cfg.repeats == 0) throw std::invalid_argument("repeat_eval needs at least one repeat");
  const Matrix mapped = model.mapped_sn1();
  EvalMetrics m;
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const PairDataset train =
        build_pair_dataset(anchors, Split::train, mapped, model.embeddings_sn2, derive_seed(cfg.seed, {kTagEval, r, 1}));
    const PairDataset test =
        build_pair_dataset(anchors, Split::test, mapped, model.embeddings_sn2, derive_seed(cfg.seed, {kTagEval, r, 2}));
    const Classifier clf = train_classifier(train, cfg.classifier, derive_seed(cfg.seed, {kTagEval, r, 3}));
    const Scores s = evaluate(clf, test);
    m.accuracy.push_back(s.accuracy);
    m.f1.push_back(s.f1);
    m.micro_f1.push_back(s.micro_f1);
  }
  return m;
}

nlohmann::ordered_json to_json(const EvalMetrics& m) {
  const MeanStd acc = m.accuracy_summary();
  const MeanStd f1 = m.f1_summary();
  const MeanStd micro = m.micro_f1_summary();
  nlohmann::ordered_json j;
  j["accuracy_mean"] = acc.mean;
  j["accuracy_std"] = acc.std;
  j["f1_mean"] = f1.mean;
  j["f1_std"] = f1.std;
  j["micro_f1_mean"] = micro.mean;
  j["micro_f1_std"] = micro.std;
  nlohmann::ordered_json reps = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < m.accuracy.size(); ++r) {
    reps.push_back({{"accuracy", m.accuracy[r]}, {"f1", m.f1[r]}, {"micro_f1", m.micro_f1[r]}});
  }
  j["repeats"] = std::move(reps);
  return j;
}

nlohmann::ordered_json to_json(const TTestResult& t) {
  nlohmann::ordered_json j;
  // Degenerate infinities have no JSON number; emit null.
  j["t"] = std::isfinite(t.t) ? nlohmann::ordered_json(t.t) : nullptr;
  j["df"] = t.df;
  j["p"] = t.p;
  j["degenerate"] = t.degenerate;
  return j;
}

}  // namespace graphuil
