#pragma once

// Binary cross-entropy training of a LinearScorer on labelled
// (query, passage) pairs.
//
// Per pair the loss is BCE on the logit x = w.Enc(q, d) + b; a batch loss is
// the mean over its pairs, with gradient
//
//   dL/dw = mean_i (sigmoid(x_i) - y_i) Enc_i,   dL/db = mean_i (sigmoid(x_i) - y_i).

#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcrank/corpus.hpp"
#include "mcrank/retriever.hpp"
#include "mcrank/scorer.hpp"

namespace mcrank {

/// -[y ln sigmoid(x) + (1 - y) ln(1 - sigmoid(x))], evaluated as
/// max(x, 0) - x y + ln(1 + e^-|x|). Throws std::invalid_argument unless
/// y is 0 or 1.
template <std::floating_point Scalar>
Scalar bce_with_logits(Scalar x, int y) {
  if (y != 0 && y != 1) throw std::invalid_argument("label must be 0 or 1");
  using std::abs, std::exp, std::log1p, std::max;
  return max(x, Scalar(0)) - x * Scalar(y) + log1p(exp(-abs(x)));
}

/// Encoded pairs (one per row) with 0/1 labels.
template <typename Scalar>
struct Batch {
  FeatureMatrix<Scalar> features;
  Vector<Scalar> labels;

  Eigen::Index size() const { return labels.size(); }
};

template <typename Scalar>
void check_batch(const LinearScorer<Scalar>& scorer, const Batch<Scalar>& batch) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  if (batch.features.rows() != batch.size())
    throw std::invalid_argument("batch has mismatched feature and label counts");
  check_dims(scorer, batch.features.cols());
}

template <typename Scalar>
Scalar batch_loss(const LinearScorer<Scalar>& scorer, const Batch<Scalar>& batch) {
  check_batch(scorer, batch);
  const Vector<Scalar> logits = raw_scores(scorer, batch.features);
  Scalar total(0);
  for (Eigen::Index i = 0; i < batch.size(); ++i)
    total += bce_with_logits(logits(i), static_cast<int>(batch.labels(i)));
  return total / Scalar(batch.size());
}

template <typename Scalar>
struct Gradient {
  Vector<Scalar> weights;
  Scalar bias = Scalar(0);
};

template <typename Scalar>
Gradient<Scalar> gradient(const LinearScorer<Scalar>& scorer, const Batch<Scalar>& batch) {
  check_batch(scorer, batch);
  const Vector<Scalar> residual = sigmoid(raw_scores(scorer, batch.features)) - batch.labels;
  const Scalar n(batch.size());
  return Gradient<Scalar>{batch.features.transpose() * residual / n, residual.sum() / n};
}

/// Gradient descent with a fixed per-feature step scale:
///
///   w_j <- w_j - lr * grad_j / s_j,   b <- b - lr * grad_b
///
/// With s_j = mean(x_j^2) over the training data (rms_scaled) this is plain
/// gradient descent on features divided by their root mean square, mapped
/// back to the raw feature space. With s = 1 it is plain gradient descent.
struct GradientDescent {
  double learning_rate = 0.1;
  Vector<double> step_scale;  // empty means all ones

  static GradientDescent rms_scaled(double learning_rate, const Batch<double>& data) {
    GradientDescent gd{learning_rate, data.features.array().square().colwise().mean().transpose()};
    // Constant-zero columns get a unit scale.
    gd.step_scale = (gd.step_scale.array() > 0.0).select(gd.step_scale, 1.0);
    return gd;
  }

  void step(LinearScorer<double>& scorer, const Gradient<double>& grad) const {
    if (step_scale.size() == 0)
      scorer.weights -= learning_rate * grad.weights;
    else
      scorer.weights -= learning_rate * grad.weights.cwiseQuotient(step_scale);
    scorer.bias -= learning_rate * grad.bias;
  }
};

/// Top BM25 documents for `query` among the first `depth` retrieved that
/// qrels do not mark relevant, at most `m`, labelled 0. When the cut falls
/// inside a run of equal scores, the tied documents kept are drawn with
/// `seed`. May return fewer than m.
std::vector<TrainingPair> sample_hard_negatives(const InvertedIndex& index, const Qrels& qrels,
                                                const Query& query, int m, std::uint64_t seed,
                                                int depth = kDefaultRetrievalDepth);

/// Training pairs for `queries`: their relevant judgments as positives,
/// balanced against hard negatives (sample_hard_negatives with
/// `negatives_per_query`) by build_balanced_training_set.
std::vector<TrainingPair> build_training_pairs(const InvertedIndex& index, const Qrels& qrels,
                                               const QuerySet& queries, int negatives_per_query,
                                               std::uint64_t seed,
                                               int depth = kDefaultRetrievalDepth);

struct TrainConfig {
  int epochs = 7;
  int batch_size = 64;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  int patience = 2;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mrr10 = 0.0;
};

struct TrainHistory {
  double initial_train_loss = 0.0;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool stopped_early = false;
  std::vector<std::string> warnings;
};

struct TrainResult {
  LinearScorer<double> scorer;
  TrainHistory history;
};

struct ValidationScore {
  double loss = 0.0;
  double mrr10 = 0.0;
};

using Validator = std::function<ValidationScore(const LinearScorer<double>&)>;

/// Mini-batch descent (GradientDescent::rms_scaled) over pre-encoded pairs.
/// Each epoch visits the data in an order shuffled by (config.seed, epoch);
/// after each epoch `validate` scores the current weights. Stops once
/// validation MRR@10 has not improved for config.patience epochs and returns
/// the best-validation weights.
TrainResult fit(const LinearScorer<double>& initial, const Batch<double>& data,
                const Validator& validate, const TrainConfig& config);

/// Corpus the training and validation ids resolve against.
struct CorpusContext {
  const Collection& collection;
  const QuerySet& queries;
  const InvertedIndex& index;
};

/// Validation queries with their candidate lists (typically a BM25 run).
struct ValidationSet {
  const QuerySet& queries;
  const Qrels& qrels;
  const Run& candidates;
};

/// Builds the validator used by train(): cross-encoder reranking of the
/// candidates scored with MRR@10, plus mean BCE over all candidate pairs
/// labelled by qrels.
Validator make_validator(const ValidationSet& validation, const InvertedIndex& index,
                         const Collection& collection);

/// Encodes `pairs` against the corpus. Throws DataError for unknown ids.
Batch<double> encode_pairs(const std::vector<TrainingPair>& pairs, const CorpusContext& context);

TrainResult train(const LinearScorer<double>& initial, const std::vector<TrainingPair>& data,
                  const ValidationSet& validation, const TrainConfig& config,
                  const CorpusContext& context);

/// epoch,train_loss,val_loss,val_mrr10
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace mcrank
