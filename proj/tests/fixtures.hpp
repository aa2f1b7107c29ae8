#pragma once

#include <cstdint>
#include <random>

#include "mcrank/scorer.hpp"
#include "mcrank/training.hpp"
#include "oracles.hpp"

namespace mcrank::testing {

/// Balanced pairs whose encodings are linearly separable with a margin:
/// labels follow the sign of a hidden direction, and every point is pushed
/// `margin` away from the separating hyperplane. Remaining spread is noise.
inline Batch<double> separable_batch(Eigen::Index n, std::uint64_t seed, double margin = 2.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector<double> direction(kFeatureDim);
  for (Eigen::Index j = 0; j < kFeatureDim; ++j) direction(j) = normal(rng);
  direction.normalize();

  Batch<double> batch{FeatureMatrix<double>(n, kFeatureDim), Vector<double>(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector<double> x(kFeatureDim);
    for (Eigen::Index j = 0; j < kFeatureDim; ++j) x(j) = normal(rng);
    const double label = i % 2 == 0 ? 1.0 : 0.0;
    const double side = label == 1.0 ? 1.0 : -1.0;
    x += (side * margin - direction.dot(x)) * direction + side * std::abs(normal(rng)) * direction;
    batch.features.row(i) = x.transpose();
    batch.labels(i) = label;
  }
  return batch;
}

/// Random pairs with 0/1 labels; columns get their own scale so the batch
/// looks like real encodings (counts, lengths, scores) rather than N(0, 1).
inline Batch<double> random_batch(std::mt19937_64& rng, Eigen::Index max_rows = 64) {
  std::uniform_int_distribution<Eigen::Index> rows_dist(1, max_rows);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.1, 5.0);
  const Eigen::Index n = rows_dist(rng);
  Batch<double> batch{FeatureMatrix<double>(n, kFeatureDim), Vector<double>(n)};
  for (Eigen::Index j = 0; j < kFeatureDim; ++j) {
    const double s = scale(rng);
    for (Eigen::Index i = 0; i < n; ++i) batch.features(i, j) = s * normal(rng);
  }
  for (Eigen::Index i = 0; i < n; ++i) batch.labels(i) = rng() % 2 == 0 ? 1.0 : 0.0;
  return batch;
}

inline LinearScorer<double> random_scorer(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  LinearScorer<double> s{Vector<double>(kFeatureDim), normal(rng)};
  for (Eigen::Index j = 0; j < kFeatureDim; ++j) s.weights(j) = normal(rng);
  return s;
}

/// Analytic gradient against long-double central differences (step 1e-5).
/// Returns the largest per-coordinate relative error.
inline double gradient_check_error(const LinearScorer<double>& scorer, const Batch<double>& batch) {
  const auto analytic = gradient(scorer, batch);
  std::vector<double> params(scorer.weights.data(), scorer.weights.data() + scorer.dim());
  params.push_back(scorer.bias);
  const auto numeric = oracle::central_differences(
      [&](const std::vector<double>& p) { return oracle::mean_bce(p, batch.features, batch.labels); },
      params, 1e-5);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < scorer.dim(); ++j)
    worst = std::max(worst, oracle::relative_error(analytic.weights(j), numeric[static_cast<std::size_t>(j)]));
  return std::max(worst, oracle::relative_error(analytic.bias, numeric.back()));
}

/// Validator that only reports loss on a fixed batch, with a rank-free
/// proxy for MRR (fraction of correctly signed logits).
inline Validator batch_validator(Batch<double> batch) {
  return [batch = std::move(batch)](const LinearScorer<double>& s) {
    const Vector<double> logits = raw_scores(s, batch.features);
    double correct = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i)
      correct += (logits(i) > 0.0) == (batch.labels(i) == 1.0) ? 1.0 : 0.0;
    return ValidationScore{batch_loss(s, batch), correct / static_cast<double>(logits.size())};
  };
}

}  // namespace mcrank::testing
