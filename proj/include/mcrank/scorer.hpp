#pragma once

// Joint query/passage encoding and the linear relevance head on top of it.
//
// A LinearScorer maps an encoded pair to a logit x = w.Enc(q, d) + b. The
// same logits can be read two ways:
//
//   cross-encoder   R(q, d) = sigmoid(x), independently per candidate
//   multiple choice P(d | q) = softmax(x) over the candidate set
//
// Both maps are strictly increasing in x, so the two rerankers order any
// candidate set identically; only the probabilities differ.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mcrank/corpus.hpp"
#include "mcrank/retriever.hpp"
#include "mcrank/text.hpp"

namespace mcrank {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// One encoded pair per row.
template <typename Scalar>
using FeatureMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using FeatureVector = Vector<double>;

inline constexpr Eigen::Index kFeatureDim = 8;

/// Column layout of the hand-crafted joint encoding.
enum Feature : Eigen::Index {
  kUnigramOverlap = 0,     // distinct query terms present in the passage
  kIdfOverlap = 1,         // sum of idf over those terms
  kBm25 = 2,               // BM25 score of the passage for the query
  kJaccard = 3,            // |Q n D| / |Q u D| over unigram sets
  kBigramOverlap = 4,      // distinct query bigrams present in the passage
  kQueryCoverage = 5,      // kUnigramOverlap / distinct query terms
  kLogPassageLength = 6,   // log(1 + passage tokens)
  kLogQueryLength = 7,     // log(1 + query tokens)
};

/// Encodes a (query, passage) pair. The passage must be indexed; throws
/// DataError otherwise.
FeatureVector encode(const Query& query, const Document& doc, const InvertedIndex& index);

/// Same, from pre-tokenized text.
FeatureVector encode(const TokenList& query_tokens, const TokenList& doc_tokens,
                     const std::string& doc_id, const InvertedIndex& index);

template <typename Scalar>
struct LinearScorer {
  Vector<Scalar> weights;
  Scalar bias = Scalar(0);

  static LinearScorer zeros(Eigen::Index dim = kFeatureDim) {
    return LinearScorer{Vector<Scalar>::Zero(dim), Scalar(0)};
  }

  Eigen::Index dim() const { return weights.size(); }
};

template <typename Scalar>
void check_dims(const LinearScorer<Scalar>& scorer, Eigen::Index features) {
  if (scorer.dim() != features)
    throw std::invalid_argument("scorer has dimension " + std::to_string(scorer.dim()) +
                                " but features have dimension " + std::to_string(features));
}

/// w.fv + b
template <typename Scalar, typename Derived>
Scalar raw_score(const LinearScorer<Scalar>& scorer, const Eigen::MatrixBase<Derived>& fv) {
  check_dims(scorer, fv.size());
  return scorer.weights.dot(fv) + scorer.bias;
}

/// Logits for every row of `features`.
template <typename Scalar, typename Derived>
Vector<Scalar> raw_scores(const LinearScorer<Scalar>& scorer,
                          const Eigen::MatrixBase<Derived>& features) {
  check_dims(scorer, features.cols());
  return (features * scorer.weights).array() + scorer.bias;
}

/// Logistic function. exp is only taken of arguments that cannot overflow,
/// and each branch is monotone under rounding, so x < y never maps to
/// sigmoid(x) > sigmoid(y). (e / (1 + e) on all of x < 0 is not: it swaps
/// neighbouring values near zero.)
template <std::floating_point Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp, std::log;
  // Below this 1 + e^x rounds to 1, so e / (1 + e) is exactly e^x.
  static const Scalar kTail = log(std::numeric_limits<Scalar>::epsilon()) - Scalar(1);
  if (x >= kTail) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return sigmoid(v); });
}

/// Max-shifted softmax. Throws std::invalid_argument on empty input.
/// Uses the scalar std::exp: Eigen's vectorized exp is not monotone.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  if (scores.size() == 0) throw std::invalid_argument("softmax of an empty list");
  const Scalar top = scores.maxCoeff();
  const Vector<Scalar> e = scores.unaryExpr([top](Scalar v) {
    using std::exp;
    return exp(v - top);
  });
  return e / e.sum();
}

inline std::vector<double> softmax(std::span<const double> scores) {
  const Eigen::Map<const Vector<double>> v(scores.data(), static_cast<Eigen::Index>(scores.size()));
  const Vector<double> p = softmax(v);
  return {p.data(), p.data() + p.size()};
}

enum class RerankMode { kCrossEncoder, kMcqa };

std::string_view to_string(RerankMode mode);
/// Accepts "cross-encoder" and "mcqa"; throws std::invalid_argument otherwise.
RerankMode parse_rerank_mode(std::string_view name);

struct ScoredCandidate {
  std::string doc_id;
  double logit = 0.0;
  double probability = 0.0;
  RerankMode mode = RerankMode::kCrossEncoder;
};

/// Candidates carrying sigmoid(logit), best first.
std::vector<ScoredCandidate> rerank_cross_encoder(const LinearScorer<double>& scorer,
                                                  const Query& query,
                                                  std::span<const Document> candidates,
                                                  const InvertedIndex& index);

/// Candidates carrying softmax(logits) over the set, best first.
std::vector<ScoredCandidate> rerank_mcqa(const LinearScorer<double>& scorer, const Query& query,
                                         std::span<const Document> candidates,
                                         const InvertedIndex& index);

std::vector<ScoredCandidate> rerank(RerankMode mode, const LinearScorer<double>& scorer,
                                    const Query& query, std::span<const Document> candidates,
                                    const InvertedIndex& index);

/// Orders already-scored candidates: probability descending, then logit
/// descending, then doc id ascending. The logit key only matters where
/// probabilities of distinct logits round to the same double.
void sort_candidates(std::vector<ScoredCandidate>& candidates);

/// Reranks every query of a first-stage run. Run scores become the
/// candidate probabilities.
Run rerank_run(RerankMode mode, const LinearScorer<double>& scorer, const Run& first_stage,
               const QuerySet& queries, const Collection& collection, const InvertedIndex& index);

/// Plain-text model: dimension, weights (17 significant digits), bias.
void save_model(const LinearScorer<double>& scorer, const std::filesystem::path& path);
LinearScorer<double> load_model(const std::filesystem::path& path);
std::string serialize_model(const LinearScorer<double>& scorer);
LinearScorer<double> parse_model(std::string_view text);

/// Short hex digest of the serialized model, used in run tags.
std::string model_hash(const LinearScorer<double>& scorer);

}  // namespace mcrank
