#pragma once

// Ranking metrics (Recall@k, MRR@n), ROUGE-L and a paired sign-flip
// permutation test over per-query values.
//
// Aggregates are macro averages: the mean of per-query values over the
// queries that can be evaluated. A run query is evaluable when qrels judge
// at least one of its documents relevant; the rest are reported in
// `skipped` and left out of the mean.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcrank/corpus.hpp"
#include "mcrank/text.hpp"

namespace mcrank {

inline constexpr double kDefaultRougeBeta = 1.2;

using PerQuery = std::map<std::string, double>;

struct MetricResult {
  double aggregate = 0.0;
  PerQuery per_query;
  std::vector<std::string> skipped;
};

/// Mean of the values in key order.
double macro_mean(const PerQuery& values);

/// Per query: relevant docs at rank <= k divided by all relevant docs.
/// Throws std::invalid_argument if k < 1, DataError if nothing is evaluable.
MetricResult recall_at_k(const Run& run, const Qrels& qrels, int k);

/// Per query: 1 / rank of the first relevant doc when rank <= n, else 0.
MetricResult mrr_at_n(const Run& run, const Qrels& qrels, int n);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// LCS F-measure (1 + beta^2) P R / (beta^2 P + R) over tokens; 0 when
/// either side is empty or nothing matches. Throws std::invalid_argument
/// unless beta > 0.
double rouge_l(std::string_view candidate, std::string_view reference,
               double beta = kDefaultRougeBeta);

/// ROUGE-L of each query's rank-1 passage against its reference answer, for
/// run queries that have one. Throws DataError when none has a reference.
MetricResult rouge_l_for_run(const Run& run, const Collection& collection,
                             const ReferenceAnswers& references,
                             double beta = kDefaultRougeBeta);

/// Two-sided paired sign-flip permutation test on the mean per-query
/// difference, p = (1 + #{|permuted mean| >= |observed mean|}) / (1 + iterations).
/// Both inputs must cover the same queries (DataError otherwise);
/// iterations must be >= 1000.
double paired_permutation_test(const PerQuery& a, const PerQuery& b, int iterations,
                               std::uint64_t seed);

struct MetricCutoffs {
  std::vector<int> recall{1, 5};
  int mrr = 10;
  double beta = kDefaultRougeBeta;
};

struct QueryMetrics {
  std::vector<double> recall;  // parallel to MetricCutoffs::recall
  double reciprocal_rank = 0.0;
  std::optional<double> rouge_l;
};

struct MetricReport {
  std::string model;
  std::string mode;
  MetricCutoffs cutoffs;
  std::vector<double> recall;  // parallel to cutoffs.recall
  double mrr = 0.0;
  std::optional<double> rouge_l;
  std::map<std::string, QueryMetrics> per_query;
  std::vector<std::string> skipped;
};

/// All metrics for one run. ROUGE-L is computed only when both a
/// collection and references are supplied.
MetricReport evaluate(const Run& run, const Qrels& qrels, const MetricCutoffs& cutoffs,
                      const Collection* collection = nullptr,
                      const ReferenceAnswers* references = nullptr);

/// Aligned text table with one row per report:
/// Model | Mode | Recall@.. | MRR@.. | ROUGE-L
std::string format_report_table(std::span<const MetricReport> reports);
std::string format_report_csv(std::span<const MetricReport> reports);

/// query_id,recall@k...,mrr@n,rouge_l with full precision values.
void write_per_query_csv(const MetricReport& report, const std::filesystem::path& path);

/// One column of a per-query CSV; rows with an empty cell are left out.
PerQuery read_per_query_csv(const std::filesystem::path& path, const std::string& column);

}  // namespace mcrank
