#pragma once

// Seeded synthetic benchmark with planted relevance, used by the demo
// pipeline and the end-to-end tests.
//
// Every query is a common word followed by three rare topic terms
// "A B C". Its single relevant passage contains all three, usually as the
// phrase "A B C", padded with common words. Distractor passages repeat a subset of the
// topic terms in short texts, so BM25 (which rewards term frequency and
// short documents) often prefers them, while coverage and phrase features
// identify the relevant passage.

#include <cstdint>
#include <filesystem>

#include "mcrank/corpus.hpp"

namespace mcrank {

struct SyntheticConfig {
  std::uint64_t seed = 42;
  int train_queries = 100;
  int validation_queries = 30;
  int test_queries = 60;
  int distractors_per_query = 3;  // 1..4
  int filler_documents = 60;
};

struct SyntheticBenchmark {
  Collection collection;
  QuerySet train_queries;
  QuerySet validation_queries;
  QuerySet test_queries;
  Qrels qrels;  // judgments for all three query sets
  ReferenceAnswers references;
};

SyntheticBenchmark make_synthetic_benchmark(const SyntheticConfig& config = {});

/// Writes collection.tsv, {train,val,test}_queries.tsv, qrels.txt and
/// references.tsv into `dir`.
void write_benchmark(const SyntheticBenchmark& benchmark, const std::filesystem::path& dir);

}  // namespace mcrank
