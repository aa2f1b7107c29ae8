#pragma once

// Okapi BM25 over an in-memory inverted index.
//
//   score(q, d) = sum over distinct t in q with tf(t, d) > 0 of
//                 idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
//
// with the plus-one idf from text.hpp, so every score is >= 0.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mcrank/corpus.hpp"
#include "mcrank/text.hpp"

namespace mcrank {

inline constexpr int kDefaultRetrievalDepth = 10;

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

/// Throws std::invalid_argument unless k1 >= 0 and 0 <= b <= 1 (both finite).
void validate(const Bm25Params& params);

/// Contribution of one matched term.
inline double bm25_term_weight(double term_idf, double tf, double doc_length, double avg_length,
                               const Bm25Params& params) {
  const double norm = params.k1 * (1.0 - params.b + params.b * doc_length / avg_length);
  return term_idf * tf * (params.k1 + 1.0) / (tf + norm);
}

struct Posting {
  std::uint32_t doc = 0;  // position in InvertedIndex::doc_ids()
  std::uint32_t tf = 0;
};

class InvertedIndex {
 public:
  InvertedIndex() = default;

  std::size_t document_count() const noexcept { return doc_ids_.size(); }
  const Bm25Params& params() const noexcept { return params_; }
  const CorpusStats& stats() const noexcept { return stats_; }

  /// Indexed ids in ascending order; postings refer to positions in here.
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_len_; }

  /// Position of a doc id, or -1 when not indexed.
  std::ptrdiff_t doc_position(const std::string& doc_id) const;
  bool contains(const std::string& doc_id) const { return doc_position(doc_id) >= 0; }
  /// Token count of an indexed document; throws DataError otherwise.
  std::uint32_t doc_length(const std::string& doc_id) const;

  /// Postings of a term sorted by doc position; empty for unseen terms.
  const std::vector<Posting>& postings(const std::string& term) const;
  std::uint32_t term_frequency(const std::string& term, std::uint32_t doc) const;

  const std::unordered_map<std::string, std::vector<Posting>>& all_postings() const noexcept {
    return postings_;
  }

  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

 private:
  friend InvertedIndex build_index(const Collection&, const Bm25Params&);

  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_len_;
  std::unordered_map<std::string, std::ptrdiff_t> position_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  CorpusStats stats_;
  Bm25Params params_;
};

InvertedIndex build_index(const Collection& collection, const Bm25Params& params = {});

/// BM25 score of one indexed document. Throws DataError for an unknown id.
double bm25_score(const InvertedIndex& index, const TokenList& query, const std::string& doc_id);

/// Top-k documents with positive score, ordered by score descending and then
/// doc id ascending, ranked from 1. Throws std::invalid_argument if k < 1 and
/// DataError when the index is empty.
std::vector<RunEntry> retrieve_topk(const InvertedIndex& index, std::string_view query_text,
                                    int k = kDefaultRetrievalDepth);

std::vector<RunEntry> retrieve_topk(const InvertedIndex& index, const Query& query,
                                    int k = kDefaultRetrievalDepth);

/// First-stage run for a whole query set. Queries without any matching
/// document are left out, as they would be in a run file.
Run retrieve_run(const InvertedIndex& index, const QuerySet& queries,
                 int k = kDefaultRetrievalDepth);

}  // namespace mcrank
