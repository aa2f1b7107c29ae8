#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mcrank {

using TokenList = std::vector<std::string>;

/// Lowercases ASCII letters and splits on every maximal run of characters
/// that are neither ASCII alphanumerics nor bytes of a multi-byte UTF-8
/// sequence. Digits stay in tokens ("BM25" -> "bm25").
TokenList tokenize(std::string_view text);

/// Distinct terms of a token list, in order of first appearance.
TokenList unique_terms(const TokenList& tokens);

/// Document-frequency statistics over a tokenized corpus.
class CorpusStats {
 public:
  CorpusStats() = default;

  /// One token list per document.
  explicit CorpusStats(std::span<const TokenList> documents);

  std::size_t document_count() const noexcept { return document_count_; }
  std::size_t total_length() const noexcept { return total_length_; }
  /// Zero for an empty corpus.
  double average_length() const noexcept { return average_length_; }
  std::size_t document_frequency(const std::string& term) const;
  std::size_t vocabulary_size() const noexcept { return df_.size(); }

  const std::unordered_map<std::string, std::size_t>& document_frequencies() const noexcept {
    return df_;
  }

  /// Rebuilds statistics from already-aggregated values (index loading).
  static CorpusStats from_counts(std::size_t document_count, std::size_t total_length,
                                 std::unordered_map<std::string, std::size_t> df);

 private:
  std::size_t document_count_ = 0;
  std::size_t total_length_ = 0;
  double average_length_ = 0.0;
  std::unordered_map<std::string, std::size_t> df_;
};

/// ln(1 + (N - df + 0.5) / (df + 0.5)); strictly positive. Throws
/// std::invalid_argument when the corpus is empty.
double idf(const CorpusStats& stats, const std::string& term);

/// Same formula from raw counts.
double idf(std::size_t document_count, std::size_t document_frequency);

}  // namespace mcrank
