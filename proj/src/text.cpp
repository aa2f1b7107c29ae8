#include "mcrank/text.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace mcrank {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

TokenList tokenize(std::string_view text) {
  TokenList tokens;
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

TokenList unique_terms(const TokenList& tokens) {
  TokenList out;
  std::unordered_set<std::string_view> seen;
  for (const auto& t : tokens)
    if (seen.insert(t).second) out.push_back(t);
  return out;
}

CorpusStats::CorpusStats(std::span<const TokenList> documents)
    : document_count_(documents.size()) {
  for (const auto& doc : documents) {
    total_length_ += doc.size();
    for (const auto& term : unique_terms(doc)) ++df_[term];
  }
  if (document_count_ > 0)
    average_length_ = static_cast<double>(total_length_) / static_cast<double>(document_count_);
}

CorpusStats CorpusStats::from_counts(std::size_t document_count, std::size_t total_length,
                                     std::unordered_map<std::string, std::size_t> df) {
  CorpusStats stats;
  stats.document_count_ = document_count;
  stats.total_length_ = total_length;
  stats.df_ = std::move(df);
  if (document_count > 0)
    stats.average_length_ = static_cast<double>(total_length) / static_cast<double>(document_count);
  return stats;
}

std::size_t CorpusStats::document_frequency(const std::string& term) const {
  const auto it = df_.find(term);
  return it == df_.end() ? 0 : it->second;
}

double idf(std::size_t document_count, std::size_t document_frequency) {
  if (document_count == 0) throw std::invalid_argument("idf of an empty corpus");
  const double n = static_cast<double>(document_count);
  const double df = static_cast<double>(document_frequency);
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double idf(const CorpusStats& stats, const std::string& term) {
  return idf(stats.document_count(), stats.document_frequency(term));
}

}  // namespace mcrank
