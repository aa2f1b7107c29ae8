#include "mcrank/scorer.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "mcrank/error.hpp"

namespace mcrank {

namespace {

std::set<std::pair<std::string_view, std::string_view>> bigrams(const TokenList& tokens) {
  std::set<std::pair<std::string_view, std::string_view>> out;
  for (std::size_t i = 1; i < tokens.size(); ++i) out.emplace(tokens[i - 1], tokens[i]);
  return out;
}

std::vector<ScoredCandidate> score_candidates(const LinearScorer<double>& scorer,
                                              const Query& query,
                                              std::span<const Document> candidates,
                                              const InvertedIndex& index, RerankMode mode) {
  if (candidates.empty()) throw std::invalid_argument("no candidates to rerank");
  const auto query_tokens = tokenize(query.text);

  FeatureMatrix<double> features(static_cast<Eigen::Index>(candidates.size()), kFeatureDim);
  for (std::size_t i = 0; i < candidates.size(); ++i)
    features.row(static_cast<Eigen::Index>(i)) =
        encode(query_tokens, tokenize(candidates[i].text), candidates[i].id, index).transpose();

  const Vector<double> logits = raw_scores(scorer, features);
  const Vector<double> probs =
      mode == RerankMode::kMcqa ? softmax(logits) : Vector<double>(sigmoid(logits));

  std::vector<ScoredCandidate> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.push_back(ScoredCandidate{candidates[i].id, logits(r), probs(r), mode});
  }
  sort_candidates(out);
  return out;
}

}  // namespace

FeatureVector encode(const TokenList& query_tokens, const TokenList& doc_tokens,
                     const std::string& doc_id, const InvertedIndex& index) {
  if (!index.contains(doc_id)) throw DataError("document '" + doc_id + "' is not indexed");

  const auto query_terms = unique_terms(query_tokens);
  const std::unordered_set<std::string_view> doc_terms(doc_tokens.begin(), doc_tokens.end());

  double overlap = 0.0;
  double idf_overlap = 0.0;
  for (const auto& t : query_terms) {
    if (!doc_terms.contains(t)) continue;
    overlap += 1.0;
    idf_overlap += idf(index.stats(), t);
  }

  const double union_size =
      static_cast<double>(query_terms.size() + doc_terms.size()) - overlap;

  const auto doc_bigrams = bigrams(doc_tokens);
  double bigram_overlap = 0.0;
  for (const auto& bg : bigrams(query_tokens))
    if (doc_bigrams.contains(bg)) bigram_overlap += 1.0;

  FeatureVector fv(kFeatureDim);
  fv(kUnigramOverlap) = overlap;
  fv(kIdfOverlap) = idf_overlap;
  fv(kBm25) = bm25_score(index, query_tokens, doc_id);
  fv(kJaccard) = union_size > 0.0 ? overlap / union_size : 0.0;
  fv(kBigramOverlap) = bigram_overlap;
  fv(kQueryCoverage) =
      query_terms.empty() ? 0.0 : overlap / static_cast<double>(query_terms.size());
  fv(kLogPassageLength) = std::log1p(static_cast<double>(doc_tokens.size()));
  fv(kLogQueryLength) = std::log1p(static_cast<double>(query_tokens.size()));
  return fv;
}

FeatureVector encode(const Query& query, const Document& doc, const InvertedIndex& index) {
  return encode(tokenize(query.text), tokenize(doc.text), doc.id, index);
}

std::string_view to_string(RerankMode mode) {
  return mode == RerankMode::kMcqa ? "mcqa" : "cross-encoder";
}

RerankMode parse_rerank_mode(std::string_view name) {
  if (name == "cross-encoder") return RerankMode::kCrossEncoder;
  if (name == "mcqa") return RerankMode::kMcqa;
  throw std::invalid_argument("unknown rerank mode '" + std::string(name) +
                              "' (expected cross-encoder or mcqa)");
}

void sort_candidates(std::vector<ScoredCandidate>& candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.probability != b.probability) return a.probability > b.probability;
              if (a.logit != b.logit) return a.logit > b.logit;
              return a.doc_id < b.doc_id;
            });
}

std::vector<ScoredCandidate> rerank_cross_encoder(const LinearScorer<double>& scorer,
                                                  const Query& query,
                                                  std::span<const Document> candidates,
                                                  const InvertedIndex& index) {
  return score_candidates(scorer, query, candidates, index, RerankMode::kCrossEncoder);
}

std::vector<ScoredCandidate> rerank_mcqa(const LinearScorer<double>& scorer, const Query& query,
                                         std::span<const Document> candidates,
                                         const InvertedIndex& index) {
  return score_candidates(scorer, query, candidates, index, RerankMode::kMcqa);
}

std::vector<ScoredCandidate> rerank(RerankMode mode, const LinearScorer<double>& scorer,
                                    const Query& query, std::span<const Document> candidates,
                                    const InvertedIndex& index) {
  return score_candidates(scorer, query, candidates, index, mode);
}

Run rerank_run(RerankMode mode, const LinearScorer<double>& scorer, const Run& first_stage,
               const QuerySet& queries, const Collection& collection,
               const InvertedIndex& index) {
  Run out;
  for (const auto& [query_id, entries] : first_stage.queries) {
    if (entries.empty()) continue;
    std::vector<Document> candidates;
    candidates.reserve(entries.size());
    for (const auto& e : entries) candidates.push_back(collection.at(e.doc_id));

    const auto scored = rerank(mode, scorer, queries.at(query_id), candidates, index);
    auto& list = out.queries[query_id];
    for (std::size_t i = 0; i < scored.size(); ++i)
      list.push_back(RunEntry{query_id, scored[i].doc_id, static_cast<int>(i) + 1,
                              scored[i].probability});
  }
  return out;
}

std::string serialize_model(const LinearScorer<double>& scorer) {
  char buf[40];
  std::string text = std::to_string(scorer.dim()) + "\n";
  for (Eigen::Index i = 0; i < scorer.dim(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", scorer.weights(i));
    if (i > 0) text += ' ';
    text += buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", scorer.bias);
  text += "\n";
  text += buf;
  text += "\n";
  return text;
}

LinearScorer<double> parse_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string dim_line, weight_line, bias_line;
  if (!std::getline(in, dim_line) || !std::getline(in, weight_line) ||
      !std::getline(in, bias_line))
    throw DataError("model file must have 3 lines");

  const auto parse_double = [](std::string_view token) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v))
      throw DataError("invalid model value '" + std::string(token) + "'");
    return v;
  };

  long dim = 0;
  {
    const auto [ptr, ec] = std::from_chars(dim_line.data(), dim_line.data() + dim_line.size(), dim);
    if (ec != std::errc() || ptr != dim_line.data() + dim_line.size() || dim < 1)
      throw DataError("invalid model dimension '" + dim_line + "'");
  }

  std::istringstream weights_in(weight_line);
  std::vector<double> weights;
  for (std::string token; weights_in >> token;) weights.push_back(parse_double(token));
  if (static_cast<long>(weights.size()) != dim)
    throw DataError("model dimension mismatch: header says " + std::to_string(dim) + ", found " +
                    std::to_string(weights.size()) + " weights");

  LinearScorer<double> scorer;
  scorer.weights = Eigen::Map<const Vector<double>>(weights.data(), dim);
  scorer.bias = parse_double(bias_line);
  return scorer;
}

void save_model(const LinearScorer<double>& scorer, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << serialize_model(scorer);
  out.flush();
  if (!out) throw DataError("write to " + path.string() + " failed");
}

LinearScorer<double> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for reading");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_model(buffer.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string model_hash(const LinearScorer<double>& scorer) {
  // FNV-1a, truncated to 32 bits.
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : serialize_model(scorer)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(h & 0xffffffffu));
  return buf;
}

}  // namespace mcrank
