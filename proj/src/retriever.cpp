#include "mcrank/retriever.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "mcrank/error.hpp"

namespace mcrank {

namespace {

constexpr std::string_view kIndexMagic = "mcrank-index 1";

const std::vector<Posting> kNoPostings;

std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool ranks_before(double score_a, const std::string& id_a, double score_b,
                  const std::string& id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

}  // namespace

void validate(const Bm25Params& params) {
  if (!std::isfinite(params.k1) || params.k1 < 0.0)
    throw std::invalid_argument("BM25 k1 must be finite and >= 0");
  if (!std::isfinite(params.b) || params.b < 0.0 || params.b > 1.0)
    throw std::invalid_argument("BM25 b must lie in [0, 1]");
}

std::ptrdiff_t InvertedIndex::doc_position(const std::string& doc_id) const {
  const auto it = position_.find(doc_id);
  return it == position_.end() ? -1 : it->second;
}

std::uint32_t InvertedIndex::doc_length(const std::string& doc_id) const {
  const auto pos = doc_position(doc_id);
  if (pos < 0) throw DataError("document '" + doc_id + "' is not indexed");
  return doc_len_[static_cast<std::size_t>(pos)];
}

const std::vector<Posting>& InvertedIndex::postings(const std::string& term) const {
  const auto it = postings_.find(term);
  return it == postings_.end() ? kNoPostings : it->second;
}

std::uint32_t InvertedIndex::term_frequency(const std::string& term, std::uint32_t doc) const {
  const auto& list = postings(term);
  const auto it = std::lower_bound(list.begin(), list.end(), doc,
                                   [](const Posting& p, std::uint32_t d) { return p.doc < d; });
  return it != list.end() && it->doc == doc ? it->tf : 0;
}

InvertedIndex build_index(const Collection& collection, const Bm25Params& params) {
  validate(params);
  InvertedIndex index;
  index.params_ = params;

  std::vector<const Document*> order;
  order.reserve(collection.size());
  for (const auto& doc : collection) order.push_back(&doc);
  std::sort(order.begin(), order.end(),
            [](const Document* a, const Document* b) { return a->id < b->id; });

  std::vector<TokenList> tokenized;
  tokenized.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& doc = *order[i];
    if (!index.position_.emplace(doc.id, static_cast<std::ptrdiff_t>(i)).second)
      throw DataError("duplicate document id '" + doc.id + "'");
    index.doc_ids_.push_back(doc.id);
    tokenized.push_back(tokenize(doc.text));
    index.doc_len_.push_back(static_cast<std::uint32_t>(tokenized.back().size()));

    std::map<std::string_view, std::uint32_t> counts;
    for (const auto& t : tokenized.back()) ++counts[t];
    for (const auto& [term, tf] : counts)
      index.postings_[std::string(term)].push_back(Posting{static_cast<std::uint32_t>(i), tf});
  }
  index.stats_ = CorpusStats(tokenized);
  return index;
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << kIndexMagic << '\n';
  out << format_exact(params_.k1) << ' ' << format_exact(params_.b) << '\n';
  out << doc_ids_.size() << '\n';
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) out << doc_ids_[i] << ' ' << doc_len_[i] << '\n';

  std::vector<const std::string*> terms;
  terms.reserve(postings_.size());
  for (const auto& [term, _] : postings_) terms.push_back(&term);
  std::sort(terms.begin(), terms.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  out << terms.size() << '\n';
  for (const auto* term : terms) {
    const auto& list = postings_.at(*term);
    out << *term << ' ' << list.size();
    for (const auto& p : list) out << ' ' << p.doc << ':' << p.tf;
    out << '\n';
  }
  out.flush();
  if (!out) throw DataError("write to " + path.string() + " failed");
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for reading");
  const auto fail = [&](const std::string& what) -> DataError {
    return DataError(path.string() + ": corrupt index (" + what + ")");
  };

  std::string line;
  if (!std::getline(in, line) || line != kIndexMagic) throw fail("bad header");

  InvertedIndex index;
  std::size_t n = 0;
  if (!(in >> index.params_.k1 >> index.params_.b >> n)) throw fail("bad parameters");
  try {
    validate(index.params_);
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }

  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::string id;
    std::uint32_t len = 0;
    if (!(in >> id >> len)) throw fail("truncated document table");
    if (i > 0 && !(index.doc_ids_.back() < id)) throw fail("document ids not sorted");
    index.position_.emplace(id, static_cast<std::ptrdiff_t>(i));
    index.doc_ids_.push_back(std::move(id));
    index.doc_len_.push_back(len);
    total += len;
  }

  std::size_t vocab = 0;
  if (!(in >> vocab)) throw fail("missing vocabulary size");
  std::unordered_map<std::string, std::size_t> df;
  for (std::size_t v = 0; v < vocab; ++v) {
    std::string term;
    std::size_t count = 0;
    if (!(in >> term >> count)) throw fail("truncated postings");
    std::vector<Posting> list;
    list.reserve(count);
    for (std::size_t j = 0; j < count; ++j) {
      std::string pair;
      if (!(in >> pair)) throw fail("truncated postings for '" + term + "'");
      const auto colon = pair.find(':');
      Posting p;
      const char* end = pair.data() + pair.size();
      if (colon == std::string::npos ||
          std::from_chars(pair.data(), pair.data() + colon, p.doc).ptr != pair.data() + colon ||
          std::from_chars(pair.data() + colon + 1, end, p.tf).ptr != end)
        throw fail("bad posting '" + pair + "'");
      if (p.doc >= n || p.tf == 0 || (!list.empty() && list.back().doc >= p.doc))
        throw fail("invalid posting for '" + term + "'");
      list.push_back(p);
    }
    df.emplace(term, list.size());
    index.postings_.emplace(std::move(term), std::move(list));
  }
  index.stats_ = CorpusStats::from_counts(n, total, std::move(df));
  return index;
}

double bm25_score(const InvertedIndex& index, const TokenList& query, const std::string& doc_id) {
  const auto pos = index.doc_position(doc_id);
  if (pos < 0) throw DataError("document '" + doc_id + "' is not indexed");
  const auto doc = static_cast<std::uint32_t>(pos);
  const double len = index.doc_lengths()[doc];
  const double avg = index.stats().average_length();

  double score = 0.0;
  for (const auto& term : unique_terms(query)) {
    const auto tf = index.term_frequency(term, doc);
    if (tf == 0) continue;
    score += bm25_term_weight(idf(index.stats(), term), tf, len, avg, index.params());
  }
  return score;
}

std::vector<RunEntry> retrieve_topk(const InvertedIndex& index, std::string_view query_text,
                                    int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (index.document_count() == 0) throw DataError("cannot retrieve from an empty index");

  const double avg = index.stats().average_length();
  std::vector<double> acc(index.document_count(), 0.0);
  std::vector<std::uint32_t> touched;
  for (const auto& term : unique_terms(tokenize(query_text))) {
    const auto& list = index.postings(term);
    if (list.empty()) continue;
    const double term_idf = idf(index.stats(), term);
    for (const auto& p : list) {
      if (acc[p.doc] == 0.0) touched.push_back(p.doc);
      acc[p.doc] += bm25_term_weight(term_idf, p.tf, index.doc_lengths()[p.doc], avg,
                                     index.params());
    }
  }

  const auto& ids = index.doc_ids();
  std::vector<std::uint32_t> hits;
  hits.reserve(touched.size());
  for (const auto d : touched)
    if (acc[d] > 0.0) hits.push_back(d);
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());

  const auto keep = std::min<std::size_t>(hits.size(), static_cast<std::size_t>(k));
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return ranks_before(acc[a], ids[a], acc[b], ids[b]);
                    });

  std::vector<RunEntry> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i)
    out.push_back(RunEntry{"", ids[hits[i]], static_cast<int>(i) + 1, acc[hits[i]]});
  return out;
}

std::vector<RunEntry> retrieve_topk(const InvertedIndex& index, const Query& query, int k) {
  auto entries = retrieve_topk(index, query.text, k);
  for (auto& e : entries) e.query_id = query.id;
  return entries;
}

Run retrieve_run(const InvertedIndex& index, const QuerySet& queries, int k) {
  Run run;
  for (const auto& q : queries) {
    auto entries = retrieve_topk(index, q, k);
    if (!entries.empty()) run.queries.emplace(q.id, std::move(entries));
  }
  return run;
}

}  // namespace mcrank
