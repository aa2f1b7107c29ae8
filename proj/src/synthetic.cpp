#include "mcrank/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcrank/random.hpp"

namespace mcrank {

namespace {

constexpr std::array<const char*, 48> kCommonWords = {
    "the",     "of",      "and",     "in",      "to",     "is",      "for",     "with",
    "on",      "that",    "by",      "as",      "from",    "at",      "are",    "this",
    "which",   "also",    "can",     "be",      "used",    "most",    "many",   "often",
    "known",   "such",    "their",   "some",    "other",   "into",    "more",   "than",
    "system",  "process", "common",  "people",  "water",   "history", "early",  "large",
    "small",   "world",   "region",  "method",  "form",    "number",  "part",   "type"};

// Query lead words come from the tail of the list so they carry some idf.
constexpr std::size_t kLeadWordsFrom = 32;

constexpr std::array<const char*, 20> kSyllables = {"ka", "lo", "mi", "ne", "ru", "sa", "te",
                                                    "vo", "zi", "pa", "du", "fe", "go", "hi",
                                                    "ju", "ba", "co", "ly", "wu", "xe"};

// Distinct pseudo-word for every n < 20^4.
std::string topic_word(std::size_t n) {
  std::string w;
  for (int i = 0; i < 4; ++i) {
    w += kSyllables[n % kSyllables.size()];
    n /= kSyllables.size();
  }
  return w;
}

class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(make_rng(seed)) {}

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform_index(rng_, n)); }
  int between(int lo, int hi) { return lo + static_cast<int>(below(static_cast<std::size_t>(hi - lo + 1))); }
  bool chance(double p) { return uniform_unit(rng_) < p; }

  std::string common() { return kCommonWords[below(kCommonWords.size())]; }

  std::vector<std::string> filler(int count) {
    std::vector<std::string> words;
    for (int i = 0; i < count; ++i) words.push_back(common());
    return words;
  }

  // Inserts each term at an independent random position.
  void scatter(std::vector<std::string>& words, const std::vector<std::string>& terms) {
    for (const auto& t : terms)
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(below(words.size() + 1)), t);
  }

  void insert_phrase(std::vector<std::string>& words, const std::vector<std::string>& phrase) {
    const auto at = static_cast<std::ptrdiff_t>(below(words.size() + 1));
    words.insert(words.begin() + at, phrase.begin(), phrase.end());
  }

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

struct PlantedQuery {
  std::string text;
  std::vector<std::string> relevant_words;
  std::size_t relevant_doc = 0;  // index into the draft document list
};

}  // namespace

SyntheticBenchmark make_synthetic_benchmark(const SyntheticConfig& config) {
  if (config.train_queries < 1 || config.validation_queries < 1 || config.test_queries < 1)
    throw std::invalid_argument("every query split needs at least one query");
  if (config.distractors_per_query < 1 || config.distractors_per_query > 4)
    throw std::invalid_argument("distractors per query must be in [1, 4]");
  if (config.filler_documents < 0) throw std::invalid_argument("filler documents must be >= 0");

  Generator gen(config.seed);
  const int total_queries = config.train_queries + config.validation_queries + config.test_queries;

  // Topic vocabulary: three words per query, drawn from a shuffled word space
  // so words of neighbouring queries look unrelated.
  std::vector<std::size_t> word_ids(20 * 20 * 20 * 20);
  for (std::size_t i = 0; i < word_ids.size(); ++i) word_ids[i] = i;
  shuffle(word_ids, gen.rng());

  std::vector<std::vector<std::string>> drafts;
  std::vector<PlantedQuery> planted;
  for (int q = 0; q < total_queries; ++q) {
    const auto base = static_cast<std::size_t>(q) * 3;
    const std::string a = topic_word(word_ids[base]);
    const std::string b = topic_word(word_ids[base + 1]);
    const std::string c = topic_word(word_ids[base + 2]);
    const std::string lead =
        kCommonWords[kLeadWordsFrom + gen.below(kCommonWords.size() - kLeadWordsFrom)];

    PlantedQuery pq;
    pq.text = lead + " " + a + " " + b + " " + c;

    auto relevant = gen.filler(gen.between(10, 32));
    const double shape = uniform_unit(gen.rng());
    if (shape < 0.6) {
      gen.insert_phrase(relevant, {a, b, c});
    } else if (shape < 0.85) {
      gen.insert_phrase(relevant, {a, b});
      gen.scatter(relevant, {c});
    } else {
      gen.scatter(relevant, {a, b, c});
    }
    if (gen.chance(0.5)) gen.scatter(relevant, {lead});
    pq.relevant_doc = drafts.size();
    pq.relevant_words = relevant;
    drafts.push_back(std::move(relevant));

    // Distractors repeat part of the topic; how often varies per passage.
    const auto repeated = [&](const std::string& x, const std::string& y) {
      std::vector<std::string> terms{x, y};
      if (gen.chance(0.5)) terms.push_back(x);
      if (gen.chance(0.5)) terms.push_back(y);
      return terms;
    };
    std::array<int, 4> kinds = {0, 1, 2, 3};
    shuffle(std::span<int>(kinds), gen.rng());
    for (int d = 0; d < config.distractors_per_query; ++d) {
      std::vector<std::string> words;
      switch (kinds[static_cast<std::size_t>(d)]) {
        case 0:
          words = gen.filler(gen.between(4, 14));
          gen.scatter(words, repeated(a, b));
          break;
        case 1:
          words = gen.filler(gen.between(4, 14));
          gen.scatter(words, repeated(a, c));
          break;
        case 2:  // lead word and a partial phrase
          words = gen.filler(gen.between(6, 16));
          gen.insert_phrase(words, {lead, a, b});
          if (gen.chance(0.5)) gen.scatter(words, {b});
          break;
        default:
          words = gen.filler(gen.between(6, 16));
          gen.insert_phrase(words, {b, c});
          if (gen.chance(0.5)) gen.scatter(words, {c});
          break;
      }
      drafts.push_back(std::move(words));
    }
    planted.push_back(std::move(pq));
  }
  for (int f = 0; f < config.filler_documents; ++f) drafts.push_back(gen.filler(gen.between(10, 30)));

  // Doc ids are assigned in a shuffled order so id tie-breaks carry no signal.
  std::vector<std::size_t> id_of(drafts.size());
  for (std::size_t i = 0; i < id_of.size(); ++i) id_of[i] = i;
  shuffle(id_of, gen.rng());
  const auto doc_id = [&](std::size_t draft) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "D%05zu", id_of[draft] + 1);
    return std::string(buf);
  };

  std::vector<Document> docs(drafts.size());
  for (std::size_t i = 0; i < drafts.size(); ++i)
    docs[id_of[i]] = Document{doc_id(i), join(drafts[i])};

  SyntheticBenchmark bench;
  bench.collection = Collection(std::move(docs));

  std::vector<Query> train, validation, test;
  for (int q = 0; q < total_queries; ++q) {
    const auto& pq = planted[static_cast<std::size_t>(q)];
    char buf[16];
    std::snprintf(buf, sizeof buf, "Q%04d", q + 1);
    const std::string query_id = buf;

    bench.qrels.add(query_id, doc_id(pq.relevant_doc), 1);

    std::vector<std::string> reference;
    for (const auto& w : pq.relevant_words)
      if (w.size() > 6 || gen.chance(0.6)) reference.push_back(w);
    bench.references.emplace(query_id, join(reference));

    Query query{query_id, pq.text};
    if (q < config.train_queries)
      train.push_back(std::move(query));
    else if (q < config.train_queries + config.validation_queries)
      validation.push_back(std::move(query));
    else
      test.push_back(std::move(query));
  }
  bench.train_queries = QuerySet(std::move(train));
  bench.validation_queries = QuerySet(std::move(validation));
  bench.test_queries = QuerySet(std::move(test));
  return bench;
}

void write_benchmark(const SyntheticBenchmark& benchmark, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_collection(benchmark.collection, dir / "collection.tsv");
  write_queries(benchmark.train_queries, dir / "train_queries.tsv");
  write_queries(benchmark.validation_queries, dir / "val_queries.tsv");
  write_queries(benchmark.test_queries, dir / "test_queries.tsv");
  write_qrels(benchmark.qrels, dir / "qrels.txt");
  write_references(benchmark.references, dir / "references.tsv");
}

}  // namespace mcrank
