#pragma once

// Passages, queries, relevance judgments, ranked runs and training pairs,
// together with their on-disk forms:
//
//   collection / queries   id<TAB>text                      (one record per line)
//   qrels                  query_id 0 doc_id grade          (TREC qrels)
//   run                    query_id Q0 doc_id rank score tag (TREC run)
//   training pairs         {"query_id":..,"doc_id":..,"label":0|1} per line
//   reference answers      query_id<TAB>answer

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mcrank {

struct Document {
  std::string id;
  std::string text;
};

struct Query {
  std::string id;
  std::string text;
};

/// Ordered, id-unique store of text records. Immutable once loaded.
template <typename Record>
class RecordStore {
 public:
  RecordStore() = default;

  /// Throws DataError when an id repeats.
  explicit RecordStore(std::vector<Record> records);

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }
  const Record& operator[](std::size_t i) const { return records_[i]; }

  const Record* find(const std::string& id) const;
  /// Throws DataError for an unknown id.
  const Record& at(const std::string& id) const;
  bool contains(const std::string& id) const { return find(id) != nullptr; }

  const std::vector<Record>& records() const noexcept { return records_; }

 private:
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> position_;
};

using Collection = RecordStore<Document>;
using QuerySet = RecordStore<Query>;

/// Graded judgments keyed by (query_id, doc_id). Grade > 0 means relevant.
class Qrels {
 public:
  using Key = std::pair<std::string, std::string>;

  /// Throws DataError on a duplicate key or a negative grade.
  void add(const std::string& query_id, const std::string& doc_id, int grade);

  std::optional<int> grade(const std::string& query_id, const std::string& doc_id) const;
  bool is_relevant(const std::string& query_id, const std::string& doc_id) const;

  /// Number of judged-relevant documents for a query.
  std::size_t relevant_count(const std::string& query_id) const;
  std::vector<std::string> relevant_docs(const std::string& query_id) const;

  const std::map<Key, int>& judgments() const noexcept { return judgments_; }
  std::size_t size() const noexcept { return judgments_.size(); }
  bool empty() const noexcept { return judgments_.empty(); }

 private:
  std::map<Key, int> judgments_;
  std::map<std::string, std::size_t> relevant_per_query_;
};

struct RunEntry {
  std::string query_id;
  std::string doc_id;
  int rank = 0;
  double score = 0.0;
};

/// Per-query ranked lists, keyed (and written) in query id order.
struct Run {
  std::map<std::string, std::vector<RunEntry>> queries;
  std::string tag;

  std::size_t entry_count() const;
  bool empty() const { return queries.empty(); }
};

/// Checks rank contiguity, score order and doc uniqueness for one list.
/// Throws DataError describing the first violation.
void validate_ranking(const std::vector<RunEntry>& entries);

struct TrainingPair {
  std::string query_id;
  std::string doc_id;
  int label = 0;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

using ReferenceAnswers = std::map<std::string, std::string>;

Collection load_collection(const std::filesystem::path& path);
QuerySet load_queries(const std::filesystem::path& path);
Qrels load_qrels(const std::filesystem::path& path);
ReferenceAnswers load_references(const std::filesystem::path& path);

void write_collection(const Collection& collection, const std::filesystem::path& path);
void write_queries(const QuerySet& queries, const std::filesystem::path& path);
void write_qrels(const Qrels& qrels, const std::filesystem::path& path);
void write_references(const ReferenceAnswers& references, const std::filesystem::path& path);

/// Score rendering used by write_run: fixed, 6 decimals.
std::string format_score(double score);

void write_run(const Run& run, const std::string& tag, const std::filesystem::path& path);
Run load_run(const std::filesystem::path& path);

void write_training_pairs(const std::vector<TrainingPair>& pairs,
                          const std::filesystem::path& path);
std::vector<TrainingPair> load_training_pairs(const std::filesystem::path& path);

/// Every relevant (grade > 0) judgment as a positive pair plus an equal
/// number of negatives drawn without replacement from `negatives`; the
/// combined list is shuffled. Both draws are driven by `seed`.
std::vector<TrainingPair> build_balanced_training_set(const Qrels& qrels,
                                                      const std::vector<TrainingPair>& negatives,
                                                      std::uint64_t seed);

}  // namespace mcrank
