#include "mcrank/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mcrank/error.hpp"
#include "mcrank/random.hpp"

namespace mcrank {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("write to " + path.string() + " failed");
}

// Calls fn(line, line_number) for each line, with a trailing CR removed.
template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fn(line, number);
  }
  if (in.bad()) throw DataError("read from " + path.string() + " failed");
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t") == std::string_view::npos;
}

template <typename T>
std::optional<T> parse_number(std::string_view token) {
  T value{};
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

bool has_whitespace(std::string_view s) {
  return s.find_first_of(" \t\r\n") != std::string_view::npos;
}

template <typename Record>
std::vector<Record> load_tsv_records(const std::filesystem::path& path) {
  std::vector<Record> records;
  std::unordered_map<std::string, std::size_t> first_line;
  for_each_line(path, [&](const std::string& line, std::size_t number) {
    if (line.empty()) return;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path.string(), number, "malformed line (expected id<TAB>text)");
    std::string id = line.substr(0, tab);
    if (id.empty() || has_whitespace(id))
      throw ParseError(path.string(), number, "invalid id '" + id + "'");
    if (auto [it, inserted] = first_line.emplace(id, number); !inserted)
      throw ParseError(path.string(), number,
                       "duplicate id '" + id + "' (first seen on line " +
                           std::to_string(it->second) + ")");
    records.push_back(Record{std::move(id), line.substr(tab + 1)});
  });
  return records;
}

template <typename Record>
void write_tsv_records(const std::vector<Record>& records, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& r : records) out << r.id << '\t' << r.text << '\n';
  finish_output(out, path);
}

}  // namespace

// RecordStore

template <typename Record>
RecordStore<Record>::RecordStore(std::vector<Record> records) : records_(std::move(records)) {
  position_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].id.empty()) throw DataError("record " + std::to_string(i) + " has an empty id");
    if (!position_.emplace(records_[i].id, i).second)
      throw DataError("duplicate id '" + records_[i].id + "'");
  }
}

template <typename Record>
const Record* RecordStore<Record>::find(const std::string& id) const {
  const auto it = position_.find(id);
  return it == position_.end() ? nullptr : &records_[it->second];
}

template <typename Record>
const Record& RecordStore<Record>::at(const std::string& id) const {
  if (const auto* r = find(id)) return *r;
  throw DataError("unknown id '" + id + "'");
}

template class RecordStore<Document>;
template class RecordStore<Query>;

// Qrels

void Qrels::add(const std::string& query_id, const std::string& doc_id, int grade) {
  if (grade < 0)
    throw DataError("negative grade " + std::to_string(grade) + " for (" + query_id + ", " +
                    doc_id + ")");
  if (!judgments_.emplace(Key{query_id, doc_id}, grade).second)
    throw DataError("duplicate judgment for (" + query_id + ", " + doc_id + ")");
  if (grade > 0) ++relevant_per_query_[query_id];
}

std::optional<int> Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
  const auto it = judgments_.find(Key{query_id, doc_id});
  if (it == judgments_.end()) return std::nullopt;
  return it->second;
}

bool Qrels::is_relevant(const std::string& query_id, const std::string& doc_id) const {
  const auto g = grade(query_id, doc_id);
  return g && *g > 0;
}

std::size_t Qrels::relevant_count(const std::string& query_id) const {
  const auto it = relevant_per_query_.find(query_id);
  return it == relevant_per_query_.end() ? 0 : it->second;
}

std::vector<std::string> Qrels::relevant_docs(const std::string& query_id) const {
  std::vector<std::string> docs;
  for (auto it = judgments_.lower_bound(Key{query_id, ""});
       it != judgments_.end() && it->first.first == query_id; ++it)
    if (it->second > 0) docs.push_back(it->first.second);
  return docs;
}

// Run

std::size_t Run::entry_count() const {
  std::size_t n = 0;
  for (const auto& [_, entries] : queries) n += entries.size();
  return n;
}

void validate_ranking(const std::vector<RunEntry>& entries) {
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string where = "query '" + e.query_id + "', doc '" + e.doc_id + "'";
    if (e.rank != static_cast<int>(i) + 1)
      throw DataError(where + ": expected rank " + std::to_string(i + 1) + ", found " +
                      std::to_string(e.rank));
    if (!std::isfinite(e.score)) throw DataError(where + ": non-finite score");
    if (i > 0 && e.score > entries[i - 1].score)
      throw DataError(where + ": score increases with rank");
    if (e.doc_id.empty() || has_whitespace(e.doc_id)) throw DataError(where + ": invalid doc id");
    if (i > 0 && e.query_id != entries[0].query_id)
      throw DataError(where + ": mixed query ids in one ranking");
    if (!seen.insert(e.doc_id).second) throw DataError(where + ": doc id repeated");
  }
}

std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  return buf;
}

void write_run(const Run& run, const std::string& tag, const std::filesystem::path& path) {
  if (tag.empty() || has_whitespace(tag)) throw std::invalid_argument("run tag must be a token");
  for (const auto& [query_id, entries] : run.queries) {
    validate_ranking(entries);
    for (const auto& e : entries)
      if (e.query_id != query_id)
        throw DataError("entry for query '" + e.query_id + "' filed under '" + query_id + "'");
  }
  auto out = open_output(path);
  for (const auto& [query_id, entries] : run.queries)
    for (const auto& e : entries)
      out << e.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << format_score(e.score)
          << ' ' << tag << '\n';
  finish_output(out, path);
}

Run load_run(const std::filesystem::path& path) {
  Run run;
  for_each_line(path, [&](const std::string& line, std::size_t number) {
    if (is_blank(line)) return;
    const auto fields = split_whitespace(line);
    if (fields.size() != 6)
      throw ParseError(path.string(), number,
                       "expected 6 columns, found " + std::to_string(fields.size()));
    const auto rank = parse_number<int>(fields[3]);
    if (!rank || *rank < 1) throw ParseError(path.string(), number, "invalid rank");
    const auto score = parse_number<double>(fields[4]);
    if (!score || !std::isfinite(*score)) throw ParseError(path.string(), number, "invalid score");
    if (run.tag.empty()) run.tag = std::string(fields[5]);
    const std::string query_id(fields[0]);
    run.queries[query_id].push_back(RunEntry{query_id, std::string(fields[2]), *rank, *score});
  });
  for (auto& [query_id, entries] : run.queries) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RunEntry& a, const RunEntry& b) { return a.rank < b.rank; });
    try {
      validate_ranking(entries);
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
  }
  return run;
}

// Text stores

Collection load_collection(const std::filesystem::path& path) {
  return Collection(load_tsv_records<Document>(path));
}

QuerySet load_queries(const std::filesystem::path& path) {
  return QuerySet(load_tsv_records<Query>(path));
}

void write_collection(const Collection& collection, const std::filesystem::path& path) {
  write_tsv_records(collection.records(), path);
}

void write_queries(const QuerySet& queries, const std::filesystem::path& path) {
  write_tsv_records(queries.records(), path);
}

Qrels load_qrels(const std::filesystem::path& path) {
  Qrels qrels;
  for_each_line(path, [&](const std::string& line, std::size_t number) {
    if (is_blank(line)) return;
    const auto fields = split_whitespace(line);
    if (fields.size() != 4)
      throw ParseError(path.string(), number,
                       "expected 4 columns, found " + std::to_string(fields.size()));
    const auto grade = parse_number<int>(fields[3]);
    if (!grade) throw ParseError(path.string(), number, "non-integer grade");
    try {
      qrels.add(std::string(fields[0]), std::string(fields[2]), *grade);
    } catch (const DataError& e) {
      throw ParseError(path.string(), number, e.what());
    }
  });
  return qrels;
}

void write_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& [key, grade] : qrels.judgments())
    out << key.first << " 0 " << key.second << ' ' << grade << '\n';
  finish_output(out, path);
}

ReferenceAnswers load_references(const std::filesystem::path& path) {
  ReferenceAnswers refs;
  for (auto& r : load_tsv_records<Query>(path)) refs.emplace(std::move(r.id), std::move(r.text));
  return refs;
}

void write_references(const ReferenceAnswers& references, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& [id, answer] : references) out << id << '\t' << answer << '\n';
  finish_output(out, path);
}

// Training pairs

void write_training_pairs(const std::vector<TrainingPair>& pairs,
                          const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["query_id"] = p.query_id;
    j["doc_id"] = p.doc_id;
    j["label"] = p.label;
    out << j.dump() << '\n';
  }
  finish_output(out, path);
}

std::vector<TrainingPair> load_training_pairs(const std::filesystem::path& path) {
  std::vector<TrainingPair> pairs;
  for_each_line(path, [&](const std::string& line, std::size_t number) {
    if (is_blank(line)) return;
    try {
      const auto j = nlohmann::json::parse(line);
      TrainingPair p{j.at("query_id").get<std::string>(), j.at("doc_id").get<std::string>(),
                     j.at("label").get<int>()};
      if (p.label != 0 && p.label != 1) throw DataError("label must be 0 or 1");
      pairs.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), number, e.what());
    } catch (const DataError& e) {
      throw ParseError(path.string(), number, e.what());
    }
  });
  return pairs;
}

std::vector<TrainingPair> build_balanced_training_set(const Qrels& qrels,
                                                      const std::vector<TrainingPair>& negatives,
                                                      std::uint64_t seed) {
  if (qrels.empty()) throw std::invalid_argument("qrels must not be empty");
  for (const auto& n : negatives)
    if (n.label != 0)
      throw std::invalid_argument("negative pair (" + n.query_id + ", " + n.doc_id +
                                  ") has label " + std::to_string(n.label));

  std::vector<TrainingPair> out;
  for (const auto& [key, grade] : qrels.judgments())
    if (grade > 0) out.push_back(TrainingPair{key.first, key.second, 1});

  const std::size_t positives = out.size();
  if (negatives.size() < positives)
    throw DataError("insufficient negatives: " + std::to_string(positives) + " positives but only " +
                    std::to_string(negatives.size()) + " negatives");

  auto rng = make_rng(seed);
  for (const auto i : sample_without_replacement(negatives.size(), positives, rng))
    out.push_back(negatives[i]);
  shuffle(out, rng);
  return out;
}

}  // namespace mcrank
