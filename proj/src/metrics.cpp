#include "mcrank/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mcrank/error.hpp"
#include "mcrank/random.hpp"

namespace mcrank {

namespace {

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string four_places(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Shared driver for rank-based metrics: value(entries, query_id) per
// evaluable query.
template <typename Fn>
MetricResult per_query_metric(const Run& run, const Qrels& qrels, Fn&& value) {
  MetricResult result;
  for (const auto& [query_id, entries] : run.queries) {
    if (qrels.relevant_count(query_id) == 0) {
      result.skipped.push_back(query_id);
      continue;
    }
    result.per_query.emplace(query_id, value(entries, query_id));
  }
  if (result.per_query.empty()) throw DataError("no run query has a judged-relevant document");
  result.aggregate = macro_mean(result.per_query);
  return result;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

double macro_mean(const PerQuery& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [_, v] : values) sum += v;
  return sum / static_cast<double>(values.size());
}

MetricResult recall_at_k(const Run& run, const Qrels& qrels, int k) {
  if (k < 1) throw std::invalid_argument("recall cutoff must be >= 1");
  return per_query_metric(run, qrels, [&](const std::vector<RunEntry>& entries,
                                          const std::string& query_id) {
    std::size_t found = 0;
    for (const auto& e : entries)
      if (e.rank <= k && qrels.is_relevant(query_id, e.doc_id)) ++found;
    return static_cast<double>(found) / static_cast<double>(qrels.relevant_count(query_id));
  });
}

MetricResult mrr_at_n(const Run& run, const Qrels& qrels, int n) {
  if (n < 1) throw std::invalid_argument("MRR cutoff must be >= 1");
  return per_query_metric(run, qrels, [&](const std::vector<RunEntry>& entries,
                                          const std::string& query_id) {
    for (const auto& e : entries)
      if (e.rank <= n && qrels.is_relevant(query_id, e.doc_id)) return 1.0 / e.rank;
    return 0.0;
  });
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      curr[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

double rouge_l(std::string_view candidate, std::string_view reference, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be > 0");
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  const auto lcs = static_cast<double>(lcs_length(c, r));
  if (lcs == 0.0) return 0.0;
  const double precision = lcs / static_cast<double>(c.size());
  const double recall = lcs / static_cast<double>(r.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

MetricResult rouge_l_for_run(const Run& run, const Collection& collection,
                             const ReferenceAnswers& references, double beta) {
  MetricResult result;
  for (const auto& [query_id, entries] : run.queries) {
    const auto ref = references.find(query_id);
    if (ref == references.end() || entries.empty()) {
      result.skipped.push_back(query_id);
      continue;
    }
    result.per_query.emplace(query_id,
                             rouge_l(collection.at(entries.front().doc_id).text, ref->second, beta));
  }
  if (result.per_query.empty()) throw DataError("no run query has a reference answer");
  result.aggregate = macro_mean(result.per_query);
  return result;
}

double paired_permutation_test(const PerQuery& a, const PerQuery& b, int iterations,
                               std::uint64_t seed) {
  if (iterations < 1000) throw std::invalid_argument("permutation test needs >= 1000 iterations");
  if (a.size() != b.size()) throw DataError("compared systems cover different query sets");
  if (a.empty()) throw std::invalid_argument("permutation test needs at least one query");

  std::vector<double> diffs;
  diffs.reserve(a.size());
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first)
      throw DataError("compared systems cover different query sets ('" + ia->first + "' vs '" +
                      ib->first + "')");
    diffs.push_back(ia->second - ib->second);
  }

  double observed = 0.0;
  for (const double d : diffs) observed += d;
  observed = std::abs(observed);
  // Sign flips reorder the same additions; allow for that rounding.
  const double threshold = observed - 1e-12 * std::max(1.0, observed);

  auto rng = make_rng(seed);
  long long extreme = 0;
  for (int it = 0; it < iterations; ++it) {
    double sum = 0.0;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
      if (i % 64 == 0) bits = rng();
      sum += (bits & 1u) ? -diffs[i] : diffs[i];
      bits >>= 1;
    }
    if (std::abs(sum) >= threshold) ++extreme;
  }
  return static_cast<double>(1 + extreme) / static_cast<double>(1 + iterations);
}

MetricReport evaluate(const Run& run, const Qrels& qrels, const MetricCutoffs& cutoffs,
                      const Collection* collection, const ReferenceAnswers* references) {
  MetricReport report;
  report.cutoffs = cutoffs;

  std::vector<MetricResult> recalls;
  for (const int k : cutoffs.recall) {
    recalls.push_back(recall_at_k(run, qrels, k));
    report.recall.push_back(recalls.back().aggregate);
  }
  const auto mrr = mrr_at_n(run, qrels, cutoffs.mrr);
  report.mrr = mrr.aggregate;
  report.skipped = mrr.skipped;

  for (const auto& [query_id, rr] : mrr.per_query) {
    QueryMetrics qm;
    qm.reciprocal_rank = rr;
    for (const auto& r : recalls) qm.recall.push_back(r.per_query.at(query_id));
    report.per_query.emplace(query_id, std::move(qm));
  }

  if (collection && references) {
    const auto rouge = rouge_l_for_run(run, *collection, *references, cutoffs.beta);
    report.rouge_l = rouge.aggregate;
    for (const auto& [query_id, value] : rouge.per_query)
      if (auto it = report.per_query.find(query_id); it != report.per_query.end())
        it->second.rouge_l = value;
  }
  return report;
}

std::string format_report_table(std::span<const MetricReport> reports) {
  if (reports.empty()) return {};
  const auto& cut = reports.front().cutoffs;

  std::vector<std::string> header{"Model", "Mode"};
  for (const int k : cut.recall) header.push_back("Recall@" + std::to_string(k));
  header.push_back("MRR@" + std::to_string(cut.mrr));
  header.push_back("ROUGE-L");

  std::vector<std::vector<std::string>> rows{header};
  for (const auto& r : reports) {
    std::vector<std::string> row{r.model, r.mode};
    for (const double v : r.recall) row.push_back(four_places(v));
    row.push_back(four_places(r.mrr));
    row.push_back(r.rouge_l ? four_places(*r.rouge_l) : "N/A");
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c)
      width[c] = std::max(width[c], row[c].size());

  std::string out;
  const auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += " | ";
      const auto pad = std::string(width[c] - row[c].size(), ' ');
      out += c < 2 ? row[c] + pad : pad + row[c];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  };
  emit(rows[0]);
  std::size_t total = 3 * (width.size() - 1);
  for (const auto w : width) total += w;
  out += std::string(total, '-') + '\n';
  for (std::size_t i = 1; i < rows.size(); ++i) emit(rows[i]);
  return out;
}

std::string format_report_csv(std::span<const MetricReport> reports) {
  if (reports.empty()) return {};
  const auto& cut = reports.front().cutoffs;
  std::string out = "model,mode";
  for (const int k : cut.recall) out += ",recall@" + std::to_string(k);
  out += ",mrr@" + std::to_string(cut.mrr) + ",rouge_l\n";
  for (const auto& r : reports) {
    out += r.model + "," + r.mode;
    for (const double v : r.recall) out += "," + full_precision(v);
    out += "," + full_precision(r.mrr) + ",";
    if (r.rouge_l) out += full_precision(*r.rouge_l);
    out += '\n';
  }
  return out;
}

void write_per_query_csv(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "query_id";
  for (const int k : report.cutoffs.recall) out << ",recall@" << k;
  out << ",mrr@" << report.cutoffs.mrr << ",rouge_l\n";
  for (const auto& [query_id, qm] : report.per_query) {
    out << query_id;
    for (const double v : qm.recall) out << ',' << full_precision(v);
    out << ',' << full_precision(qm.reciprocal_rank) << ',';
    if (qm.rouge_l) out << full_precision(*qm.rouge_l);
    out << '\n';
  }
  out.flush();
  if (!out) throw DataError("write to " + path.string() + " failed");
}

PerQuery read_per_query_csv(const std::filesystem::path& path, const std::string& column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for reading");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  const auto col = std::find(header.begin(), header.end(), column);
  if (col == header.end() || col == header.begin())
    throw DataError(path.string() + ": no column '" + column + "'");
  const auto index = static_cast<std::size_t>(col - header.begin());

  PerQuery values;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(path.string(), number, "expected " + std::to_string(header.size()) +
                                                  " cells, found " + std::to_string(cells.size()));
    const auto& cell = cells[index];
    if (cell.empty()) continue;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
      throw ParseError(path.string(), number, "invalid value '" + cell + "'");
    if (!values.emplace(cells[0], v).second)
      throw ParseError(path.string(), number, "duplicate query '" + cells[0] + "'");
  }
  return values;
}

}  // namespace mcrank
