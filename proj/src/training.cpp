#include "mcrank/training.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "mcrank/error.hpp"
#include "mcrank/metrics.hpp"
#include "mcrank/random.hpp"

namespace mcrank {

namespace {

constexpr int kValidationMrrCutoff = 10;

struct EncodedQuery {
  std::string query_id;
  std::vector<std::string> doc_ids;
  Batch<double> batch;
};

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  // Zero is accepted so a run can be replayed without updates.
  if (!std::isfinite(learning_rate) || learning_rate < 0.0)
    throw std::invalid_argument("learning rate must be finite and >= 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
}

std::vector<TrainingPair> sample_hard_negatives(const InvertedIndex& index, const Qrels& qrels,
                                                const Query& query, int m, std::uint64_t seed,
                                                int depth) {
  if (m < 1) throw std::invalid_argument("hard negative count must be >= 1");

  std::vector<RunEntry> pool;
  for (auto& e : retrieve_topk(index, query, depth))
    if (!qrels.is_relevant(query.id, e.doc_id)) pool.push_back(std::move(e));

  const auto want = static_cast<std::size_t>(m);
  std::vector<TrainingPair> out;
  const auto emit = [&](const RunEntry& e) { out.push_back(TrainingPair{query.id, e.doc_id, 0}); };

  if (pool.size() <= want) {
    for (const auto& e : pool) emit(e);
    return out;
  }

  const double cut = pool[want - 1].score;
  if (pool[want].score != cut) {
    for (std::size_t i = 0; i < want; ++i) emit(pool[i]);
    return out;
  }

  // The cut splits a group of tied scores: keep everything above it and a
  // seeded sample of the group, in retrieval order.
  std::size_t first_tied = 0;
  while (pool[first_tied].score != cut) ++first_tied;
  std::size_t end_tied = first_tied;
  while (end_tied < pool.size() && pool[end_tied].score == cut) ++end_tied;

  auto rng = make_rng(seed);
  auto chosen = sample_without_replacement(end_tied - first_tied, want - first_tied, rng);
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t i = 0; i < first_tied; ++i) emit(pool[i]);
  for (const auto c : chosen) emit(pool[first_tied + c]);
  return out;
}

std::vector<TrainingPair> build_training_pairs(const InvertedIndex& index, const Qrels& qrels,
                                               const QuerySet& queries, int negatives_per_query,
                                               std::uint64_t seed, int depth) {
  Qrels own;
  for (const auto& [key, grade] : qrels.judgments())
    if (queries.contains(key.first)) own.add(key.first, key.second, grade);

  std::vector<TrainingPair> negatives;
  for (const auto& q : queries)
    for (auto& p : sample_hard_negatives(index, qrels, q, negatives_per_query, seed, depth))
      negatives.push_back(std::move(p));
  return build_balanced_training_set(own, negatives, seed);
}

TrainResult fit(const LinearScorer<double>& initial, const Batch<double>& data,
                const Validator& validate, const TrainConfig& config) {
  config.validate();
  if (data.size() == 0) throw std::invalid_argument("no training data");
  check_batch(initial, data);

  TrainResult result{initial, {}};
  auto& history = result.history;
  history.initial_train_loss = batch_loss(initial, data);

  const auto optimizer = GradientDescent::rms_scaled(config.learning_rate, data);
  LinearScorer<double> current = initial;
  const auto n = static_cast<std::size_t>(data.size());
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  std::vector<Eigen::Index> order(n);

  double best_mrr = -std::numeric_limits<double>::infinity();
  int epochs_without_gain = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    auto rng = make_rng(config.seed, static_cast<std::uint64_t>(epoch));
    shuffle(order, rng);

    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::vector<Eigen::Index> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(
                                                               std::min(n, start + batch_size)));
      const Batch<double> mini{data.features(rows, Eigen::all), data.labels(rows)};
      optimizer.step(current, gradient(current, mini));
    }

    const auto val = validate(current);
    history.epochs.push_back(EpochRecord{epoch, batch_loss(current, data), val.loss, val.mrr10});

    if (val.mrr10 > best_mrr) {
      best_mrr = val.mrr10;
      history.best_epoch = epoch;
      result.scorer = current;
      epochs_without_gain = 0;
    } else if (++epochs_without_gain >= config.patience) {
      history.stopped_early = epoch < config.epochs;
      break;
    }
  }
  return result;
}

Validator make_validator(const ValidationSet& validation, const InvertedIndex& index,
                         const Collection& collection) {
  std::vector<EncodedQuery> encoded;
  Eigen::Index total_pairs = 0;
  for (const auto& [query_id, entries] : validation.candidates.queries) {
    if (entries.empty()) continue;
    const auto query_tokens = tokenize(validation.queries.at(query_id).text);
    EncodedQuery eq{query_id, {}, {}};
    const auto rows = static_cast<Eigen::Index>(entries.size());
    eq.batch.features.resize(rows, kFeatureDim);
    eq.batch.labels.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& doc = collection.at(entries[static_cast<std::size_t>(r)].doc_id);
      eq.doc_ids.push_back(doc.id);
      eq.batch.features.row(r) = encode(query_tokens, tokenize(doc.text), doc.id, index).transpose();
      eq.batch.labels(r) = validation.qrels.is_relevant(query_id, doc.id) ? 1.0 : 0.0;
    }
    total_pairs += rows;
    encoded.push_back(std::move(eq));
  }
  if (encoded.empty()) throw std::invalid_argument("validation set has no candidates");

  const Qrels* qrels = &validation.qrels;
  return [encoded = std::move(encoded), total_pairs, qrels](const LinearScorer<double>& scorer) {
    Run run;
    double loss_sum = 0.0;
    for (const auto& eq : encoded) {
      const Vector<double> logits = raw_scores(scorer, eq.batch.features);
      std::vector<ScoredCandidate> scored;
      for (Eigen::Index r = 0; r < logits.size(); ++r) {
        loss_sum += bce_with_logits(logits(r), static_cast<int>(eq.batch.labels(r)));
        scored.push_back(ScoredCandidate{eq.doc_ids[static_cast<std::size_t>(r)], logits(r),
                                         sigmoid(logits(r)), RerankMode::kCrossEncoder});
      }
      sort_candidates(scored);
      auto& list = run.queries[eq.query_id];
      for (std::size_t i = 0; i < scored.size(); ++i)
        list.push_back(RunEntry{eq.query_id, scored[i].doc_id, static_cast<int>(i) + 1,
                                scored[i].probability});
    }
    return ValidationScore{loss_sum / static_cast<double>(total_pairs),
                           mrr_at_n(run, *qrels, kValidationMrrCutoff).aggregate};
  };
}

Batch<double> encode_pairs(const std::vector<TrainingPair>& pairs, const CorpusContext& context) {
  Batch<double> batch;
  const auto rows = static_cast<Eigen::Index>(pairs.size());
  batch.features.resize(rows, kFeatureDim);
  batch.labels.resize(rows);

  std::unordered_map<std::string, TokenList> query_tokens;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& p = pairs[static_cast<std::size_t>(r)];
    if (p.label != 0 && p.label != 1)
      throw DataError("pair (" + p.query_id + ", " + p.doc_id + ") has label " +
                      std::to_string(p.label));
    const auto* query = context.queries.find(p.query_id);
    if (!query) throw DataError("training pair references unknown query '" + p.query_id + "'");
    const auto* doc = context.collection.find(p.doc_id);
    if (!doc) throw DataError("training pair references unknown document '" + p.doc_id + "'");
    auto [it, fresh] = query_tokens.try_emplace(p.query_id);
    if (fresh) it->second = tokenize(query->text);
    batch.features.row(r) = encode(it->second, tokenize(doc->text), doc->id, context.index).transpose();
    batch.labels(r) = p.label;
  }
  return batch;
}

TrainResult train(const LinearScorer<double>& initial, const std::vector<TrainingPair>& data,
                  const ValidationSet& validation, const TrainConfig& config,
                  const CorpusContext& context) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("no training pairs");

  const auto positives = std::count_if(data.begin(), data.end(),
                                       [](const TrainingPair& p) { return p.label == 1; });
  const auto negatives = static_cast<std::ptrdiff_t>(data.size()) - positives;

  const auto batch = encode_pairs(data, context);
  auto result = fit(initial, batch, make_validator(validation, context.index, context.collection),
                    config);
  if (positives != negatives)
    result.history.warnings.push_back("training data is unbalanced: " + std::to_string(positives) +
                                      " positives, " + std::to_string(negatives) + " negatives");
  return result;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "epoch,train_loss,val_loss,val_mrr10\n";
  char buf[128];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss,
                  e.val_mrr10);
    out << buf;
  }
  out.flush();
  if (!out) throw DataError("write to " + path.string() + " failed");
}

}  // namespace mcrank
