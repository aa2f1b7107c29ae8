#include "mcrank/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "mcrank/corpus.hpp"
#include "mcrank/error.hpp"
#include "mcrank/metrics.hpp"
#include "mcrank/retriever.hpp"
#include "mcrank/scorer.hpp"
#include "mcrank/synthetic.hpp"
#include "mcrank/training.hpp"

namespace mcrank::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw DataError("write to " + path.string() + " failed");
}

std::string format_g(double v, int digits = 17) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

InvertedIndex index_from(const std::string& index_path, const Collection& collection,
                         const Bm25Params& params) {
  if (!index_path.empty()) return InvertedIndex::load(index_path);
  return build_index(collection, params);
}

// Model and mode columns derived from a run tag: "bm25" for first-stage
// runs, "mcrank.<mode>.<hash>" for reranked ones.
std::pair<std::string, std::string> describe_tag(const std::string& tag) {
  if (tag == "bm25") return {"BM25", "retriever only"};
  const auto dot1 = tag.find('.');
  const auto dot2 = dot1 == std::string::npos ? std::string::npos : tag.find('.', dot1 + 1);
  if (dot2 != std::string::npos)
    return {tag.substr(0, dot1) + ":" + tag.substr(dot2 + 1), tag.substr(dot1 + 1, dot2 - dot1 - 1)};
  return {tag, "-"};
}

// Options shared by commands that need a collection and an index.
struct IndexOptions {
  std::string index_path;
  Bm25Params bm25;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--index", index_path, "Serialized index (built from the collection if omitted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--k1", bm25.k1, "BM25 k1 when building the index")->capture_default_str();
    cmd->add_option("--b", bm25.b, "BM25 b when building the index")->capture_default_str();
  }
};

struct Context {
  std::ostream& out;
  std::ostream& err;
};

// index

struct IndexCmd {
  std::string collection, output;
  Bm25Params bm25;

  void add(CLI::App& app, std::function<void()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("index", "Build and serialize a BM25 inverted index");
    cmd->add_option("--collection", collection, "Collection TSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--output", output, "Index file to write")->required();
    cmd->add_option("--k1", bm25.k1, "BM25 k1")->capture_default_str();
    cmd->add_option("--b", bm25.b, "BM25 b")->capture_default_str();
    cmd->callback([this, &action, &ctx] {
      action = [this, &ctx] {
        const auto index = build_index(load_collection(collection), bm25);
        index.save(output);
        ctx.out << "indexed " << index.document_count() << " documents, "
                << index.stats().vocabulary_size() << " terms -> " << output << '\n';
      };
    });
  }
};

// retrieve

struct RetrieveCmd {
  std::string index, queries, output, tag = "bm25";
  int k = kDefaultRetrievalDepth;

  void add(CLI::App& app, std::function<void()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("retrieve", "BM25 first-stage retrieval to a TREC run file");
    cmd->add_option("--index", index, "Serialized index")->required()->check(CLI::ExistingFile);
    cmd->add_option("--queries", queries, "Queries TSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--k", k, "Documents per query")->capture_default_str();
    cmd->add_option("--output", output, "Run file to write")->required();
    cmd->add_option("--tag", tag, "Run tag")->capture_default_str();
    cmd->callback([this, &action, &ctx] {
      action = [this, &ctx] {
        const auto idx = InvertedIndex::load(index);
        const auto qs = load_queries(queries);
        const auto run = retrieve_run(idx, qs, k);
        write_run(run, tag, output);
        if (run.queries.size() < qs.size())
          ctx.err << "warning: " << qs.size() - run.queries.size()
                  << " queries matched no document\n";
        ctx.out << "retrieved " << run.entry_count() << " entries for " << run.queries.size()
                << " queries -> " << output << '\n';
      };
    });
  }
};

// train

struct TrainCmd {
  std::string collection, queries, qrels, val_queries, val_qrels;
  std::string pairs, pairs_out, model, history;
  IndexOptions index;
  int negatives_per_query = 3;
  int depth = kDefaultRetrievalDepth;
  TrainConfig config;

  void add(CLI::App& app, std::function<void()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("train", "Train a linear relevance scorer with BCE loss");
    cmd->add_option("--collection", collection, "Collection TSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--queries", queries, "Training queries TSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--qrels", qrels, "Qrels covering training (and validation) queries")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--val-queries", val_queries, "Validation queries TSV")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--val-qrels", val_qrels, "Validation qrels (defaults to --qrels)")
        ->check(CLI::ExistingFile);
    index.add_to(cmd);
    cmd->add_option("--pairs", pairs, "Training pairs JSONL (otherwise built from hard negatives)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--pairs-out", pairs_out, "Write the training pairs used");
    cmd->add_option("--negatives-per-query", negatives_per_query, "Hard negatives per query")
        ->capture_default_str();
    cmd->add_option("--depth", depth, "Retrieval depth for hard negatives and validation")
        ->capture_default_str();
    cmd->add_option("--epochs", config.epochs)->capture_default_str();
    cmd->add_option("--batch-size", config.batch_size)->capture_default_str();
    cmd->add_option("--lr", config.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option("--seed", config.seed)->capture_default_str();
    cmd->add_option("--patience", config.patience, "Early-stopping patience in epochs")
        ->capture_default_str();
    cmd->add_option("--model", model, "Model file to write")->required();
    cmd->add_option("--history", history, "History CSV to write")->required();
    cmd->callback([this, &action, &ctx] { action = [this, &ctx] { run(ctx); }; });
  }

  void run(Context& ctx) const {
    config.validate();
    const auto docs = load_collection(collection);
    const auto train_qs = load_queries(queries);
    const auto all_qrels = load_qrels(qrels);
    const auto val_qs = load_queries(val_queries);
    const auto v_qrels = val_qrels.empty() ? all_qrels : load_qrels(val_qrels);
    const auto idx = index_from(index.index_path, docs, index.bm25);

    std::vector<TrainingPair> data;
    if (!pairs.empty()) {
      data = load_training_pairs(pairs);
    } else {
      data = build_training_pairs(idx, all_qrels, train_qs, negatives_per_query, config.seed, depth);
    }
    if (!pairs_out.empty()) write_training_pairs(data, pairs_out);

    const auto candidates = retrieve_run(idx, val_qs, depth);
    const CorpusContext corpus{docs, train_qs, idx};
    const auto result = train(LinearScorer<double>::zeros(), data,
                              ValidationSet{val_qs, v_qrels, candidates}, config, corpus);
    for (const auto& w : result.history.warnings) ctx.err << "warning: " << w << '\n';

    save_model(result.scorer, model);
    write_history_csv(result.history, history);
    write_text(model + ".meta", "epochs = " + std::to_string(config.epochs) +
                                    "\nbatch-size = " + std::to_string(config.batch_size) +
                                    "\nlr = " + format_g(config.learning_rate) +
                                    "\nseed = " + std::to_string(config.seed) +
                                    "\npatience = " + std::to_string(config.patience) +
                                    "\ntraining-pairs = " + std::to_string(data.size()) +
                                    "\nbest-epoch = " + std::to_string(result.history.best_epoch) +
                                    "\n");
    ctx.out << "trained on " << data.size() << " pairs for " << result.history.epochs.size()
            << " epochs (best epoch " << result.history.best_epoch << ", initial loss "
            << format_g(result.history.initial_train_loss, 6) << ", final loss "
            << format_g(result.history.epochs.back().train_loss, 6) << ") -> " << model << '\n';
  }
};

// rerank

struct RerankCmd {
  std::string collection, queries, model, run_path, output, mode = "cross-encoder", tag;
  IndexOptions index;

  void add(CLI::App& app, std::function<void()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("rerank", "Rerank a first-stage run with a trained scorer");
    cmd->add_option("--collection", collection, "Collection TSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--queries", queries, "Queries TSV")->required()->check(CLI::ExistingFile);
    index.add_to(cmd);
    cmd->add_option("--model", model, "Model file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--run", run_path, "First-stage run")->required()->check(CLI::ExistingFile);
    cmd->add_option("--mode", mode, "cross-encoder or mcqa")
        ->capture_default_str()
        ->check(CLI::IsMember({"cross-encoder", "mcqa"}));
    cmd->add_option("--output", output, "Run file to write")->required();
    cmd->add_option("--tag", tag, "Run tag (default mcrank.<mode>.<model hash>)");
    cmd->callback([this, &action, &ctx] {
      action = [this, &ctx] {
        const auto rerank_mode = parse_rerank_mode(mode);
        const auto docs = load_collection(collection);
        const auto qs = load_queries(queries);
        const auto idx = index_from(index.index_path, docs, index.bm25);
        const auto scorer = load_model(model);
        const auto reranked = rerank_run(rerank_mode, scorer, load_run(run_path), qs, docs, idx);
        const auto run_tag =
            tag.empty() ? "mcrank." + std::string(to_string(rerank_mode)) + "." + model_hash(scorer)
                        : tag;
        write_run(reranked, run_tag, output);
        ctx.out << "reranked " << reranked.queries.size() << " queries (" << mode << ") -> "
                << output << '\n';
      };
    });
  }
};

// eval

struct EvalCmd {
  std::vector<std::string> runs;
  std::string qrels, collection, references, output_dir;
  MetricCutoffs cutoffs;

  void add(CLI::App& app, std::function<void()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("eval", "Recall@k, MRR@n and ROUGE-L for one or more runs");
    cmd->add_option("--run", runs, "Run file(s)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--qrels", qrels, "Qrels")->required()->check(CLI::ExistingFile);
    cmd->add_option("--collection", collection, "Collection TSV (for ROUGE-L)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--references", references, "Reference answers TSV (for ROUGE-L)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--recall-k", cutoffs.recall, "Recall cutoffs")->capture_default_str();
    cmd->add_option("--mrr-n", cutoffs.mrr, "MRR cutoff")->capture_default_str();
    cmd->add_option("--beta", cutoffs.beta, "ROUGE-L beta")->capture_default_str();
    cmd->add_option("--output-dir", output_dir,
                    "Write report.txt, report.csv and per-query CSVs here");
    cmd->callback([this, &action, &ctx] { action = [this, &ctx] { run(ctx); }; });
  }

  void run(Context& ctx) const {
    if (collection.empty() != references.empty())
      throw std::invalid_argument("--collection and --references must be given together");
    const auto judged = load_qrels(qrels);
    std::optional<Collection> docs;
    std::optional<ReferenceAnswers> refs;
    if (!collection.empty()) {
      docs = load_collection(collection);
      refs = load_references(references);
    }

    std::vector<MetricReport> reports;
    std::set<std::string> tags;
    for (const auto& path : runs) {
      const auto run = load_run(path);
      const std::string tag = run.tag.empty() ? fs::path(path).stem().string() : run.tag;
      if (!tags.insert(tag).second)
        throw std::invalid_argument("two runs share the tag '" + tag + "'");
      auto report = evaluate(run, judged, cutoffs, docs ? &*docs : nullptr, refs ? &*refs : nullptr);
      std::tie(report.model, report.mode) = describe_tag(tag);
      if (!report.skipped.empty())
        ctx.err << "warning: " << path << ": " << report.skipped.size()
                << " queries without relevant judgments skipped\n";
      if (!output_dir.empty()) {
        fs::create_directories(output_dir);
        write_per_query_csv(report, fs::path(output_dir) / ("per_query_" + tag + ".csv"));
      }
      reports.push_back(std::move(report));
    }

    const auto table = format_report_table(reports);
    ctx.out << table;
    if (!output_dir.empty()) {
      write_text(fs::path(output_dir) / "report.txt", table);
      write_text(fs::path(output_dir) / "report.csv", format_report_csv(reports));
    }
  }
};

// compare

struct CompareCmd {
  std::string a, b, metric = "mrr@10", output;
  int iterations = 10000;
  std::uint64_t seed = 0;

  void add(CLI::App& app, std::function<void()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("compare", "Paired permutation test between two systems");
    cmd->add_option("--a", a, "Per-query CSV of system A")->required()->check(CLI::ExistingFile);
    cmd->add_option("--b", b, "Per-query CSV of system B")->required()->check(CLI::ExistingFile);
    cmd->add_option("--metric", metric, "Column to compare")->capture_default_str();
    cmd->add_option("--iterations", iterations)->capture_default_str();
    cmd->add_option("--seed", seed)->capture_default_str();
    cmd->add_option("--output", output, "Also write the result here");
    cmd->callback([this, &action, &ctx] {
      action = [this, &ctx] {
        const auto va = read_per_query_csv(a, metric);
        const auto vb = read_per_query_csv(b, metric);
        const double p = paired_permutation_test(va, vb, iterations, seed);
        std::ostringstream text;
        text << "metric " << metric << "\nqueries " << va.size() << "\nmean_a "
             << format_g(macro_mean(va), 6) << "\nmean_b " << format_g(macro_mean(vb), 6)
             << "\niterations " << iterations << "\np_value " << format_g(p, 6) << '\n';
        ctx.out << text.str();
        if (!output.empty()) write_text(output, text.str());
      };
    });
  }
};

// demo

struct DemoCmd {
  std::string output_dir;
  std::uint64_t seed = 42;

  void add(CLI::App& app, std::function<void()>& action, Context& ctx) {
    auto* cmd = app.add_subcommand("demo", "Run the whole pipeline on a synthetic benchmark");
    cmd->add_option("--output-dir", output_dir, "Directory for all outputs")->required();
    cmd->add_option("--seed", seed)->capture_default_str();
    cmd->callback([this, &action, &ctx] { action = [this, &ctx] { run(ctx); }; });
  }

  void step(Context& ctx, std::vector<std::string> args) const {
    std::ostringstream log;
    const int code = cli::run(args, log, ctx.err);
    ctx.out << log.str();
    if (code == kUsageError) throw std::logic_error("demo step '" + args[0] + "' rejected its arguments");
    if (code != kSuccess) throw DataError("demo step '" + args[0] + "' failed");
  }

  void run(Context& ctx) const {
    const fs::path dir(output_dir);
    const auto data = dir / "data";
    SyntheticConfig synth;
    synth.seed = seed;
    write_benchmark(make_synthetic_benchmark(synth), data);

    const auto p = [](const fs::path& x) { return x.string(); };
    const auto s = std::to_string(seed);
    step(ctx, {"index", "--collection", p(data / "collection.tsv"), "--output", p(dir / "index.txt")});
    step(ctx, {"retrieve", "--index", p(dir / "index.txt"), "--queries", p(data / "test_queries.tsv"),
               "--output", p(dir / "bm25.run")});
    step(ctx, {"train", "--collection", p(data / "collection.tsv"), "--queries",
               p(data / "train_queries.tsv"), "--qrels", p(data / "qrels.txt"), "--val-queries",
               p(data / "val_queries.tsv"), "--index", p(dir / "index.txt"), "--seed", s,
               "--pairs-out", p(dir / "train_pairs.jsonl"), "--model", p(dir / "model.txt"),
               "--history", p(dir / "history.csv")});
    for (const std::string mode : {"cross-encoder", "mcqa"})
      step(ctx, {"rerank", "--collection", p(data / "collection.tsv"), "--queries",
                 p(data / "test_queries.tsv"), "--index", p(dir / "index.txt"), "--model",
                 p(dir / "model.txt"), "--run", p(dir / "bm25.run"), "--mode", mode, "--output",
                 p(dir / ("rerank_" + mode + ".run"))});
    step(ctx, {"eval", "--run", p(dir / "bm25.run"), "--run", p(dir / "rerank_cross-encoder.run"),
               "--run", p(dir / "rerank_mcqa.run"), "--qrels", p(data / "qrels.txt"),
               "--collection", p(data / "collection.tsv"), "--references",
               p(data / "references.tsv"), "--output-dir", p(dir / "eval")});

    const auto model_tag = "mcrank.cross-encoder." + model_hash(load_model(dir / "model.txt"));
    for (const std::string metric : {"recall@1", "mrr@10"})
      step(ctx, {"compare", "--a", p(dir / "eval" / ("per_query_" + model_tag + ".csv")), "--b",
                 p(dir / "eval" / "per_query_bm25.csv"), "--metric", metric, "--seed", s,
                 "--output", p(dir / ("significance_" + metric + ".txt"))});
  }
};

std::pair<std::vector<std::string>, std::string> extract_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  return {rest, config};
}

}  // namespace

std::vector<std::string> merge_config_file(const std::vector<std::string>& args,
                                           const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw std::invalid_argument("cannot read config file " + config_path);

  std::set<std::string> given;
  for (const auto& a : args)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos
                                                           ? std::string::npos
                                                           : a.find('=') - 2));

  std::vector<std::string> merged = args;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(config_path + ":" + std::to_string(number) +
                                  ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument(config_path + ":" + std::to_string(number) + ": empty key");
    if (given.contains(key)) continue;
    merged.push_back("--" + key);
    std::istringstream values(line.substr(eq + 1));
    for (std::string v; values >> v;) merged.push_back(v);
  }
  return merged;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  std::function<void()> action;

  CLI::App app{"mcrank: BM25 retrieval, linear relevance reranking and IR evaluation", "mcrank"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  IndexCmd index_cmd;
  RetrieveCmd retrieve_cmd;
  TrainCmd train_cmd;
  RerankCmd rerank_cmd;
  EvalCmd eval_cmd;
  CompareCmd compare_cmd;
  DemoCmd demo_cmd;
  index_cmd.add(app, action, ctx);
  retrieve_cmd.add(app, action, ctx);
  train_cmd.add(app, action, ctx);
  rerank_cmd.add(app, action, ctx);
  eval_cmd.add(app, action, ctx);
  compare_cmd.add(app, action, ctx);
  demo_cmd.add(app, action, ctx);

  try {
    auto [args, config] = extract_config(raw_args);
    if (!config.empty()) args = merge_config_file(args, config);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (action) action();
    return kSuccess;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace mcrank::cli
