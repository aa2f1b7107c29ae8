#include <doctest.h>

#include <cmath>

#include "mcrank/error.hpp"
#include "mcrank/retriever.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mcrank;
using mcrank::testing::CorpusGenerator;
using mcrank::testing::TempDir;

namespace {

// d1: 4 tokens, d2: 3 tokens, d3: 5 tokens.
Collection fixture() {
  return Collection({{"d1", "green tea and green leaves"},
                     {"d2", "black coffee beans"},
                     {"d3", "Tea time: milk tea, sugar"}});
}

}  // namespace

TEST_CASE("build_index matches hand counts") {
  const auto index = build_index(fixture());
  CHECK(index.document_count() == 3);
  CHECK(index.doc_length("d1") == 5);
  CHECK(index.doc_length("d2") == 3);
  CHECK(index.doc_length("d3") == 5);
  CHECK(index.stats().average_length() == doctest::Approx(13.0 / 3.0));

  const auto& green = index.postings("green");
  REQUIRE(green.size() == 1);
  CHECK(index.doc_ids()[green[0].doc] == "d1");
  CHECK(green[0].tf == 2);

  const auto& tea = index.postings("tea");
  REQUIRE(tea.size() == 2);
  CHECK(index.doc_ids()[tea[0].doc] == "d1");
  CHECK(tea[0].tf == 1);
  CHECK(index.doc_ids()[tea[1].doc] == "d3");
  CHECK(tea[1].tf == 2);

  CHECK(index.postings("absent").empty());
  CHECK(index.stats().document_frequency("tea") == 2);
}

TEST_CASE("index invariants") {
  CorpusGenerator gen(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto index = build_index(Collection(gen.documents(1 + static_cast<int>(gen.pick(30)))));
    CHECK(index.stats().document_count() == index.document_count());
    CHECK(std::is_sorted(index.doc_ids().begin(), index.doc_ids().end()));
    for (const auto& [term, list] : index.all_postings()) {
      REQUIRE_FALSE(list.empty());
      for (std::size_t i = 0; i < list.size(); ++i) {
        CHECK(list[i].doc < index.document_count());
        CHECK(list[i].tf > 0);
        if (i > 0) CHECK(list[i - 1].doc < list[i].doc);
      }
    }
  }
}

TEST_CASE("build_index errors") {
  CHECK_THROWS_AS(build_index(fixture(), {-1.0, 0.75}), std::invalid_argument);
  CHECK_THROWS_AS(build_index(fixture(), {1.2, 1.5}), std::invalid_argument);
  CHECK_THROWS_AS(build_index(fixture(), {NAN, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(Collection({{"d1", "a"}, {"d1", "b"}}), DataError);

  const auto empty = build_index(Collection{});
  CHECK(empty.document_count() == 0);
  CHECK_THROWS_AS(retrieve_topk(empty, "green"), DataError);
}

TEST_CASE("bm25_score") {
  const auto c = fixture();
  const auto index = build_index(c);
  CHECK(bm25_score(index, {"coffee"}, "d1") == 0.0);
  CHECK(bm25_score(index, {}, "d1") == 0.0);
  CHECK_THROWS_AS(bm25_score(index, {"tea"}, "d9"), DataError);

  const auto oracle = oracle::bm25_all(c.records(), "green tea", 1.2, 0.75);
  for (const auto& s : oracle) CHECK(bm25_score(index, {"green", "tea"}, s.doc_id) == s.score);
  CHECK(oracle[0].score > 0.0);

  // Repeated query terms count once.
  CHECK(bm25_score(index, {"tea", "tea"}, "d3") == bm25_score(index, {"tea"}, "d3"));
}

TEST_CASE("k1 = 0 leaves only the idf of matched terms") {
  const auto c = fixture();
  const auto index = build_index(c, {0.0, 0.75});
  CHECK(bm25_score(index, {"green", "tea"}, "d1") == doctest::Approx(idf(3, 1) + idf(3, 2)).epsilon(1e-15));
  CHECK(bm25_score(index, {"tea"}, "d3") == doctest::Approx(idf(3, 2)).epsilon(1e-15));
}

TEST_CASE("retrieve_topk") {
  const auto c = fixture();
  const auto index = build_index(c);

  CHECK(retrieve_topk(index, "nothing matches here").empty());

  const auto hits = retrieve_topk(index, "green tea", 10);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].rank == 1);
  CHECK(hits[1].rank == 2);
  const auto oracle = oracle::bm25_topk(c.records(), "green tea", 10, 1.2, 0.75);
  REQUIRE(oracle.size() == 2);
  CHECK(hits[0].doc_id == oracle[0].doc_id);
  CHECK(hits[1].doc_id == oracle[1].doc_id);

  CHECK(retrieve_topk(index, "green tea", 1).size() == 1);
  CHECK_THROWS_AS(retrieve_topk(index, "tea", 0), std::invalid_argument);

  const auto q = retrieve_topk(index, Query{"q7", "tea"});
  REQUIRE_FALSE(q.empty());
  CHECK(q[0].query_id == "q7");
}

TEST_CASE("equal scores order by doc id") {
  const auto index = build_index(Collection({{"z", "apple pie"}, {"m", "apple pie"}, {"a", "pie apple"}}));
  const auto hits = retrieve_topk(index, "apple");
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].doc_id == "a");
  CHECK(hits[1].doc_id == "m");
  CHECK(hits[2].doc_id == "z");
  CHECK(hits[0].score == hits[2].score);
}

TEST_CASE("property: retrieve_topk equals brute-force scoring and sort") {
  CorpusGenerator gen(99);
  int compared = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto docs = gen.documents(1 + static_cast<int>(gen.pick(50)));
    const Bm25Params params{gen.pick(4) == 0 ? 0.0 : gen.uniform(0.0, 3.0), gen.uniform(0.0, 1.0)};
    const auto index = build_index(Collection(docs), params);
    for (int q = 0; q < 3; ++q) {
      const auto text = gen.text(1, 4);
      const int k = 1 + static_cast<int>(gen.pick(15));
      const auto got = retrieve_topk(index, text, k);
      const auto want = oracle::bm25_topk(docs, text, k, params.k1, params.b);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].doc_id == want[i].doc_id);
        CHECK(got[i].score == want[i].score);
        CHECK(got[i].rank == static_cast<int>(i) + 1);
      }
      ++compared;
    }
  }
  CHECK(compared >= 100);
}

TEST_CASE("property: an extra query-term occurrence never lowers the score") {
  // Adds the occurrence in place of a non-query token, so |d| and avgdl stay fixed.
  CorpusGenerator gen(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto docs = gen.documents(2 + static_cast<int>(gen.pick(10)), 2, 12);
    const auto before = build_index(Collection(docs));
    const std::string term = "tea";
    auto tokens = tokenize(docs[0].text);
    auto slot = std::find_if(tokens.begin(), tokens.end(), [&](const std::string& t) { return t != term; });
    if (slot == tokens.end()) continue;
    const double old_score = bm25_score(before, {term}, docs[0].id);
    *slot = term;
    std::string text;
    for (const auto& t : tokens) text += t + " ";
    docs[0].text = text;
    const auto after = build_index(Collection(docs));
    if (after.stats().document_frequency(term) == before.stats().document_frequency(term))
      CHECK(bm25_score(after, {term}, docs[0].id) >= old_score);
  }
}

TEST_CASE("index save/load") {
  TempDir dir;
  CorpusGenerator gen(8);
  const auto docs = gen.documents(30);
  const auto index = build_index(Collection(docs), {1.5, 0.4});
  index.save(dir / "index.txt");
  const auto loaded = InvertedIndex::load(dir / "index.txt");
  CHECK(loaded.doc_ids() == index.doc_ids());
  CHECK(loaded.doc_lengths() == index.doc_lengths());
  CHECK(loaded.params().k1 == 1.5);
  CHECK(loaded.params().b == 0.4);
  for (int q = 0; q < 20; ++q) {
    const auto text = gen.text(1, 3);
    const auto a = retrieve_topk(index, text);
    const auto b = retrieve_topk(loaded, text);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].doc_id == b[i].doc_id);
      CHECK(a[i].score == b[i].score);
    }
  }

  mcrank::testing::write_file(dir / "bad.txt", "not an index\n");
  CHECK_THROWS_AS(InvertedIndex::load(dir / "bad.txt"), DataError);
}

TEST_CASE("identical inputs give byte-identical run files") {
  TempDir dir;
  CorpusGenerator gen(13);
  const auto docs = gen.documents(40);
  std::vector<Query> qs;
  for (int i = 0; i < 10; ++i) qs.push_back({"q" + std::to_string(i), gen.text(1, 4)});
  const QuerySet queries(qs);

  write_run(retrieve_run(build_index(Collection(docs)), queries), "bm25", dir / "a.run");
  write_run(retrieve_run(build_index(Collection(docs)), queries), "bm25", dir / "b.run");
  CHECK(mcrank::testing::read_file(dir / "a.run") == mcrank::testing::read_file(dir / "b.run"));
}
