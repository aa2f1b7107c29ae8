#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mcrank/error.hpp"
#include "mcrank/scorer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mcrank;
using mcrank::testing::CorpusGenerator;

namespace {

Collection fixture() {
  return Collection({{"d1", "green tea improves health"},
                     {"d2", "green tea"},
                     {"d3", "black coffee beans roasted"},
                     {"d4", "tea tea tea time"},
                     {"d5", "benefits of green leaves"}});
}

std::vector<std::string> order(const std::vector<ScoredCandidate>& scored) {
  std::vector<std::string> ids;
  for (const auto& s : scored) ids.push_back(s.doc_id);
  return ids;
}

LinearScorer<double> indicator(Eigen::Index feature) {
  auto s = LinearScorer<double>::zeros();
  s.weights(feature) = 1.0;
  return s;
}

}  // namespace

TEST_CASE("encode examples") {
  const auto c = fixture();
  const auto index = build_index(c);

  const auto same = encode(Query{"q", "green tea"}, c.at("d2"), index);
  CHECK(same(kJaccard) == 1.0);
  CHECK(same(kQueryCoverage) == 1.0);

  const auto disjoint = encode(Query{"q", "roasted beans"}, c.at("d2"), index);
  for (auto f : {kUnigramOverlap, kIdfOverlap, kBm25, kJaccard, kBigramOverlap, kQueryCoverage})
    CHECK(disjoint(f) == 0.0);

  const auto fv = encode(Query{"q", "green tea benefits"}, c.at("d1"), index);
  CHECK(fv(kUnigramOverlap) == 2.0);
  CHECK(fv(kQueryCoverage) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(fv(kBigramOverlap) == 1.0);
  CHECK(fv(kIdfOverlap) == doctest::Approx(idf(5, 3) + idf(5, 3)).epsilon(1e-15));
  CHECK(fv(kJaccard) == doctest::Approx(2.0 / 5.0).epsilon(1e-15));
  CHECK(fv(kLogPassageLength) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK(fv(kLogQueryLength) == doctest::Approx(std::log(4.0)).epsilon(1e-15));

  CHECK_THROWS_AS(encode(Query{"q", "tea"}, Document{"d9", "tea"}, index), DataError);
}

TEST_CASE("property: encoded features satisfy their ranges") {
  CorpusGenerator gen(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto docs = gen.documents(1 + static_cast<int>(gen.pick(20)));
    const auto index = build_index(Collection(docs));
    const Query q{"q", gen.text(0, 6)};
    for (const auto& d : docs) {
      const auto fv = encode(q, d, index);
      REQUIRE(fv.size() == kFeatureDim);
      CHECK(fv.allFinite());
      for (auto f : {kUnigramOverlap, kIdfOverlap, kBm25, kBigramOverlap}) CHECK(fv(f) >= 0.0);
      for (auto f : {kJaccard, kQueryCoverage}) {
        CHECK(fv(f) >= 0.0);
        CHECK(fv(f) <= 1.0);
      }
      CHECK(fv(kBm25) == bm25_score(index, tokenize(q.text), d.id));
    }
  }
}

TEST_CASE("raw_score") {
  const auto c = fixture();
  const auto index = build_index(c);
  const auto fv = encode(Query{"q", "green tea"}, c.at("d1"), index);

  CHECK(raw_score(LinearScorer<double>::zeros(), fv) == 0.0);
  CHECK(raw_score(indicator(kBm25), fv) == bm25_score(index, {"green", "tea"}, "d1"));

  LinearScorer<double> ones{Vector<double>::Ones(kFeatureDim), 1.0};
  CHECK(raw_score(ones, FeatureVector::Zero(kFeatureDim)) == 1.0);

  CHECK_THROWS_AS(raw_score(LinearScorer<double>::zeros(3), fv), std::invalid_argument);
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(2.0) == doctest::Approx(0.8807970779778823).epsilon(1e-15));
  CHECK(std::isfinite(sigmoid(700.0)));
  CHECK(sigmoid(-700.0) > 0.0);
  CHECK(sigmoid(700.0) <= 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);

  CorpusGenerator gen(2);
  for (int i = 0; i < 10000; ++i) {
    const double x = gen.uniform(-40.0, 40.0);
    CHECK(std::abs(sigmoid(x) + sigmoid(-x) - 1.0) <= 1e-15);
    CHECK(sigmoid(x) >= 0.0);
    CHECK(sigmoid(x) <= 1.0);
    if (std::abs(x) < 30.0) {
      CHECK(sigmoid(x) > 0.0);
      CHECK(sigmoid(x) < 1.0);
    }
  }
}

TEST_CASE("property: sigmoid and softmax never swap neighbouring logits") {
  CorpusGenerator gen(17);
  for (double lo : {-745.0, -60.0, -38.0, -36.0, -3.0, -1e-3, 0.0, 3.0, 40.0}) {
    for (int i = 0; i < 20000; ++i) {
      const double x = lo + gen.uniform(0.0, std::max(1.0, std::abs(lo) / 2));
      const double y = std::nextafter(x, 1e300);
      CHECK(sigmoid(x) <= sigmoid(y));
      const auto p = softmax(std::vector<double>{x, y, gen.uniform(x - 5, x + 5)});
      CHECK(p[0] <= p[1]);
    }
  }
}

TEST_CASE("softmax") {
  const auto uniform = softmax(std::vector<double>{4.0, 4.0, 4.0});
  for (double p : uniform) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const auto two = softmax(std::vector<double>{0.0, std::numbers::ln2});
  CHECK(two[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(two[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  const auto big = softmax(std::vector<double>{1000.0, 1001.0});
  const auto small = softmax(std::vector<double>{0.0, 1.0});
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == doctest::Approx(small[0]).epsilon(1e-15));
  CHECK(big[1] == doctest::Approx(small[1]).epsilon(1e-15));

  CHECK_THROWS_AS(softmax(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("property: softmax sums to one and is shift invariant") {
  CorpusGenerator gen(23);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> s(1 + gen.pick(12));
    const double scale = std::pow(10.0, gen.uniform(-3.0, 3.0));
    for (auto& v : s) v = gen.normal() * scale;
    const auto p = softmax(s);
    double sum = 0.0;
    // Components more than ~745 below the max underflow to 0 in double.
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const bool spread_ok = *hi - *lo < 700.0;
    for (double v : p) {
      if (spread_ok) CHECK(v > 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    const double c = gen.uniform(-50.0, 50.0);
    auto shifted = s;
    for (auto& v : shifted) v += c;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);

    const auto argmax = std::max_element(s.begin(), s.end()) - s.begin();
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == argmax);
  }
}

TEST_CASE("rerank_cross_encoder") {
  const auto c = fixture();
  const auto index = build_index(c);
  const Query q{"q", "green tea"};

  const std::vector<Document> one = {c.at("d3")};
  const auto single = rerank_cross_encoder(indicator(kLogPassageLength), q, one, index);
  REQUIRE(single.size() == 1);
  CHECK(single[0].probability == sigmoid(single[0].logit));
  CHECK(single[0].mode == RerankMode::kCrossEncoder);

  const std::vector<Document> all(c.begin(), c.end());
  std::vector<Document> reversed(all.rbegin(), all.rend());
  const auto zero = rerank_cross_encoder(LinearScorer<double>::zeros(), q, reversed, index);
  CHECK(order(zero) == std::vector<std::string>{"d1", "d2", "d3", "d4", "d5"});
  for (const auto& s : zero) CHECK(s.probability == 0.5);

  // BM25 indicator reproduces the retriever over every candidate that matches.
  const auto by_bm25 = rerank_cross_encoder(indicator(kBm25), q, all, index);
  const auto retrieved = retrieve_topk(index, q.text, 10);
  for (std::size_t i = 0; i < retrieved.size(); ++i) CHECK(by_bm25[i].doc_id == retrieved[i].doc_id);

  CHECK_THROWS_AS(rerank_cross_encoder(indicator(kBm25), q, std::vector<Document>{}, index),
                  std::invalid_argument);
}

TEST_CASE("rerank_mcqa") {
  const auto c = fixture();
  const auto index = build_index(c);
  const Query q{"q", "green tea"};

  const std::vector<Document> one = {c.at("d3")};
  const auto single = rerank_mcqa(indicator(kBm25), q, one, index);
  REQUIRE(single.size() == 1);
  CHECK(single[0].probability == 1.0);
  CHECK(single[0].mode == RerankMode::kMcqa);

  // Logits 0 and ln 2 through the bias and a feature that is 1 for d2 and 0 for d3.
  LinearScorer<double> s = LinearScorer<double>::zeros();
  s.weights(kBigramOverlap) = std::numbers::ln2;
  const std::vector<Document> pair = {c.at("d3"), c.at("d2")};
  const auto scored = rerank_mcqa(s, q, pair, index);
  REQUIRE(scored.size() == 2);
  CHECK(scored[0].doc_id == "d2");
  CHECK(scored[0].probability == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(scored[1].probability == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  CHECK(parse_rerank_mode("mcqa") == RerankMode::kMcqa);
  CHECK(parse_rerank_mode("cross-encoder") == RerankMode::kCrossEncoder);
  CHECK(to_string(RerankMode::kMcqa) == "mcqa");
  CHECK_THROWS_AS(parse_rerank_mode("mcq"), std::invalid_argument);
}

TEST_CASE("sort_candidates keys") {
  std::vector<ScoredCandidate> c = {{"b", 50.0, 1.0, RerankMode::kCrossEncoder},
                                    {"a", 40.0, 1.0, RerankMode::kCrossEncoder},
                                    {"c", 50.0, 1.0, RerankMode::kCrossEncoder},
                                    {"d", 0.0, 0.5, RerankMode::kCrossEncoder}};
  sort_candidates(c);
  CHECK(order(c) == std::vector<std::string>{"b", "c", "a", "d"});
}

TEST_CASE("property: cross-encoder and mcqa produce the same permutation") {
  CorpusGenerator gen(41);
  int instances = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto docs = gen.documents(2 + static_cast<int>(gen.pick(25)));
    const auto index = build_index(Collection(docs));
    for (int rep = 0; rep < 4; ++rep) {
      LinearScorer<double> s{Vector<double>(kFeatureDim), gen.normal()};
      const double scale = std::pow(10.0, gen.uniform(-6.0, 3.0));
      for (Eigen::Index i = 0; i < kFeatureDim; ++i) s.weights(i) = gen.normal() * scale;
      if (gen.pick(5) == 0) s.weights.setZero();
      std::vector<Document> cands;
      for (const auto& d : docs)
        if (gen.pick(3) != 0) cands.push_back(d);
      if (cands.empty()) cands.push_back(docs[0]);
      const Query q{"q", gen.text(1, 5)};

      const auto ce = rerank_cross_encoder(s, q, cands, index);
      const auto mc = rerank_mcqa(s, q, cands, index);
      CHECK(order(ce) == order(mc));
      double sum = 0.0;
      for (const auto& m : mc) sum += m.probability;
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      for (std::size_t i = 1; i < ce.size(); ++i) CHECK(ce[i - 1].logit >= ce[i].logit);
      ++instances;
    }
  }
  CHECK(instances >= 1000);
}

TEST_CASE("rerank_run keeps the first-stage candidates") {
  const auto c = fixture();
  const auto index = build_index(c);
  const QuerySet queries({{"q1", "green tea"}, {"q2", "coffee"}});
  const auto first = retrieve_run(index, queries, 10);
  const auto ce = rerank_run(RerankMode::kCrossEncoder, indicator(kUnigramOverlap), first, queries, c, index);
  const auto mc = rerank_run(RerankMode::kMcqa, indicator(kUnigramOverlap), first, queries, c, index);
  REQUIRE(ce.queries.size() == first.queries.size());
  for (const auto& [qid, list] : first.queries) {
    REQUIRE(ce.queries.at(qid).size() == list.size());
    validate_ranking(ce.queries.at(qid));
    validate_ranking(mc.queries.at(qid));
    for (std::size_t i = 0; i < list.size(); ++i)
      CHECK(ce.queries.at(qid)[i].doc_id == mc.queries.at(qid)[i].doc_id);
  }
}

TEST_CASE("model file round-trips exactly") {
  mcrank::testing::TempDir dir;
  CorpusGenerator gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    LinearScorer<double> s{Vector<double>(kFeatureDim), gen.normal() * 1e-7};
    for (Eigen::Index i = 0; i < kFeatureDim; ++i) s.weights(i) = gen.normal() * std::pow(10.0, gen.uniform(-300, 300));
    save_model(s, dir / "m.txt");
    const auto back = load_model(dir / "m.txt");
    CHECK(back.weights == s.weights);
    CHECK(back.bias == s.bias);
    CHECK(model_hash(back) == model_hash(s));
  }
  CHECK(model_hash(LinearScorer<double>::zeros()).size() == 8);
  CHECK(model_hash(LinearScorer<double>::zeros()) != model_hash(indicator(0)));

  CHECK_THROWS_AS(parse_model("3\n1 2\n0\n"), DataError);
  CHECK_THROWS_AS(parse_model("2\n1 x\n0\n"), DataError);
  CHECK_THROWS_AS(parse_model("2\n1 2\n"), DataError);
  const auto small = parse_model("2\n1 2\n0.5\n");
  CHECK(small.dim() == 2);
  CHECK(small.bias == 0.5);
}
