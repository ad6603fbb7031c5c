#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>
#include <string>
#include <vector>

#include "lira/diffrank.hpp"
#include "lira/numcore.hpp"
#include "lira/queues.hpp"
#include "test_util.hpp"

using lira::num::DenseVector;
namespace queue = lira::queue;

TEST_CASE("CorrQueue evicts oldest first at capacity") {
  queue::CorrQueue q(2);
  const std::size_t evicted = q.push({{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}});
  CHECK(evicted == 1);
  REQUIRE(q.size() == 2);
  CHECK(q.entries()[0].first == 2.0);
  CHECK(q.entries()[1].first == 3.0);
  q.push({{4.0, 4.0}});
  CHECK(q.entries()[0].first == 3.0);
  CHECK(q.entries()[1].first == 4.0);
}

TEST_CASE("CorrQueue snapshot is oldest-first values") {
  queue::CorrQueue q(8);
  q.push({{0.1, 1.0}, {0.2, 2.0}});
  const auto [preds, golds] = q.snapshot();
  REQUIRE(preds.size() == 2);
  CHECK(preds[0] == 0.1);
  CHECK(preds[1] == 0.2);
  CHECK(golds[0] == 1.0);
  CHECK(golds[1] == 2.0);
}

TEST_CASE("CorrQueue matches an unbounded FIFO reference") {
  testutil::Rng rng(71);
  for (std::size_t cap : {1u, 3u, 7u, 32u}) {
    queue::CorrQueue q(cap);
    std::deque<std::pair<double, double>> ref;
    for (int round = 0; round < 50; ++round) {
      std::vector<std::pair<double, double>> batch;
      const std::size_t n = rng.below(5);
      for (std::size_t i = 0; i < n; ++i) {
        batch.push_back({rng.range(-1, 1), rng.range(-1, 1)});
      }
      q.push(batch);
      for (const auto& p : batch) ref.push_back(p);
      while (ref.size() > cap) ref.pop_front();
      REQUIRE(q.size() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(q.entries()[i].first == ref[i].first);
        CHECK(q.entries()[i].second == ref[i].second);
      }
    }
  }
}

TEST_CASE("snapshot_concat puts history before the live batch") {
  queue::CorrQueue q(8);
  q.push({{0.5, 5.0}, {0.6, 6.0}});
  const auto cat = queue::snapshot_concat(q, {0.9, 0.8}, {9.0, 8.0});
  CHECK(cat.history_len == 2);
  REQUIRE(cat.pred.size() == 4);
  CHECK(cat.pred[0] == 0.5);
  CHECK(cat.pred[1] == 0.6);
  CHECK(cat.pred[2] == 0.9);
  CHECK(cat.pred[3] == 0.8);
  CHECK(cat.gold[0] == 5.0);
  CHECK(cat.gold[3] == 8.0);
}

TEST_CASE("stored history stays bit-identical across a loss and update step") {
  queue::CorrQueue q(16);
  q.push({{0.11, 0.4}, {-0.37, 0.9}, {0.52, -0.2}, {0.08, 0.7}});
  std::vector<std::pair<double, double>> before(q.entries().begin(),
                                                q.entries().end());
  const auto [hp, hg] = q.snapshot();
  DenseVector pred = {0.3, -0.4, 0.25, 0.6};
  const std::vector<double> gold = {0.2, -0.3, 0.5, 0.55};
  lira::rank::CorrLossConfig cfg;
  const auto out = lira::rank::corr_loss(pred, gold, hp, hg, cfg);
  REQUIRE(!out.skipped);
  // Simulated parameter update with the live gradient.
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred[i] -= 0.1 * out.result.grad_scores[i];
  }
  REQUIRE(q.size() == before.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(q.entries()[i].first == before[i].first);
    CHECK(q.entries()[i].second == before[i].second);
  }
}

namespace {

queue::DocEntry doc(const std::string& id, const std::string& lang,
                    DenseVector e) {
  return {id, lang, lira::num::l2_normalize(e)};
}

}  // namespace

TEST_CASE("DocQueue eviction order and re-push recency refresh") {
  queue::DocQueue q(2);
  q.push({doc("a", "vi", {1, 0}), doc("b", "vi", {0, 1})});
  CHECK(q.size() == 2);
  // Re-pushing a live id refreshes it instead of duplicating.
  q.push({doc("a", "vi", {0.6, 0.8})});
  REQUIRE(q.size() == 2);
  CHECK(q.entries()[0].doc_id == "b");
  CHECK(q.entries()[1].doc_id == "a");
  CHECK(q.entries()[1].embedding[0] == doctest::Approx(0.6).epsilon(1e-12));
  // A new id now evicts the oldest ("b").
  q.push({doc("c", "th", {1, 0})});
  REQUIRE(q.size() == 2);
  CHECK(q.entries()[0].doc_id == "a");
  CHECK(q.entries()[1].doc_id == "c");
}

TEST_CASE("mine_in_language filters, excludes the positive and sorts hard-first") {
  queue::DocQueue q(16);
  q.push({doc("pos", "vi", {1.0, 0.0}),
          doc("n1", "vi", {0.9, 0.1}),
          doc("n2", "vi", {0.0, 1.0}),
          doc("n3", "vi", {0.5, 0.5}),
          doc("other", "th", {1.0, 0.0})});
  const auto mined = q.mine_in_language({1.0, 0.0}, "vi", "pos", 2);
  CHECK(!mined.fallback_in_batch);
  REQUIRE(mined.negatives.size() == 2);
  CHECK(mined.negatives[0].first == "n1");
  CHECK(mined.negatives[1].first == "n3");
  CHECK(mined.negatives[0].second >= mined.negatives[1].second);
  for (const auto& [id, score] : mined.negatives) {
    CHECK(id != "pos");
    CHECK(id != "other");
  }
}

TEST_CASE("mine_in_language reports fallback when the language is absent") {
  queue::DocQueue q(8);
  q.push({doc("x", "th", {1.0, 0.0})});
  const auto mined = q.mine_in_language({1.0, 0.0}, "vi", "p", 4);
  CHECK(mined.fallback_in_batch);
  CHECK(mined.negatives.empty());
}

TEST_CASE("DocQueue never exceeds capacity under random batches") {
  testutil::Rng rng(73);
  queue::DocQueue q(13);
  int id = 0;
  for (int round = 0; round < 40; ++round) {
    std::vector<queue::DocEntry> batch;
    const std::size_t n = rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      batch.push_back(doc("d" + std::to_string(id++ % 20),
                          rng.below(2) ? "vi" : "th",
                          testutil::random_vector(rng, 4, 0.1, 1.0)));
    }
    q.push(batch);
    CHECK(q.size() <= 13);
    // Stored embeddings stay unit-norm.
    for (const auto& e : q.entries()) {
      CHECK(lira::num::norm2(e.embedding) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}
