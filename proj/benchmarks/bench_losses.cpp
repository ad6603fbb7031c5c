#include <benchmark/benchmark.h>

#include <cstdint>

#include "lira/diffrank.hpp"
#include "lira/queues.hpp"

namespace {

using lira::num::DenseVector;

std::uint64_t splitmix(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double unit(std::uint64_t& s) {
  return static_cast<double>(splitmix(s) >> 11) / 9007199254740992.0;
}

lira::rank::CandidateList make_candidates(std::size_t n, std::uint64_t seed) {
  lira::rank::CandidateList cand;
  cand.query_id = "q";
  for (std::size_t i = 0; i < n; ++i) {
    cand.scores.push_back(unit(seed) * 2.0 - 1.0);
    cand.labels.push_back(i == 0 ? 1 : 0);
  }
  return cand;
}

void BM_soft_rank(benchmark::State& state) {
  std::uint64_t s = 7;
  DenseVector scores(static_cast<std::size_t>(state.range(0)));
  for (auto& x : scores) x = unit(s);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        lira::rank::soft_rank(scores, 0.1, lira::rank::RankDirection::Descending));
  }
}
BENCHMARK(BM_soft_rank)->Arg(16)->Arg(64)->Arg(256);

void BM_soft_ndcg_loss(benchmark::State& state) {
  const auto cand = make_candidates(static_cast<std::size_t>(state.range(0)), 11);
  const lira::rank::RetrievalLossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lira::rank::soft_ndcg_loss(cand, cfg));
  }
}
BENCHMARK(BM_soft_ndcg_loss)->Arg(8)->Arg(32)->Arg(128);

void BM_retrieval_loss(benchmark::State& state) {
  const auto cand = make_candidates(static_cast<std::size_t>(state.range(0)), 13);
  const lira::rank::RetrievalLossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lira::rank::retrieval_loss(cand, cfg));
  }
}
BENCHMARK(BM_retrieval_loss)->Arg(8)->Arg(32)->Arg(128);

void BM_corr_loss(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::uint64_t s = 17;
  DenseVector pred(8);
  std::vector<double> gold(8), hp(n), hg(n);
  for (auto& x : pred) x = unit(s);
  for (auto& x : gold) x = unit(s);
  for (auto& x : hp) x = unit(s);
  for (auto& x : hg) x = unit(s);
  const lira::rank::CorrLossConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lira::rank::corr_loss(pred, gold, hp, hg, cfg));
  }
}
BENCHMARK(BM_corr_loss)->Arg(32)->Arg(128)->Arg(512);

void BM_mine_in_language(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  std::uint64_t s = 23;
  lira::queue::DocQueue q(n);
  std::vector<lira::queue::DocEntry> batch;
  for (std::size_t i = 0; i < n; ++i) {
    DenseVector e(32);
    for (auto& x : e) x = unit(s) * 2.0 - 1.0;
    batch.push_back({"d" + std::to_string(i), i % 2 ? "vi" : "th", e});
  }
  q.push(batch);
  DenseVector query(32);
  for (auto& x : query) x = unit(s) * 2.0 - 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(q.mine_in_language(query, "vi", "d1", 8));
  }
}
BENCHMARK(BM_mine_in_language)->Arg(256)->Arg(1024)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
