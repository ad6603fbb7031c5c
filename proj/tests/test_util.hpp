#ifndef LIRA_TESTS_TEST_UTIL_HPP_
#define LIRA_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cstdint>
#include <vector>

#include "lira/diffrank.hpp"
#include "lira/numcore.hpp"

namespace testutil {

struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double unit() { return static_cast<double>(next() >> 11) / 9007199254740992.0; }
  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
};

inline lira::num::DenseVector random_vector(Rng& rng, std::size_t n,
                                            double lo = -1.0, double hi = 1.0) {
  lira::num::DenseVector v(n);
  for (auto& x : v) x = rng.range(lo, hi);
  return v;
}

// Scores with pairwise gaps of at least `min_gap`: a separated grid,
// shuffled, with jitter strictly smaller than half the spacing.
inline lira::num::DenseVector separated_scores(Rng& rng, std::size_t n,
                                               double min_gap = 0.02) {
  const double spacing = 2.0 * min_gap;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  lira::num::DenseVector s(n);
  const double base = rng.range(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = base + spacing * static_cast<double>(order[i]) +
           rng.range(-0.45, 0.45) * min_gap;
  }
  return s;
}

// Single positive at a random index, tie-free scores.
inline lira::rank::CandidateList random_candidates(Rng& rng, std::size_t n,
                                                   double min_gap = 0.02) {
  lira::rank::CandidateList cand;
  cand.query_id = "q";
  cand.scores = separated_scores(rng, n, min_gap);
  cand.labels.assign(n, 0);
  cand.labels[rng.below(n)] = 1;
  return cand;
}

}  // namespace testutil

#endif  // LIRA_TESTS_TEST_UTIL_HPP_
