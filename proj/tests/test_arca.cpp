#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "lira/arca.hpp"
#include "lira/errors.hpp"
#include "lira/provider.hpp"
#include "test_util.hpp"

using lira::num::DenseVector;
namespace arca = lira::arca;
namespace num = lira::num;

TEST_CASE("CriticScores clamp onto [1, 10] and flag out-of-range input") {
  const auto ok = arca::CriticScores::clamp(5.0, 1.0, 10.0);
  CHECK(ok.semantic == 5.0);
  CHECK(!ok.clamped);
  const auto low = arca::CriticScores::clamp(0.0, 5.0, 5.0);
  CHECK(low.semantic == 1.0);
  CHECK(low.clamped);
  const auto high = arca::CriticScores::clamp(5.0, 12.0, 5.0);
  CHECK(high.emotional == 10.0);
  CHECK(high.clamped);
}

TEST_CASE("composite_reward hand values") {
  arca::RewardWeights w;  // 0.4 / 0.3 / 0.3 / 1.0
  arca::CriticScores top = arca::CriticScores::clamp(10, 10, 10);
  CHECK(arca::composite_reward(top, 1.0, w) == doctest::Approx(2.0).epsilon(1e-12));
  arca::CriticScores bottom = arca::CriticScores::clamp(1, 1, 1);
  CHECK(arca::composite_reward(bottom, 0.0, w) ==
        doctest::Approx(0.1).epsilon(1e-12));
  // With delta = 0 the reward ignores the similarity term.
  w.delta = 0.0;
  CHECK(arca::composite_reward(top, 0.3, w) ==
        doctest::Approx(arca::composite_reward(top, -0.9, w)).epsilon(1e-15));
}

TEST_CASE("anchor_loss hand values") {
  const auto zero = arca::anchor_loss({{1.0, 2.0}}, {{1.0, 2.0}});
  CHECK(zero.value == 0.0);
  const auto unit = arca::anchor_loss({{1.0, 0.0}}, {{0.0, 1.0}});
  CHECK(unit.value == doctest::Approx(2.0).epsilon(1e-12));
  const auto batch = arca::anchor_loss({{1.0, 0.0}, {0.0, 0.0}},
                                       {{0.0, 1.0}, {0.0, 0.0}});
  CHECK(batch.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("anchor_loss gradients, one-sided and symmetric") {
  testutil::Rng rng(79);
  for (int t = 0; t < 20; ++t) {
    const std::size_t b = 1 + rng.below(4);
    const std::size_t d = 2 + rng.below(5);
    std::vector<DenseVector> g, h;
    for (std::size_t i = 0; i < b; ++i) {
      g.push_back(testutil::random_vector(rng, d));
      h.push_back(testutil::random_vector(rng, d));
    }
    for (bool symmetric : {false, true}) {
      const auto out = arca::anchor_loss(g, h, symmetric);
      REQUIRE(out.grad_feature.size() == b);
      if (symmetric) REQUIRE(out.grad_translation.size() == b);
      for (std::size_t i = 0; i < b; ++i) {
        const auto fg = [&](const DenseVector& x) {
          auto g2 = g;
          g2[i] = x;
          return arca::anchor_loss(g2, h, symmetric).value;
        };
        CHECK(num::grad_check(fg, g[i], out.grad_feature[i]).max_rel_err < 1e-4);
        if (symmetric) {
          const auto fh = [&](const DenseVector& x) {
            auto h2 = h;
            h2[i] = x;
            return arca::anchor_loss(g, h2, symmetric).value;
          };
          CHECK(num::grad_check(fh, h[i], out.grad_translation[i]).max_rel_err <
                1e-4);
        }
      }
    }
  }
}

TEST_CASE("feature_prefix_pool averages the leading rows") {
  const DenseVector out =
      arca::feature_prefix_pool({{2.0}, {4.0}, {99.0}}, 2);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("encoder_align_loss hand values and gradients") {
  CHECK(arca::encoder_align_loss({1.0, 0.0}, {2.0, 0.0}).value ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(arca::encoder_align_loss({1.0, 0.0}, {0.0, 3.0}).value ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(arca::encoder_align_loss({1.0, 1.0}, {1.0, 0.0}).value ==
        doctest::Approx(-0.70710678).epsilon(1e-8));
  testutil::Rng rng(83);
  for (int t = 0; t < 20; ++t) {
    const DenseVector u = testutil::random_vector(rng, 5, 0.1, 1.0);
    const DenseVector v = testutil::random_vector(rng, 5, 0.1, 1.0);
    const auto out = arca::encoder_align_loss(u, v);
    const auto fu = [&](const DenseVector& x) {
      return arca::encoder_align_loss(x, v).value;
    };
    const auto fv = [&](const DenseVector& x) {
      return arca::encoder_align_loss(u, x).value;
    };
    CHECK(num::grad_check(fu, u, out.grad_u).max_rel_err < 1e-4);
    CHECK(num::grad_check(fv, v, out.grad_v).max_rel_err < 1e-4);
  }
}

TEST_CASE("TwoLayerMlp identity weights reduce to layer normalization") {
  const std::size_t d = 4;
  arca::TwoLayerMlp mlp(d, d, d, 7);
  DenseVector p(mlp.param_count(), 0.0);
  // Layout: [W1 (d x d), b1, W2 (d x d), b2]
  for (std::size_t i = 0; i < d; ++i) p[i * d + i] = 1.0;
  const std::size_t w2_off = d * d + d;
  for (std::size_t i = 0; i < d; ++i) p[w2_off + i * d + i] = 1.0;
  mlp.set_params(p);
  const DenseVector x = {1.0, 2.0, 3.0, 4.0};  // positive, so ReLU is inert
  const DenseVector y = mlp.forward(x);
  const double mean = 2.5;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(d);
  const double sigma = std::sqrt(var + 1e-5);
  for (std::size_t i = 0; i < d; ++i) {
    CHECK(y[i] == doctest::Approx((x[i] - mean) / sigma).epsilon(1e-9));
  }
}

TEST_CASE("TwoLayerMlp backward matches finite differences") {
  testutil::Rng rng(89);
  for (int t = 0; t < 10; ++t) {
    arca::TwoLayerMlp mlp(3, 6, 2, 100 + t);
    const DenseVector x = testutil::random_vector(rng, 3);
    const DenseVector v = testutil::random_vector(rng, 2);
    arca::TwoLayerMlp::Cache cache;
    mlp.forward(x, &cache);
    DenseVector grad_params(mlp.param_count(), 0.0);
    const DenseVector grad_in = mlp.backward(cache, v, grad_params);

    const auto f_params = [&](const DenseVector& p) {
      arca::TwoLayerMlp m2 = mlp;
      m2.set_params(p);
      const DenseVector y = m2.forward(x);
      return num::dot(y, v);
    };
    CHECK(num::grad_check(f_params, mlp.params(), grad_params).max_rel_err < 1e-4);

    const auto f_input = [&](const DenseVector& xi) {
      return num::dot(mlp.forward(xi), v);
    };
    CHECK(num::grad_check(f_input, x, grad_in).max_rel_err < 1e-4);
  }
}

TEST_CASE("adaptor pipeline gradients through pooling and flattening") {
  testutil::Rng rng(97);
  const std::size_t token_dim = 3, pool = 2, out_dim = 4;
  arca::TwoLayerMlp mlp(pool * token_dim, 8, out_dim, 55);
  for (std::size_t seq_len : {2u, 5u}) {
    std::vector<DenseVector> seq;
    for (std::size_t i = 0; i < seq_len; ++i) {
      seq.push_back(testutil::random_vector(rng, token_dim));
    }
    arca::AdaptorCache cache;
    const DenseVector y = arca::adaptor_forward(mlp, seq, pool, &cache);
    REQUIRE(y.size() == out_dim);
    const DenseVector v = testutil::random_vector(rng, out_dim);
    DenseVector grad_params(mlp.param_count(), 0.0);
    const auto grad_rows =
        arca::adaptor_backward(mlp, cache, v, grad_params);
    REQUIRE(grad_rows.size() == seq_len);

    const auto f_params = [&](const DenseVector& p) {
      arca::TwoLayerMlp m2 = mlp;
      m2.set_params(p);
      return num::dot(arca::adaptor_forward(m2, seq, pool), v);
    };
    CHECK(num::grad_check(f_params, mlp.params(), grad_params).max_rel_err < 1e-4);

    for (std::size_t i = 0; i < seq_len; ++i) {
      const auto f_row = [&](const DenseVector& r) {
        auto s2 = seq;
        s2[i] = r;
        return num::dot(arca::adaptor_forward(mlp, s2, pool), v);
      };
      CHECK(num::grad_check(f_row, seq[i], grad_rows[i]).max_rel_err < 1e-4);
    }
  }
}

TEST_CASE("actor_policy is a softmax over its own logits") {
  testutil::Rng rng(101);
  arca::TwoLayerMlp actor(4, 16, 1, 11);
  std::vector<arca::PolicyFeatures> feats;
  for (int i = 0; i < 5; ++i) {
    feats.push_back({rng.range(1, 10), rng.range(1, 10), rng.range(1, 10),
                     rng.range(-1, 1)});
  }
  const auto pol = arca::actor_policy(actor, feats);
  REQUIRE(pol.probs.size() == 5);
  double sum = 0.0, mx = pol.logits[0];
  for (double l : pol.logits) mx = std::max(mx, l);
  for (double l : pol.logits) sum += std::exp(l - mx);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(pol.probs[k] ==
          doctest::Approx(std::exp(pol.logits[k] - mx) / sum).epsilon(1e-12));
    CHECK(pol.probs[k] > 0.0);
  }
}

TEST_CASE("actor_policy is uniform over identical candidates") {
  arca::TwoLayerMlp actor(4, 16, 1, 19);
  const arca::PolicyFeatures f = {5.0, 6.0, 7.0, 0.4};
  const auto pol = arca::actor_policy(actor, {f, f, f, f});
  for (double p : pol.probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  const auto one = arca::actor_policy(actor, {f});
  REQUIRE(one.probs.size() == 1);
  CHECK(one.probs[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("reinforce_loss hand values and logit gradient") {
  const auto half = arca::reinforce_loss({0.5, 0.5}, 0, 2.0);
  CHECK(half.value == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-10));
  CHECK(half.value == doctest::Approx(1.38629).epsilon(1e-5));
  const auto sure = arca::reinforce_loss({1.0}, 0, 3.0);
  CHECK(sure.value == doctest::Approx(0.0).epsilon(1e-12));
  const auto nil = arca::reinforce_loss({0.3, 0.7}, 1, 0.0);
  CHECK(nil.value == 0.0);
  for (double g : nil.grad_logits) CHECK(g == doctest::Approx(0.0).epsilon(1e-15));

  // d/d logit_k = (R - b)(pi_k - [k == a])
  const DenseVector probs = {0.2, 0.5, 0.3};
  const auto out = arca::reinforce_loss(probs, 1, 1.5, 0.5);
  CHECK(out.grad_logits[0] == doctest::Approx(1.0 * 0.2).epsilon(1e-12));
  CHECK(out.grad_logits[1] == doctest::Approx(1.0 * (0.5 - 1.0)).epsilon(1e-12));
  CHECK(out.grad_logits[2] == doctest::Approx(1.0 * 0.3).epsilon(1e-12));
}

TEST_CASE("reinforce gradient flows correctly through the actor parameters") {
  testutil::Rng rng(103);
  arca::TwoLayerMlp actor(4, 16, 1, 23);
  std::vector<arca::PolicyFeatures> feats;
  for (int i = 0; i < 4; ++i) {
    feats.push_back({rng.range(1, 10), rng.range(1, 10), rng.range(1, 10),
                     rng.range(-1, 1)});
  }
  const std::size_t action = 2;
  const double reward = 1.7;
  const auto value_at = [&](const DenseVector& p) {
    arca::TwoLayerMlp a2 = actor;
    a2.set_params(p);
    const auto pol = arca::actor_policy(a2, feats);
    return arca::reinforce_loss(pol.probs, action, reward).value;
  };
  const auto pol = arca::actor_policy(actor, feats);
  const auto rl = arca::reinforce_loss(pol.probs, action, reward);
  DenseVector grad_params(actor.param_count(), 0.0);
  for (std::size_t k = 0; k < feats.size(); ++k) {
    DenseVector fin(feats[k].begin(), feats[k].end());
    arca::TwoLayerMlp::Cache cache;
    actor.forward(fin, &cache);
    actor.backward(cache, {rl.grad_logits[k]}, grad_params);
  }
  CHECK(num::grad_check(value_at, actor.params(), grad_params).max_rel_err < 1e-4);
}

TEST_CASE("arca_total_loss is the weighted scalar combination") {
  arca::LossResult rl, enc, anchor;
  rl.value = 1.0;
  enc.value = -0.5;
  anchor.value = 0.25;
  arca::ArcaConfig cfg;  // eta = lambda = 1
  CHECK(arca::arca_total_loss(rl, enc, anchor, cfg).value ==
        doctest::Approx(0.75).epsilon(1e-12));
  cfg.eta = 2.0;
  cfg.lambda_anchor = 4.0;
  CHECK(arca::arca_total_loss(rl, enc, anchor, cfg).value ==
        doctest::Approx(1.0 - 1.0 + 1.0).epsilon(1e-12));
}

TEST_CASE("EmbeddingSimilarityCritic is deterministic and favors the source") {
  lira::data::HashProjectionProvider provider(16, 9);
  arca::EmbeddingSimilarityCritic critic(&provider);
  const std::string source = "alpha beta gamma";
  const std::vector<std::string> cands = {"alpha beta gamma", "delta epsilon"};
  const auto s1 = critic.score("q1", source, cands);
  const auto s2 = critic.score("q1", source, cands);
  REQUIRE(s1.size() == 2);
  CHECK(s1[0].semantic == s2[0].semantic);
  CHECK(s1[1].pragmatic == s2[1].pragmatic);
  CHECK(s1[0].semantic == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(s1[0].semantic > s1[1].semantic);
  for (const auto& s : s1) {
    CHECK(s.semantic >= 1.0);
    CHECK(s.semantic <= 10.0);
  }
}

TEST_CASE("FileCritic reads fixtures and rejects gaps and garbage") {
  const std::string path = "file_critic_fixture.txt";
  {
    std::ofstream f(path);
    f << "# critic fixture\n";
    f << "q1 0 9.5 8.0 7.25\n";
    f << "q1 1 2.0 3.0 4.0\n";
  }
  arca::FileCritic critic(path);
  const auto s = critic.score("q1", "src", {"cand a", "cand b"});
  REQUIRE(s.size() == 2);
  CHECK(s[0].semantic == 9.5);
  CHECK(s[0].emotional == 8.0);
  CHECK(s[0].pragmatic == 7.25);
  CHECK(s[1].semantic == 2.0);
  CHECK_THROWS_AS(critic.score("q2", "src", {"cand"}), lira::DataError);

  {
    std::ofstream f(path);
    f << "q1 zero 1 2 3\n";
  }
  CHECK_THROWS_AS(arca::FileCritic{path}, lira::DataError);
  std::remove(path.c_str());
}
