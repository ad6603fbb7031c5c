#include "lira/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lira/errors.hpp"
#include "lira/optim.hpp"
#include "lira/provider.hpp"

namespace lira::run {

namespace {

using nlohmann::json;
using num::DenseVector;

struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed ^ 0x9e3779b97f4a7c15ull) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) / 9007199254740992.0; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// cos(u, v) with gradients wrt both arguments; zero-norm inputs yield
// zero similarity and zero gradient rather than a NaN mid-training.
struct CosineGrads {
  double value = 0.0;
  DenseVector du, dv;
};
CosineGrads cosine_with_grads(const DenseVector& u, const DenseVector& v) {
  CosineGrads out;
  out.du.assign(u.size(), 0.0);
  out.dv.assign(v.size(), 0.0);
  const double nu = num::norm2(u), nv = num::norm2(v);
  if (nu < 1e-12 || nv < 1e-12) return out;
  const double c = num::dot(u, v) / (nu * nv);
  out.value = std::clamp(c, -1.0, 1.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    out.du[i] = v[i] / (nu * nv) - c * u[i] / (nu * nu);
    out.dv[i] = u[i] / (nu * nv) - c * v[i] / (nv * nv);
  }
  return out;
}

data::Corpus load_or_generate(const RunConfig& cfg) {
  if (!cfg.corpus_dir.empty()) return data::load_corpus(cfg.corpus_dir);
  data::SyntheticConfig synth = cfg.synth;
  synth.seed ^= cfg.seed * 0x9e3779b97f4a7c15ull;
  return data::generate_synthetic(synth);
}

std::vector<std::string> corpus_vocab(const data::Corpus& corpus) {
  std::set<std::string> vocab;
  for (const auto& q : corpus.queries) {
    for (auto& t : data::tokenize(q.text)) vocab.insert(std::move(t));
  }
  for (const auto& it : corpus.items) {
    for (auto& t : data::tokenize(it.title)) vocab.insert(std::move(t));
  }
  for (const auto& rp : corpus.ranking_pairs) {
    for (auto& t : data::tokenize(rp.text_a)) vocab.insert(std::move(t));
    for (auto& t : data::tokenize(rp.text_b)) vocab.insert(std::move(t));
  }
  return {vocab.begin(), vocab.end()};
}

std::map<std::string, std::string> base_echo(const RunConfig& cfg) {
  std::map<std::string, std::string> e;
  e["task"] = cfg.task;
  e["seed"] = std::to_string(cfg.seed);
  e["corpus_dir"] = cfg.corpus_dir;
  e["steps"] = std::to_string(cfg.steps);
  e["batch"] = std::to_string(cfg.batch);
  e["lr"] = fmt(cfg.lr);
  e["grad_clip"] = fmt(cfg.grad_clip);
  e["use_ema"] = cfg.use_ema ? "true" : "false";
  e["ema_decay"] = fmt(cfg.ema_decay);
  e["token_dim"] = std::to_string(cfg.token_dim);
  e["embed_dim"] = std::to_string(cfg.embed_dim);
  e["doc_queue_capacity"] = std::to_string(cfg.doc_queue_capacity);
  e["corr_queue_capacity"] = std::to_string(cfg.corr_queue_capacity);
  e["synth.languages"] = std::to_string(cfg.synth.languages.size());
  e["synth.queries_per_language"] = std::to_string(cfg.synth.queries_per_language);
  e["synth.seed"] = std::to_string(cfg.synth.seed);
  e["arca_candidates"] = std::to_string(cfg.arca_candidates);
  return e;
}

// Applies EMA weights for evaluation when enabled, restoring raw weights
// after the callback.
template <typename Fn>
double with_eval_params(data::TrainableEncoder& enc, const optim::Ema& ema,
                        bool use_ema, Fn&& fn) {
  if (!use_ema || !ema.initialized()) return fn();
  const DenseVector raw = enc.params();
  enc.set_params(ema.value());
  const double out = fn();
  enc.set_params(raw);
  return out;
}

}  // namespace

double eval_retrieval_ndcg(const data::Corpus& test,
                           const data::EmbeddingProvider& provider,
                           std::size_t k) {
  if (test.queries.empty() || test.items.empty()) {
    throw DataError("evaluation: empty test split");
  }
  std::map<std::string, std::vector<std::size_t>> pool_by_lang;
  for (std::size_t i = 0; i < test.items.size(); ++i) {
    pool_by_lang[test.items[i].lang].push_back(i);
  }
  std::vector<DenseVector> item_emb(test.items.size());
  for (std::size_t i = 0; i < test.items.size(); ++i) {
    item_emb[i] = provider.embed(test.items[i].title);
  }
  std::set<std::pair<std::string, std::string>> relevant;
  for (const auto& p : test.pairs) relevant.emplace(p.qid, p.docid);

  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& q : test.queries) {
    const auto pool_it = pool_by_lang.find(q.lang);
    if (pool_it == pool_by_lang.end()) continue;
    const DenseVector qe = provider.embed(q.text);
    std::vector<int> labels;
    DenseVector scores;
    for (std::size_t i : pool_it->second) {
      labels.push_back(relevant.count({q.qid, test.items[i].docid}) ? 1 : 0);
      scores.push_back(cosine_with_grads(qe, item_emb[i]).value);
    }
    bool no_pos = false;
    const double v = rank::exact_ndcg_at_k(labels, scores, k, &no_pos);
    if (no_pos) continue;
    sum += v;
    ++used;
  }
  if (used == 0) throw DataError("evaluation: no query has a positive in its pool");
  return sum / static_cast<double>(used);
}

RankingEval eval_ranking_metrics(const data::Corpus& test,
                                 const data::EmbeddingProvider& provider) {
  if (test.ranking_pairs.empty()) throw DataError("evaluation: no ranking pairs");
  std::vector<double> pred, gold;
  for (const auto& rp : test.ranking_pairs) {
    pred.push_back(
        cosine_with_grads(provider.embed(rp.text_a), provider.embed(rp.text_b)).value);
    gold.push_back(rp.gold);
  }
  RankingEval out;
  out.pearson = rank::pearson(pred, gold);
  const DenseVector rp = rank::average_tie_ranks(pred);
  const DenseVector rg = rank::average_tie_ranks(gold);
  out.spearman = rank::pearson(rp, rg);
  return out;
}

RunReport train_retrieval(const RunConfig& cfg) {
  Timer timer;
  RunReport report;
  report.task = "train-retrieval";
  report.config_echo = base_echo(cfg);

  const data::Corpus corpus = load_or_generate(cfg);
  const data::SplitResult split = data::split_train_test(corpus, cfg.seed);
  if (split.train.pairs.empty()) throw DataError("train-retrieval: empty train split");

  data::TrainableEncoder enc(corpus_vocab(corpus), cfg.token_dim, cfg.embed_dim,
                             cfg.seed);
  optim::Adam adam(enc.param_count(), cfg.lr);
  optim::Ema ema(enc.param_count(), cfg.ema_decay);
  queue::DocQueue docs(std::max<std::size_t>(cfg.doc_queue_capacity, 1));
  const bool queue_enabled = cfg.doc_queue_capacity > 0;
  queue::CorrQueue unused_corr(1);
  if (!cfg.state_path.empty() && std::filesystem::exists(cfg.state_path)) {
    load_run_state(unused_corr, docs, cfg.state_path);
  }

  std::map<std::string, const data::ItemRecord*> item_by_id;
  for (const auto& it : split.train.items) item_by_id[it.docid] = &it;
  std::map<std::string, std::vector<const data::ItemRecord*>> items_by_lang;
  for (const auto& it : split.train.items) items_by_lang[it.lang].push_back(&it);
  std::map<std::string, const data::QueryRecord*> query_by_id;
  for (const auto& q : split.train.queries) query_by_id[q.qid] = &q;

  report.metrics["ndcg_initial"] =
      eval_retrieval_ndcg(split.test, enc, cfg.eval_k);

  Rng rng(cfg.seed ^ 0x5e771ull);
  std::vector<std::size_t> order(split.train.pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;

  std::size_t clip_events = 0, evictions = 0, fallbacks = 0;
  double max_post_clip = 0.0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    DenseVector grad(enc.param_count(), 0.0);
    double loss_acc = 0.0;
    for (std::size_t b = 0; b < std::max<std::size_t>(cfg.batch, 1); ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      const data::PairRecord& pair = split.train.pairs[order[cursor++]];
      const data::QueryRecord& q = *query_by_id.at(pair.qid);
      const data::ItemRecord& pos = *item_by_id.at(pair.docid);

      const auto& lang_pool = items_by_lang.at(pos.lang);
      std::vector<const data::ItemRecord*> doc_batch = {&pos};
      for (std::size_t j = 0; j < cfg.doc_batch_extra && lang_pool.size() > 1; ++j) {
        const data::ItemRecord* pick = lang_pool[rng.below(lang_pool.size())];
        if (pick->docid != pos.docid) doc_batch.push_back(pick);
      }
      const DenseVector pos_emb = enc.embed(pos.title);
      std::vector<DenseVector> doc_embs = {pos_emb};
      for (std::size_t j = 1; j < doc_batch.size(); ++j) {
        doc_embs.push_back(enc.embed(doc_batch[j]->title));
      }
      if (queue_enabled) {
        std::vector<queue::DocEntry> entries;
        for (std::size_t j = 0; j < doc_batch.size(); ++j) {
          entries.push_back({doc_batch[j]->docid, doc_batch[j]->lang, doc_embs[j]});
        }
        evictions += docs.push(entries);
      }
      const DenseVector q_emb = enc.embed(q.text);

      // Candidate list: fresh positive first, then mined (or in-batch) negatives.
      rank::CandidateList cand;
      cand.query_id = q.qid;
      std::vector<DenseVector> neg_embs;
      if (queue_enabled) {
        const queue::MinedCandidates mined = docs.mine_in_language(
            q_emb, pos.lang, pos.docid, cfg.retrieval.top_m);
        for (const auto& [id, score] : mined.negatives) {
          for (const auto& e : docs.entries()) {
            if (e.doc_id == id) {
              neg_embs.push_back(e.embedding);
              break;
            }
          }
        }
      }
      if (neg_embs.empty()) {
        ++fallbacks;
        for (std::size_t j = 1; j < doc_embs.size(); ++j) neg_embs.push_back(doc_embs[j]);
      }
      if (neg_embs.empty()) continue;  // single-item language, nothing to rank

      std::vector<CosineGrads> cg;
      cg.push_back(cosine_with_grads(q_emb, pos_emb));
      cand.scores.push_back(cg.back().value);
      cand.labels.push_back(1);
      for (const auto& ne : neg_embs) {
        cg.push_back(cosine_with_grads(q_emb, ne));
        cand.scores.push_back(cg.back().value);
        cand.labels.push_back(0);
      }
      const rank::LossResult res = rank::retrieval_loss(cand, cfg.retrieval);
      loss_acc += res.value;

      DenseVector grad_q(q_emb.size(), 0.0);
      for (std::size_t i = 0; i < cand.scores.size(); ++i) {
        const double g = res.grad_scores[i];
        for (std::size_t d = 0; d < grad_q.size(); ++d) grad_q[d] += g * cg[i].du[d];
      }
      enc.accumulate_grad(q.text, grad_q, grad);
      DenseVector grad_pos(pos_emb.size(), 0.0);
      for (std::size_t d = 0; d < grad_pos.size(); ++d) {
        grad_pos[d] = res.grad_scores[0] * cg[0].dv[d];
      }
      enc.accumulate_grad(pos.title, grad_pos, grad);
    }
    const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(cfg.batch, 1));
    for (double& g : grad) g *= inv;
    num::require_finite(grad, "train-retrieval gradient");
    clip_events += optim::clip_global_norm(grad, cfg.grad_clip) ? 1 : 0;
    max_post_clip = std::max(max_post_clip, num::norm2(grad));
    adam.step(enc.params(), grad);
    num::require_finite(enc.params(), "train-retrieval parameters");
    ema.update(enc.params());
    report.loss_curve.push_back(loss_acc * inv);
  }

  report.metrics["ndcg_final"] = with_eval_params(enc, ema, cfg.use_ema, [&] {
    return eval_retrieval_ndcg(split.test, enc, cfg.eval_k);
  });
  report.metrics["ndcg_gain"] =
      report.metrics["ndcg_final"] - report.metrics["ndcg_initial"];
  report.diagnostics["clip_events"] = static_cast<double>(clip_events);
  report.diagnostics["evictions"] = static_cast<double>(evictions);
  report.diagnostics["mining_fallbacks"] = static_cast<double>(fallbacks);
  report.diagnostics["max_post_clip_grad_norm"] = max_post_clip;
  if (!cfg.state_path.empty()) save_run_state(unused_corr, docs, cfg.state_path);
  report.wall_seconds = timer.seconds();
  return report;
}

RunReport train_ranking(const RunConfig& cfg) {
  Timer timer;
  RunReport report;
  report.task = "train-ranking";
  report.config_echo = base_echo(cfg);

  const data::Corpus corpus = load_or_generate(cfg);
  const data::SplitResult split = data::split_train_test(corpus, cfg.seed);
  if (split.train.ranking_pairs.empty()) {
    throw DataError("train-ranking: no graded pairs in the train split");
  }
  {
    const double g0 = split.train.ranking_pairs.front().gold;
    bool varies = false;
    for (const auto& rp : split.train.ranking_pairs) {
      if (rp.gold != g0) {
        varies = true;
        break;
      }
    }
    if (!varies) throw DataError("train-ranking: constant gold labels");
  }

  data::TrainableEncoder enc(corpus_vocab(corpus), cfg.token_dim, cfg.embed_dim,
                             cfg.seed);
  optim::Adam adam(enc.param_count(), cfg.lr);
  optim::Ema ema(enc.param_count(), cfg.ema_decay);
  queue::CorrQueue corr(std::max<std::size_t>(cfg.corr_queue_capacity, 1));
  queue::DocQueue unused_docs(1);
  if (!cfg.state_path.empty() && std::filesystem::exists(cfg.state_path)) {
    load_run_state(corr, unused_docs, cfg.state_path);
  }

  report.metrics["pearson_initial"] =
      eval_ranking_metrics(split.test, enc).pearson;

  Rng rng(cfg.seed ^ 0xc0221ull);
  std::vector<std::size_t> order(split.train.ranking_pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;

  std::size_t skips = 0, clip_events = 0, evictions = 0;
  double max_post_clip = 0.0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const std::size_t batch = std::max<std::size_t>(cfg.batch, 1);
    std::vector<const data::RankingPair*> live;
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      live.push_back(&split.train.ranking_pairs[order[cursor++]]);
    }
    DenseVector preds;
    std::vector<double> golds;
    std::vector<CosineGrads> cg;
    for (const auto* rp : live) {
      cg.push_back(cosine_with_grads(enc.embed(rp->text_a), enc.embed(rp->text_b)));
      preds.push_back(cg.back().value);
      golds.push_back(rp->gold);
    }
    const auto [hist_pred, hist_gold] = corr.snapshot();
    const rank::CorrLossOutcome out =
        rank::corr_loss(preds, golds, hist_pred, hist_gold, cfg.corr);
    if (out.skipped) {
      ++skips;
    } else {
      DenseVector grad(enc.param_count(), 0.0);
      for (std::size_t b = 0; b < live.size(); ++b) {
        const double g = out.result.grad_scores[b];
        DenseVector ga(cg[b].du.size()), gb(cg[b].dv.size());
        for (std::size_t d = 0; d < ga.size(); ++d) ga[d] = g * cg[b].du[d];
        for (std::size_t d = 0; d < gb.size(); ++d) gb[d] = g * cg[b].dv[d];
        enc.accumulate_grad(live[b]->text_a, ga, grad);
        enc.accumulate_grad(live[b]->text_b, gb, grad);
      }
      num::require_finite(grad, "train-ranking gradient");
      clip_events += optim::clip_global_norm(grad, cfg.grad_clip) ? 1 : 0;
      max_post_clip = std::max(max_post_clip, num::norm2(grad));
      adam.step(enc.params(), grad);
      num::require_finite(enc.params(), "train-ranking parameters");
      ema.update(enc.params());
      report.loss_curve.push_back(out.result.value);
    }
    std::vector<std::pair<double, double>> enqueue;
    for (std::size_t b = 0; b < preds.size(); ++b) {
      enqueue.emplace_back(preds[b], golds[b]);
    }
    evictions += corr.push(enqueue);
  }

  const RankingEval final_eval = [&] {
    RankingEval ev;
    with_eval_params(enc, ema, cfg.use_ema, [&] {
      ev = eval_ranking_metrics(split.test, enc);
      return 0.0;
    });
    return ev;
  }();
  report.metrics["pearson_final"] = final_eval.pearson;
  report.metrics["spearman_final"] = final_eval.spearman;
  report.metrics["pearson_gain"] =
      report.metrics["pearson_final"] - report.metrics["pearson_initial"];
  report.diagnostics["warmup_skips"] = static_cast<double>(skips);
  report.diagnostics["clip_events"] = static_cast<double>(clip_events);
  report.diagnostics["evictions"] = static_cast<double>(evictions);
  report.diagnostics["max_post_clip_grad_norm"] = max_post_clip;
  if (!cfg.state_path.empty()) save_run_state(corr, unused_docs, cfg.state_path);
  report.wall_seconds = timer.seconds();
  return report;
}

namespace {

// "en"-side rendition of a source sentence: concept tokens keep their
// concept id, fillers are re-rolled in the target filler vocabulary.
std::string faithful_candidate(const std::vector<std::string>& tokens,
                               std::size_t filler_vocab, Rng& rng) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    const std::size_t us = tokens[i].find('_');
    const std::string suffix =
        us == std::string::npos ? tokens[i] : tokens[i].substr(us + 1);
    if (!suffix.empty() && suffix[0] == 'c') {
      out += "en_" + suffix;
    } else {
      out += "en_f" + std::to_string(rng.below(filler_vocab));
    }
  }
  return out;
}

std::string corrupted_candidate(std::size_t len, std::size_t concepts,
                                std::size_t filler_vocab, Rng& rng) {
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    if (i) out += ' ';
    if (rng.uniform() < 0.5) {
      out += "en_c" + std::to_string(rng.below(concepts));
    } else {
      out += "en_f" + std::to_string(rng.below(filler_vocab));
    }
  }
  return out;
}

}  // namespace

RunReport train_arca(const RunConfig& cfg) {
  Timer timer;
  RunReport report;
  report.task = "train-arca";
  report.config_echo = base_echo(cfg);
  if (cfg.arca_candidates == 0) throw ConfigError("train-arca: no candidates");

  const data::Corpus corpus = load_or_generate(cfg);
  if (corpus.queries.empty()) throw DataError("train-arca: empty corpus");

  data::TrainableEncoder enc(corpus_vocab(corpus), cfg.token_dim, cfg.embed_dim,
                             cfg.seed);
  // Frozen multilingual side: concept tokens share their embedding across
  // languages, so a faithful candidate lands near its source.
  const data::HashProjectionProvider side(cfg.token_dim, cfg.seed ^ 0x51deull, true);
  const data::HashProjectionProvider critic_provider(cfg.embed_dim,
                                                     cfg.seed ^ 0xc417ull, true);
  std::unique_ptr<arca::TranslationCritic> critic;
  if (cfg.critic_file.empty()) {
    critic = std::make_unique<arca::EmbeddingSimilarityCritic>(&critic_provider);
  } else {
    critic = std::make_unique<arca::FileCritic>(cfg.critic_file);
  }

  arca::TwoLayerMlp adaptor(cfg.arca.pool_window * cfg.token_dim,
                            cfg.arca.adaptor_hidden, cfg.arca.shared_dim,
                            cfg.seed ^ 0xadaull);
  arca::TwoLayerMlp actor(4, 16, 1, cfg.seed ^ 0xac7ull);
  optim::Adam adam_actor(actor.param_count(), cfg.arca.actor_lr);
  optim::Adam adam_enc(enc.param_count(), cfg.arca.encoder_lr);
  optim::Adam adam_adaptor(adaptor.param_count(), cfg.arca.adaptor_lr);

  Rng rng(cfg.seed ^ 0xa2caull);
  const std::size_t K = cfg.arca_candidates;
  const std::size_t window = std::min<std::size_t>(200, std::max<std::size_t>(cfg.steps, 1));
  std::size_t best_picked_in_window = 0, steps_in_window = 0, clip_events = 0;
  double max_dev_uniform = 0.0, max_post_clip = 0.0;
  std::vector<double> anchor_curve;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const data::QueryRecord& q = corpus.queries[step % corpus.queries.size()];
    const std::vector<std::string> src_tokens = data::tokenize(q.text);

    const std::size_t best = cfg.arca_identical_candidates ? 0 : rng.below(K);
    std::vector<std::string> candidates(K);
    const std::string good =
        faithful_candidate(src_tokens, cfg.synth.filler_vocab, rng);
    for (std::size_t k = 0; k < K; ++k) {
      if (cfg.arca_identical_candidates || k == best) {
        candidates[k] = good;
      } else {
        candidates[k] = corrupted_candidate(src_tokens.size(), cfg.synth.concepts,
                                            cfg.synth.filler_vocab, rng);
      }
    }

    const std::vector<arca::CriticScores> scores =
        critic->score(q.qid, q.text, candidates);

    const std::vector<DenseVector> g_rows = enc.token_embeddings(src_tokens);
    arca::AdaptorCache cache_g;
    const DenseVector u =
        arca::adaptor_forward(adaptor, g_rows, cfg.arca.pool_window, &cache_g);

    std::vector<arca::AdaptorCache> cache_h(K);
    std::vector<DenseVector> v(K);
    std::vector<std::vector<std::string>> cand_tokens(K);
    std::vector<arca::PolicyFeatures> features(K);
    for (std::size_t k = 0; k < K; ++k) {
      cand_tokens[k] = data::tokenize(candidates[k]);
      v[k] = arca::adaptor_forward(adaptor, side.token_embeddings(cand_tokens[k]),
                                   cfg.arca.pool_window, &cache_h[k]);
      const double sim = cosine_with_grads(u, v[k]).value;
      features[k] = {scores[k].semantic, scores[k].emotional, scores[k].pragmatic,
                     sim};
    }

    const arca::PolicyResult policy = arca::actor_policy(actor, features);
    for (std::size_t k = 0; k < K; ++k) {
      max_dev_uniform = std::max(
          max_dev_uniform, std::fabs(policy.probs[k] - 1.0 / static_cast<double>(K)));
    }
    std::size_t action = K - 1;
    {
      const double r = rng.uniform();
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        acc += policy.probs[k];
        if (r < acc) {
          action = k;
          break;
        }
      }
    }
    if (cfg.steps - step <= window) {
      ++steps_in_window;
      if (action == best) ++best_picked_in_window;
    }

    const double sim_a = features[action][3];
    const double reward = arca::composite_reward(scores[action], sim_a,
                                                 cfg.arca.reward);
    const double baseline = cfg.arca.use_baseline ? cfg.arca.baseline : 0.0;
    const arca::ReinforceResult rl =
        arca::reinforce_loss(policy.probs, action, reward, baseline);
    const arca::AlignResult enc_loss = arca::encoder_align_loss(u, v[action]);
    const arca::AnchorResult anchor =
        arca::anchor_loss({u}, {v[action]}, cfg.arca.anchor_symmetric);

    const double total = rl.value + cfg.arca.eta * enc_loss.value +
                         cfg.arca.lambda_anchor * anchor.value;
    if (!std::isfinite(total)) throw NumericError("train-arca: non-finite loss");
    report.loss_curve.push_back(total);
    anchor_curve.push_back(anchor.value);

    DenseVector g_actor(actor.param_count(), 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      actor.backward(policy.caches[k], {rl.grad_logits[k]}, g_actor);
    }
    DenseVector grad_u(u.size(), 0.0), grad_v(u.size(), 0.0);
    for (std::size_t d = 0; d < u.size(); ++d) {
      grad_u[d] = cfg.arca.eta * enc_loss.grad_u[d] +
                  cfg.arca.lambda_anchor * anchor.grad_feature[0][d];
      grad_v[d] = cfg.arca.eta * enc_loss.grad_v[d];
      if (cfg.arca.anchor_symmetric) {
        grad_v[d] += cfg.arca.lambda_anchor * anchor.grad_translation[0][d];
      }
    }
    DenseVector g_adaptor(adaptor.param_count(), 0.0);
    const std::vector<DenseVector> row_grads =
        arca::adaptor_backward(adaptor, cache_g, grad_u, g_adaptor);
    arca::adaptor_backward(adaptor, cache_h[action], grad_v, g_adaptor);
    DenseVector g_enc(enc.param_count(), 0.0);
    enc.accumulate_token_grad(src_tokens, row_grads, g_enc);

    // The same clip threshold applies uniformly to each parameter group.
    num::require_finite(g_actor, "train-arca actor gradient");
    num::require_finite(g_adaptor, "train-arca adaptor gradient");
    num::require_finite(g_enc, "train-arca encoder gradient");
    clip_events += optim::clip_global_norm(g_actor, cfg.arca.grad_clip) ? 1 : 0;
    clip_events += optim::clip_global_norm(g_adaptor, cfg.arca.grad_clip) ? 1 : 0;
    clip_events += optim::clip_global_norm(g_enc, cfg.arca.grad_clip) ? 1 : 0;
    max_post_clip = std::max({max_post_clip, num::norm2(g_actor),
                              num::norm2(g_adaptor), num::norm2(g_enc)});

    adam_actor.step(actor.params(), g_actor);
    adam_adaptor.step(adaptor.params(), g_adaptor);
    adam_enc.step(enc.params(), g_enc);
  }

  if (steps_in_window > 0) {
    report.metrics["selection_freq_final"] =
        static_cast<double>(best_picked_in_window) /
        static_cast<double>(steps_in_window);
  }
  report.metrics["max_dev_from_uniform"] = max_dev_uniform;
  if (!anchor_curve.empty()) {
    const std::size_t dec = std::max<std::size_t>(anchor_curve.size() / 10, 1);
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < dec; ++i) first += anchor_curve[i];
    for (std::size_t i = anchor_curve.size() - dec; i < anchor_curve.size(); ++i) {
      last += anchor_curve[i];
    }
    report.metrics["anchor_mean_first_decile"] = first / static_cast<double>(dec);
    report.metrics["anchor_mean_last_decile"] = last / static_cast<double>(dec);
  }
  report.diagnostics["clip_events"] = static_cast<double>(clip_events);
  report.diagnostics["max_post_clip_grad_norm"] = max_post_clip;
  report.wall_seconds = timer.seconds();
  return report;
}

RunReport run_diagnostics(const RunConfig& cfg) {
  Timer timer;
  RunReport report;
  report.task = cfg.task;
  report.config_echo = base_echo(cfg);

  if (cfg.task == "bound") {
    report.metrics["deviation_bound"] = theory::deviation_bound(cfg.bound);
    report.metrics["downstream_bound"] = theory::downstream_bound(cfg.bound);
  } else if (cfg.task == "info-gain") {
    report.metrics["mi_g"] =
        theory::gaussian_mutual_info(cfg.channel, theory::Observed::G);
    report.metrics["mi_h"] =
        theory::gaussian_mutual_info(cfg.channel, theory::Observed::H);
    report.metrics["mi_both"] =
        theory::gaussian_mutual_info(cfg.channel, theory::Observed::Both);
    report.metrics["info_gain"] = theory::info_gain(cfg.channel);
  } else if (cfg.task == "estimate-c" || cfg.task == "estimate-lipschitz") {
    const data::Corpus corpus = load_or_generate(cfg);
    std::vector<std::string> sentences;
    for (const auto& q : corpus.queries) sentences.push_back(q.text);
    for (const auto& it : corpus.items) sentences.push_back(it.title);
    const data::HashProjectionProvider provider(cfg.embed_dim, cfg.seed, false);
    if (cfg.task == "estimate-c") {
      const num::StatSummary s = theory::estimate_c(provider, sentences);
      report.metrics["max"] = s.max;
      report.metrics["mean"] = s.mean;
      report.metrics["median"] = s.median;
      report.metrics["p90"] = s.p90;
      report.metrics["p95"] = s.p95;
      report.metrics["p99"] = s.p99;
      report.metrics["std"] = s.std_dev;
      report.diagnostics["count"] = static_cast<double>(s.count);
    } else {
      const theory::LipschitzReport lr =
          theory::estimate_local_lipschitz(provider, sentences, cfg.lipschitz);
      report.metrics["max"] = lr.summary.max;
      report.metrics["mean"] = lr.summary.mean;
      report.metrics["median"] = lr.summary.median;
      report.metrics["p90"] = lr.summary.p90;
      report.metrics["p95"] = lr.summary.p95;
      report.metrics["p99"] = lr.summary.p99;
      report.metrics["quantile"] = lr.quantile;
      report.diagnostics["excluded"] = static_cast<double>(lr.excluded);
    }
  } else if (cfg.task == "stats") {
    const data::Corpus corpus = load_or_generate(cfg);
    const data::LengthStats s = data::length_stats(corpus);
    report.metrics["query_mean_length"] = s.query.mean;
    report.metrics["query_median_length"] = s.query.median;
    report.metrics["query_max_length"] = s.query.max;
    report.metrics["item_mean_length"] = s.item.mean;
    report.metrics["item_median_length"] = s.item.median;
    report.metrics["item_max_length"] = s.item.max;
    report.diagnostics["queries"] = static_cast<double>(corpus.queries.size());
    report.diagnostics["items"] = static_cast<double>(corpus.items.size());
  } else {
    throw ConfigError("run_diagnostics: unknown task '" + cfg.task + "'");
  }
  report.wall_seconds = timer.seconds();
  return report;
}

RunReport evaluate(const RunConfig& cfg) {
  Timer timer;
  RunReport report;
  report.task = "eval";
  report.config_echo = base_echo(cfg);

  const data::Corpus corpus = load_or_generate(cfg);
  const data::SplitResult split = data::split_train_test(corpus, cfg.seed);
  if (split.test.queries.empty()) throw DataError("eval: empty test split");
  const data::HashProjectionProvider provider(cfg.embed_dim, cfg.seed, false);
  report.metrics["ndcg_at_k"] =
      eval_retrieval_ndcg(split.test, provider, cfg.eval_k);
  if (!split.test.ranking_pairs.empty()) {
    const RankingEval ev = eval_ranking_metrics(split.test, provider);
    report.metrics["pearson"] = ev.pearson;
    report.metrics["spearman"] = ev.spearman;
  }
  report.wall_seconds = timer.seconds();
  return report;
}

RunReport generate_synthetic_cmd(const RunConfig& cfg) {
  Timer timer;
  RunReport report;
  report.task = "gen-synthetic";
  report.config_echo = base_echo(cfg);
  if (cfg.out_dir.empty()) throw ConfigError("gen-synthetic: out_dir required");
  const data::Corpus corpus = load_or_generate(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  data::save_corpus(corpus, cfg.out_dir);
  report.metrics["queries"] = static_cast<double>(corpus.queries.size());
  report.metrics["items"] = static_cast<double>(corpus.items.size());
  report.metrics["pairs"] = static_cast<double>(corpus.pairs.size());
  report.metrics["ranking_pairs"] = static_cast<double>(corpus.ranking_pairs.size());
  report.wall_seconds = timer.seconds();
  return report;
}

RunReport dispatch(const RunConfig& cfg) {
  if (cfg.task == "train-retrieval") return train_retrieval(cfg);
  if (cfg.task == "train-ranking") return train_ranking(cfg);
  if (cfg.task == "train-arca") return train_arca(cfg);
  if (cfg.task == "eval") return evaluate(cfg);
  if (cfg.task == "gen-synthetic") return generate_synthetic_cmd(cfg);
  if (cfg.task == "bound" || cfg.task == "info-gain" || cfg.task == "estimate-c" ||
      cfg.task == "estimate-lipschitz" || cfg.task == "stats") {
    return run_diagnostics(cfg);
  }
  throw ConfigError("unknown task '" + cfg.task + "'");
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: boolean expected for '" + key + "'");
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    if (v == "inf") return std::numeric_limits<double>::infinity();
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: number expected for '" + key + "'");
  }
}

std::uint64_t parse_uint(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError("config: non-negative integer expected for '" + key + "'");
  }
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  if (key == "task") cfg.task = value;
  else if (key == "seed") cfg.seed = parse_uint(value, key);
  else if (key == "corpus_dir") cfg.corpus_dir = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "report_path") cfg.report_path = value;
  else if (key == "state_path") cfg.state_path = value;
  else if (key == "token_dim") cfg.token_dim = parse_uint(value, key);
  else if (key == "embed_dim") cfg.embed_dim = parse_uint(value, key);
  else if (key == "steps") cfg.steps = parse_uint(value, key);
  else if (key == "batch") cfg.batch = parse_uint(value, key);
  else if (key == "lr") cfg.lr = parse_double(value, key);
  else if (key == "grad_clip") cfg.grad_clip = parse_double(value, key);
  else if (key == "use_ema") cfg.use_ema = parse_bool(value, key);
  else if (key == "ema_decay") cfg.ema_decay = parse_double(value, key);
  else if (key == "doc_queue_capacity") cfg.doc_queue_capacity = parse_uint(value, key);
  else if (key == "corr_queue_capacity") cfg.corr_queue_capacity = parse_uint(value, key);
  else if (key == "doc_batch_extra") cfg.doc_batch_extra = parse_uint(value, key);
  else if (key == "eval_k") cfg.eval_k = parse_uint(value, key);
  else if (key == "synth.languages") {
    cfg.synth.languages.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) cfg.synth.languages.push_back(item);
    }
    if (cfg.synth.languages.empty()) throw ConfigError("config: empty language list");
  }
  else if (key == "synth.concepts") cfg.synth.concepts = parse_uint(value, key);
  else if (key == "synth.filler_vocab") cfg.synth.filler_vocab = parse_uint(value, key);
  else if (key == "synth.queries_per_language") {
    cfg.synth.queries_per_language = parse_uint(value, key);
  }
  else if (key == "synth.distractors_per_query") {
    cfg.synth.distractors_per_query = parse_uint(value, key);
  }
  else if (key == "synth.noise") cfg.synth.noise = parse_double(value, key);
  else if (key == "synth.seed") cfg.synth.seed = parse_uint(value, key);
  else if (key == "retrieval.tau") cfg.retrieval.tau = parse_double(value, key);
  else if (key == "retrieval.tau_k") cfg.retrieval.tau_k = parse_double(value, key);
  else if (key == "retrieval.k") cfg.retrieval.k = parse_uint(value, key);
  else if (key == "retrieval.delta_safe") cfg.retrieval.delta_safe = parse_double(value, key);
  else if (key == "retrieval.beta_safe") cfg.retrieval.beta_safe = parse_double(value, key);
  else if (key == "retrieval.gamma_hinge") cfg.retrieval.gamma_hinge = parse_double(value, key);
  else if (key == "retrieval.nu") cfg.retrieval.nu = parse_double(value, key);
  else if (key == "retrieval.lambda_h") cfg.retrieval.lambda_h = parse_double(value, key);
  else if (key == "retrieval.lambda_r") cfg.retrieval.lambda_r = parse_double(value, key);
  else if (key == "retrieval.top_m") cfg.retrieval.top_m = parse_uint(value, key);
  else if (key == "retrieval.drop_near_negatives") {
    cfg.retrieval.drop_near_negatives = parse_bool(value, key);
  }
  else if (key == "corr.alpha_mix") cfg.corr.alpha_mix = parse_double(value, key);
  else if (key == "corr.tau") cfg.corr.tau = parse_double(value, key);
  else if (key == "corr.n_min") cfg.corr.n_min = parse_uint(value, key);
  else if (key == "arca.eta") cfg.arca.eta = parse_double(value, key);
  else if (key == "arca.lambda_anchor") cfg.arca.lambda_anchor = parse_double(value, key);
  else if (key == "arca.reward.alpha") cfg.arca.reward.alpha = parse_double(value, key);
  else if (key == "arca.reward.beta") cfg.arca.reward.beta = parse_double(value, key);
  else if (key == "arca.reward.gamma") cfg.arca.reward.gamma = parse_double(value, key);
  else if (key == "arca.reward.delta") cfg.arca.reward.delta = parse_double(value, key);
  else if (key == "arca.actor_lr") cfg.arca.actor_lr = parse_double(value, key);
  else if (key == "arca.encoder_lr") cfg.arca.encoder_lr = parse_double(value, key);
  else if (key == "arca.adaptor_lr") cfg.arca.adaptor_lr = parse_double(value, key);
  else if (key == "arca.grad_clip") cfg.arca.grad_clip = parse_double(value, key);
  else if (key == "arca.feat_prefix_len") cfg.arca.feat_prefix_len = parse_uint(value, key);
  else if (key == "arca.pool_window") cfg.arca.pool_window = parse_uint(value, key);
  else if (key == "arca.adaptor_hidden") cfg.arca.adaptor_hidden = parse_uint(value, key);
  else if (key == "arca.shared_dim") cfg.arca.shared_dim = parse_uint(value, key);
  else if (key == "arca.anchor_symmetric") {
    cfg.arca.anchor_symmetric = parse_bool(value, key);
  }
  else if (key == "arca.use_baseline") cfg.arca.use_baseline = parse_bool(value, key);
  else if (key == "arca.baseline") cfg.arca.baseline = parse_double(value, key);
  else if (key == "arca_candidates") cfg.arca_candidates = parse_uint(value, key);
  else if (key == "arca_identical_candidates") {
    cfg.arca_identical_candidates = parse_bool(value, key);
  }
  else if (key == "critic_file") cfg.critic_file = value;
  else if (key == "bound.epsilon1") cfg.bound.epsilon1 = parse_double(value, key);
  else if (key == "bound.epsilon2") cfg.bound.epsilon2 = parse_double(value, key);
  else if (key == "bound.c") cfg.bound.c_const = parse_double(value, key);
  else if (key == "bound.l") cfg.bound.l_loc = parse_double(value, key);
  else if (key == "bound.kappa") cfg.bound.kappa = parse_double(value, key);
  else if (key == "lipschitz.delta") cfg.lipschitz.delta = parse_uint(value, key);
  else if (key == "lipschitz.q") cfg.lipschitz.q = parse_double(value, key);
  else if (key == "lipschitz.samples") {
    cfg.lipschitz.samples_per_sentence = parse_uint(value, key);
  }
  else if (key == "lipschitz.seed") cfg.lipschitz.seed = parse_uint(value, key);
  else if (key == "lipschitz.char_level") {
    cfg.lipschitz.character_level = parse_bool(value, key);
  }
  else if (key == "channel.signal_var") cfg.channel.signal_var = parse_double(value, key);
  else if (key == "channel.var_g") cfg.channel.var_g = parse_double(value, key);
  else if (key == "channel.var_h") cfg.channel.var_h = parse_double(value, key);
  else throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) +
                        ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* v = std::getenv("LIRA_CORPUS_DIR")) cfg.corpus_dir = v;
  if (const char* v = std::getenv("LIRA_OUT_DIR")) cfg.out_dir = v;
  if (const char* v = std::getenv("LIRA_REPORT_PATH")) cfg.report_path = v;
  if (const char* v = std::getenv("LIRA_STATE_PATH")) cfg.state_path = v;
}

std::string report_json(const RunReport& report) {
  json j;
  j["task"] = report.task;
  j["config"] = report.config_echo;
  j["loss_curve"] = report.loss_curve;
  j["metrics"] = report.metrics;
  j["diagnostics"] = report.diagnostics;
  j["wall_seconds"] = report.wall_seconds;
  return j.dump(2);
}

std::string report_table(const RunReport& report) {
  std::ostringstream os;
  os << "task: " << report.task << "\n";
  os << std::left;
  for (const auto& [k, v] : report.metrics) {
    os << "  " << std::setw(28) << k << std::setprecision(10) << v << "\n";
  }
  for (const auto& [k, v] : report.diagnostics) {
    os << "  " << std::setw(28) << k << std::setprecision(10) << v << "\n";
  }
  os << "  " << std::setw(28) << "wall_seconds" << std::setprecision(4)
     << report.wall_seconds << "\n";
  return os.str();
}

void write_report(const RunReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report to " + path);
  out << report_json(report) << "\n";
}

void save_run_state(const queue::CorrQueue& corr, const queue::DocQueue& docs,
                    const std::string& path) {
  json j;
  j["version"] = 1;
  j["corr"] = json::array();
  for (const auto& [p, g] : corr.entries()) j["corr"].push_back({p, g});
  j["doc"] = json::array();
  for (const auto& e : docs.entries()) {
    j["doc"].push_back({{"id", e.doc_id}, {"lang", e.language}, {"emb", e.embedding}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write run state to " + path);
  out << j.dump() << "\n";
}

void load_run_state(queue::CorrQueue& corr, queue::DocQueue& docs,
                    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open run state " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run state: ") + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1) {
    throw DataError("run state: unsupported version");
  }
  std::vector<std::pair<double, double>> centries;
  for (const auto& rec : j["corr"]) {
    centries.emplace_back(rec[0].get<double>(), rec[1].get<double>());
  }
  corr.push(centries);
  std::vector<queue::DocEntry> dentries;
  for (const auto& rec : j["doc"]) {
    dentries.push_back({rec["id"].get<std::string>(), rec["lang"].get<std::string>(),
                        rec["emb"].get<DenseVector>()});
  }
  docs.push(dentries);
}

}  // namespace lira::run
