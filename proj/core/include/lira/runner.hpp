#ifndef LIRA_RUNNER_HPP_
#define LIRA_RUNNER_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lira/arca.hpp"
#include "lira/data.hpp"
#include "lira/diffrank.hpp"
#include "lira/numcore.hpp"
#include "lira/queues.hpp"
#include "lira/theory.hpp"

namespace lira::run {

// Everything a run needs; a run is fully determined by (config, seed).
struct RunConfig {
  std::string task;  // train-retrieval | train-ranking | train-arca |
                     // estimate-c | estimate-lipschitz | bound | info-gain |
                     // eval | stats | gen-synthetic
  std::uint64_t seed = 1;

  std::string corpus_dir;   // empty: use the synthetic generator
  std::string out_dir;      // gen-synthetic target directory
  std::string report_path;  // optional JSON report destination
  std::string state_path;   // optional queue-state dump/restore file

  data::SyntheticConfig synth;

  std::size_t token_dim = 24;
  std::size_t embed_dim = 32;

  std::size_t steps = 500;
  std::size_t batch = 1;
  double lr = 3e-3;  // trainable-encoder rate for retrieval/ranking tasks
  double grad_clip = 1.0;
  bool use_ema = true;
  double ema_decay = 0.99;

  std::size_t doc_queue_capacity = 512;
  std::size_t corr_queue_capacity = 256;
  std::size_t doc_batch_extra = 4;  // extra in-language docs pushed per step
  std::size_t eval_k = 10;

  rank::RetrievalLossConfig retrieval;
  rank::CorrLossConfig corr;

  arca::ArcaConfig arca;
  std::size_t arca_candidates = 4;
  bool arca_identical_candidates = false;  // indistinguishability control
  std::string critic_file;                 // empty: embedding-similarity stub

  theory::BoundInputs bound;
  theory::LipschitzConfig lipschitz;
  theory::GaussianChannelModel channel;
};

struct RunReport {
  std::string task;
  std::map<std::string, std::string> config_echo;
  std::vector<double> loss_curve;
  std::map<std::string, double> metrics;
  std::map<std::string, double> diagnostics;
  double wall_seconds = 0.0;
};

// key=value configuration, one per line, '#' comments. Unknown keys are
// configuration errors.
RunConfig load_config(const std::string& path);
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);
// LIRA_CORPUS_DIR / LIRA_OUT_DIR / LIRA_REPORT_PATH / LIRA_STATE_PATH.
void apply_env_overrides(RunConfig& cfg);

std::string report_json(const RunReport& report);
std::string report_table(const RunReport& report);
void write_report(const RunReport& report, const std::string& path);

// Full-corpus retrieval metric: per test query, all test items of the query's
// language form the pool; mean exact nDCG@k over queries with a positive.
double eval_retrieval_ndcg(const data::Corpus& test,
                           const data::EmbeddingProvider& provider,
                           std::size_t k = 10);

struct RankingEval {
  double pearson = 0.0;
  double spearman = 0.0;  // exact, average-tie ranks
};
RankingEval eval_ranking_metrics(const data::Corpus& test,
                                 const data::EmbeddingProvider& provider);

RunReport train_retrieval(const RunConfig& cfg);
RunReport train_ranking(const RunConfig& cfg);
RunReport train_arca(const RunConfig& cfg);
RunReport run_diagnostics(const RunConfig& cfg);
RunReport evaluate(const RunConfig& cfg);
RunReport generate_synthetic_cmd(const RunConfig& cfg);

// Dispatch on cfg.task.
RunReport dispatch(const RunConfig& cfg);

// Versioned queue-state file for resumable runs.
void save_run_state(const queue::CorrQueue& corr, const queue::DocQueue& docs,
                    const std::string& path);
void load_run_state(queue::CorrQueue& corr, queue::DocQueue& docs,
                    const std::string& path);

}  // namespace lira::run

#endif  // LIRA_RUNNER_HPP_
