#ifndef LIRA_QUEUES_HPP_
#define LIRA_QUEUES_HPP_

#include <cstddef>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "lira/numcore.hpp"

namespace lira::queue {

using num::DenseVector;

// Bounded FIFO buffer of (prediction, gold) pairs, oldest first. Stored
// values are plain doubles: history never carries gradient.
class CorrQueue {
 public:
  explicit CorrQueue(std::size_t capacity);

  // Appends in order, evicting oldest entries past capacity.
  // Returns the number of evicted entries.
  std::size_t push(const std::vector<std::pair<double, double>>& batch);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }

  // Immutable value snapshot: (preds oldest-first, golds oldest-first).
  std::pair<std::vector<double>, std::vector<double>> snapshot() const;

  const std::deque<std::pair<double, double>>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<std::pair<double, double>> entries_;
};

// History-first concatenation (p_tilde, t_tilde, m) of a queue snapshot with
// the live batch. The returned vectors are value copies.
struct ConcatSnapshot {
  std::vector<double> pred;
  std::vector<double> gold;
  std::size_t history_len = 0;
};
ConcatSnapshot snapshot_concat(const CorrQueue& q,
                               const std::vector<double>& pred_batch,
                               const std::vector<double>& gold_batch);

struct DocEntry {
  std::string doc_id;
  std::string language;
  DenseVector embedding;  // stored L2-normalized
};

struct MinedCandidates {
  std::pair<std::string, double> positive;
  std::vector<std::pair<std::string, double>> negatives;  // descending score
  bool fallback_in_batch = false;  // no same-language entries were available
};

// Bounded FIFO buffer of (doc_id, language, embedding), oldest first.
// Re-pushing a live doc_id refreshes its recency and embedding.
class DocQueue {
 public:
  explicit DocQueue(std::size_t capacity);

  std::size_t push(const std::vector<DocEntry>& batch);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<DocEntry>& entries() const { return entries_; }

  // Filters by language, excludes the positive, re-scores every survivor by
  // cosine against the query embedding and keeps the m_hardest best.
  // Ties broken newest-first.
  MinedCandidates mine_in_language(const DenseVector& query_embedding,
                                   const std::string& language,
                                   const std::string& positive_id,
                                   std::size_t m_hardest) const;

 private:
  std::size_t capacity_;
  std::deque<DocEntry> entries_;
};

}  // namespace lira::queue

#endif  // LIRA_QUEUES_HPP_
