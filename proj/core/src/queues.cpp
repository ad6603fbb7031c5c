#include "lira/queues.hpp"

#include <algorithm>

#include "lira/errors.hpp"

namespace lira::queue {

CorrQueue::CorrQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("CorrQueue: capacity must be positive");
}

std::size_t CorrQueue::push(const std::vector<std::pair<double, double>>& batch) {
  std::size_t evicted = 0;
  for (const auto& e : batch) {
    entries_.push_back(e);
    while (entries_.size() > capacity_) {
      entries_.pop_front();
      ++evicted;
    }
  }
  return evicted;
}

std::pair<std::vector<double>, std::vector<double>> CorrQueue::snapshot() const {
  std::vector<double> preds, golds;
  preds.reserve(entries_.size());
  golds.reserve(entries_.size());
  for (const auto& [p, g] : entries_) {
    preds.push_back(p);
    golds.push_back(g);
  }
  return {std::move(preds), std::move(golds)};
}

ConcatSnapshot snapshot_concat(const CorrQueue& q,
                               const std::vector<double>& pred_batch,
                               const std::vector<double>& gold_batch) {
  if (pred_batch.size() != gold_batch.size()) {
    throw ConfigError("snapshot_concat: batch length mismatch");
  }
  auto [preds, golds] = q.snapshot();
  ConcatSnapshot out;
  out.history_len = preds.size();
  out.pred = std::move(preds);
  out.gold = std::move(golds);
  out.pred.insert(out.pred.end(), pred_batch.begin(), pred_batch.end());
  out.gold.insert(out.gold.end(), gold_batch.begin(), gold_batch.end());
  return out;
}

DocQueue::DocQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("DocQueue: capacity must be positive");
}

std::size_t DocQueue::push(const std::vector<DocEntry>& batch) {
  std::size_t evicted = 0;
  for (const auto& e : batch) {
    DocEntry stored = e;
    stored.embedding = num::l2_normalize(e.embedding);
    // Re-push refreshes recency: drop the live duplicate first.
    auto it = std::find_if(entries_.begin(), entries_.end(),
                           [&](const DocEntry& d) { return d.doc_id == stored.doc_id; });
    if (it != entries_.end()) entries_.erase(it);
    entries_.push_back(std::move(stored));
    while (entries_.size() > capacity_) {
      entries_.pop_front();
      ++evicted;
    }
  }
  return evicted;
}

MinedCandidates DocQueue::mine_in_language(const DenseVector& query_embedding,
                                           const std::string& language,
                                           const std::string& positive_id,
                                           std::size_t m_hardest) const {
  MinedCandidates out;
  out.positive.first = positive_id;
  // index = position in deque; larger index is newer
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const DocEntry& e = entries_[i];
    if (e.language != language) continue;
    if (e.doc_id == positive_id) {
      out.positive.second = num::cosine(query_embedding, e.embedding);
      continue;
    }
    scored.emplace_back(num::cosine(query_embedding, e.embedding), i);
  }
  if (scored.empty()) {
    out.fallback_in_batch = true;
    return out;
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second > b.second;  // newest-first on ties
            });
  const std::size_t keep = std::min(m_hardest, scored.size());
  out.negatives.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    out.negatives.emplace_back(entries_[scored[i].second].doc_id, scored[i].first);
  }
  return out;
}

}  // namespace lira::queue
