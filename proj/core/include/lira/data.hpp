#ifndef LIRA_DATA_HPP_
#define LIRA_DATA_HPP_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lira/numcore.hpp"
#include "lira/provider.hpp"

namespace lira::data {

struct QueryRecord {
  std::string qid;
  std::string text;
  std::string lang;
};

struct ItemRecord {
  std::string docid;
  std::string title;
  std::string lang;
};

struct PairRecord {
  std::string qid;
  std::string docid;  // binary relevance implied by presence
};

// Graded similarity pair for the ranking task.
struct RankingPair {
  std::string text_a;
  std::string text_b;
  double gold = 0.0;
  std::string lang;
};

struct Corpus {
  std::vector<QueryRecord> queries;
  std::vector<ItemRecord> items;
  std::vector<PairRecord> pairs;
  std::vector<RankingPair> ranking_pairs;  // optional, synthetic generator fills it

  const QueryRecord* find_query(const std::string& qid) const;
  const ItemRecord* find_item(const std::string& docid) const;
  std::vector<std::string> languages() const;
  void validate() const;  // referential integrity, unique ids, non-empty texts
};

// Alternate JSON field names for variant corpus files.
struct FieldMapping {
  std::string qid = "qid";
  std::string query_text = "text";
  std::string query_lang = "lang";
  std::string docid = "docid";
  std::string item_title = "title";
  std::string item_lang = "lang";
};

// Reads query.json / item.json / pairs_info.json from a directory.
// Strict failure with file diagnostics on malformed records or dangling
// references.
Corpus load_corpus(const std::string& directory,
                   const FieldMapping& mapping = {});
void save_corpus(const Corpus& corpus, const std::string& directory,
                 const FieldMapping& mapping = {});

// 4:1 pair split, seeded shuffle, stratified per language. Queries/items
// referenced on only one side are carried with it; unreferenced items are
// shared by both sides (they act as distractor pools).
struct SplitResult {
  Corpus train;
  Corpus test;
  bool stratified = true;
};
SplitResult split_train_test(const Corpus& corpus, std::uint64_t seed);

struct SyntheticConfig {
  std::vector<std::string> languages = {"vi", "th", "id", "ms", "ur", "bn", "ph"};
  std::size_t concepts = 64;            // shared latent concept ids
  std::size_t filler_vocab = 96;        // per-language filler tokens
  std::size_t queries_per_language = 100;
  std::size_t distractors_per_query = 2;
  double noise = 0.1;                   // substitution probability in positives
  std::uint64_t seed = 1;
};

// Deterministic multilingual corpus with disjoint per-language vocabularies
// over a shared concept layer. Queries are 3-6 tokens, items 10-25 tokens;
// a query's positive shares its concept tokens (under the noise model),
// distractors share none. Also emits graded ranking pairs keyed on token
// overlap.
Corpus generate_synthetic(const SyntheticConfig& cfg);

// Levenshtein distance over token sequences.
std::size_t token_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b);
// Character-level variant.
std::size_t char_edit_distance(const std::string& a, const std::string& b);

// Raw string-length statistics per field (Max/Min/Mean/Median/Std/Count).
struct LengthStats {
  num::StatSummary query;
  num::StatSummary item;
};
LengthStats length_stats(const Corpus& corpus);

}  // namespace lira::data

#endif  // LIRA_DATA_HPP_
