#include "lira/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "lira/errors.hpp"

namespace lira::data {

namespace {

using nlohmann::json;

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
  double uniform() {  // [0, 1)
    return static_cast<double>(next() >> 11) / 9007199254740992.0;
  }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path + ": " + e.what());
  }
  if (!j.is_array()) throw DataError(path + ": expected a top-level array");
  return j;
}

std::string get_field(const json& rec, const std::string& key,
                      const std::string& path, std::size_t index) {
  if (!rec.contains(key) || !rec[key].is_string()) {
    throw DataError(path + " record " + std::to_string(index) +
                    ": missing or non-string field '" + key + "'");
  }
  return rec[key].get<std::string>();
}

}  // namespace

const QueryRecord* Corpus::find_query(const std::string& qid) const {
  for (const auto& q : queries) {
    if (q.qid == qid) return &q;
  }
  return nullptr;
}

const ItemRecord* Corpus::find_item(const std::string& docid) const {
  for (const auto& it : items) {
    if (it.docid == docid) return &it;
  }
  return nullptr;
}

std::vector<std::string> Corpus::languages() const {
  std::set<std::string> langs;
  for (const auto& q : queries) langs.insert(q.lang);
  for (const auto& it : items) langs.insert(it.lang);
  return {langs.begin(), langs.end()};
}

void Corpus::validate() const {
  std::set<std::string> qids, docids;
  for (const auto& q : queries) {
    if (q.text.empty()) throw DataError("empty query text for qid '" + q.qid + "'");
    if (!qids.insert(q.qid).second) throw DataError("duplicate qid '" + q.qid + "'");
  }
  for (const auto& it : items) {
    if (it.title.empty()) throw DataError("empty item title for docid '" + it.docid + "'");
    if (!docids.insert(it.docid).second) throw DataError("duplicate docid '" + it.docid + "'");
  }
  for (const auto& p : pairs) {
    if (!qids.count(p.qid)) throw DataError("pair references unknown qid '" + p.qid + "'");
    if (!docids.count(p.docid)) {
      throw DataError("pair references unknown docid '" + p.docid + "'");
    }
  }
}

Corpus load_corpus(const std::string& directory, const FieldMapping& m) {
  Corpus c;
  const std::string qpath = directory + "/query.json";
  const std::string ipath = directory + "/item.json";
  const std::string ppath = directory + "/pairs_info.json";

  const json qj = load_json_file(qpath);
  for (std::size_t i = 0; i < qj.size(); ++i) {
    c.queries.push_back({get_field(qj[i], m.qid, qpath, i),
                         get_field(qj[i], m.query_text, qpath, i),
                         get_field(qj[i], m.query_lang, qpath, i)});
  }
  const json ij = load_json_file(ipath);
  for (std::size_t i = 0; i < ij.size(); ++i) {
    c.items.push_back({get_field(ij[i], m.docid, ipath, i),
                       get_field(ij[i], m.item_title, ipath, i),
                       get_field(ij[i], m.item_lang, ipath, i)});
  }
  const json pj = load_json_file(ppath);
  for (std::size_t i = 0; i < pj.size(); ++i) {
    c.pairs.push_back({get_field(pj[i], m.qid, ppath, i),
                       get_field(pj[i], m.docid, ppath, i)});
  }
  c.validate();
  return c;
}

void save_corpus(const Corpus& corpus, const std::string& directory,
                 const FieldMapping& m) {
  json qj = json::array();
  for (const auto& q : corpus.queries) {
    qj.push_back({{m.qid, q.qid}, {m.query_text, q.text}, {m.query_lang, q.lang}});
  }
  json ij = json::array();
  for (const auto& it : corpus.items) {
    ij.push_back({{m.docid, it.docid}, {m.item_title, it.title}, {m.item_lang, it.lang}});
  }
  json pj = json::array();
  for (const auto& p : corpus.pairs) {
    pj.push_back({{m.qid, p.qid}, {m.docid, p.docid}});
  }
  auto write = [&](const std::string& name, const json& j) {
    std::ofstream out(directory + "/" + name);
    if (!out) throw DataError("cannot write " + directory + "/" + name);
    out << j.dump(2) << "\n";
  };
  write("query.json", qj);
  write("item.json", ij);
  write("pairs_info.json", pj);
}

SplitResult split_train_test(const Corpus& corpus, std::uint64_t seed) {
  corpus.validate();
  if (corpus.pairs.size() < 5) throw DataError("split: need at least 5 pairs");

  std::map<std::string, std::string> qlang;
  for (const auto& q : corpus.queries) qlang[q.qid] = q.lang;

  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    strata[qlang.at(corpus.pairs[i].qid)].push_back(i);
  }
  SplitResult out;
  for (const auto& [lang, idxs] : strata) {
    if (idxs.size() < 5) {
      out.stratified = false;
      break;
    }
  }
  std::vector<bool> is_test(corpus.pairs.size(), false);
  auto assign = [&](std::vector<std::size_t> idxs, std::uint64_t s) {
    Rng rng(s);
    rng.shuffle(idxs);
    const std::size_t n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(idxs.size()) * 0.2));
    for (std::size_t i = 0; i < n_test; ++i) is_test[idxs[i]] = true;
  };
  if (out.stratified) {
    for (const auto& [lang, idxs] : strata) assign(idxs, seed ^ fnv1a(lang));
  } else {
    std::vector<std::size_t> all(corpus.pairs.size());
    std::iota(all.begin(), all.end(), 0);
    assign(all, seed);
  }

  std::set<std::string> train_q, test_q, train_d, test_d, paired_q, paired_d;
  for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
    const auto& p = corpus.pairs[i];
    paired_q.insert(p.qid);
    paired_d.insert(p.docid);
    if (is_test[i]) {
      out.test.pairs.push_back(p);
      test_q.insert(p.qid);
      test_d.insert(p.docid);
    } else {
      out.train.pairs.push_back(p);
      train_q.insert(p.qid);
      train_d.insert(p.docid);
    }
  }
  for (const auto& q : corpus.queries) {
    const bool unreferenced = !paired_q.count(q.qid);
    if (unreferenced || train_q.count(q.qid)) out.train.queries.push_back(q);
    if (unreferenced || test_q.count(q.qid)) out.test.queries.push_back(q);
  }
  for (const auto& it : corpus.items) {
    const bool unreferenced = !paired_d.count(it.docid);
    if (unreferenced || train_d.count(it.docid)) out.train.items.push_back(it);
    if (unreferenced || test_d.count(it.docid)) out.test.items.push_back(it);
  }

  // Ranking pairs split with the same per-language scheme.
  std::map<std::string, std::vector<std::size_t>> rstrata;
  for (std::size_t i = 0; i < corpus.ranking_pairs.size(); ++i) {
    rstrata[corpus.ranking_pairs[i].lang].push_back(i);
  }
  std::vector<bool> r_test(corpus.ranking_pairs.size(), false);
  for (const auto& [lang, idxs] : rstrata) {
    Rng rng(seed ^ fnv1a(lang) ^ 0xabcdull);
    std::vector<std::size_t> shuffled = idxs;
    rng.shuffle(shuffled);
    const std::size_t n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(shuffled.size()) * 0.2));
    for (std::size_t i = 0; i < n_test; ++i) r_test[shuffled[i]] = true;
  }
  for (std::size_t i = 0; i < corpus.ranking_pairs.size(); ++i) {
    (r_test[i] ? out.test : out.train).ranking_pairs.push_back(corpus.ranking_pairs[i]);
  }
  return out;
}

namespace {

// Token-set cosine overlap, |A ∩ B| / sqrt(|A||B|).
double token_overlap(const std::vector<std::string>& a,
                     const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end());
  const std::set<std::string> sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  if (sa.empty() || sb.empty()) return 0.0;
  return static_cast<double>(inter) /
         std::sqrt(static_cast<double>(sa.size()) * static_cast<double>(sb.size()));
}

std::string join(const std::vector<std::string>& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) s += ' ';
    s += toks[i];
  }
  return s;
}

}  // namespace

Corpus generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.languages.empty() || cfg.concepts == 0 || cfg.filler_vocab == 0 ||
      cfg.queries_per_language == 0) {
    throw ConfigError("generate_synthetic: counts must be >= 1");
  }
  if (cfg.noise < 0.0 || cfg.noise > 1.0) {
    throw ConfigError("generate_synthetic: noise must be in [0,1]");
  }
  Corpus c;
  Rng rng(cfg.seed);
  struct PositiveInfo {
    std::string lang;
    std::vector<std::string> query_tokens;
    std::vector<std::string> item_tokens;
  };
  std::vector<PositiveInfo> positives;

  for (const auto& lang : cfg.languages) {
    auto concept_tok = [&](std::size_t k) { return lang + "_c" + std::to_string(k); };
    auto filler_tok = [&](std::size_t j) { return lang + "_f" + std::to_string(j); };

    for (std::size_t qi = 0; qi < cfg.queries_per_language; ++qi) {
      const std::size_t n_query = 3 + rng.below(4);  // 3-6 tokens
      std::set<std::size_t> cset;
      while (cset.size() < n_query) cset.insert(rng.below(cfg.concepts));
      std::vector<std::string> qtoks;
      for (std::size_t k : cset) qtoks.push_back(concept_tok(k));
      rng.shuffle(qtoks);

      const std::string qid = "q_" + lang + "_" + std::to_string(qi);
      c.queries.push_back({qid, join(qtoks), lang});

      // Positive: query tokens (kept with prob 1-noise) padded with fillers.
      const std::size_t n_item = 10 + rng.below(16);  // 10-25 tokens
      std::vector<std::string> ptoks;
      for (const auto& t : qtoks) {
        if (rng.uniform() >= cfg.noise) {
          ptoks.push_back(t);
        } else {
          ptoks.push_back(filler_tok(rng.below(cfg.filler_vocab)));
        }
      }
      while (ptoks.size() < n_item) {
        ptoks.push_back(filler_tok(rng.below(cfg.filler_vocab)));
      }
      rng.shuffle(ptoks);
      const std::string pos_id = "d_" + lang + "_" + std::to_string(qi);
      c.items.push_back({pos_id, join(ptoks), lang});
      c.pairs.push_back({qid, pos_id});
      positives.push_back({lang, qtoks, ptoks});

      // Distractors: fillers and concepts absent from the query.
      for (std::size_t dj = 0; dj < cfg.distractors_per_query; ++dj) {
        const std::size_t n_d = 10 + rng.below(16);
        std::vector<std::string> dtoks;
        while (dtoks.size() < n_d) {
          if (rng.uniform() < 0.25) {
            std::size_t k = rng.below(cfg.concepts);
            while (cset.count(k)) k = rng.below(cfg.concepts);
            dtoks.push_back(concept_tok(k));
          } else {
            dtoks.push_back(filler_tok(rng.below(cfg.filler_vocab)));
          }
        }
        const std::string did =
            "d_" + lang + "_" + std::to_string(qi) + "_x" + std::to_string(dj);
        c.items.push_back({did, join(dtoks), lang});
      }
    }
  }

  // Graded ranking pairs: query vs its positive, vs distractor-style items,
  // and vs other queries' positives (intermediate overlap by shared concepts).
  std::size_t base = 0;
  for (const auto& lang : cfg.languages) {
    std::vector<std::size_t> lang_pos;
    for (std::size_t i = 0; i < positives.size(); ++i) {
      if (positives[i].lang == lang) lang_pos.push_back(i);
    }
    for (std::size_t i : lang_pos) {
      const auto& p = positives[i];
      c.ranking_pairs.push_back(
          {join(p.query_tokens), join(p.item_tokens),
           token_overlap(p.query_tokens, p.item_tokens), lang});
      for (int extra = 0; extra < 2 && lang_pos.size() > 1; ++extra) {
        std::size_t j = lang_pos[rng.below(lang_pos.size())];
        while (j == i) j = lang_pos[rng.below(lang_pos.size())];
        c.ranking_pairs.push_back(
            {join(p.query_tokens), join(positives[j].item_tokens),
             token_overlap(p.query_tokens, positives[j].item_tokens), lang});
      }
    }
    base += lang_pos.size();
  }
  c.validate();
  return c;
}

std::size_t token_edit_distance(const std::vector<std::string>& a,
                                const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

std::size_t char_edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::string> va, vb;
  va.reserve(a.size());
  vb.reserve(b.size());
  for (char ch : a) va.emplace_back(1, ch);
  for (char ch : b) vb.emplace_back(1, ch);
  return token_edit_distance(va, vb);
}

LengthStats length_stats(const Corpus& corpus) {
  if (corpus.queries.empty() && corpus.items.empty()) {
    throw DataError("length_stats: empty corpus");
  }
  std::vector<double> qlen, ilen;
  for (const auto& q : corpus.queries) qlen.push_back(static_cast<double>(q.text.size()));
  for (const auto& it : corpus.items) ilen.push_back(static_cast<double>(it.title.size()));
  LengthStats out;
  out.query = num::summarize(qlen);
  out.item = num::summarize(ilen);
  return out;
}

}  // namespace lira::data
