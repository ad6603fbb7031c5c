#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lira/data.hpp"
#include "lira/errors.hpp"
#include "test_util.hpp"

namespace data = lira::data;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("lira_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

data::Corpus tiny_corpus() {
  data::Corpus c;
  c.queries = {{"q1", "one two", "en"}, {"q2", "three", "vi"}};
  c.items = {{"d1", "one two extra", "en"}, {"d2", "three four five", "vi"}};
  c.pairs = {{"q1", "d1"}, {"q2", "d2"}};
  return c;
}

std::set<std::string> token_set(const std::string& text) {
  std::set<std::string> out;
  for (const auto& t : data::tokenize(text)) out.insert(t);
  return out;
}

}  // namespace

TEST_CASE("tokenize splits on whitespace") {
  const auto toks = data::tokenize("  one  two\tthree\n");
  REQUIRE(toks.size() == 3);
  CHECK(toks[0] == "one");
  CHECK(toks[2] == "three");
  CHECK(data::tokenize("").empty());
}

TEST_CASE("corpus validation catches broken records") {
  CHECK_NOTHROW(tiny_corpus().validate());

  data::Corpus dup = tiny_corpus();
  dup.queries.push_back({"q1", "again", "en"});
  CHECK_THROWS_AS(dup.validate(), lira::DataError);

  data::Corpus empty_text = tiny_corpus();
  empty_text.items[0].title = "";
  CHECK_THROWS_AS(empty_text.validate(), lira::DataError);

  data::Corpus dangling = tiny_corpus();
  dangling.pairs.push_back({"q1", "missing-doc"});
  CHECK_THROWS_AS(dangling.validate(), lira::DataError);
}

TEST_CASE("find and language helpers") {
  const data::Corpus c = tiny_corpus();
  REQUIRE(c.find_query("q2") != nullptr);
  CHECK(c.find_query("q2")->lang == "vi");
  CHECK(c.find_query("nope") == nullptr);
  REQUIRE(c.find_item("d1") != nullptr);
  CHECK(c.find_item("d1")->title == "one two extra");
  const auto langs = c.languages();
  CHECK(std::find(langs.begin(), langs.end(), "en") != langs.end());
  CHECK(std::find(langs.begin(), langs.end(), "vi") != langs.end());
}

TEST_CASE("save and load round-trip preserves every record") {
  const fs::path dir = temp_dir("roundtrip");
  const data::Corpus c = tiny_corpus();
  data::save_corpus(c, dir.string());
  const data::Corpus back = data::load_corpus(dir.string());
  REQUIRE(back.queries.size() == c.queries.size());
  REQUIRE(back.items.size() == c.items.size());
  REQUIRE(back.pairs.size() == c.pairs.size());
  for (std::size_t i = 0; i < c.queries.size(); ++i) {
    CHECK(back.queries[i].qid == c.queries[i].qid);
    CHECK(back.queries[i].text == c.queries[i].text);
    CHECK(back.queries[i].lang == c.queries[i].lang);
  }
  CHECK(back.items[1].title == "three four five");
  CHECK(back.pairs[0].docid == "d1");
  fs::remove_all(dir);
}

TEST_CASE("loading a dangling pair names the missing document") {
  const fs::path dir = temp_dir("dangling");
  data::save_corpus(tiny_corpus(), dir.string());
  {
    std::ofstream f(dir / "pairs_info.json");
    f << R"([{"qid": "q1", "docid": "ghost-doc"}])";
  }
  try {
    data::load_corpus(dir.string());
    FAIL("expected a data error");
  } catch (const lira::DataError& e) {
    CHECK(std::string(e.what()).find("ghost-doc") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("loading rejects a non-array top level and missing fields") {
  const fs::path dir = temp_dir("malformed");
  data::save_corpus(tiny_corpus(), dir.string());
  {
    std::ofstream f(dir / "query.json");
    f << R"({"qid": "q1"})";
  }
  CHECK_THROWS_AS(data::load_corpus(dir.string()), lira::DataError);
  {
    std::ofstream f(dir / "query.json");
    f << R"([{"qid": "q1", "lang": "en"}])";  // text is missing
  }
  CHECK_THROWS_AS(data::load_corpus(dir.string()), lira::DataError);
  fs::remove_all(dir);
}

TEST_CASE("alternate field names load through a mapping") {
  const fs::path dir = temp_dir("mapping");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "query.json");
    f << R"([{"id": "q1", "q": "hello there", "language": "en"}])";
  }
  {
    std::ofstream f(dir / "item.json");
    f << R"([{"doc": "d1", "name": "hello there again", "language": "en"}])";
  }
  {
    std::ofstream f(dir / "pairs_info.json");
    f << R"([{"id": "q1", "doc": "d1"}])";
  }
  data::FieldMapping m;
  m.qid = "id";
  m.query_text = "q";
  m.query_lang = "language";
  m.docid = "doc";
  m.item_title = "name";
  m.item_lang = "language";
  const data::Corpus c = data::load_corpus(dir.string(), m);
  REQUIRE(c.queries.size() == 1);
  CHECK(c.queries[0].text == "hello there");
  CHECK(c.items[0].docid == "d1");
  fs::remove_all(dir);
}

TEST_CASE("synthetic generation is deterministic and well formed") {
  data::SyntheticConfig cfg;
  cfg.languages = {"vi", "th"};
  cfg.queries_per_language = 20;
  const data::Corpus a = data::generate_synthetic(cfg);
  const data::Corpus b = data::generate_synthetic(cfg);
  CHECK_NOTHROW(a.validate());
  REQUIRE(a.queries.size() == b.queries.size());
  for (std::size_t i = 0; i < a.queries.size(); ++i) {
    CHECK(a.queries[i].text == b.queries[i].text);
  }
  REQUIRE(a.items.size() == b.items.size());
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].title == b.items[i].title);
  }
  cfg.seed = 2;
  const data::Corpus c = data::generate_synthetic(cfg);
  bool any_differs = false;
  for (std::size_t i = 0; i < std::min(a.queries.size(), c.queries.size()); ++i) {
    if (a.queries[i].text != c.queries[i].text) any_differs = true;
  }
  CHECK(any_differs);
}

TEST_CASE("synthetic queries are short and items are long") {
  data::SyntheticConfig cfg;
  cfg.languages = {"vi"};
  cfg.queries_per_language = 30;
  const data::Corpus c = data::generate_synthetic(cfg);
  for (const auto& q : c.queries) {
    const auto n = data::tokenize(q.text).size();
    CHECK(n >= 3);
    CHECK(n <= 6);
  }
  for (const auto& it : c.items) {
    const auto n = data::tokenize(it.title).size();
    CHECK(n >= 10);
    CHECK(n <= 25);
  }
  const data::LengthStats ls = data::length_stats(c);
  CHECK(ls.item.mean > ls.query.mean);
}

TEST_CASE("noise-free positives contain every query token") {
  data::SyntheticConfig cfg;
  cfg.languages = {"vi", "th"};
  cfg.queries_per_language = 25;
  cfg.noise = 0.0;
  const data::Corpus c = data::generate_synthetic(cfg);
  REQUIRE(!c.pairs.empty());
  for (const auto& p : c.pairs) {
    const auto* q = c.find_query(p.qid);
    const auto* d = c.find_item(p.docid);
    REQUIRE(q != nullptr);
    REQUIRE(d != nullptr);
    CHECK(q->lang == d->lang);
    const auto item_tokens = token_set(d->title);
    for (const auto& tok : data::tokenize(q->text)) {
      CHECK(item_tokens.count(tok) == 1);
    }
  }
}

TEST_CASE("synthetic ranking pairs carry graded overlap gold") {
  data::SyntheticConfig cfg;
  cfg.languages = {"vi"};
  cfg.queries_per_language = 20;
  const data::Corpus c = data::generate_synthetic(cfg);
  REQUIRE(!c.ranking_pairs.empty());
  bool some_positive = false, some_below_one = false;
  for (const auto& rp : c.ranking_pairs) {
    CHECK(rp.gold >= 0.0);
    CHECK(rp.gold <= 1.0);
    CHECK(rp.lang == "vi");
    if (rp.gold > 0.5) some_positive = true;
    if (rp.gold < 0.5) some_below_one = true;
  }
  CHECK(some_positive);
  CHECK(some_below_one);
}

TEST_CASE("train/test split is a seeded 4:1 partition of the pairs") {
  data::SyntheticConfig cfg;
  cfg.languages = {"vi", "th", "id"};
  cfg.queries_per_language = 40;
  const data::Corpus c = data::generate_synthetic(cfg);
  const data::SplitResult s1 = data::split_train_test(c, 9);
  const data::SplitResult s2 = data::split_train_test(c, 9);
  const data::SplitResult s3 = data::split_train_test(c, 10);
  CHECK(s1.stratified);
  CHECK(s1.train.pairs.size() + s1.test.pairs.size() == c.pairs.size());
  const double frac = static_cast<double>(s1.test.pairs.size()) /
                      static_cast<double>(c.pairs.size());
  CHECK(frac == doctest::Approx(0.2).epsilon(0.05));

  // Same seed reproduces the split; a different seed moves it.
  REQUIRE(s1.test.pairs.size() == s2.test.pairs.size());
  for (std::size_t i = 0; i < s1.test.pairs.size(); ++i) {
    CHECK(s1.test.pairs[i].qid == s2.test.pairs[i].qid);
  }
  bool moved = s3.test.pairs.size() != s1.test.pairs.size();
  for (std::size_t i = 0; !moved && i < s1.test.pairs.size(); ++i) {
    moved = s1.test.pairs[i].qid != s3.test.pairs[i].qid;
  }
  CHECK(moved);

  // No pair crosses the sides.
  std::set<std::string> train_qids;
  for (const auto& p : s1.train.pairs) train_qids.insert(p.qid);
  for (const auto& p : s1.test.pairs) CHECK(train_qids.count(p.qid) == 0);

  // Each side is internally consistent.
  CHECK_NOTHROW(s1.train.validate());
  CHECK_NOTHROW(s1.test.validate());
}

TEST_CASE("split keeps per-language test fractions balanced") {
  data::SyntheticConfig cfg;
  cfg.languages = {"vi", "th"};
  cfg.queries_per_language = 50;
  const data::Corpus c = data::generate_synthetic(cfg);
  const data::SplitResult s = data::split_train_test(c, 4);
  REQUIRE(s.stratified);
  for (const auto& lang : {"vi", "th"}) {
    std::size_t total = 0, test = 0;
    for (const auto& p : c.pairs) {
      if (c.find_query(p.qid)->lang == lang) ++total;
    }
    for (const auto& p : s.test.pairs) {
      if (s.test.find_query(p.qid)->lang == lang) ++test;
    }
    CHECK(static_cast<double>(test) / static_cast<double>(total) ==
          doctest::Approx(0.2).epsilon(0.05));
  }
}

TEST_CASE("tiny strata fall back to an unstratified split") {
  data::Corpus c;
  for (int i = 0; i < 12; ++i) {
    const std::string lang = "l" + std::to_string(i % 6);  // 2 pairs per language
    const std::string qid = "q" + std::to_string(i);
    const std::string docid = "d" + std::to_string(i);
    c.queries.push_back({qid, "text " + qid, lang});
    c.items.push_back({docid, "title for " + docid + " padding", lang});
    c.pairs.push_back({qid, docid});
  }
  const data::SplitResult s = data::split_train_test(c, 1);
  CHECK(!s.stratified);
  CHECK(s.train.pairs.size() + s.test.pairs.size() == c.pairs.size());
}

TEST_CASE("token edit distance hand values and metric axioms") {
  CHECK(data::token_edit_distance({"a", "b", "c"}, {"b", "c", "d"}) == 2);
  CHECK(data::token_edit_distance({"a", "b"}, {"a", "b"}) == 0);
  CHECK(data::token_edit_distance({}, {"x", "y", "z"}) == 3);
  CHECK(data::token_edit_distance({"a"}, {}) == 1);
  testutil::Rng rng(131);
  const auto random_seq = [&](std::size_t max_len) {
    std::vector<std::string> s;
    const std::size_t n = rng.below(max_len + 1);
    for (std::size_t i = 0; i < n; ++i) s.push_back(std::string(1, 'a' + rng.below(4)));
    return s;
  };
  for (int t = 0; t < 50; ++t) {
    const auto a = random_seq(6), b = random_seq(6), m = random_seq(6);
    const std::size_t dab = data::token_edit_distance(a, b);
    CHECK(dab == data::token_edit_distance(b, a));
    CHECK((dab == 0) == (a == b));
    CHECK(dab <= data::token_edit_distance(a, m) + data::token_edit_distance(m, b));
  }
}

TEST_CASE("character edit distance") {
  CHECK(data::char_edit_distance("kitten", "sitting") == 3);
  CHECK(data::char_edit_distance("", "abc") == 3);
  CHECK(data::char_edit_distance("same", "same") == 0);
}

TEST_CASE("length_stats summarizes raw string lengths") {
  data::Corpus c;
  c.queries = {{"q1", "abc", "en"}, {"q2", "abcde", "en"}};
  c.items = {{"d1", "0123456789", "en"}};
  c.pairs = {{"q1", "d1"}};
  const data::LengthStats ls = data::length_stats(c);
  CHECK(ls.query.count == 2);
  CHECK(ls.query.min == 3.0);
  CHECK(ls.query.max == 5.0);
  CHECK(ls.query.mean == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(ls.item.count == 1);
  CHECK(ls.item.mean == doctest::Approx(10.0).epsilon(1e-12));
  CHECK_THROWS_AS(data::length_stats(data::Corpus{}), lira::DataError);
}
