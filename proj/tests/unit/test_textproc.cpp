#include <algorithm>
#include <fstream>
#include <sstream>

#include "coiner/random.hpp"
#include "coiner/textproc.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace coiner;
using namespace coiner::text;

namespace {

using Tokens = std::vector<std::string>;

// Random sentence over a small alphabet of words, punctuation and case.
std::string random_sentence(Rng& rng) {
  static const std::vector<std::string> words = {
      "A", "user", "IS", "encapsulated", "by", "read-only", "Person", "object",
      "When", "it", "releases", "the", "LOCK", "XML", "iOS", "don't", "this",
      "of", "in", "are", "callbacks", "123", "x2", "Connecting", "caf\xC3\xA9",
      "user\xE2\x80\x99s", "ares", "is"};
  static const std::vector<std::string> seps = {" ", " ", ", ", ". ", "; ", " (", ") ", " - ", "!"};
  std::string s;
  const auto n = rng.below(14);
  for (std::size_t i = 0; i < n; ++i) {
    s += words[rng.below(words.size())];
    s += seps[rng.below(seps.size())];
  }
  return s;
}

std::string upper_ascii(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

TEST_CASE("tokenize examples") {
  CHECK(tokenize("A user is encapsulated by a read-only Person object.") ==
        Tokens{"A", "user", "is", "encapsulated", "by", "a", "read-only", "Person", "object"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("XML, iOS, XPath") == Tokens{"XML", "iOS", "XPath"});
  CHECK(tokenize("don't -leading trailing- a--b") == Tokens{"don't", "leading", "trailing", "a", "b"});
  CHECK(tokenize("A user\xE2\x80\x99s presence") == Tokens{"A", "user\xE2\x80\x99s", "presence"});
  CHECK(tokenize("foo.bar(x); // 42") == Tokens{"foo", "bar", "x", "42"});
  CHECK(tokenize("caf\xC3\xA9 au lait") == Tokens{"caf\xC3\xA9", "au", "lait"});
}

TEST_CASE("normalize examples") {
  const Tokens in{"A", "user", "is", "encapsulated"};
  CHECK(normalize(in) == Tokens{"user", "encapsulated"});
  CHECK(normalize(Tokens{}).empty());
  CHECK(normalize(Tokens{"This", "OF", "In"}).empty());
  for (const auto* w : {"is", "are", "in", "of", "this"}) CHECK(default_stopwords().contains(w));
  CHECK(default_stopwords().size() >= 100);
}

TEST_CASE("stopword file matches the builtin list") {
  const auto file = StopwordList::from_file(testing::source_path("data/stopwords.txt"));
  CHECK(file.words() == default_stopwords().words());
  testing::TempDir dir;
  testing::write_file(dir / "sw.txt", "# comment\n\nfoo\nbar\n");
  const auto custom = StopwordList::from_file(dir / "sw.txt");
  CHECK(custom.size() == 2);
  CHECK(normalize(Tokens{"Foo", "is", "BAR"}, custom) == Tokens{"is"});
}

TEST_CASE("stem examples") {
  CHECK(stem("encapsulating") == stem("encapsulated"));
  CHECK(stem("lock") == "lock");
  CHECK(stem("releases") == "releas");
}

TEST_CASE("stemmer agrees with published Porter outputs") {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"caresses", "caress"},     {"ponies", "poni"},         {"ties", "ti"},
      {"caress", "caress"},       {"cats", "cat"},            {"feed", "feed"},
      {"agreed", "agre"},         {"plastered", "plaster"},   {"bled", "bled"},
      {"motoring", "motor"},      {"sing", "sing"},           {"conflated", "conflat"},
      {"troubled", "troubl"},     {"sized", "size"},          {"hopping", "hop"},
      {"tanned", "tan"},          {"falling", "fall"},        {"hissing", "hiss"},
      {"fizzed", "fizz"},         {"failing", "fail"},        {"filing", "file"},
      {"happy", "happi"},         {"sky", "sky"},             {"relational", "relat"},
      {"conditional", "condit"},  {"rational", "ration"},     {"valenci", "valenc"},
      {"hesitanci", "hesit"},     {"digitizer", "digit"},     {"conformabli", "conform"},
      {"radicalli", "radic"},     {"differentli", "differ"},  {"vileli", "vile"},
      {"analogousli", "analog"},  {"vietnamization", "vietnam"}, {"predication", "predic"},
      {"operator", "oper"},       {"feudalism", "feudal"},    {"decisiveness", "decis"},
      {"hopefulness", "hope"},    {"callousness", "callous"}, {"formaliti", "formal"},
      {"sensitiviti", "sensit"},  {"sensibiliti", "sensibl"}, {"triplicate", "triplic"},
      {"formative", "form"},      {"formalize", "formal"},    {"electriciti", "electr"},
      {"electrical", "electr"},   {"hopeful", "hope"},        {"goodness", "good"},
      {"revival", "reviv"},       {"allowance", "allow"},     {"inference", "infer"},
      {"airliner", "airlin"},     {"gyroscopic", "gyroscop"}, {"adjustable", "adjust"},
      {"defensible", "defens"},   {"irritant", "irrit"},      {"replacement", "replac"},
      {"adjustment", "adjust"},   {"dependent", "depend"},    {"adoption", "adopt"},
      {"homologou", "homolog"},   {"communism", "commun"},    {"activate", "activ"},
      {"angulariti", "angular"},  {"homologous", "homolog"},  {"effective", "effect"},
      {"bowdlerize", "bowdler"},  {"probate", "probat"},      {"rate", "rate"},
      {"cease", "ceas"},          {"controll", "control"},    {"roll", "roll"},
      {"generalizations", "gener"}, {"oscillators", "oscil"}, {"a", "a"},
      {"is", "is"},               {"read-only", "read-onli"}};
  for (const auto& [word, root] : cases) {
    CAPTURE(word);
    CHECK(stem(word) == root);
  }
}

TEST_CASE("stemming conflates the bundled inflection pairs") {
  std::ifstream in(testing::source_path("tests/data/stem_pairs.txt"));
  std::string line;
  int pairs = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string inflected, root;
    fields >> inflected >> root;
    CAPTURE(inflected);
    CHECK(stem(inflected) == stem(root));
    ++pairs;
  }
  CHECK(pairs >= 25);
}

TEST_CASE("preprocess examples") {
  const auto s2 = preprocess("When it is finished manipulating the object, it releases the lock.");
  for (const auto* w : {"finished", "manipulating", "object", "releases", "lock"}) {
    CHECK(std::find(s2.terms.begin(), s2.terms.end(), stem(w)) != s2.terms.end());
  }
  CHECK(preprocess("This is of the").terms.empty());
  const auto s3 = preprocess("A user is encapsulated by a read-only Person object.");
  CHECK(s3.terms == Tokens{"user", "encapsul", "read-onli", "person", "object"});
}

TEST_CASE("preprocess equals stemmed normalized tokens without stopwords") {
  testing::for_all(500, 21, [](Rng& rng, int) {
    const auto s = random_sentence(rng);
    CAPTURE(s);
    Tokens expected;
    for (const auto& t : normalize(tokenize(s))) {
      auto st = stem(t);
      if (st.ends_with("'")) st.pop_back();
      if (st.ends_with("\xE2\x80\x99")) st.resize(st.size() - 3);
      if (!st.empty() && !default_stopwords().contains(st)) expected.push_back(st);
    }
    CHECK(preprocess(s).terms == expected);
  });
}

TEST_CASE("preprocess properties") {
  testing::for_all(500, 22, [](Rng& rng, int) {
    const auto s = random_sentence(rng);
    CAPTURE(s);
    const auto p = preprocess(s);
    CHECK(preprocess(upper_ascii(s)) == p);
    for (const auto& t : p.terms) {
      CHECK_FALSE(t.empty());
      CHECK(to_lower_ascii(t) == t);
      CHECK_FALSE(default_stopwords().contains(t));
    }
    // Tokenizing and normalizing is stable on its own joined output.
    const auto n = normalize(tokenize(s));
    std::string joined;
    for (const auto& t : n) joined += t + " ";
    CHECK(normalize(tokenize(joined)) == n);
    // Processed tokens never split or merge when re-tokenized.
    std::string terms;
    for (const auto& t : p.terms) terms += t + " ";
    CHECK(tokenize(terms) == p.terms);
  });
}

TEST_CASE("code point decoding") {
  const std::string s = "a\xE2\x80\x99\xF0\x9F\x98\x80\xFF";
  std::size_t i = 0;
  CHECK(next_code_point(s, i) == U'a');
  CHECK(next_code_point(s, i) == U'’');
  CHECK(next_code_point(s, i) == U'\U0001F600');
  CHECK(next_code_point(s, i) == 0xFF);
  CHECK(i == s.size());
  CHECK(is_word_char(U'7'));
  CHECK_FALSE(is_word_char(U','));
  CHECK(is_word_char(U'é'));
}
