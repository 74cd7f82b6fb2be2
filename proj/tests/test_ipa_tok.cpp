#include <doctest.h>

#include <cstdio>
#include <set>

#include "phonpipe/error.hpp"
#include "phonpipe/ipa_tok.hpp"
#include "test_util.hpp"

using namespace phonpipe;

namespace {

std::string join(const std::vector<PhonemeToken>& toks) {
  std::string out;
  for (const auto& t : toks) out += t.text;
  return out;
}

std::vector<std::string> texts(const std::vector<PhonemeToken>& toks) {
  std::vector<std::string> out;
  for (const auto& t : toks) out.push_back(t.text);
  return out;
}

// Pool of Polish-inventory phonemes for generated corpora, including the
// tie-bar affricates and nasal vowels.
const char* kPolishPhones[] = {
    "p", "b", "t", "d", "k", "\xC9\xA1", "f", "v", "s", "z",
    "\xCA\x82", "\xCA\x90", "\xC9\x95", "\xCA\x91", "x", "m", "n",
    "\xC9\xB2", "l", "r", "w", "j",
    "t\xCD\xA1s", "d\xCD\xA1z", "t\xCD\xA1\xCA\x82", "d\xCD\xA1\xCA\x90",
    "t\xCD\xA1\xC9\x95", "d\xCD\xA1\xCA\x91",
    "a", "\xC9\x9B", "i", "\xC9\xA8", "\xC9\x94", "u",
    "\xC9\x9B\xCC\x83", "\xC9\x94\xCC\x83"};

std::string random_ipa(testutil::Rng& rng, int n_words) {
  std::string s;
  for (int w = 0; w < n_words; ++w) {
    if (w > 0) s += " ";
    const int n = 1 + static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) {
      s += kPolishPhones[rng.below(sizeof(kPolishPhones) /
                                   sizeof(kPolishPhones[0]))];
    }
  }
  return s;
}

}  // namespace

TEST_CASE("tokenize single-codepoint phonemes") {
  const auto toks = texts(tokenize("pa"));
  REQUIRE(toks.size() == 2);
  CHECK(toks[0] == "p");
  CHECK(toks[1] == "a");
}

TEST_CASE("tie-bar affricate is one token") {
  // pat͡ʂka -> [p, a, t͡ʂ, k, a]
  const auto toks = texts(tokenize("pat\xCD\xA1\xCA\x82ka"));
  REQUIRE(toks.size() == 5);
  CHECK(toks[0] == "p");
  CHECK(toks[1] == "a");
  CHECK(toks[2] == "t\xCD\xA1\xCA\x82");
  CHECK(toks[3] == "k");
  CHECK(toks[4] == "a");
}

TEST_CASE("space separator becomes one token") {
  // na dɔm -> [n, a, _, d, ɔ, m]
  const auto toks = texts(tokenize("na d\xC9\x94m"));
  REQUIRE(toks.size() == 6);
  CHECK(toks[2] == " ");
  CHECK(toks[4] == "\xC9\x94");
}

TEST_CASE("combining diacritics and length marks attach") {
  // ɛ̃ (nasal) and aː (long) are single tokens
  const auto t1 = texts(tokenize("\xC9\x9B\xCC\x83"));
  REQUIRE(t1.size() == 1);
  const auto t2 = texts(tokenize("a\xCB\x90t"));
  REQUIRE(t2.size() == 2);
  CHECK(t2[0] == "a\xCB\x90");
}

TEST_CASE("stress mark prefixes the next token") {
  const auto toks = texts(tokenize("\xCB\x88pa"));
  REQUIRE(toks.size() == 2);
  CHECK(toks[0] == "\xCB\x88p");
  CHECK(toks[1] == "a");
}

TEST_CASE("unassignable codepoint names codepoint and offset") {
  try {
    tokenize("pa7a");
    FAIL("expected TokenError");
  } catch (const TokenError& e) {
    CHECK(e.offset() == 2);
    CHECK(std::string(e.what()).find("U+0037") != std::string::npos);
  }
}

TEST_CASE("lossless segmentation on generated corpus") {
  testutil::Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const std::string s = random_ipa(rng, 1 + static_cast<int>(rng.below(5)));
    const auto toks = tokenize(s);
    REQUIRE(join(toks) == s);
    for (const auto& t : toks) {
      REQUIRE(!t.text.empty());
      if (!t.is_space()) {
        REQUIRE(t.text.find(' ') == std::string::npos);
      }
    }
  }
}

TEST_CASE("vowel classification by base letter") {
  CHECK(is_vowel_token("a"));
  CHECK(is_vowel_token("\xC9\x9B\xCC\x83"));  // nasal open e
  CHECK(is_vowel_token("\xC9\x94"));
  CHECK(!is_vowel_token("t\xCD\xA1\xCA\x82"));
  CHECK(!is_vowel_token("m"));
  CHECK(!is_vowel_token(" "));
}

TEST_CASE("vocabulary build is deterministic and lexicographic") {
  const auto toks = tokenize("ba ab");
  const Vocabulary v = Vocabulary::build(toks);
  REQUIRE(v.size() == 3);  // space, a, b
  CHECK(v.id_of(" ") == 0);
  CHECK(v.id_of("a") == 1);
  CHECK(v.id_of("b") == 2);

  const Vocabulary v2 = Vocabulary::build(tokenize("ba ab"));
  CHECK(v2.tokens() == v.tokens());
  CHECK(v2.hash() == v.hash());
}

TEST_CASE("vocabulary of {a, b, a} has size 2") {
  const std::vector<PhonemeToken> toks = {{"a"}, {"b"}, {"a"}};
  const Vocabulary v = Vocabulary::build(toks);
  CHECK(v.size() == 2);
  CHECK(v.id_of("a") == 0);
  CHECK(v.id_of("b") == 1);
}

TEST_CASE("empty corpus rejected") {
  CHECK_THROWS_AS(Vocabulary::build({}), VocabError);
}

TEST_CASE("encode/decode") {
  const Vocabulary v = Vocabulary::build(tokenize("ab"));

  SUBCASE("empty input") { CHECK(v.encode({}).empty()); }
  SUBCASE("basic") {
    const auto ids = v.encode({{"a"}, {"b"}});
    CHECK(ids == std::vector<TokenId>{0, 1});
    CHECK(v.decode(ids) == "ab");
  }
  SUBCASE("OOV names token and position") {
    CHECK_THROWS_WITH_AS(v.encode({{"q"}}), doctest::Contains("position 0"),
                         VocabError);
  }
  SUBCASE("id out of range") {
    CHECK_THROWS_WITH_AS(v.decode({99}), doctest::Contains("out of range"),
                         VocabError);
  }
}

TEST_CASE("encode/decode round-trip on generated strings") {
  testutil::Rng rng(23);
  std::vector<PhonemeToken> corpus;
  std::vector<std::string> strings;
  for (int i = 0; i < 50; ++i) {
    strings.push_back(random_ipa(rng, 3));
    const auto toks = tokenize(strings.back());
    corpus.insert(corpus.end(), toks.begin(), toks.end());
  }
  const Vocabulary v = Vocabulary::build(corpus);
  for (const std::string& s : strings) {
    CHECK(v.decode(v.encode(tokenize(s))) == s);
  }
}

TEST_CASE("vocabulary save/load keeps ids stable") {
  const Vocabulary v = Vocabulary::build(tokenize("na d\xC9\x94m"));
  const std::string path = "/tmp/phonpipe_test_vocab.txt";
  v.save_file(path);
  const Vocabulary w = Vocabulary::load_file(path);
  CHECK(w.tokens() == v.tokens());
  CHECK(w.hash() == v.hash());
  CHECK(w.id_of(" ") == v.id_of(" "));  // the space token survives the file
  std::remove(path.c_str());
}
