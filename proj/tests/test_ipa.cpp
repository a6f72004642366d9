#include <doctest.h>

#include <algorithm>
#include <random>

#include "phonrec/error.hpp"
#include "phonrec/ipa.hpp"
#include "phonrec/utf8.hpp"
#include "support.hpp"

using namespace phonrec;

TEST_CASE("utf8 decode and encode round trip") {
  const std::string s = "als si: ʃø:nən t͡ʃ";
  CHECK(utf8::encode(utf8::decode(s)) == s);
  CHECK(utf8::length("ʃø:") == 3);
  CHECK_THROWS_AS(utf8::decode("\xC3"), Error);
  CHECK_THROWS_AS(utf8::decode("\xFF"), Error);
}

TEST_CASE("segment_ipa splits words and tokens") {
  const auto& t = test::classes();
  const auto seq = segment_ipa("als si:", t);
  REQUIRE(seq.words.size() == 2);
  CHECK(seq.words[0] == std::vector<std::string>{"a", "l", "s"});
  CHECK(seq.words[1] == std::vector<std::string>{"s", "i:"});
  CHECK(segment_ipa("", t).empty());
  CHECK(segment_ipa("   ", t).empty());
}

TEST_CASE("tie bar binds two bases into one token") {
  const auto seq = segment_ipa("t͡ʃ", test::classes());
  REQUIRE(seq.size() == 1);
  CHECK(seq.flat()[0] == "t͡ʃ");
  CHECK(segment_ipa("baʁt͡ʃəʁ", test::classes()).size() == 6);
}

TEST_CASE("length marks are normalized to ':'") {
  const auto seq = segment_ipa("siː", test::classes());
  CHECK(seq.flat() == std::vector<std::string>{"s", "i:"});
  CHECK(normalize_symbol("aː") == "a:");
}

TEST_CASE("combining marks and modifier letters attach to the base") {
  const auto seq = segment_ipa("n̩ tʰa", test::classes());
  CHECK(seq.flat() == std::vector<std::string>{"n̩", "tʰ", "a"});
}

TEST_CASE("unknown characters report their code point position") {
  try {
    segment_ipa("als 5i:", test::classes());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownCharacter);
    REQUIRE(e.position());
    CHECK(*e.position() == 4);
  }
  CHECK_THROWS_AS(segment_ipa(":a", test::classes()), Error);
  CHECK_THROWS_AS(segment_ipa("t͡", test::classes()), Error);
}

TEST_CASE("classify ignores length marks") {
  const auto& t = test::classes();
  CHECK(classify("a", t) == PhonemeClass::Vowel);
  CHECK(classify("ʃ", t) == PhonemeClass::Consonant);
  CHECK(classify("i:", t) == PhonemeClass::Vowel);
  CHECK(classify("t͡s", t) == PhonemeClass::Consonant);
  CHECK_THROWS_AS(classify("5", t), Error);
}

TEST_CASE("class table parsing") {
  const auto t = ClassTable::parse("# comment\na\tV\nb\tC\n\n");
  CHECK(t.size() == 2);
  CHECK(t.lookup(U'a') == PhonemeClass::Vowel);
  CHECK_FALSE(t.lookup(U'z'));
  CHECK_THROWS_AS(ClassTable::parse("a\tX\n"), Error);
  CHECK_THROWS_AS(ClassTable::parse("ab\tV\n"), Error);
}

TEST_CASE("segmentation round-trips random IPA strings") {
  const auto& t = test::classes();
  const std::vector<std::string> pieces{"a", "e:", "ʃ", "t͡s", "ø:", "ə", "ʁ", "ɪ", "ŋ", "n̩", "pʰ"};
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::string raw;
    const int words = 1 + static_cast<int>(rng() % 4);
    for (int w = 0; w < words; ++w) {
      if (w) raw += ' ';
      const int n = 1 + static_cast<int>(rng() % 6);
      for (int k = 0; k < n; ++k) raw += pieces[rng() % pieces.size()];
    }
    const auto seq = segment_ipa(raw, t);
    CHECK(seq.to_ipa() == raw);
    CHECK(segment_ipa(raw, t) == seq);
    for (const auto& tok : seq.flat()) CHECK_NOTHROW(classify(tok, t));
  }
}

TEST_CASE("token serialization round trip") {
  const auto seq = segment_ipa("als si: fo:n", test::classes());
  CHECK(seq.to_tokens() == "a l s | s i: | f o: n");
  CHECK(PhonemeSequence::from_tokens(seq.to_tokens()) == seq);
  CHECK(PhonemeSequence::from_tokens("").empty());
}

TEST_CASE("induce_inventory keeps first-occurrence order") {
  const std::vector<PhonemeSequence> corpus{PhonemeSequence::from_tokens("a l s"),
                                            PhonemeSequence::from_tokens("a l")};
  const auto inv = induce_inventory(corpus, test::classes());
  REQUIRE(inv.size() == 3);
  CHECK(inv.phonemes()[0].symbol == "a");
  CHECK(inv.phonemes()[1].symbol == "l");
  CHECK(inv.phonemes()[2].symbol == "s");
  CHECK(inv.class_of("a") == PhonemeClass::Vowel);

  const std::vector<PhonemeSequence> one{PhonemeSequence::from_tokens("a")};
  CHECK(induce_inventory(one, test::classes()).size() == 1);

  // Permuting the corpus changes order only, never membership.
  std::vector<PhonemeSequence> rev(corpus.rbegin(), corpus.rend());
  const auto inv2 = induce_inventory(rev, test::classes());
  CHECK(inv2.size() == inv.size());
  for (const auto& p : inv.phonemes()) CHECK(inv2.contains(p.symbol));
}
