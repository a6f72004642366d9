#include <doctest.h>

#include <algorithm>
#include <random>

#include "phonrec/error.hpp"
#include "phonrec/g2p.hpp"
#include "support.hpp"

using namespace phonrec;

namespace {

const char* kToy =
    "::L = chs\n"
    "s\ts\t_\t_\n"
    "c\tk\t_\t_\n"
    "h\th\t_\t_\n"
    "ch\tx\t_\t_\n"
    "sch\tʃ\t_\t_\n";

}  // namespace

TEST_CASE("longest match beats shorter rules") {
  const auto rules = RuleTable::parse(kToy);
  CHECK(rules.rules().size() == 5);
  CHECK(transliterate("sch", rules, test::classes()).flat() == std::vector<std::string>{"ʃ"});
  CHECK(transliterate("sc", rules, test::classes()).flat() == std::vector<std::string>{"s", "k"});
  CHECK(transliterate("", rules, test::classes()).empty());
}

TEST_CASE("earliest rule wins among equal lengths") {
  const auto rules = RuleTable::parse(
      "::L = a\n"
      "a\te\t_\t_\n"
      "a\to\t_\t_\n");
  CHECK(transliterate_ipa("a", rules) == "e");
}

TEST_CASE("contexts: boundaries, classes and literals") {
  const auto rules = RuleTable::parse(
      "::V = ae\n"
      "::C = bt\n"
      "b\tp\t_\t#\n"
      "b\tb\t_\t_\n"
      "t\tt\t_\t_\n"
      "a\ta:\t_\t{C}{V}\n"
      "a\ta\t_\t_\n"
      "e\tə\t_\t_\n"
      "e\tɛ\tt\t_\n");
  CHECK(transliterate_ipa("ab", rules) == "ap");
  CHECK(transliterate_ipa("aba", rules) == "a:ba");
  CHECK(transliterate_ipa("abt", rules) == "abt");
  // the context-free e rule comes first, so the contextual one never fires
  CHECK(transliterate_ipa("te", rules) == "tə");
}

TEST_CASE("rule table validation") {
  CHECK_THROWS_AS(RuleTable::parse(""), Error);
  try {
    RuleTable::parse("::V = a\na\ta\t_\t{X}\n");
    FAIL("expected UndeclaredClass");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndeclaredClass);
  }
  // every declared character needs a context-free fallback
  CHECK_THROWS_AS(RuleTable::parse("::V = ab\na\ta\t_\t_\n"), Error);
  CHECK_THROWS_AS(RuleTable::parse("::V = a\na\ta\t_\n"), Error);
}

TEST_CASE("unmappable graphemes carry their position") {
  try {
    transliterate("als 3", test::german(), test::classes());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnmappableGrapheme);
    REQUIRE(e.position());
    CHECK(*e.position() == 4);
  }
}

TEST_CASE("German table reproduces the reference sentence") {
  const auto seq = transliterate("als sie von dem schönen Geist und dem Bartscherer überfallen wurden",
                                 test::german(), test::classes());
  CHECK(seq.to_ipa() == "als si: fo:n de:m ʃø:nən gaɪst ʊnd de:m baʁt͡ʃəʁəʁ y:bəʁfalən vʊʁdən");
  CHECK(transliterate_ipa("schönen", test::german()) == "ʃø:nən");
  CHECK(transliterate_ipa("dem", test::german()) == "de:m");
  CHECK(transliterate_ipa("wurden", test::german()) == "vʊʁdən");
}

TEST_CASE("German articles") {
  CHECK(transliterate_ipa("der des dem den die das", test::german()) ==
        "de:ʁ de:s de:m de:n di: das");
}

TEST_CASE("case, punctuation and NFD umlauts") {
  const auto& r = test::german();
  CHECK(transliterate_ipa("Schönen!", r) == transliterate_ipa("schönen", r));
  CHECK(transliterate_ipa("scho\xCC\x88nen", r) == "ʃø:nən");
  CHECK(transliterate_ipa("Als, sie.", r) == "als si:");
}

TEST_CASE("rules never cross word boundaries") {
  const auto& r = test::german();
  const auto& c = test::classes();
  const std::vector<std::string> words{"als", "sie", "Geist", "Bartscherer", "wurden", "spielt",
                                       "ich", "noch", "Sprache", "die"};
  for (const auto& a : words) {
    for (const auto& b : words) {
      auto left = transliterate(a, r, c);
      const auto right = transliterate(b, r, c);
      const auto both = transliterate(a + " " + b, r, c);
      left.words.insert(left.words.end(), right.words.begin(), right.words.end());
      CHECK(both == left);
    }
  }
}

TEST_CASE("no applicable rule is longer than the selected one") {
  // context-free table, so applicability is a plain prefix test
  const auto rules = RuleTable::parse(
      "::L = abc\n"
      "a\t1\t_\t_\n"
      "b\t2\t_\t_\n"
      "c\t3\t_\t_\n"
      "ab\t4\t_\t_\n"
      "bc\t5\t_\t_\n"
      "abc\t6\t_\t_\n"
      "cab\t7\t_\t_\n"
      "bb\t8\t_\t_\n");
  std::mt19937 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::u32string w;
    for (int k = 0, n = 1 + static_cast<int>(rng() % 9); k < n; ++k) w += U"abc"[rng() % 3];
    for (std::size_t pos = 0; pos < w.size();) {
      const auto sel = rules.select(w, pos);
      REQUIRE(sel);
      std::size_t longest = 0;
      for (const auto& r : rules.rules()) {
        if (w.compare(pos, r.match.size(), r.match) == 0) longest = std::max(longest, r.match.size());
      }
      CHECK(rules.rules()[*sel].match.size() == longest);
      pos += rules.rules()[*sel].match.size();
    }
  }
}

TEST_CASE("every German output symbol segments and classifies") {
  const auto& c = test::classes();
  const auto seq = transliterate(
      "Quark Xylophon Pfeffer Chor Vater Zwerg Jäger Häuser Bäume Loch Küche Ypsilon Ring "
      "tschüss Ecke Sohn Boot See Haar Kuh Mühe",
      test::german(), c);
  for (const auto& tok : seq.flat()) CHECK_NOTHROW(classify(tok, c));
}
