#include <doctest.h>

#include <random>

#include "phonrec/error.hpp"
#include "phonrec/vocab.hpp"
#include "support.hpp"

using namespace phonrec;

namespace {

PhonemeSequence P(const std::string& s) { return PhonemeSequence::from_tokens(s); }

std::vector<std::string> units(const std::vector<int>& ids, const Vocabulary& v) {
  std::vector<std::string> out;
  for (int id : ids) out.push_back(v.unit(id));
  return out;
}

}  // namespace

TEST_CASE("count_bigrams within words") {
  const std::vector<PhonemeSequence> corpus{P("a l s | a l")};
  const auto inv = induce_inventory(corpus, test::classes());
  const auto all = count_bigrams(corpus, BigramScope::All, inv);
  REQUIRE(all.counts.size() == 2);
  CHECK(all.counts.at({"a", "l"}) == 2);
  CHECK(all.counts.at({"l", "s"}) == 1);
  // "s | a" crosses a word boundary
  CHECK(all.counts.count({"s", "a"}) == 0);
  CHECK(count_bigrams(corpus, BigramScope::VowelVowel, inv).counts.empty());

  const std::vector<PhonemeSequence> ai{P("a ɪ")};
  const auto vv = count_bigrams(ai, BigramScope::VowelVowel, induce_inventory(ai, test::classes()));
  CHECK(vv.counts.at({"a", "ɪ"}) == 1);
}

TEST_CASE("bigram counting is additive") {
  const auto corpus = test::rich_corpus(100, 3);
  const auto inv = induce_inventory(corpus, test::classes());
  const std::span<const PhonemeSequence> all(corpus);
  auto left = count_bigrams(all.first(40), BigramScope::All, inv);
  left += count_bigrams(all.subspan(40), BigramScope::All, inv);
  CHECK(left.counts == count_bigrams(all, BigramScope::All, inv).counts);
}

TEST_CASE("top_n ordering") {
  BigramTable t;
  t.counts[{"a", "l"}] = 2;
  t.counts[{"l", "s"}] = 1;
  CHECK(top_n(t, 1).bigrams == std::vector<Bigram>{{"a", "l"}});
  CHECK(top_n(t, 0).bigrams.empty());
  CHECK(top_n(t, 5).short_list);

  BigramTable tie;
  tie.counts[{"a", "b"}] = 1;
  tie.counts[{"a", "a"}] = 1;
  CHECK(top_n(tie, 1).bigrams == std::vector<Bigram>{{"a", "a"}});
}

TEST_CASE("top_n is insensitive to corpus order") {
  auto corpus = test::rich_corpus(80, 9);
  const auto inv = induce_inventory(corpus, test::classes());
  const auto a = top_n(count_bigrams(corpus, BigramScope::All, inv), 30).bigrams;
  std::reverse(corpus.begin(), corpus.end());
  CHECK(top_n(count_bigrams(corpus, BigramScope::All, inv), 30).bigrams == a);
}

TEST_CASE("variant labels") {
  CHECK(Variant::parse("base").n == 0);
  CHECK(Variant::parse("vowel30").scope == BigramScope::VowelVowel);
  CHECK(Variant::parse("const20").n == 20);
  CHECK(Variant::parse("total10").scope == BigramScope::All);
  CHECK_THROWS_AS(Variant::parse("total15"), Error);
  CHECK_THROWS_AS(Variant::parse("vowel"), Error);
  for (const auto& v : Variant::all()) CHECK(Variant::parse(v.label()) == v);
}

TEST_CASE("vocabulary sizes follow the formula") {
  const auto corpus = test::rich_corpus();
  const auto inv = induce_inventory(corpus, test::classes());
  REQUIRE(inv.size() == 49);
  for (const auto& v : Variant::all()) {
    bool short_list = true;
    const auto vocab = build_variant(corpus, inv, v, &short_list);
    CHECK_FALSE(short_list);
    CHECK(vocab.size() == 49 + v.n + 4);
    CHECK(vocab.variant() == v.label());
  }
}

TEST_CASE("build_vocab layout and errors") {
  const std::vector<PhonemeSequence> corpus{P("g a ɪ s t")};
  const auto inv = induce_inventory(corpus, test::classes());
  const std::vector<Bigram> merges{{"a", "ɪ"}};
  const auto v = build_vocab(inv, merges, "vowel10");
  CHECK(v.size() == 5 + 1 + 4);
  CHECK(v.unit(Vocabulary::kPad) == "<pad>");
  CHECK(v.unit(Vocabulary::kUnk) == "<unk>");
  CHECK(v.unit(4) == "g");
  CHECK(v.unit(9) == "aɪ");
  CHECK(v.is_merged(9));
  CHECK(v.parts(9) == Bigram{"a", "ɪ"});

  const std::vector<Bigram> bad{{"a", "x"}};
  CHECK_THROWS_AS(build_vocab(inv, bad, "x"), Error);
}

TEST_CASE("tokenize and detokenize") {
  const std::vector<PhonemeSequence> corpus{P("g a ɪ s t | a l s")};
  const auto inv = induce_inventory(corpus, test::classes());
  const std::vector<Bigram> merges{{"a", "ɪ"}};
  const auto v = build_vocab(inv, merges, "vowel10");
  const auto ids = tokenize(P("g a ɪ s t"), v);
  CHECK(units(ids, v) == std::vector<std::string>{"g", "aɪ", "s", "t"});
  CHECK(detokenize(ids, v).flat() == test::toks("g a ɪ s t"));
  CHECK(tokenize(PhonemeSequence{}, v).empty());

  const auto base = build_vocab(inv, {}, "base");
  CHECK(units(tokenize(P("a l s"), base), base) == std::vector<std::string>{"a", "l", "s"});

  const std::vector<int> bos_eos{Vocabulary::kBos, Vocabulary::kEos};
  CHECK(detokenize(bos_eos, v).empty());
  const std::vector<int> padded{Vocabulary::kPad, v.atom_index("a"), Vocabulary::kPad};
  CHECK(detokenize(padded, v).flat() == std::vector<std::string>{"a"});
  const std::vector<int> out_of_range{99};
  CHECK_THROWS_AS(detokenize(out_of_range, v), Error);

  try {
    tokenize(P("a l | ʃ"), v);
    FAIL("expected UnknownPhoneme");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownPhoneme);
    CHECK(e.position() == 2u);
  }
}

TEST_CASE("merges never cross word boundaries") {
  const std::vector<PhonemeSequence> corpus{P("a | ɪ")};
  const auto inv = induce_inventory(corpus, test::classes());
  const std::vector<Bigram> merges{{"a", "ɪ"}};
  const auto v = build_vocab(inv, merges, "vowel10");
  CHECK(tokenize(P("a | ɪ"), v).size() == 2);
  CHECK(tokenize(P("a ɪ"), v).size() == 1);
}

TEST_CASE("greedy merging leaves no eligible adjacent pair") {
  const auto corpus = test::rich_corpus(120, 4);
  const auto inv = induce_inventory(corpus, test::classes());
  const auto v = build_variant(corpus, inv, Variant::parse("total30"));
  for (const auto& seq : corpus) {
    for (const auto& word : seq.words) {
      PhonemeSequence one;
      one.words.push_back(word);
      const auto ids = tokenize(one, v);
      // scan positions: an atomic unit whose atom starts a merge with the
      // next atom would have been merged
      for (std::size_t k = 0; k + 1 < ids.size(); ++k) {
        if (v.is_merged(ids[k]) || v.is_merged(ids[k + 1])) continue;
        CHECK(v.merge_index(v.unit(ids[k]), v.unit(ids[k + 1])) < 0);
      }
    }
  }
}

TEST_CASE("round trip over random sequences and all variants") {
  const auto corpus = test::rich_corpus();
  const auto inv = induce_inventory(corpus, test::classes());
  std::mt19937_64 rng(2);
  for (const auto& variant : Variant::all()) {
    const auto v = build_variant(corpus, inv, variant);
    for (int t = 0; t < 100; ++t) {
      std::vector<std::string> flat;
      for (std::size_t k = 0, n = rng() % 30; k < n; ++k) {
        flat.push_back(inv.phonemes()[rng() % inv.size()].symbol);
      }
      const auto seq = PhonemeSequence::from_flat(flat);
      CHECK(detokenize(tokenize(seq, v), v) == seq);
    }
  }
}

TEST_CASE("vocabulary file round trip") {
  const auto corpus = test::rich_corpus();
  const auto inv = induce_inventory(corpus, test::classes());
  const auto v = build_variant(corpus, inv, Variant::parse("vowel30"));
  const auto text = v.to_text();
  CHECK(text.rfind("#variant=vowel30 n=30 inventory=49\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 1 + 83);
  const auto back = Vocabulary::parse(text);
  CHECK(back.size() == v.size());
  CHECK(back.fingerprint() == v.fingerprint());
  CHECK(back.to_text() == text);
}
