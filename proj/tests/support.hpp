#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "phonrec/g2p.hpp"
#include "phonrec/ipa.hpp"

namespace test {

inline const phonrec::ClassTable& classes() {
  static const phonrec::ClassTable t = phonrec::ClassTable::load(PHONREC_DATA_DIR "/ipa_classes.tsv");
  return t;
}

inline const phonrec::RuleTable& german() {
  static const phonrec::RuleTable r = phonrec::RuleTable::load(PHONREC_DATA_DIR "/german.rules");
  return r;
}

inline std::vector<std::string> toks(const std::string& s) {
  return phonrec::PhonemeSequence::from_tokens(s).flat();
}

}  // namespace test

#include <random>

namespace test {

// 20 vowels + 29 consonants: a 49-atom inventory like the German corpus.
inline const std::vector<std::string>& vowels49() {
  static const std::vector<std::string> v{"a", "e", "i", "o", "u", "y", "ø", "ɛ", "ɪ", "ʊ",
                                          "ʏ", "ɔ", "ə", "ɐ", "a:", "e:", "i:", "o:", "u:", "y:"};
  return v;
}
inline const std::vector<std::string>& consonants49() {
  static const std::vector<std::string> c{"b", "d", "f", "g", "h", "j", "k", "l", "m", "n",
                                          "p", "r", "s", "t", "v", "z", "ç", "ʃ", "ʒ", "ŋ",
                                          "ʁ", "ʔ", "x", "t͡s", "t͡ʃ", "p͡f", "c", "w", "q"};
  return c;
}

// Random words over the 49 atoms, skewed so that vowel-vowel and
// consonant-consonant pairs are plentiful. Every atom occurs.
inline std::vector<phonrec::PhonemeSequence> rich_corpus(std::size_t sentences = 300,
                                                         std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  const auto& V = vowels49();
  const auto& C = consonants49();
  std::vector<phonrec::PhonemeSequence> out;
  phonrec::PhonemeSequence all;
  all.words.push_back(V);
  all.words.push_back(C);
  out.push_back(all);
  for (std::size_t s = 0; s < sentences; ++s) {
    phonrec::PhonemeSequence seq;
    const std::size_t words = 1 + rng() % 5;
    for (std::size_t w = 0; w < words; ++w) {
      std::vector<std::string> word;
      const std::size_t len = 2 + rng() % 6;
      bool vowel = rng() % 2;
      for (std::size_t k = 0; k < len; ++k) {
        // Zipf-ish pick so counts are spread out
        const std::size_t a = rng() % 49, b = rng() % 49;
        const std::size_t pick = std::min(a, b);
        word.push_back(vowel ? V[pick % V.size()] : C[pick % C.size()]);
        if (rng() % 3 == 0) vowel = !vowel;
      }
      seq.words.push_back(std::move(word));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace test

#include "phonrec/corpus.hpp"

namespace test {

// Short German phrases run through the shipped rules; `n` train rows plus
// `valid` and `test` rows.
inline phonrec::CorpusManifest toy_manifest(std::size_t n, std::size_t valid = 0,
                                            std::size_t test_rows = 0, std::uint64_t seed = 1) {
  static const std::vector<std::string> words{"als", "sie", "von", "dem", "geist", "und",
                                              "wir", "mann", "haus", "ist", "gut", "rot",
                                              "bad", "see", "tag", "nein"};
  std::mt19937_64 rng(seed);
  phonrec::CorpusManifest m;
  for (std::size_t i = 0; i < n + valid + test_rows; ++i) {
    phonrec::Utterance u;
    u.id = "toy" + std::to_string(i);
    const std::size_t k = 1 + rng() % 2;
    for (std::size_t w = 0; w < k; ++w) {
      if (w) u.text += ' ';
      u.text += words[rng() % words.size()];
    }
    m.utterances.push_back(u);
  }
  m = phonrec::augment(m, german(), classes());
  return phonrec::split(m, {n, valid, test_rows}, seed);
}

}  // namespace test
