#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "phonrec/ipa.hpp"

namespace phonrec {

enum class BigramScope { VowelVowel, ConsonantConsonant, All };

using Bigram = std::pair<std::string, std::string>;

struct BigramTable {
  std::map<Bigram, std::uint64_t> counts;
  BigramScope scope = BigramScope::All;

  // Adds another table's counts; scopes must agree.
  BigramTable& operator+=(const BigramTable& other);
};

/// Adjacent within-word pairs passing the scope's class filter.
BigramTable count_bigrams(std::span<const PhonemeSequence> corpus, BigramScope scope,
                          const PhonemeInventory& inventory);

struct TopBigrams {
  std::vector<Bigram> bigrams;
  bool short_list = false;  // fewer than n candidates were available
};

/// By count descending, ties by (first, second) code point order.
TopBigrams top_n(const BigramTable& table, std::size_t n);

/// One of the ten unit sets: base, vowel{10,20,30}, const{10,20,30},
/// total{10,20,30}.
struct Variant {
  BigramScope scope = BigramScope::All;
  std::size_t n = 0;

  std::string label() const;
  static Variant parse(std::string_view label);  // throws UnknownVariant
  static std::array<Variant, 10> all();

  bool operator==(const Variant&) const = default;
};

/// Output units: specials, then atomic phonemes in inventory order, then
/// merged bigram units in selection order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecials = 4;
  static constexpr std::array<std::string_view, 4> kSpecialNames = {"<pad>", "<bos>", "<eos>",
                                                                     "<unk>"};

  Vocabulary() = default;

  const std::string& variant() const { return variant_; }
  std::size_t merged_count() const { return merges_.size(); }
  std::size_t inventory_size() const { return atoms_; }
  std::size_t size() const { return units_.size(); }

  // Display form: merged units are the concatenated atoms ("aɪ").
  const std::string& unit(int index) const;
  bool is_special(int index) const { return index >= 0 && index < kNumSpecials; }
  bool is_merged(int index) const;
  // The atoms a merged unit expands to.
  const Bigram& parts(int index) const;

  int atom_index(std::string_view symbol) const;  // -1 if absent
  int merge_index(const std::string& first, const std::string& second) const;  // -1 if absent

  // Stable FNV-1a over the unit list, used to pair checkpoints with vocabularies.
  std::uint64_t fingerprint() const;

  /// Header `#variant=<label> n=<int> inventory=<int>`, then one unit per line
  /// in index order; merged units as `first+second`.
  std::string to_text() const;
  static Vocabulary parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend Vocabulary build_vocab(const PhonemeInventory& inv, std::span<const Bigram> bigrams,
                                std::string variant);

 private:
  void add_unit(std::string display);

  std::string variant_;
  std::size_t atoms_ = 0;
  std::vector<std::string> units_;
  std::unordered_map<std::string, int> atom_index_;
  std::map<Bigram, int> merge_index_;
  std::unordered_map<int, Bigram> merges_;
};

Vocabulary build_vocab(const PhonemeInventory& inv, std::span<const Bigram> bigrams,
                       std::string variant);

/// Builds the named variant from a (training) corpus.
Vocabulary build_variant(std::span<const PhonemeSequence> corpus, const PhonemeInventory& inv,
                         const Variant& variant, bool* short_list = nullptr);

/// Left-to-right maximal munch within words; word boundaries are not encoded.
/// Throws Error(UnknownPhoneme) with the flat token position.
std::vector<int> tokenize(const PhonemeSequence& seq, const Vocabulary& v);

/// Expands merged units, strips specials. Throws Error(IndexOutOfRange).
PhonemeSequence detokenize(std::span<const int> ids, const Vocabulary& v);

}  // namespace phonrec
