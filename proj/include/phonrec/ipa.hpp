#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace phonrec {

enum class PhonemeClass { Vowel, Consonant };

const char* to_string(PhonemeClass cls);

/// Maps base characters of the phoneme alphabet to vowel/consonant.
///
/// File format: UTF-8, one `<char>\t<V|C>` per line, `#` starts a comment.
class ClassTable {
 public:
  ClassTable() = default;

  static ClassTable parse(std::string_view text);
  static ClassTable load(const std::filesystem::path& path);

  void set(char32_t base, PhonemeClass cls) { classes_[base] = cls; }
  std::optional<PhonemeClass> lookup(char32_t base) const;
  bool contains(char32_t base) const { return classes_.count(base) != 0; }
  std::size_t size() const { return classes_.size(); }

 private:
  std::map<char32_t, PhonemeClass> classes_;
};

/// A phoneme-token sequence with word structure. Tokens are canonical
/// phoneme symbols (length mark normalized to ':').
struct PhonemeSequence {
  std::vector<std::vector<std::string>> words;

  bool empty() const;
  std::size_t size() const;  // number of tokens
  std::vector<std::string> flat() const;

  // Words joined by a space, tokens concatenated: "als si:".
  std::string to_ipa() const;
  // Tokens space separated, words separated by " | ": "a l s | s i:".
  std::string to_tokens() const;
  static PhonemeSequence from_tokens(std::string_view text);
  static PhonemeSequence from_flat(std::vector<std::string> tokens);

  bool operator==(const PhonemeSequence&) const = default;
};

inline constexpr std::string_view kWordSeparator = "|";

/// Splits an IPA string into phoneme tokens. A token is one base character
/// plus any following combining marks, modifier letters and length marks;
/// a tie bar joins the next base into the same token. Spaces separate words.
/// Throws Error(UnknownCharacter) with the code point index of the offending
/// character.
PhonemeSequence segment_ipa(std::string_view raw, const ClassTable& table);

// Canonical form of a symbol: 'ː' becomes ':'.
std::string normalize_symbol(std::string_view symbol);

char32_t base_of(std::string_view symbol);

PhonemeClass classify(std::string_view symbol, const ClassTable& table);

struct Phoneme {
  std::string symbol;
  PhonemeClass cls;

  bool operator==(const Phoneme&) const = default;
};

/// Distinct phoneme tokens of a corpus in order of first occurrence.
class PhonemeInventory {
 public:
  PhonemeInventory() = default;
  explicit PhonemeInventory(std::vector<Phoneme> phonemes);

  const std::vector<Phoneme>& phonemes() const { return phonemes_; }
  std::size_t size() const { return phonemes_.size(); }
  bool contains(std::string_view symbol) const;
  std::optional<PhonemeClass> class_of(std::string_view symbol) const;

 private:
  std::vector<Phoneme> phonemes_;
  std::unordered_map<std::string, std::size_t> index_;
};

PhonemeInventory induce_inventory(std::span<const PhonemeSequence> corpus,
                                  const ClassTable& table);

}  // namespace phonrec
