#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phonrec/ipa.hpp"

namespace phonrec {

/// One element of a rule context: a word boundary, a literal grapheme or a
/// reference to a declared character class.
struct ContextElement {
  enum class Kind { Boundary, Literal, Class };
  Kind kind;
  char32_t literal = 0;
  std::string class_name;
};

struct RewriteRule {
  std::u32string match;  // lowercased graphemes, non-empty
  std::string output;    // IPA, possibly empty (silent letters)
  std::vector<ContextElement> left;
  std::vector<ContextElement> right;
  std::size_t line = 0;  // source line, for diagnostics

  bool context_free() const { return left.empty() && right.empty(); }
};

/// Ordered rewrite rules plus character classes and whole-word exceptions.
///
/// Rule file lines (UTF-8, tab separated):
///   `::<name> = <chars>`            class declaration
///   `<match>\t<output>\t<left>\t<right>`  rule; `_` for empty, `#` is a word
///                                   boundary, `{name}` a class reference
///   `!<word>\t<output>`            whole-word exception
///   lines starting with `#` are comments.
class RuleTable {
 public:
  static RuleTable parse(std::string_view text);
  static RuleTable load(const std::filesystem::path& path);

  const std::vector<RewriteRule>& rules() const { return rules_; }
  const std::map<std::string, std::u32string>& classes() const { return classes_; }
  const std::map<std::u32string, std::string>& exceptions() const { return exceptions_; }

  bool in_class(const std::string& name, char32_t c) const;

  // Index into rules() of the rule applied at `pos` in `word`, if any.
  std::optional<std::size_t> select(std::u32string_view word, std::size_t pos) const;

 private:
  bool context_matches(const std::vector<ContextElement>& ctx, std::u32string_view word,
                       std::size_t anchor, bool is_left) const;

  std::vector<RewriteRule> rules_;
  std::map<std::string, std::u32string> classes_;
  std::map<std::u32string, std::string> exceptions_;
};

/// Lowercase, compose umlauts and strip punctuation; words are split on
/// whitespace. Each returned word carries the code point index of every
/// remaining character in the original text.
struct NormalizedWord {
  std::u32string text;
  std::vector<std::size_t> positions;
};
std::vector<NormalizedWord> normalize_text(std::string_view text);

/// German text to phoneme tokens by maximal-munch rule application.
/// Throws Error(UnmappableGrapheme) naming the character and its position.
PhonemeSequence transliterate(std::string_view text, const RuleTable& rules,
                              const ClassTable& classes);

// The raw IPA string before segmentation, words separated by spaces.
std::string transliterate_ipa(std::string_view text, const RuleTable& rules);

}  // namespace phonrec
