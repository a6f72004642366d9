#include "phonrec/g2p.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "phonrec/error.hpp"
#include "phonrec/utf8.hpp"

namespace phonrec {

namespace {

std::vector<ContextElement> parse_context(std::string_view field, std::size_t line) {
  std::vector<ContextElement> out;
  if (field == "_") return out;
  const std::u32string cps = utf8::decode(field);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] == U'#') {
      out.push_back({ContextElement::Kind::Boundary, 0, {}});
    } else if (cps[i] == U'{') {
      const auto close = cps.find(U'}', i);
      if (close == std::u32string::npos || close == i + 1) {
        throw Error(ErrorKind::ParseError, "malformed class reference", line);
      }
      out.push_back({ContextElement::Kind::Class, 0,
                     utf8::encode(std::u32string_view(cps).substr(i + 1, close - i - 1))});
      i = close;
    } else {
      out.push_back({ContextElement::Kind::Literal, cps[i], {}});
    }
  }
  return out;
}

bool is_punctuation(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case U'«': case U'»': case U'„': case U'“': case U'”': case U'‚': case U'‘':
    case U'’': case U'‹': case U'›': case U'–': case U'—': case U'…': case U'·':
    case U'¡': case U'¿': case U'§':
      return true;
    default:
      return false;
  }
}

bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == 0x00A0 ||
         c == 0x2009 || c == 0x202F;
}

char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 0x20;
  // Latin-1 uppercase block, skipping the multiplication sign.
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c == 0x1E9E) return U'ß';
  return c;
}

char32_t compose_diaeresis(char32_t base) {
  switch (base) {
    case U'a': return U'ä';
    case U'o': return U'ö';
    case U'u': return U'ü';
    case U'e': return U'ë';
    case U'i': return U'ï';
    default: return 0;
  }
}

}  // namespace

RuleTable RuleTable::parse(std::string_view text) {
  RuleTable table;
  std::size_t line_no = 0;
  for (const auto& raw_line : utf8::split_fields(text, '\n')) {
    ++line_no;
    std::string line = raw_line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (utf8::trim(line).empty() || line.front() == '#') continue;

    if (line.rfind("::", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorKind::ParseError, "class declaration needs '='", line_no);
      }
      const auto name = utf8::trim(std::string_view(line).substr(2, eq - 2));
      std::u32string chars;
      for (char32_t c : utf8::decode(utf8::trim(std::string_view(line).substr(eq + 1)))) {
        if (!is_space(c)) chars.push_back(c);
      }
      if (name.empty() || chars.empty()) {
        throw Error(ErrorKind::ParseError, "empty class declaration", line_no);
      }
      table.classes_[name] = chars;
      continue;
    }

    const auto fields = utf8::split_fields(line, '\t');
    if (line.front() == '!') {
      if (fields.size() != 2 || fields[0].size() < 2) {
        throw Error(ErrorKind::ParseError, "exception needs !<word>\\t<output>", line_no);
      }
      table.exceptions_[utf8::decode(fields[0].substr(1))] = normalize_symbol(fields[1]);
      continue;
    }
    if (fields.size() != 4) {
      throw Error(ErrorKind::ParseError, "rule needs 4 tab-separated fields", line_no);
    }
    RewriteRule rule;
    rule.match = utf8::decode(fields[0]);
    if (rule.match.empty()) throw Error(ErrorKind::ParseError, "empty match", line_no);
    rule.output = fields[1] == "_" ? std::string() : normalize_symbol(fields[1]);
    rule.left = parse_context(fields[2], line_no);
    rule.right = parse_context(fields[3], line_no);
    rule.line = line_no;
    table.rules_.push_back(std::move(rule));
  }

  if (table.rules_.empty()) throw Error(ErrorKind::ParseError, "rule table has no rules", line_no);

  for (const auto& rule : table.rules_) {
    for (const auto* ctx : {&rule.left, &rule.right}) {
      for (const auto& el : *ctx) {
        if (el.kind == ContextElement::Kind::Class && !table.classes_.count(el.class_name)) {
          throw Error(ErrorKind::UndeclaredClass, "class '" + el.class_name + "' on line " +
                                                      std::to_string(rule.line),
                      rule.line);
        }
      }
    }
  }

  // Every declared grapheme needs a context-free single-character fallback.
  std::set<char32_t> covered;
  for (const auto& rule : table.rules_) {
    if (rule.context_free() && rule.match.size() == 1) covered.insert(rule.match[0]);
  }
  for (const auto& [name, chars] : table.classes_) {
    for (char32_t c : chars) {
      if (!covered.count(c)) {
        throw Error(ErrorKind::ParseError,
                    "grapheme '" + utf8::encode(c) + "' of class '" + name +
                        "' has no context-free fallback rule");
      }
    }
  }
  return table;
}

RuleTable RuleTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool RuleTable::in_class(const std::string& name, char32_t c) const {
  const auto it = classes_.find(name);
  return it != classes_.end() && it->second.find(c) != std::u32string::npos;
}

bool RuleTable::context_matches(const std::vector<ContextElement>& ctx,
                                std::u32string_view word, std::size_t anchor,
                                bool is_left) const {
  // Index -1 and index len are the word boundaries.
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(ctx.size());
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(word.size());
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    // A left context ends just before `anchor`; a right context starts at it.
    const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(anchor) + k - (is_left ? n : 0);
    const auto& el = ctx[static_cast<std::size_t>(k)];
    if (el.kind == ContextElement::Kind::Boundary) {
      if (idx != -1 && idx != len) return false;
      continue;
    }
    if (idx < 0 || idx >= len) return false;
    const char32_t c = word[static_cast<std::size_t>(idx)];
    if (el.kind == ContextElement::Kind::Literal ? c != el.literal : !in_class(el.class_name, c)) {
      return false;
    }
  }
  return true;
}

std::optional<std::size_t> RuleTable::select(std::u32string_view word, std::size_t pos) const {
  std::optional<std::size_t> best;
  std::size_t best_len = 0;
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    const auto& rule = rules_[r];
    const std::size_t m = rule.match.size();
    if (m <= best_len || pos + m > word.size()) continue;
    if (word.substr(pos, m) != rule.match) continue;
    if (!context_matches(rule.left, word, pos, true)) continue;
    if (!context_matches(rule.right, word, pos + m, false)) continue;
    best = r;
    best_len = m;
  }
  return best;
}

std::vector<NormalizedWord> normalize_text(std::string_view text) {
  const std::u32string cps = utf8::decode(text);
  std::vector<NormalizedWord> words;
  NormalizedWord current;
  auto flush = [&] {
    if (!current.text.empty()) words.push_back(std::move(current));
    current = {};
  };
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (is_space(c)) {
      flush();
    } else if (c == 0x0308) {
      const char32_t composed =
          current.text.empty() ? 0 : compose_diaeresis(current.text.back());
      if (composed == 0) {
        throw Error(ErrorKind::UnmappableGrapheme, "stray combining diaeresis", i);
      }
      current.text.back() = composed;
    } else if (!is_punctuation(c)) {
      current.text.push_back(to_lower(c));
      current.positions.push_back(i);
    }
  }
  flush();
  return words;
}

namespace {

std::string transliterate_word(const NormalizedWord& word, const RuleTable& rules) {
  if (const auto it = rules.exceptions().find(word.text); it != rules.exceptions().end()) {
    return it->second;
  }
  std::string out;
  std::size_t pos = 0;
  while (pos < word.text.size()) {
    const auto r = rules.select(word.text, pos);
    if (!r) {
      throw Error(ErrorKind::UnmappableGrapheme,
                  "no rule for '" + utf8::encode(word.text[pos]) + "' at position " +
                      std::to_string(word.positions[pos]),
                  word.positions[pos]);
    }
    const auto& rule = rules.rules()[*r];
    out += rule.output;
    pos += rule.match.size();
  }
  return out;
}

}  // namespace

std::string transliterate_ipa(std::string_view text, const RuleTable& rules) {
  std::string out;
  for (const auto& word : normalize_text(text)) {
    const auto ipa = transliterate_word(word, rules);
    if (ipa.empty()) continue;
    if (!out.empty()) out += ' ';
    out += ipa;
  }
  return out;
}

PhonemeSequence transliterate(std::string_view text, const RuleTable& rules,
                              const ClassTable& classes) {
  return segment_ipa(transliterate_ipa(text, rules), classes);
}

}  // namespace phonrec
