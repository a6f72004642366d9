#include "phonrec/ipa.hpp"

#include <fstream>
#include <sstream>

#include "phonrec/error.hpp"
#include "phonrec/utf8.hpp"

namespace phonrec {

const char* to_string(PhonemeClass cls) {
  return cls == PhonemeClass::Vowel ? "V" : "C";
}

ClassTable ClassTable::parse(std::string_view text) {
  ClassTable table;
  std::size_t line_no = 0;
  for (const auto& raw_line : utf8::split_fields(text, '\n')) {
    ++line_no;
    std::string line = raw_line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (utf8::trim(line).empty() || line.front() == '#') continue;
    const auto fields = utf8::split_fields(line, '\t');
    if (fields.size() != 2) {
      throw Error(ErrorKind::ParseError, "expected <char>\\t<V|C>", line_no);
    }
    const auto cps = utf8::decode(fields[0]);
    if (cps.size() != 1) {
      throw Error(ErrorKind::ParseError, "expected exactly one character", line_no);
    }
    const auto tag = utf8::trim(fields[1]);
    if (tag == "V") {
      table.set(cps[0], PhonemeClass::Vowel);
    } else if (tag == "C") {
      table.set(cps[0], PhonemeClass::Consonant);
    } else {
      throw Error(ErrorKind::ParseError, "class must be V or C", line_no);
    }
  }
  return table;
}

ClassTable ClassTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<PhonemeClass> ClassTable::lookup(char32_t base) const {
  const auto it = classes_.find(base);
  if (it == classes_.end()) return std::nullopt;
  return it->second;
}

bool PhonemeSequence::empty() const { return size() == 0; }

std::size_t PhonemeSequence::size() const {
  std::size_t n = 0;
  for (const auto& w : words) n += w.size();
  return n;
}

std::vector<std::string> PhonemeSequence::flat() const {
  std::vector<std::string> out;
  out.reserve(size());
  for (const auto& w : words) out.insert(out.end(), w.begin(), w.end());
  return out;
}

std::string PhonemeSequence::to_ipa() const {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += ' ';
    for (const auto& t : words[i]) out += t;
  }
  return out;
}

std::string PhonemeSequence::to_tokens() const {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += " | ";
    for (std::size_t k = 0; k < words[i].size(); ++k) {
      if (k > 0) out += ' ';
      out += words[i][k];
    }
  }
  return out;
}

PhonemeSequence PhonemeSequence::from_tokens(std::string_view text) {
  PhonemeSequence seq;
  std::vector<std::string> word;
  for (auto& tok : utf8::split_words(text, ' ')) {
    if (tok == kWordSeparator) {
      if (!word.empty()) seq.words.push_back(std::move(word));
      word.clear();
    } else {
      word.push_back(normalize_symbol(tok));
    }
  }
  if (!word.empty()) seq.words.push_back(std::move(word));
  return seq;
}

PhonemeSequence PhonemeSequence::from_flat(std::vector<std::string> tokens) {
  PhonemeSequence seq;
  if (!tokens.empty()) seq.words.push_back(std::move(tokens));
  return seq;
}

std::string normalize_symbol(std::string_view symbol) {
  std::u32string cps = utf8::decode(symbol);
  for (auto& cp : cps) {
    if (cp == U'ː') cp = U':';
  }
  return utf8::encode(cps);
}

PhonemeSequence segment_ipa(std::string_view raw, const ClassTable& table) {
  const std::u32string cps = utf8::decode(raw);
  PhonemeSequence seq;
  std::vector<std::string> word;
  std::u32string token;
  bool tied = false;

  auto flush_token = [&] {
    if (!token.empty()) word.push_back(utf8::encode(token));
    token.clear();
  };
  auto flush_word = [&] {
    flush_token();
    if (!word.empty()) seq.words.push_back(std::move(word));
    word.clear();
  };

  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t cp = cps[i];
    if (cp == U' ') {
      if (tied) throw Error(ErrorKind::UnknownCharacter, "dangling tie bar", i - 1);
      flush_word();
    } else if (utf8::is_tie_bar(cp)) {
      if (token.empty() || tied) {
        throw Error(ErrorKind::UnknownCharacter, "tie bar without base", i);
      }
      token.push_back(cp);
      tied = true;
    } else if (utf8::is_combining(cp) || utf8::is_modifier(cp)) {
      if (token.empty()) {
        throw Error(ErrorKind::UnknownCharacter, "modifier without base", i);
      }
      token.push_back(cp == U'ː' ? U':' : cp);
    } else if (table.contains(cp)) {
      if (!tied) flush_token();
      token.push_back(cp);
      tied = false;
    } else {
      throw Error(ErrorKind::UnknownCharacter,
                  "character '" + utf8::encode(cp) + "' not in classification table", i);
    }
  }
  if (tied) throw Error(ErrorKind::UnknownCharacter, "dangling tie bar", cps.size() - 1);
  flush_word();
  return seq;
}

char32_t base_of(std::string_view symbol) {
  for (char32_t cp : utf8::decode(symbol)) {
    if (!utf8::is_combining(cp) && !utf8::is_modifier(cp) && !utf8::is_tie_bar(cp)) {
      return cp;
    }
  }
  throw Error(ErrorKind::UnknownCharacter, "symbol has no base character", 0);
}

PhonemeClass classify(std::string_view symbol, const ClassTable& table) {
  const char32_t base = base_of(symbol);
  if (auto cls = table.lookup(base)) return *cls;
  throw Error(ErrorKind::UnknownCharacter,
              "base '" + utf8::encode(base) + "' of '" + std::string(symbol) +
                  "' not in classification table",
              0);
}

PhonemeInventory::PhonemeInventory(std::vector<Phoneme> phonemes)
    : phonemes_(std::move(phonemes)) {
  for (std::size_t i = 0; i < phonemes_.size(); ++i) {
    index_.emplace(phonemes_[i].symbol, i);
  }
}

bool PhonemeInventory::contains(std::string_view symbol) const {
  return index_.count(std::string(symbol)) != 0;
}

std::optional<PhonemeClass> PhonemeInventory::class_of(std::string_view symbol) const {
  const auto it = index_.find(std::string(symbol));
  if (it == index_.end()) return std::nullopt;
  return phonemes_[it->second].cls;
}

PhonemeInventory induce_inventory(std::span<const PhonemeSequence> corpus,
                                  const ClassTable& table) {
  std::vector<Phoneme> phonemes;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& seq : corpus) {
    for (const auto& word : seq.words) {
      for (const auto& tok : word) {
        if (seen.emplace(tok, phonemes.size()).second) {
          phonemes.push_back({tok, classify(tok, table)});
        }
      }
    }
  }
  return PhonemeInventory(std::move(phonemes));
}

}  // namespace phonrec
