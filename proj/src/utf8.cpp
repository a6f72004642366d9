#include "phonrec/utf8.hpp"

#include "phonrec/error.hpp"

namespace phonrec {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownCharacter: return "UnknownCharacter";
    case ErrorKind::UnmappableGrapheme: return "UnmappableGrapheme";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UndeclaredClass: return "UndeclaredClass";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::UnknownPhoneme: return "UnknownPhoneme";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::UnknownVariant: return "UnknownVariant";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::VocabMismatch: return "VocabMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

namespace utf8 {

std::u32string decode(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    int extra = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      cp = lead & 0x1F;
      extra = 1;
    } else if ((lead & 0xF0) == 0xE0) {
      cp = lead & 0x0F;
      extra = 2;
    } else if ((lead & 0xF8) == 0xF0) {
      cp = lead & 0x07;
      extra = 3;
    } else {
      throw Error(ErrorKind::ParseError, "malformed UTF-8 lead byte", i);
    }
    if (i + extra >= text.size() && extra > 0) {
      throw Error(ErrorKind::ParseError, "truncated UTF-8 sequence", i);
    }
    for (int k = 1; k <= extra; ++k) {
      const auto cont = static_cast<unsigned char>(text[i + k]);
      if ((cont & 0xC0) != 0x80) {
        throw Error(ErrorKind::ParseError, "malformed UTF-8 continuation", i);
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
  return out;
}

std::string encode(std::u32string_view cps) {
  std::string out;
  for (char32_t cp : cps) out += encode(cp);
  return out;
}

std::size_t length(std::string_view text) { return decode(text).size(); }

bool is_tie_bar(char32_t cp) { return cp == U'͡' || cp == U'͜'; }

bool is_combining(char32_t cp) {
  return cp >= 0x0300 && cp <= 0x036F && !is_tie_bar(cp);
}

bool is_length_mark(char32_t cp) { return cp == U':' || cp == U'ː' || cp == U'ˑ'; }

bool is_modifier(char32_t cp) {
  return is_length_mark(cp) || (cp >= 0x02B0 && cp <= 0x02FF);
}

std::vector<std::string> split_words(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == sep) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != sep) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> split_fields(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

}  // namespace utf8
}  // namespace phonrec
