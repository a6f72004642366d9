#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace phonrec {

enum class ErrorKind {
  UnknownCharacter,
  UnmappableGrapheme,
  ParseError,
  UndeclaredClass,
  DuplicateId,
  SizeMismatch,
  UnknownPhoneme,
  IndexOutOfRange,
  UnknownVariant,
  ShapeMismatch,
  LengthMismatch,
  NonFiniteLoss,
  NonFiniteGradient,
  EmptyCorpus,
  VocabMismatch,
  Io,
};

const char* to_string(ErrorKind kind);

// True for failures caused by numerics rather than bad input.
inline bool is_numeric(ErrorKind kind) {
  return kind == ErrorKind::NonFiniteLoss || kind == ErrorKind::NonFiniteGradient;
}

/// Every failure raised by the library. `position` carries a code point
/// index, token index or 1-based line number depending on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> position = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        message_(message),
        position_(position) {}

  ErrorKind kind() const { return kind_; }
  // The message without the kind prefix, for re-raising with more context.
  const std::string& message() const { return message_; }
  std::optional<std::size_t> position() const { return position_; }

 private:
  ErrorKind kind_;
  std::string message_;
  std::optional<std::size_t> position_;
};

}  // namespace phonrec
