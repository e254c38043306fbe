#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace attr2font {

enum class ErrorCode {
  MissingGlyph,
  UnreadableFont,
  UnreadableImage,
  BadRowLength,
  OutOfRange,
  DuplicateFontId,
  EmptyDataset,
  InconsistentCharset,
  NoFonts,
  ShapeMismatch,
  ZeroSize,
  WrongRefCount,
  WrongResolution,
  IndexOutOfRange,
  ValueOutOfRange,
  LambdaOutOfRange,
  EmptySet,
  NonFiniteLoss,
  CorruptCheckpoint,
  ConfigMismatch,
  BadAttributes,
  UnknownFont,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI, HTTP service, tests) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace attr2font
