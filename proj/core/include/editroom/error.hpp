#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace editroom {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A document or value violates a data-model invariant.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Template-command grammar failures.
class ParseError : public Error {
public:
  enum class Kind { UnknownTemplate, MalformedField, OutOfRangeValue };

  ParseError(Kind kind, std::string message, std::size_t offset = 0)
      : Error(std::move(message)), kind_(kind), offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  /// Byte offset into the original input where the problem was detected.
  std::size_t offset() const noexcept { return offset_; }

private:
  Kind kind_;
  std::size_t offset_;
};

/// Executor failures.
class EditError : public Error {
public:
  enum class Kind { NoMatch, PlacementFailed, RoomFull, Collision, NoUniqueReference };

  EditError(Kind kind, std::string message) : Error(std::move(message)), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

const char* to_string(ParseError::Kind kind) noexcept;
const char* to_string(EditError::Kind kind) noexcept;

}  // namespace editroom
