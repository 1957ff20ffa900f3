#pragma once

#include <stdexcept>
#include <string>

namespace hullaudit {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A cell could not be parsed. Carries the 1-based file line and column.
struct ParseError : Error {
  std::size_t line = 0;
  std::size_t column = 0;
  ParseError(const std::string& what, std::size_t line_, std::size_t column_)
      : Error(what), line(line_), column(column_) {}
};

struct SchemaMismatch : Error { using Error::Error; };
struct EmptyTable : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct NonFiniteInput : Error { using Error::Error; };
struct UnknownCategory : Error { using Error::Error; };
struct MissingValue : Error { using Error::Error; };
struct UnknownFeature : Error { using Error::Error; };
struct InstanceTooLarge : Error { using Error::Error; };
struct TooFewRows : Error { using Error::Error; };
struct EmptyCohort : Error { using Error::Error; };

}  // namespace hullaudit
