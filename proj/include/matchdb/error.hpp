#pragma once

#include <stdexcept>
#include <string>

namespace matchdb {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data (CSV cells, schema mismatches).
class DataError : public Error {
 public:
  using Error::Error;
};

// A required column is absent or has the wrong kind.
class ColumnError : public Error {
 public:
  using Error::Error;
};

// A precondition on an operation's arguments does not hold.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace matchdb
