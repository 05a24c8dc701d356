#pragma once

#include <stdexcept>
#include <string>

namespace dtcrs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed a value outside an operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A provider broke its contract (e.g. mixed embedding dimensions).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed JSON or text that cannot be parsed at all.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a structural invariant.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Network or backend failure after retries were exhausted.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or unusable data files.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace dtcrs
