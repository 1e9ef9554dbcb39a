#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bolt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two vectors (or a vector and a layer) disagree on their ambient dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition, e.g. upstream gradient support
// outside the active set.
class ContractError : public Error {
 public:
  using Error::Error;
};

// No (K, L) pair satisfies the hashing cost budget for the requested sparsity.
class InfeasibleSparsity : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent training data.
class DataError : public Error {
 public:
  enum class Kind {
    MalformedHeader,
    MalformedLine,
    LabelOutOfRange,
    FeatureOutOfRange,
    EmptyLabelSet,
    CountMismatch,
  };

  DataError(Kind kind, std::size_t line, const std::string& message)
      : Error(message), _kind(kind), _line(line) {}

  Kind kind() const { return _kind; }
  // 1-based line number in the source text, 0 when not tied to a line.
  std::size_t line() const { return _line; }

 private:
  Kind _kind;
  std::size_t _line;
};

// A serialized index or model does not match the expected binary layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bolt
