#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace ccmt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimensionality mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration, argument or record content.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API precondition (non-scalar loss, missing gradient, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Finite-difference oracle hit a non-finite function value.
class OracleError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss. Epoch and batch are 1-based.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t epoch, std::size_t batch)
      : Error(what), epoch_(epoch), batch_(batch) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

// Malformed file content. Carries the byte offset where parsing failed and,
// when the failure is inside a record, that record's index.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset,
             std::optional<std::uint64_t> record = std::nullopt)
      : Error(format(what, offset, record)), offset_(offset), record_(record) {}

  std::uint64_t offset() const noexcept { return offset_; }
  std::optional<std::uint64_t> record() const noexcept { return record_; }

 private:
  static std::string format(const std::string& what, std::uint64_t offset,
                            std::optional<std::uint64_t> record) {
    std::string s = what + " (byte offset " + std::to_string(offset);
    if (record) s += ", record " + std::to_string(*record);
    return s + ")";
  }

  std::uint64_t offset_;
  std::optional<std::uint64_t> record_;
};

}  // namespace ccmt
