#pragma once

#include <stdexcept>
#include <string>

namespace bentcable {

// Invalid argument to a pure model function (non-finite input, gamma <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A cell whose deforestation ratio is exactly zero. The panel builder catches
// this to mark the cell missing instead of failing.
class ZeroDeforestationError : public DomainError {
 public:
  using DomainError::DomainError;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input files. `where` carries "file:line" when known.
class IngestionError : public std::runtime_error {
 public:
  explicit IngestionError(const std::string& what, std::string where = {})
      : std::runtime_error(where.empty() ? what : where + ": " + what),
        where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bentcable
