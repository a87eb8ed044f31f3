#pragma once

#include <stdexcept>
#include <string>

namespace twotier {

// Shape or dimension mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller violated an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Argument outside the mathematical domain (e.g. a point on the unit sphere).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Training could not start or could not proceed (empty corpus, empty table).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Malformed input file or configuration.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure inside one stage of an experiment pipeline.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace twotier
