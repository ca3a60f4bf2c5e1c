#pragma once

#include <stdexcept>
#include <string>

namespace tabunas {

// Base of every error the library throws. `kind()` is a stable short tag used
// in the CLI's machine-readable error records.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct InvalidConfig : Error {
  explicit InvalidConfig(const std::string& what) : Error("invalid_config", what) {}
};

struct InvalidGenome : Error {
  explicit InvalidGenome(const std::string& what) : Error("invalid_genome", what) {}
};

struct InvalidOperation : Error {
  explicit InvalidOperation(const std::string& what) : Error("invalid_operation", what) {}
};

struct MutationRejected : Error {
  explicit MutationRejected(const std::string& what) : Error("mutation_rejected", what) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error("shape_error", what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error("numeric_error", what) {}
};

struct TrainingError : Error {
  TrainingError(int epoch, const std::string& what)
      : Error("training_error", what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error("parse_error", what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

}  // namespace tabunas
