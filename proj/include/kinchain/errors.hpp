#pragma once

#include <stdexcept>
#include <string>

namespace kinchain {

// Structural violation of the kinematic-chain tree invariants.
class InvalidChainError : public std::invalid_argument {
 public:
  InvalidChainError(const std::string& what, int joint_id)
      : std::invalid_argument(what), joint_id_(joint_id) {}
  int joint_id() const noexcept { return joint_id_; }

 private:
  int joint_id_;
};

// Hyperparameters that violate a documented bound (e.g. gamma >= min link length).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FitDivergedError : public std::runtime_error {
 public:
  FitDivergedError(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

// Malformed file content. line() is 1-based, 0 when not line oriented.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0)
      : std::runtime_error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kinchain
