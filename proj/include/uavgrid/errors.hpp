#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uavgrid {

/// Malformed input file (bad header, non-numeric field, wrong column count).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Duplicate key where uniqueness is required (station/day/hour rows, ids).
class DuplicationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input has the wrong shape (missing hours, station count mismatch,
/// checkpoint dimensions that do not match the stored weights).
class ShapeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int epoch)
      : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace uavgrid
