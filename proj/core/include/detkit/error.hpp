#pragma once

#include <stdexcept>
#include <string>

namespace detkit {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller passed a value outside the operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input data (annotation files, edge lists, detections) is malformed or
// inconsistent. `where` names the offending file/line/object when known.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::string where = {});
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

// Both boxes of an IOU query have zero area.
class DegenerateBoxes : public InvalidArgument {
 public:
  DegenerateBoxes();
};

// encode() was asked for a target whose center is not strictly inside the cell.
class TargetOutsideCell : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// AP / recall requested for a class with no (non-difficult) ground truth.
class NoPositives : public Error {
 public:
  using Error::Error;
};

// An internal consistency check failed. Indicates a bug, not bad input.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace detkit
