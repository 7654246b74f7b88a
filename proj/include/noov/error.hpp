#pragma once

#include <stdexcept>
#include <string>

namespace noov {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (bad row, bad encoding, bad header).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Source and target files of a parallel corpus disagree in line count.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// A file parsed but its content violates an invariant (e.g. a lexicon row
/// distribution that does not sum to one).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Tensor dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace noov
