#pragma once

#include <stdexcept>
#include <string>

namespace rlda {

// Base for every error raised by the library. Callers that only care about
// "something in rlda failed" catch this; the subclasses exist for the few
// places that branch on the category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ValueError : public Error {
 public:
  using Error::Error;
};

// Raised when a NaN shows up in training (loss or gradient).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace rlda
