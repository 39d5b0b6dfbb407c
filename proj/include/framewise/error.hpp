#pragma once

#include <stdexcept>
#include <string>

namespace framewise {

// Base for every error raised by the runtime. Callers that only care about
// "something failed" can catch this; the subclasses exist where a caller
// needs to branch on the failure kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FrameStoreError : public Error {
 public:
  using Error::Error;
};

// Requested range is too short for semantic retrieval (L <= n).
class InvalidSegment : public Error {
 public:
  InvalidSegment() : Error("Invalid segment") {}
};

class BackendError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class CorruptRecord : public Error {
 public:
  using Error::Error;
};

}  // namespace framewise
