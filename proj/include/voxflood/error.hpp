#pragma once

#include <stdexcept>
#include <string>

namespace voxflood {

// Base of every error thrown by the library. The CLI maps the subclasses onto
// its exit codes (config/input 2, backend 3, data insufficiency 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, bad arguments or unreadable/invalid input files.
class InputError : public Error {
 public:
  using Error::Error;
};

// Transport or protocol failure talking to a segmenter backend. Distinct from
// a backend that answers with an empty segmentation.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Not enough data to satisfy a request (e.g. too few background examples).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace voxflood
