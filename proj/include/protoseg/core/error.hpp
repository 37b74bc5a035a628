#pragma once

#include <stdexcept>
#include <string>

namespace protoseg {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Bad run configuration: unknown key, invalid value, unknown backbone name.
struct ConfigError : Error {
  using Error::Error;
};

// Missing or unreadable files, directory layout violations.
struct IoError : Error {
  using Error::Error;
};

// A file exists but its payload is malformed (wrong magic, truncated, bad record).
struct FormatError : Error {
  using Error::Error;
};

// A model input does not satisfy the mode it is asked to run in.
struct InputError : Error {
  using Error::Error;
};

// Domain-type invariant violations (non-orthonormal rotation, bad box, ...).
struct ValidationError : Error {
  using Error::Error;
};

// Divergence or other failures inside the training loop.
struct TrainingError : Error {
  using Error::Error;
};

}  // namespace protoseg
