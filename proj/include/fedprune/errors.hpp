#pragma once

#include <stdexcept>
#include <string>

namespace fedprune {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad layer stacks, unparsable or inconsistent experiment configs.
struct ConfigError : Error {
  using Error::Error;
};

// Dimension mismatches between models, masks, batches.
struct ShapeError : Error {
  using Error::Error;
};

// Arguments outside their mathematical domain (rates, empty inputs).
struct DomainError : Error {
  using Error::Error;
};

// Unreadable, malformed or empty datasets.
struct DataError : Error {
  using Error::Error;
};

// Malformed sparse blobs.
struct CodecError : Error {
  using Error::Error;
};

}  // namespace fedprune
