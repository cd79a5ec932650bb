#pragma once

#include <stdexcept>
#include <string>

namespace swpdmod {

// Error taxonomy: every throw site picks the category a caller can act on.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad numeric or domain input (rho outside (0,1), unsupported glyph, ...).
struct DomainError : Error {
  using Error::Error;
};

// Malformed or internally inconsistent file content.
struct FormatError : Error {
  using Error::Error;
};

// Config file problems: unknown keys, unparsable values, violated invariants.
struct ConfigError : Error {
  using Error::Error;
};

// API misuse: dimension mismatches and broken call-site contracts.
struct ContractError : Error {
  using Error::Error;
};

// Filesystem failures; message carries the offending path.
struct PersistenceError : Error {
  using Error::Error;
};

// Iterative solver produced non-finite iterates.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace swpdmod
