#pragma once

#include <stdexcept>
#include <string>

namespace fwpd {

// User-facing configuration problems: unknown keys, invalid values, bad
// combinations. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid oracle input at run time: NaN directions, dimension mismatches.
// Maps to CLI exit code 3.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Instances whose constants make the algorithms undefined, e.g. a zero
// smoothness constant or a regularizer unbounded below. Maps to exit code 3.
class DegenerateInstanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: querying an empty tracker, mixing weights outside [0, 1].
// Maps to CLI exit code 3.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace fwpd
