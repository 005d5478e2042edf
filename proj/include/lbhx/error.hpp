#pragma once

#include <stdexcept>
#include <string>

namespace lbhx {

/// Invalid or conflicting user configuration (CLI exit status 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (index out of range, stale halo).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Failure while the simulation was running (CLI exit status 2).
class RuntimeFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transport failure; the message names the peer rank.
class CommError : public RuntimeFault {
 public:
  using RuntimeFault::RuntimeFault;
};

/// Autotuning could not produce a usable profile.
class TuningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; the message names the offending line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lbhx
