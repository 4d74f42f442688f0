#ifndef BRANCHSIM_ERRORS_HPP
#define BRANCHSIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace branchsim {

// An offspring law (or a caller) broke a hard contract: negative population
// after an event, a sample outside the declared bounds, an event applied to
// an extinct state. Not recoverable; the scenario is invalid.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// A configured resource guard tripped (per-replication wall-time limit).
class ResourceLimitError : public std::runtime_error {
 public:
  explicit ResourceLimitError(const std::string& what) : std::runtime_error(what) {}
};

// Bad scenario file / bad parameters. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace branchsim

#endif
