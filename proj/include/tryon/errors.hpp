#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tryon {

/// Process exit codes shared by every CLI subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitContractViolation = 1,
  kExitIoError = 2,
  kExitDivergence = 3,
};

/// A caller broke a documented precondition (bad shape, bad range, bad flag).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A file could not be read, written, or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A training loss became non-finite. `term()` names the offending loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::string term, const std::string& what);
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

/// Throws ContractViolation with `message` unless `condition` holds.
void require(bool condition, std::string_view message);

}  // namespace tryon
