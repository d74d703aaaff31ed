#include "tryon/errors.hpp"

namespace tryon {

DivergenceError::DivergenceError(std::string term, const std::string& what)
    : std::runtime_error(what), term_(std::move(term)) {}

void require(bool condition, std::string_view message) {
  if (!condition) throw ContractViolation(std::string(message));
}

}  // namespace tryon
