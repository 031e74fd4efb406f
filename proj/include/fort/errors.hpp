#pragma once

#include <stdexcept>
#include <string>

namespace fort {

// Thrown when an algorithm fails for numerical reasons (singular weight
// matrix, optimizer divergence, root finder leaving its bracket) as opposed
// to invalid caller input, which throws std::invalid_argument.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fort
