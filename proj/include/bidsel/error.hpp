#pragma once

#include <stdexcept>
#include <string>

namespace bidsel {

// Invalid input data or configuration. The CLI maps this to exit code 2;
// everything else derived from std::exception maps to exit code 3.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bidsel
