#ifndef ADINF_ERRORS_HPP
#define ADINF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace adinf {

// Bad user input: malformed config, bad parameters, missing files.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical degeneracy: singular covariance, positivity violations, caps.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace adinf

#endif
