#pragma once

#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rapidkrig {

/// Invalid input: bad parameters, mismatched dimensions, points outside the domain.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (factorization, root finding, embedding).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void warn(std::string_view msg) { std::clog << "rapidkrig: warning: " << msg << '\n'; }

}  // namespace rapidkrig
