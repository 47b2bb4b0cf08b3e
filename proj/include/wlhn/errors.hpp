#pragma once

#include <stdexcept>
#include <string>

namespace wlhn {

/// Coordinates ran out of floating-point room near the ball boundary.
class PrecisionError : public std::runtime_error {
 public:
  PrecisionError(const std::string& what, int depth) : std::runtime_error(what), depth_(depth) {}
  int depth() const { return depth_; }

 private:
  int depth_;
};

/// A computation produced NaN or infinity.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wlhn
