#pragma once

#include <stdexcept>
#include <string>

namespace qp {

// File/stream failures; carries the offending path in the message.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required (diverged training, bad loss).
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Calling an operation in the wrong order (e.g. backward before forward).
class state_error : public std::logic_error {
 public:
  explicit state_error(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace qp
