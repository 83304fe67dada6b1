#pragma once

#include <stdexcept>
#include <string>

namespace phel {

// Bad parameters or malformed configuration input.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A run left its physically meaningful regime (wall contact, caustic, blowup).
struct PhysicsError : std::runtime_error {
  explicit PhysicsError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace phel
