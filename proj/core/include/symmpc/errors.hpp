#pragma once

#include <stdexcept>
#include <string>

namespace symmpc {

/// Input violates a value-domain precondition (empty cloud, zero normal, ...).
class DomainError : public std::runtime_error {
public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A count/size precondition is violated (m > cloud size, k > reference size, ...).
class SizeError : public std::runtime_error {
public:
  explicit SizeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shapes do not line up; the message names both shapes.
class ShapeError : public std::runtime_error {
public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File could not be read/written or has malformed contents; message carries the path.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace symmpc
