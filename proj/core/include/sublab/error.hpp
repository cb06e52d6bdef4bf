#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sublab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

class MonotonicityError : public Error {
 public:
  MonotonicityError(const std::string& what, std::size_t node)
      : Error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Raised when part of the interior is disconnected from the Dirichlet
/// boundary under positive-coefficient edges.
class SingularSystem : public Error {
 public:
  SingularSystem(const std::string& what, std::vector<std::size_t> island)
      : Error(what), island_(std::move(island)) {}
  const std::vector<std::size_t>& island() const { return island_; }

 private:
  std::vector<std::size_t> island_;
};

class EmptySupport : public Error {
 public:
  using Error::Error;
};

class ZeroGradient : public Error {
 public:
  ZeroGradient(const std::string& what, double numerator)
      : Error(what), numerator_(numerator) {}
  double numerator() const { return numerator_; }

 private:
  double numerator_;
};

class PositivityError : public Error {
 public:
  using Error::Error;
};

class ChainTooShort : public Error {
 public:
  using Error::Error;
};

class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace sublab
