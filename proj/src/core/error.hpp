#pragma once
#include <stdexcept>
#include <string>

namespace gf {

enum class ErrorKind {
  Config,       // bad configuration, params out of bounds, unknown names
  Io,           // filesystem failures
  Geometry,     // hand cannot straddle the object
  Simulation,   // divergence guard tripped
  Index,        // out-of-order study append
  Interrupted,  // cooperative cancellation
};

class GfError : public std::runtime_error {
 public:
  GfError(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) { throw GfError(kind, msg); }

}  // namespace gf
