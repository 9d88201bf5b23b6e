#pragma once

#include <stdexcept>
#include <string>

namespace recon {

enum class ErrorKind {
  argument,
  domain,
  resolution,
  precondition,
  numeric,
  construction,
  validation,
  capability,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace recon
