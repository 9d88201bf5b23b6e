#include "recon/error.hpp"

namespace recon {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::argument: return "argument error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::resolution: return "resolution error";
    case ErrorKind::precondition: return "precondition error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::construction: return "construction error";
    case ErrorKind::validation: return "validation error";
    case ErrorKind::capability: return "capability error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace recon
