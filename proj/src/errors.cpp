#include "doppel/errors.hpp"

namespace doppel {

const char* error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::input: return "input error";
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::state: return "state error";
    case ErrorKind::lookup: return "lookup error";
    case ErrorKind::conflict: return "conflict error";
    case ErrorKind::unsupported_map: return "unsupported map";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::config: return "config error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::export_failure: return "export error";
    case ErrorKind::evaluation: return "evaluation error";
    case ErrorKind::search_failure: return "search failure";
    case ErrorKind::io: return "i/o error";
    case ErrorKind::internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace doppel
