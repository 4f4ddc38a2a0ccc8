#include "plasmaviz/error.hpp"

namespace plasmaviz {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::validation: return "validation_error";
    case ErrorCode::capacity_exceeded: return "capacity_exceeded";
    case ErrorCode::size_mismatch: return "size_mismatch";
    case ErrorCode::bad_value: return "bad_value";
    case ErrorCode::unknown_modality: return "unknown_modality";
    case ErrorCode::io: return "io_error";
    case ErrorCode::no_session: return "no_session";
  }
  return "unknown";
}

}  // namespace plasmaviz
