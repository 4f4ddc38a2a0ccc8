#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace plasmaviz {

// Machine-readable failure categories shared by the library, CLI and service.
enum class ErrorCode {
  invalid_argument,
  out_of_range,
  not_found,
  validation,
  capacity_exceeded,
  size_mismatch,
  bad_value,
  unknown_modality,
  io,
  no_session,
};

std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace plasmaviz
