#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gcst {

enum class ErrorCode {
  invalid_argument,
  insufficient_class_support,
  generation_error,
  non_separable,
  parse_error,
  io_error,
  config_mismatch,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(std::string message) {
  throw Error(ErrorCode::invalid_argument, std::move(message));
}

}  // namespace gcst
