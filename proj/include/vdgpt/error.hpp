#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vdgpt {

enum class ErrorCode {
  kInvalidCoordinate,
  kParseError,
  kTemplateError,
  kBackendError,
  kCompileFailed,
  kEmptyTrack,
  kShapeError,
  kStepError,
  kTrainingDiverged,
  kInsufficientScenes,
  kArgError,
  kCancelled,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Non-fatal finding attached to a result (parse repairs, clamps, fallbacks).
struct Diagnostic {
  std::string code;
  std::string message;
  int scene = 0;
  int frame = -1;
};

/// Base exception for every failure surfaced by the library. `path` carries a
/// field path, line, or other locator when one is meaningful.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string path = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        path_(std::move(path)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorCode code_;
  std::string path_;
};

}  // namespace vdgpt
