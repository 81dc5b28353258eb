#pragma once

#include <stdexcept>
#include <string>

namespace sfan {

// Error taxonomy shared by the library and the CLI. Each enumerator maps to a
// stable machine-parseable category string and a process exit code.
enum class Errc {
  bad_arguments,
  missing_file,
  corrupt_header,
  corrupt_payload,
  non_3d_data,
  bad_spacing,
  unknown_orientation,
  label_range,
  shape_mismatch,
  unwritable_path,
  empty_input,
  divergence,
  channel_mismatch,
};

inline const char* category_name(Errc c) {
  switch (c) {
    case Errc::bad_arguments: return "bad-arguments";
    case Errc::missing_file: return "missing-file";
    case Errc::corrupt_header: return "corrupt-header";
    case Errc::corrupt_payload: return "corrupt-payload";
    case Errc::non_3d_data: return "non-3d-data";
    case Errc::bad_spacing: return "non-positive-spacing";
    case Errc::unknown_orientation: return "unknown-orientation";
    case Errc::label_range: return "label-range";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::unwritable_path: return "unwritable-path";
    case Errc::empty_input: return "empty-input";
    case Errc::divergence: return "numerical-divergence";
    case Errc::channel_mismatch: return "channel-mismatch";
  }
  return "unknown";
}

// Exit codes: 0 success, 2 bad arguments, 3 I/O error, 4 numerical
// divergence, 5 empty input.
inline int exit_code(Errc c) {
  switch (c) {
    case Errc::bad_arguments:
    case Errc::channel_mismatch:
      return 2;
    case Errc::divergence:
      return 4;
    case Errc::empty_input:
      return 5;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(category_name(code)) + ": " + msg),
        code_(code),
        message_(msg) {}

  Errc code() const { return code_; }
  const char* category() const { return category_name(code_); }
  const std::string& message() const { return message_; }

 private:
  Errc code_;
  std::string message_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, Errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace sfan
