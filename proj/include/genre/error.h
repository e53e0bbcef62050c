#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace genre {

/// Failure categories raised by the library. Every throwing operation uses
/// `genre::Error` carrying one of these codes.
enum class Errc {
  malformed_header,
  unsupported_format,
  truncated_data,
  invalid_params,
  no_peaks_found,
  degenerate_input,
  unvoiced,
  too_short,
  empty_dataset,
  io_error,
  schema_mismatch,
  parse_error,
  dimension_mismatch,
  version_mismatch,
  label_out_of_range,
  empty_matrix,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace genre
