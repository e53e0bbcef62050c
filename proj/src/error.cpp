#include "genre/error.h"

namespace genre {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::malformed_header: return "MalformedHeader";
    case Errc::unsupported_format: return "UnsupportedFormat";
    case Errc::truncated_data: return "TruncatedData";
    case Errc::invalid_params: return "InvalidParams";
    case Errc::no_peaks_found: return "NoPeaksFound";
    case Errc::degenerate_input: return "DegenerateInput";
    case Errc::unvoiced: return "Unvoiced";
    case Errc::too_short: return "TooShort";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::io_error: return "IoError";
    case Errc::schema_mismatch: return "SchemaMismatch";
    case Errc::parse_error: return "ParseError";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::version_mismatch: return "VersionMismatch";
    case Errc::label_out_of_range: return "LabelOutOfRange";
    case Errc::empty_matrix: return "EmptyMatrix";
  }
  return "Unknown";
}

}  // namespace genre
