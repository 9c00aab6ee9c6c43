#include "cfs/error.hpp"

namespace cfs {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::FragmentOverflow: return "FragmentOverflow";
    case ErrorCode::ReservedBitsSet: return "ReservedBitsSet";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::TrailingData: return "TrailingData";
    case ErrorCode::DimensionOverflow: return "DimensionOverflow";
    case ErrorCode::FragmentCountOutOfRange: return "FragmentCountOutOfRange";
    case ErrorCode::DegenerateFracture: return "DegenerateFracture";
    case ErrorCode::CategoryAbsent: return "CategoryAbsent";
    case ErrorCode::DetectorTooSmall: return "DetectorTooSmall";
    case ErrorCode::EmptyReference: return "EmptyReference";
    case ErrorCode::TargetTooSmall: return "TargetTooSmall";
    case ErrorCode::InconsistentRecord: return "InconsistentRecord";
    case ErrorCode::MissingCategoryFile: return "MissingCategoryFile";
    case ErrorCode::BadManifest: return "BadManifest";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NoRecords: return "NoRecords";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateConstantSeries: return "DegenerateConstantSeries";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_io_error(ErrorCode code) {
  return code == ErrorCode::IoError || code == ErrorCode::MissingCategoryFile;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace cfs
