#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfs {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  // mask model / file formats
  FragmentOverflow,
  ReservedBitsSet,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  TrailingData,
  DimensionOverflow,
  // phantom
  FragmentCountOutOfRange,
  DegenerateFracture,
  CategoryAbsent,
  // projector
  DetectorTooSmall,
  EmptyReference,
  // preprocess
  TargetTooSmall,
  InconsistentRecord,
  // predictor exchange
  MissingCategoryFile,
  BadManifest,
  // metrics / analysis
  EmptyMask,
  NoRecords,
  LengthMismatch,
  DegenerateConstantSeries,
  // filesystem
  IoError,
};

std::string_view to_string(ErrorCode code);

// True for failures of the environment (missing/unwritable files) as opposed
// to invalid input content.
bool is_io_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cfs
