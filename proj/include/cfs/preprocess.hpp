#pragma once

#include "cfs/mask_model.hpp"

namespace cfs {

// Placement of an original raster inside its zero-padded frame.
struct PadRecord {
  int offset_row = 0;
  int offset_col = 0;
  int original_width = 0;
  int original_height = 0;
  int padded_width = 0;
  int padded_height = 0;

  bool operator==(const PadRecord&) const = default;
};

struct PadTarget {
  int width = 512;
  int height = 512;
};

// Centred placement; odd remainders put the extra row/column at the bottom/right.
PadRecord plan_padding(int width, int height, PadTarget target);

template <typename T>
Image2D<T> zero_pad(const Image2D<T>& image, const PadRecord& record);
template <typename T>
Image2D<T> crop(const Image2D<T>& padded, const PadRecord& record);

struct PaddedRadiograph {
  Radiograph image;
  PadRecord record;
};
struct PaddedMask {
  BinaryMask2D mask;
  PadRecord record;
};
struct PaddedEncoded {
  EncodedMaskImage image;
  PadRecord record;
};

PaddedRadiograph zero_pad(const Radiograph& image, PadTarget target);
PaddedMask zero_pad(const BinaryMask2D& mask, PadTarget target);
PaddedEncoded zero_pad(const EncodedMaskImage& image, PadTarget target);

Radiograph crop(const Radiograph& padded, const PadRecord& record);
BinaryMask2D crop(const BinaryMask2D& padded, const PadRecord& record);

void check_record(const PadRecord& record, int padded_width, int padded_height);

// ---------------------------------------------------------------------------

template <typename T>
Image2D<T> zero_pad(const Image2D<T>& image, const PadRecord& record) {
  if (image.width() != record.original_width || image.height() != record.original_height) {
    throw Error(ErrorCode::InconsistentRecord, "image does not match the pad record's original dims");
  }
  Image2D<T> out(record.padded_width, record.padded_height, T{});
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c) out.at(r + record.offset_row, c + record.offset_col) = image.at(r, c);
  }
  return out;
}

template <typename T>
Image2D<T> crop(const Image2D<T>& padded, const PadRecord& record) {
  check_record(record, padded.width(), padded.height());
  Image2D<T> out(record.original_width, record.original_height, T{});
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) out.at(r, c) = padded.at(r + record.offset_row, c + record.offset_col);
  }
  return out;
}

}  // namespace cfs
