#include "cfs/preprocess.hpp"

#include <string>

namespace cfs {

PadRecord plan_padding(int width, int height, PadTarget target) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "input dims must be >= 1");
  if (target.width < width || target.height < height) {
    throw Error(ErrorCode::TargetTooSmall, "target " + std::to_string(target.width) + "x" +
                                               std::to_string(target.height) + " smaller than input " +
                                               std::to_string(width) + "x" + std::to_string(height));
  }
  return PadRecord{(target.height - height) / 2, (target.width - width) / 2, width, height, target.width,
                   target.height};
}

void check_record(const PadRecord& record, int padded_width, int padded_height) {
  const bool ok = record.original_width >= 1 && record.original_height >= 1 && record.offset_row >= 0 &&
                  record.offset_col >= 0 && record.padded_width == padded_width &&
                  record.padded_height == padded_height &&
                  record.offset_row + record.original_height <= padded_height &&
                  record.offset_col + record.original_width <= padded_width;
  if (!ok) throw Error(ErrorCode::InconsistentRecord, "pad record inconsistent with padded dims");
}

PaddedRadiograph zero_pad(const Radiograph& image, PadTarget target) {
  PaddedRadiograph out;
  out.record = plan_padding(image.width(), image.height(), target);
  out.image.intensity = zero_pad(image.intensity, out.record);
  if (image.raw) out.image.raw = zero_pad(*image.raw, out.record);
  return out;
}

PaddedMask zero_pad(const BinaryMask2D& mask, PadTarget target) {
  PaddedMask out;
  out.record = plan_padding(mask.width(), mask.height(), target);
  out.mask = BinaryMask2D(target.width, target.height);
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (mask.test(r, c)) out.mask.set(r + out.record.offset_row, c + out.record.offset_col);
    }
  }
  return out;
}

PaddedEncoded zero_pad(const EncodedMaskImage& image, PadTarget target) {
  PaddedEncoded out;
  out.record = plan_padding(image.width(), image.height(), target);
  out.image = zero_pad(image, out.record);
  return out;
}

Radiograph crop(const Radiograph& padded, const PadRecord& record) {
  Radiograph out;
  out.intensity = crop(padded.intensity, record);
  if (padded.raw) out.raw = crop(*padded.raw, record);
  return out;
}

BinaryMask2D crop(const BinaryMask2D& padded, const PadRecord& record) {
  check_record(record, padded.width(), padded.height());
  BinaryMask2D out(record.original_width, record.original_height);
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) {
      if (padded.test(r + record.offset_row, c + record.offset_col)) out.set(r, c);
    }
  }
  return out;
}

}  // namespace cfs
