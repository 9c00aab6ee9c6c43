#include "cfs/mask_io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace cfs {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw Error(ErrorCode::TruncatedFile, "need " + std::to_string(n) + " more bytes, have " +
                                              std::to_string(remaining()));
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return std::bit_cast<double>(v);
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

namespace {

void check_side(std::uint32_t side, const char* what) {
  if (side > kMaxFileSide) {
    throw Error(ErrorCode::DimensionOverflow, std::string(what) + " " + std::to_string(side) + " exceeds 65536");
  }
  if (side == 0) throw Error(ErrorCode::DimensionOverflow, std::string(what) + " is zero");
}

}  // namespace

std::vector<std::uint8_t> serialize_mask(const EncodedMaskImage& img) {
  check_side(static_cast<std::uint32_t>(img.width()), "width");
  check_side(static_cast<std::uint32_t>(img.height()), "height");
  ByteWriter w;
  w.reserve(kMaskHeaderBytes + 4 * img.size());
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("CFSM"), 4));
  w.u32(kMaskFormatVersion);
  w.u32(static_cast<std::uint32_t>(img.width()));
  w.u32(static_cast<std::uint32_t>(img.height()));
  for (std::uint32_t word : img.pixels()) w.u32(word);
  return w.take();
}

EncodedMaskImage parse_mask(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "CFSM", 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not a CFSM mask file");
  }
  r.raw(4);
  const std::uint32_t version = r.u32();
  if (version != kMaskFormatVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "mask format version " + std::to_string(version));
  }
  const std::uint32_t width = r.u32();
  const std::uint32_t height = r.u32();
  check_side(width, "width");
  check_side(height, "height");
  const std::size_t payload = 4ull * width * height;
  if (r.remaining() < payload) {
    throw Error(ErrorCode::TruncatedFile, "mask payload is " + std::to_string(r.remaining()) +
                                              " bytes, expected " + std::to_string(payload));
  }
  if (r.remaining() > payload) throw Error(ErrorCode::TrailingData, "bytes after mask payload");
  EncodedMaskImage img(static_cast<int>(width), static_cast<int>(height), 0u);
  for (auto& word : img.pixels()) word = r.u32();
  return img;
}

EncodedMaskImage read_mask_file(const std::filesystem::path& path) {
  return parse_mask(read_file_bytes(path));
}

void write_mask_file(const EncodedMaskImage& img, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_mask(img));
}

std::vector<std::uint8_t> serialize_pgm16(const Image2D<double>& intensity) {
  const std::string header = "P5\n" + std::to_string(intensity.width()) + " " +
                             std::to_string(intensity.height()) + "\n65535\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 2 * intensity.size());
  for (double v : intensity.pixels()) {
    const double clamped = std::isfinite(v) ? std::fmin(1.0, std::fmax(0.0, v)) : 0.0;
    const auto sample = static_cast<std::uint16_t>(std::lround(65535.0 * clamped));
    out.push_back(static_cast<std::uint8_t>(sample >> 8));
    out.push_back(static_cast<std::uint8_t>(sample & 0xFF));
  }
  return out;
}

Image2D<double> parse_pgm16(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> long {
    skip_space();
    long v = 0;
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    if (pos == start || v > (1L << 20)) throw Error(ErrorCode::BadMagic, "malformed PGM header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw Error(ErrorCode::BadMagic, "not a binary PGM (P5)");
  }
  pos = 2;
  const long width = number();
  const long height = number();
  const long maxval = number();
  if (maxval != 65535) throw Error(ErrorCode::UnsupportedVersion, "PGM maxval must be 65535");
  if (width < 1 || height < 1 || width > kMaxFileSide || height > kMaxFileSide) {
    throw Error(ErrorCode::DimensionOverflow, "PGM dimensions out of range");
  }
  ++pos;  // single whitespace before raster
  const std::size_t payload = 2ull * static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() < pos + payload) throw Error(ErrorCode::TruncatedFile, "PGM raster truncated");
  if (bytes.size() > pos + payload) throw Error(ErrorCode::TrailingData, "bytes after PGM raster");
  Image2D<double> img(static_cast<int>(width), static_cast<int>(height), 0.0);
  for (auto& v : img.pixels()) {
    const unsigned sample = (static_cast<unsigned>(bytes[pos]) << 8) | bytes[pos + 1];
    pos += 2;
    v = static_cast<double>(sample) / 65535.0;
  }
  return img;
}

void write_pgm16(const Image2D<double>& intensity, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_pgm16(intensity));
}

Image2D<double> read_pgm16(const std::filesystem::path& path) { return parse_pgm16(read_file_bytes(path)); }

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot create " + partial.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + partial.string());
  }
  std::error_code ec;
  std::filesystem::rename(partial, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename " + partial.string() + ": " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace cfs
