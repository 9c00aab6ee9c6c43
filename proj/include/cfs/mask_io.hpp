#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "cfs/mask_model.hpp"

namespace cfs {

// .cfsm layout (little-endian): "CFSM" | u32 version=1 | u32 width |
// u32 height | width*height u32 words, row-major.
inline constexpr std::uint32_t kMaskFormatVersion = 1;
inline constexpr std::size_t kMaskHeaderBytes = 16;
inline constexpr std::uint32_t kMaxFileSide = 1u << 16;

std::vector<std::uint8_t> serialize_mask(const EncodedMaskImage& img);
EncodedMaskImage parse_mask(std::span<const std::uint8_t> bytes);

EncodedMaskImage read_mask_file(const std::filesystem::path& path);
void write_mask_file(const EncodedMaskImage& img, const std::filesystem::path& path);

// 16-bit binary PGM (P5, maxval 65535, big-endian samples per Netpbm);
// sample = round(65535 * intensity).
std::vector<std::uint8_t> serialize_pgm16(const Image2D<double>& intensity);
Image2D<double> parse_pgm16(std::span<const std::uint8_t> bytes);
void write_pgm16(const Image2D<double>& intensity, const std::filesystem::path& path);
Image2D<double> read_pgm16(const std::filesystem::path& path);

// Whole-file helpers. Writes land in "<path>.partial" and are renamed into
// place only once complete.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

// Little-endian primitive codec shared by the binary formats.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void reserve(std::size_t n) { buf_.reserve(n); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::uint32_t u32();
  float f32();
  double f64();
  std::span<const std::uint8_t> raw(std::size_t n);
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace cfs
