#include <doctest.h>

#include <random>

#include "cfs/preprocess.hpp"
#include "oracles.hpp"

using namespace cfs;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

Image2D<double> random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image2D<double> img(w, h);
  for (auto& p : img.pixels()) p = u(rng);
  return img;
}

}  // namespace

TEST_CASE("448 square padded to 512 square sits at offset 32") {
  const auto rec = plan_padding(448, 448, {512, 512});
  CHECK(rec.offset_row == 32);
  CHECK(rec.offset_col == 32);
  CHECK(rec.padded_width == 512);
  CHECK(rec.padded_height == 512);

  std::mt19937_64 rng(1);
  Radiograph r{random_image(rng, 448, 448), std::nullopt};
  const auto padded = zero_pad(r, PadTarget{});
  CHECK(padded.record == rec);
  CHECK(padded.image.intensity.at(32, 32) == r.intensity.at(0, 0));
  CHECK(padded.image.intensity.at(31, 31) == 0.0);
  CHECK(padded.image.intensity.at(479, 479) == r.intensity.at(447, 447));
  CHECK(padded.image.intensity.at(480, 480) == 0.0);
  CHECK(crop(padded.image, padded.record).intensity == r.intensity);
}

TEST_CASE("padding to the same size is the identity") {
  std::mt19937_64 rng(2);
  const auto m = oracle::random_mask(rng, 20, 30, 0.4);
  const auto p = zero_pad(m, PadTarget{20, 30});
  CHECK(p.record.offset_row == 0);
  CHECK(p.record.offset_col == 0);
  CHECK(p.mask == m);
}

TEST_CASE("target smaller than the image is rejected") {
  CHECK(code_of([] { plan_padding(600, 400, {512, 512}); }) == ErrorCode::TargetTooSmall);
  CHECK(code_of([] { plan_padding(400, 600, {512, 512}); }) == ErrorCode::TargetTooSmall);
}

TEST_CASE("odd remainders round trip") {
  const auto rec = plan_padding(101, 37, {128, 64});
  CHECK(rec.offset_col == 13);  // floor(27 / 2)
  CHECK(rec.offset_row == 13);  // floor(27 / 2)
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> side(1, 60), extra(0, 21);
    const int w = side(rng), h = side(rng);
    const PadTarget t{w + extra(rng), h + extra(rng)};
    const auto img = random_image(rng, w, h);
    const auto padded = zero_pad(Radiograph{img, img}, t);
    const auto back = crop(padded.image, padded.record);
    CHECK(back.intensity == img);
    CHECK(*back.raw == img);

    const auto m = oracle::random_mask(rng, w, h, 0.5);
    const auto pm = zero_pad(m, t);
    CHECK(pm.mask.area() == m.area());
    CHECK(crop(pm.mask, pm.record) == m);

    double before = 0, after = 0;
    for (double v : img.pixels()) before += v;
    for (double v : padded.image.intensity.pixels()) after += v;
    CHECK(after == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("encoded masks pad without changing fragment bits") {
  EncodedMaskImage e(5, 3, 0);
  e.at(1, 2) = fragment_bit(CategoryId::RI, 4);
  const auto p = zero_pad(e, PadTarget{9, 8});
  CHECK(p.image.at(1 + p.record.offset_row, 2 + p.record.offset_col) == fragment_bit(CategoryId::RI, 4));
  CHECK(crop(p.image, p.record) == e);
}

TEST_CASE("inconsistent records are rejected") {
  const Image2D<double> padded(64, 64, 0.0);
  auto rec = plan_padding(40, 40, {64, 64});
  rec.offset_row = 30;  // 30 + 40 > 64
  CHECK(code_of([&] { crop(padded, rec); }) == ErrorCode::InconsistentRecord);
  rec = plan_padding(40, 40, {64, 64});
  CHECK(code_of([&] { crop(Image2D<double>(60, 64, 0.0), rec); }) == ErrorCode::InconsistentRecord);
  CHECK(code_of([&] { zero_pad(Image2D<double>(41, 40, 0.0), rec); }) == ErrorCode::InconsistentRecord);
  rec.offset_col = -1;
  CHECK(code_of([&] { check_record(rec, 64, 64); }) == ErrorCode::InconsistentRecord);
}
