#include <doctest.h>

#include <algorithm>
#include <random>

#include "cfs/metrics.hpp"
#include "cfs/pipeline.hpp"
#include "cfs/projector.hpp"
#include "oracles.hpp"

using namespace cfs;

namespace {

BinaryMask2D rect(int w, int h, int r0, int c0, int rows, int cols) {
  BinaryMask2D m(w, h);
  for (int r = r0; r < r0 + rows; ++r)
    for (int c = c0; c < c0 + cols; ++c) m.set(r, c);
  return m;
}

FragmentCandidate cand(const BinaryMask2D& m, double conf, CategoryId c = CategoryId::SA) {
  return {c, m, tight_bbox(m), conf};
}

std::vector<View> fixture_views(std::uint64_t seed, int n_views, std::array<int, 3> frags = {2, 2, 1}) {
  PhantomSpec s;
  s.seed = seed;
  s.dims = {48, 48, 48};
  s.fragments = frags;
  ProjectionGeometry g;
  g.detector_width = 64;
  g.detector_height = 64;
  return make_views(generate(s), n_views, g);
}

double max_same_category_iou(const FragmentMaskSet& m) {
  double mx = 0.0;
  for (CategoryId c : kAllCategories) {
    const auto& f = m.fragments(c);
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t j = i + 1; j < f.size(); ++j) mx = std::max(mx, iou(f[i], f[j]));
  }
  return mx;
}

}  // namespace

TEST_CASE("binarize and confidence filter boundaries") {
  CategoryPrediction p{CategoryId::LI, Image2D<float>(3, 1, 0.0f), false};
  p.probability.at(0, 0) = 0.5f;
  p.probability.at(0, 1) = 0.49f;
  p.probability.at(0, 2) = 1.0f;
  const auto b = binarize_category(p, 0.5);
  CHECK(b.test(0, 0));
  CHECK_FALSE(b.test(0, 1));
  CHECK(b.test(0, 2));

  const auto m = rect(5, 5, 0, 0, 2, 2);
  const auto kept = filter_by_confidence({cand(m, 0.8), cand(m, 0.81), cand(m, 0.5)}, 0.8);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].confidence == 0.81);
}

TEST_CASE("mask nms examples") {
  const auto a = rect(10, 10, 0, 0, 3, 3);
  const auto dup = mask_nms({cand(a, 0.7), cand(a, 0.9)}, 0.5);
  REQUIRE(dup.size() == 1);
  CHECK(dup[0].confidence == 0.9);

  const auto far = rect(10, 10, 6, 6, 3, 3);
  CHECK(mask_nms({cand(a, 0.9), cand(far, 0.8)}, 0.5).size() == 2);

  // Offset by one column: intersection 6, union 12, IoU exactly 0.5.
  const auto shifted = rect(10, 10, 0, 1, 3, 3);
  REQUIRE(iou(a, shifted) == 0.5);
  const auto half = mask_nms({cand(a, 0.9), cand(shifted, 0.8)}, 0.5);
  REQUIRE(half.size() == 1);
  CHECK(half[0].mask == a);

  // Equal confidence: the larger mask wins.
  const auto big = rect(10, 10, 0, 0, 3, 4);
  const auto tie = mask_nms({cand(a, 0.9), cand(big, 0.9)}, 0.5);
  REQUIRE(tie.size() == 1);
  CHECK(tie[0].mask == big);

  // Other categories never suppress.
  CHECK(mask_nms({cand(a, 0.9, CategoryId::SA), cand(a, 0.9, CategoryId::RI)}, 0.5).size() == 2);
  // 1.0 disables suppression, even for exact duplicates.
  CHECK(mask_nms({cand(a, 0.9), cand(a, 0.9)}, 1.0).size() == 2);
}

TEST_CASE("nms survivors keep input order and are pairwise below threshold") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 40; ++t) {
    std::vector<FragmentCandidate> cs;
    for (int k = 0; k < 6; ++k) cs.push_back(cand(oracle::random_blobs(rng, 24, 24, 1), u(rng)));
    const auto out = mask_nms(cs, 0.3);
    std::size_t pos = 0;
    for (const auto& o : out) {
      while (pos < cs.size() && !(cs[pos] == o)) ++pos;
      CHECK(pos < cs.size());
    }
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t j = i + 1; j < out.size(); ++j) CHECK(iou(out[i].mask, out[j].mask) < 0.3);
  }
}

TEST_CASE("intersection removes leakage") {
  BinaryMask2D cat = rect(8, 8, 0, 0, 4, 4);
  BinaryMask2D frag = rect(8, 8, 3, 3, 1, 2);  // one pixel inside, one outside
  const auto in = intersect_with_category(frag, cat);
  CHECK(in.area() == 1);
  CHECK(in.test(3, 3));
  CHECK(is_subset(in, frag));
}

TEST_CASE("canonical reorder") {
  const auto small = rect(20, 20, 0, 0, 5, 10);   // 50
  const auto large = rect(20, 20, 8, 0, 10, 12);  // 120
  auto out = canonical_reorder({small, large});
  REQUIRE(out.size() == 2);
  CHECK(out[0] == large);

  BinaryMask2D at_10_5(20, 20), at_4_9(20, 20);
  at_10_5.set(10, 5);
  at_4_9.set(4, 9);
  out = canonical_reorder({at_10_5, at_4_9});
  CHECK(out[0] == at_4_9);

  CHECK(canonical_reorder({BinaryMask2D(20, 20), small}).size() == 1);
  CHECK(canonical_reorder({BinaryMask2D(20, 20), small}, false).size() == 2);

  std::mt19937_64 rng(32);
  for (int t = 0; t < 30; ++t) {
    std::vector<BinaryMask2D> ms;
    for (int k = 0; k < 5; ++k) ms.push_back(oracle::random_blobs(rng, 16, 16, 1));
    ms.push_back(ms[1]);  // duplicates must also order stably
    const auto ref = canonical_reorder(ms);
    CHECK(canonical_reorder(ref) == ref);
    for (int s = 0; s < 5; ++s) {
      std::shuffle(ms.begin(), ms.end(), rng);
      CHECK(canonical_reorder(ms) == ref);
    }
    for (std::size_t i = 1; i < ref.size(); ++i) CHECK(ref[i - 1].area() >= ref[i].area());
  }
}

TEST_CASE("identity backend is lossless") {
  for (const auto& view : fixture_views(3, 6)) {
    const auto& gt = view.projection.masks;
    MockPredictor backend(gt, {});
    PipelineConfig cfg;
    if (max_same_category_iou(gt) >= cfg.nms_iou) cfg.nms_iou = 1.0;
    const auto out = run_cfs(view.projection.image, "v", backend, cfg);
    for (CategoryId c : kAllCategories) {
      CHECK(out.fragments.fragments(c) == canonical_reorder(gt.fragments(c)));
    }
    for (const auto& rec : evaluate_image(out.fragments, gt, "v").records) {
      CHECK(rec.iou == 1.0);
      CHECK(rec.assd == 0.0);
      CHECK(rec.hd95 == 0.0);
    }
    CHECK(out.warnings.empty());
  }
}

TEST_CASE("nms disabled keeps overlapping true fragments") {
  // Full-sphere cuts give stacked fragments; with NMS off nothing is lost.
  PhantomSpec s;
  s.seed = 7;
  s.dims = {48, 48, 48};
  s.fragments = {3, 3, 3};
  s.fracture_tilt_deg = 90.0;
  ProjectionGeometry g;
  g.detector_width = 64;
  g.detector_height = 64;
  PipelineConfig cfg;
  cfg.nms_iou = 1.0;
  for (const auto& view : make_views(generate(s), 4, g)) {
    MockPredictor backend(view.projection.masks, {});
    const auto out = run_cfs(view.projection.image, "v", backend, cfg);
    for (CategoryId c : kAllCategories) {
      CHECK(out.fragments.fragments(c) == canonical_reorder(view.projection.masks.fragments(c)));
    }
  }
}

TEST_CASE("dilated candidates are confined to the category union") {
  for (const auto& view : fixture_views(4, 3)) {
    const auto& gt = view.projection.masks;
    MockConfig mc = MockConfig::noisy(3, 8);
    mc.exact_categories = true;
    mc.spurious_count = 2;
    MockPredictor backend(gt, mc);
    const auto out = run_cfs(view.projection.image, "v", backend);
    for (CategoryId c : kAllCategories) {
      const auto u = gt.category_union(c);
      for (const auto& f : out.fragments.fragments(c)) CHECK(is_subset(f, u));
      const auto& fr = out.fragments.fragments(c);
      for (std::size_t i = 1; i < fr.size(); ++i) CHECK(fr[i - 1].area() >= fr[i].area());
    }
  }
}

TEST_CASE("dropped fragments are reported as unmatched") {
  const auto views = fixture_views(5, 2, {3, 3, 3});
  MockConfig mc;
  mc.drop_probability = 0.5;
  mc.seed = 2;
  int unmatched = 0;
  for (const auto& view : views) {
    const auto& gt = view.projection.masks;
    MockPredictor backend(gt, mc);
    PipelineConfig cfg;
    cfg.nms_iou = 1.0;
    const auto out = run_cfs(view.projection.image, "v", backend, cfg);
    for (CategoryId c : kAllCategories) CHECK(out.fragments.fragments(c).size() <= gt.fragments(c).size());
    for (const auto& rec : evaluate_image(out.fragments, gt, "v").records) {
      if (rec.level == MetricLevel::Fragment) unmatched += rec.unmatched_gt;
    }
  }
  CHECK(unmatched > 0);
}

TEST_CASE("fragment cap keeps the ten largest") {
  FragmentMaskSet gt(64, 64);
  std::vector<FragmentCandidate> many;
  for (int k = 0; k < 12; ++k) many.push_back(cand(rect(64, 64, 5 * k, 0, 4, 1 + k), 0.95));

  struct Fixed final : Predictor {
    std::vector<FragmentCandidate> c;
    CategoryPrediction predict_category(const Radiograph&, const std::string&, CategoryId cat) override {
      BinaryMask2D all(64, 64);
      for (auto& p : all.pixels()) p = 1;
      return binary_prediction(cat, all);
    }
    std::vector<FragmentCandidate> predict_fragments(const Radiograph&, const BinaryMask2D&, const std::string&,
                                                     CategoryId cat) override {
      return cat == CategoryId::SA ? c : std::vector<FragmentCandidate>{};
    }
  } backend;
  backend.c = many;
  const Radiograph img{Image2D<double>(64, 64, 1.0), std::nullopt};
  const auto out = run_cfs(img, "cap", backend);
  REQUIRE(out.fragments.fragments(CategoryId::SA).size() == 10);
  CHECK(out.fragments.fragments(CategoryId::SA)[0].area() == 4 * 12);
  CHECK(out.fragments.fragments(CategoryId::SA)[9].area() == 4 * 3);
  REQUIRE(out.warnings.size() == 1);
  CHECK(out.warnings[0].find("CapExceeded") != std::string::npos);
}

TEST_CASE("pipeline config validation") {
  PipelineConfig c;
  c.confidence_threshold = 1.5;
  CHECK_THROWS_AS(validate(c), Error);
  c = {};
  c.nms_iou = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  CHECK_NOTHROW(validate(PipelineConfig{}));
}
