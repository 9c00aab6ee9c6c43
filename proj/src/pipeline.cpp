#include "cfs/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include "cfs/metrics.hpp"

namespace cfs {

void validate(const PipelineConfig& cfg) {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(cfg.confidence_threshold) || !unit(cfg.category_threshold) || !unit(cfg.nms_iou)) {
    throw Error(ErrorCode::InvalidArgument, "pipeline thresholds must lie in [0,1]");
  }
  if (!(cfg.nms_iou > 0.0)) throw Error(ErrorCode::InvalidArgument, "nms iou threshold must be in (0,1]");
}

BinaryMask2D binarize_category(const CategoryPrediction& p, double threshold) {
  BinaryMask2D out(p.probability.width(), p.probability.height());
  auto src = p.probability.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]) >= threshold ? 1 : 0;
  return out;
}

std::vector<FragmentCandidate> filter_by_confidence(const std::vector<FragmentCandidate>& cands, double tau) {
  std::vector<FragmentCandidate> out;
  std::copy_if(cands.begin(), cands.end(), std::back_inserter(out),
               [tau](const FragmentCandidate& c) { return c.confidence > tau; });
  return out;
}

std::vector<FragmentCandidate> mask_nms(const std::vector<FragmentCandidate>& cands, double iou_threshold) {
  if (iou_threshold >= 1.0) return cands;
  std::vector<std::size_t> area(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) area[i] = cands[i].mask.area();
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cands[a].confidence != cands[b].confidence) return cands[a].confidence > cands[b].confidence;
    return area[a] > area[b];
  });

  std::vector<char> keep(cands.size(), 0);
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return cands[k].category == cands[i].category && iou(cands[k].mask, cands[i].mask) >= iou_threshold;
    });
    if (suppressed) continue;
    keep[i] = 1;
    kept.push_back(i);
  }
  std::vector<FragmentCandidate> out;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (keep[i]) out.push_back(cands[i]);
  }
  return out;
}

BinaryMask2D intersect_with_category(const BinaryMask2D& fragment, const BinaryMask2D& category) {
  return mask_and(fragment, category);
}

std::vector<BinaryMask2D> canonical_reorder(std::vector<BinaryMask2D> fragments, bool drop_empty) {
  struct Key {
    std::size_t area;
    std::array<double, 2> centroid;
  };
  if (drop_empty) {
    std::erase_if(fragments, [](const BinaryMask2D& m) { return m.none(); });
  }
  std::vector<Key> keys;
  keys.reserve(fragments.size());
  for (const auto& m : fragments) keys.push_back({m.area(), centroid(m)});
  std::vector<std::size_t> order(fragments.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (keys[a].area != keys[b].area) return keys[a].area > keys[b].area;
    if (keys[a].centroid[0] != keys[b].centroid[0]) return keys[a].centroid[0] < keys[b].centroid[0];
    if (keys[a].centroid[1] != keys[b].centroid[1]) return keys[a].centroid[1] < keys[b].centroid[1];
    // Same area and centroid: fall back to pixel content for permutation invariance.
    return std::lexicographical_compare(fragments[a].pixels().begin(), fragments[a].pixels().end(),
                                        fragments[b].pixels().begin(), fragments[b].pixels().end(),
                                        std::greater<>());
  });
  std::vector<BinaryMask2D> out;
  out.reserve(fragments.size());
  for (std::size_t i : order) out.push_back(std::move(fragments[i]));
  return out;
}

CfsResult run_cfs(const Radiograph& image, const std::string& image_id, Predictor& backend,
                  const PipelineConfig& cfg) {
  validate(cfg);
  CfsResult result;
  result.fragments = FragmentMaskSet(image.width(), image.height());
  for (CategoryId c : kAllCategories) {
    const CategoryPrediction cat = backend.predict_category(image, image_id, c);
    if (cat.probability.width() != image.width() || cat.probability.height() != image.height()) {
      throw Error(ErrorCode::DimensionMismatch, "category prediction does not match image " + image_id);
    }
    BinaryMask2D cat_mask = binarize_category(cat, cfg.category_threshold);

    std::vector<FragmentCandidate> cands = backend.predict_fragments(image, cat_mask, image_id, c);
    std::erase_if(cands, [c](const FragmentCandidate& f) { return f.category != c; });
    cands = filter_by_confidence(cands, cfg.confidence_threshold);
    cands = mask_nms(cands, cfg.nms_iou);

    std::vector<BinaryMask2D> refined;
    refined.reserve(cands.size());
    for (const auto& f : cands) refined.push_back(intersect_with_category(f.mask, cat_mask));
    refined = canonical_reorder(std::move(refined), cfg.drop_empty);

    if (refined.size() > static_cast<std::size_t>(kMaxFragmentsPerCategory)) {
      result.warnings.push_back("CapExceeded: " + image_id + " " + std::string(category_name(c)) + " kept 10 of " +
                                std::to_string(refined.size()) + " fragments");
      refined.resize(static_cast<std::size_t>(kMaxFragmentsPerCategory));
    }
    result.fragments.set_fragments(c, std::move(refined));
    result.category_masks[static_cast<std::size_t>(index_of(c))] = std::move(cat_mask);
  }
  return result;
}

}  // namespace cfs
