#pragma once

#include <string>
#include <vector>

#include "cfs/mask_model.hpp"
#include "cfs/predictor.hpp"

namespace cfs {

struct PipelineConfig {
  double confidence_threshold = 0.8;  // keep candidates with confidence strictly above
  double category_threshold = 0.5;    // foreground iff probability >= threshold
  double nms_iou = 0.5;               // suppress at IoU >= this; 1.0 disables
  bool drop_empty = true;

  bool operator==(const PipelineConfig&) const = default;
};

void validate(const PipelineConfig& cfg);

BinaryMask2D binarize_category(const CategoryPrediction& p, double threshold);

std::vector<FragmentCandidate> filter_by_confidence(const std::vector<FragmentCandidate>& cands, double tau);

// Greedy mask NMS per category. Candidates are visited by confidence desc,
// then area desc, then input position; survivors keep their input order.
std::vector<FragmentCandidate> mask_nms(const std::vector<FragmentCandidate>& cands, double iou_threshold);

BinaryMask2D intersect_with_category(const BinaryMask2D& fragment, const BinaryMask2D& category);

// Area descending, ties broken by centroid (row, col) ascending.
std::vector<BinaryMask2D> canonical_reorder(std::vector<BinaryMask2D> fragments, bool drop_empty = true);

struct CfsResult {
  FragmentMaskSet fragments;
  std::array<BinaryMask2D, kNumCategories> category_masks;
  std::vector<std::string> warnings;  // e.g. more than 10 fragments survived
};

// Step 1 (category masks), Step 2 (fragment candidates from image + mask),
// Step 3 (threshold, NMS, intersect with the category mask, reorder).
CfsResult run_cfs(const Radiograph& image, const std::string& image_id, Predictor& backend,
                  const PipelineConfig& cfg = {});

}  // namespace cfs
