#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cfs/mask_model.hpp"
#include "cfs/morphology.hpp"

namespace cfs {

struct CategoryPrediction {
  CategoryId category = CategoryId::SA;
  Image2D<float> probability;  // values in [0, 1]
  bool is_binary = false;      // probability holds only 0 and 1

  bool operator==(const CategoryPrediction&) const = default;
};

struct FragmentCandidate {
  CategoryId category = CategoryId::SA;
  BinaryMask2D mask;
  BoundingBox bbox;  // tight bounds of `mask` when nonempty
  double confidence = 0.0;

  bool operator==(const FragmentCandidate&) const = default;
};

CategoryPrediction binary_prediction(CategoryId category, const BinaryMask2D& mask);

// Steps 1 and 2 of the framework, behind one interface.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual CategoryPrediction predict_category(const Radiograph& image, const std::string& image_id,
                                              CategoryId category) = 0;
  // Step 2 receives the image paired with the binarized Step-1 mask.
  virtual std::vector<FragmentCandidate> predict_fragments(const Radiograph& image, const BinaryMask2D& category_mask,
                                                           const std::string& image_id, CategoryId category) = 0;
};

// Ground-truth degradation used as a stand-in for trained networks. The
// default-constructed config is the identity.
struct MockConfig {
  int dilation_radius = 0;
  int erosion_radius = 0;
  int translate_rows = 0;
  int translate_cols = 0;
  double drop_probability = 0.0;
  int spurious_count = 0;
  // Matched candidates get confidence 1 - u * spread, u ~ U[0,1).
  double confidence_spread = 0.0;
  // Extra dilation radius = round(gain * overlap ratio of LI) for that image.
  double overlap_dilation_gain = 0.0;
  // Category maps are the exact GT unions instead of degraded ones.
  bool exact_categories = false;
  StructuringElement element = StructuringElement::Disc;
  std::uint64_t seed = 0;

  // Degradation profile used in calibration runs: spread 0.15.
  static MockConfig noisy(int dilation, std::uint64_t seed);

  bool operator==(const MockConfig&) const = default;
};

void validate(const MockConfig& cfg);

// Degrade (dilate or erode, then translate) one mask. `extra_dilation` is
// added to the configured dilation radius.
BinaryMask2D degrade(const BinaryMask2D& mask, const MockConfig& cfg, int extra_dilation = 0);

// Effective extra dilation for an image from its GT overlap ratio.
int overlap_extra_dilation(const FragmentMaskSet& gt, const MockConfig& cfg);

CategoryPrediction mock_predict_category(const FragmentMaskSet& gt, const MockConfig& cfg, CategoryId category,
                                         const std::string& image_id = "");
std::vector<FragmentCandidate> mock_predict_fragments(const FragmentMaskSet& gt, const MockConfig& cfg,
                                                      CategoryId category, const std::string& image_id = "");

class MockPredictor final : public Predictor {
 public:
  MockPredictor(FragmentMaskSet gt, MockConfig cfg) : gt_(std::move(gt)), cfg_(cfg) {}

  CategoryPrediction predict_category(const Radiograph& image, const std::string& image_id,
                                      CategoryId category) override;
  std::vector<FragmentCandidate> predict_fragments(const Radiograph& image, const BinaryMask2D& category_mask,
                                                   const std::string& image_id, CategoryId category) override;

 private:
  FragmentMaskSet gt_;
  MockConfig cfg_;
};

// Exchange layout under a predictions root:
//   <root>/<image_id>/category_{sa,li,ri}.cfsm   bit 0 = foreground
//   <root>/<image_id>/category_{sa,li,ri}.pgm    alternative 16-bit probability map
//   <root>/<image_id>/fragments.json
// fragments.json is an array of {"category", "mask", "score", "bbox"?}, or an
// object {"categories": {"SA": {"file", "kind": "binary"|"probability"}},
// "fragments": [...]} when category maps need to be flagged explicitly.
struct ExternalPredictions {
  std::array<CategoryPrediction, kNumCategories> categories;
  std::vector<FragmentCandidate> fragments;

  bool operator==(const ExternalPredictions&) const = default;
};

ExternalPredictions load_external_predictions(const std::filesystem::path& root, const std::string& image_id);
void write_external_predictions(const ExternalPredictions& preds, const std::filesystem::path& root,
                                const std::string& image_id);

class ExternalPredictor final : public Predictor {
 public:
  explicit ExternalPredictor(std::filesystem::path root) : root_(std::move(root)) {}

  CategoryPrediction predict_category(const Radiograph& image, const std::string& image_id,
                                      CategoryId category) override;
  std::vector<FragmentCandidate> predict_fragments(const Radiograph& image, const BinaryMask2D& category_mask,
                                                   const std::string& image_id, CategoryId category) override;

 private:
  const ExternalPredictions& load(const std::string& image_id);

  std::filesystem::path root_;
  std::string cached_id_;
  std::unique_ptr<ExternalPredictions> cached_;
};

}  // namespace cfs
