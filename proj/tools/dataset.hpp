#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfs/mask_model.hpp"
#include "cfs/preprocess.hpp"

namespace cfs::cli {

// One projected view. File names are relative to the dataset directory.
struct DatasetEntry {
  std::string image_id;
  double theta_deg = 0.0;
  std::string image_file;  // 16-bit PGM intensity
  std::string mask_file;   // encoded GT fragment masks
  std::array<std::optional<double>, kNumCategories> overlap{};  // per reference category
  bool fov_clipped = false;
  std::optional<PadRecord> pad;
};

struct Dataset {
  std::filesystem::path dir;
  int width = 0;
  int height = 0;
  double pixel_mm = 1.0;
  std::string source;
  std::vector<DatasetEntry> entries;

  std::filesystem::path image_path(const DatasetEntry& e) const { return dir / e.image_file; }
  std::filesystem::path mask_path(const DatasetEntry& e) const { return dir / e.mask_file; }
};

inline constexpr const char* kDatasetFile = "dataset.json";

// Accepts the manifest itself or the directory holding dataset.json.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset);

// GT masks of an entry at original (unpadded) size.
FragmentMaskSet load_ground_truth(const Dataset& dataset, const DatasetEntry& entry);

}  // namespace cfs::cli
