#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfs/mask_model.hpp"
#include "cfs/metrics.hpp"

namespace cfs {

struct OverlapRow {
  std::string image_id;
  double theta_deg = 0.0;
  std::optional<double> overlap_ratio;          // nullopt: GT LI empty, row excluded from sorting
  std::array<double, kNumCategories> iou_f{};   // fragment-level IoU per category (SA, LI, RI)
  std::array<std::size_t, kNumCategories> false_positive{};  // pixels, category unions
  std::array<std::size_t, kNumCategories> false_negative{};
  std::map<std::pair<int, int>, double> fragment_iou;  // (category index, GT fragment) -> IoU

  bool flagged() const noexcept { return !overlap_ratio.has_value(); }
  double mean_iou_f() const noexcept { return (iou_f[0] + iou_f[1] + iou_f[2]) / 3.0; }

  bool operator==(const OverlapRow&) const = default;
};

// Computes one row from an image's GT and prediction; nothing of the masks is
// retained, so a dataset can be streamed one image at a time.
OverlapRow overlap_row(const std::string& image_id, double theta_deg, const FragmentMaskSet& gt,
                       const FragmentMaskSet& pred, const DistanceOptions& options = {});

// Overlap ratio descending, ties by image id ascending; flagged rows follow
// in input order.
void sort_rows(std::vector<OverlapRow>& rows);

struct OverlapSample {
  std::string image_id;
  double theta_deg;
  FragmentMaskSet gt;
  FragmentMaskSet pred;
};

std::vector<OverlapRow> analyze(const std::vector<OverlapSample>& dataset, const DistanceOptions& options = {});

// Average ranks for ties, Pearson correlation of the ranks.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

std::string report_csv(const std::vector<OverlapRow>& rows);
std::vector<OverlapRow> parse_report_csv(const std::string& text);

struct OverlapSummary {
  std::size_t rows = 0;
  std::size_t flagged = 0;
  // spearman(overlap ratio, fragment IoU); nullopt when degenerate.
  std::optional<double> rho_sa;
  std::optional<double> rho_li;
  std::optional<double> rho_ri;
  std::optional<double> rho_mean;
};

OverlapSummary summarize_rows(const std::vector<OverlapRow>& rows);
std::string summary_json(const OverlapSummary& summary);

// Writes the CSV and the summary JSON; rows must be nonempty.
OverlapSummary emit_report(const std::vector<OverlapRow>& rows, const std::filesystem::path& csv_path,
                           const std::filesystem::path& summary_path);

}  // namespace cfs
