#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "cfs/distance_transform.hpp"
#include "cfs/mask_model.hpp"

namespace cfs {

enum class EmptyMaskPolicy {
  DiagonalPenalty,  // iou 0, assd = hd95 = image diagonal
  SkipRecord,       // record is not emitted
};

EmptyMaskPolicy parse_empty_policy(std::string_view name);  // "diagonal" | "skip"
std::string_view to_string(EmptyMaskPolicy policy) noexcept;

struct DistanceOptions {
  double pixel_spacing = 1.0;
  EmptyMaskPolicy policy = EmptyMaskPolicy::DiagonalPenalty;
};

// Both empty -> 1; exactly one empty -> 0.
double iou(const BinaryMask2D& a, const BinaryMask2D& b);

// Directed boundary distances of both directions, a->b first then b->a.
// Requires both masks nonempty.
std::vector<double> pooled_surface_distances(const BinaryMask2D& a, const BinaryMask2D& b, double spacing = 1.0);

// Both empty -> 0. Exactly one empty -> diagonal length under
// DiagonalPenalty, EmptyMask error under SkipRecord.
double assd(const BinaryMask2D& a, const BinaryMask2D& b, const DistanceOptions& options = {});
// Nearest-rank 95th percentile of the pooled distances: element ceil(0.95 n).
double hd95(const BinaryMask2D& a, const BinaryMask2D& b, const DistanceOptions& options = {});

double image_diagonal(int width, int height, double spacing = 1.0) noexcept;
// 1-based nearest-rank index ceil(p/100 * n) computed in integers.
std::size_t nearest_rank(std::size_t n, int percent) noexcept;

struct MatchedPair {
  int pred;
  int gt;
  double iou;
};

struct MatchResult {
  std::vector<MatchedPair> pairs;  // sorted by gt index
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;

  double total_iou() const noexcept;
};

// Optimal one-to-one assignment maximizing total IoU (Hungarian method).
// Pairs with zero IoU are never matched.
MatchResult match_fragments(const std::vector<BinaryMask2D>& preds, const std::vector<BinaryMask2D>& gts);
// Same, over a precomputed IoU table iou[pred][gt].
MatchResult match_iou_table(const std::vector<std::vector<double>>& table, std::size_t n_gt);

enum class MetricLevel { Category, Fragment };
std::string_view to_string(MetricLevel level) noexcept;

struct MetricFlags {
  bool empty_pred = false;
  bool empty_gt = false;
  bool penalty_applied = false;
};

struct MetricsRecord {
  std::string image_id;
  CategoryId category = CategoryId::SA;
  MetricLevel level = MetricLevel::Category;
  double iou = 0.0;
  double assd = 0.0;
  double hd95 = 0.0;
  MetricFlags flags;
  int gt_fragments = 0;     // fragment level: GT fragments averaged over
  int unmatched_gt = 0;
  int unmatched_pred = 0;   // false-positive fragments, reported, not averaged
};

// Metrics of one GT fragment against its matched prediction (or the miss penalty).
struct FragmentScore {
  CategoryId category;
  int gt_index;
  int pred_index;  // -1 when unmatched
  double iou;
  double assd;
  double hd95;
};

struct ImageEvaluation {
  std::vector<MetricsRecord> records;  // category then fragment level, SA/LI/RI order
  std::vector<FragmentScore> fragments;
};

// Empty GT fragment masks are ignored; predicted empties are ignored as well.
ImageEvaluation evaluate_image(const FragmentMaskSet& pred, const FragmentMaskSet& gt, const std::string& image_id,
                               const DistanceOptions& options = {});

struct AggregateStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample SD (n - 1); 0 when n == 1
};

// Mean and sample SD, summed in the given order.
AggregateStats summarize(const std::vector<double>& values);

struct MetricSummary {
  AggregateStats iou;
  AggregateStats assd;
  AggregateStats hd95;
};

// Aggregates the records of one level, summed in (image id, category) order.
// Throws NoRecords when no record has that level.
MetricSummary aggregate(const std::vector<MetricsRecord>& records, MetricLevel level);
MetricSummary aggregate(const std::vector<MetricsRecord>& records, MetricLevel level, CategoryId category);

// "0.914 (0.06)" style cell: mean with `mean_digits`, SD with `sd_digits`.
std::string format_mean_sd(const AggregateStats& stats, int mean_digits = 3, int sd_digits = 2);

}  // namespace cfs
