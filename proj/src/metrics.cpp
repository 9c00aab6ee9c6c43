#include "cfs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace cfs {

EmptyMaskPolicy parse_empty_policy(std::string_view name) {
  if (name == "diagonal" || name == "diagonal_penalty") return EmptyMaskPolicy::DiagonalPenalty;
  if (name == "skip" || name == "skip_record") return EmptyMaskPolicy::SkipRecord;
  throw Error(ErrorCode::InvalidArgument, "unknown empty-mask policy '" + std::string(name) + "'");
}

std::string_view to_string(EmptyMaskPolicy policy) noexcept {
  return policy == EmptyMaskPolicy::DiagonalPenalty ? "diagonal" : "skip";
}

std::string_view to_string(MetricLevel level) noexcept {
  return level == MetricLevel::Category ? "category" : "fragment";
}

double iou(const BinaryMask2D& a, const BinaryMask2D& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimensionMismatch, "iou of masks with different dims");
  auto pa = a.pixels();
  auto pb = b.pixels();
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const bool x = pa[i] != 0;
    const bool y = pb[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double image_diagonal(int width, int height, double spacing) noexcept {
  return std::sqrt(static_cast<double>(width) * width + static_cast<double>(height) * height) * spacing;
}

std::size_t nearest_rank(std::size_t n, int percent) noexcept {
  return (static_cast<std::size_t>(percent) * n + 99) / 100;
}

namespace {

void directed(const BinaryMask2D& from_edge, const DistanceMap& to_map, std::vector<double>& out) {
  for (int r = 0; r < from_edge.height(); ++r) {
    for (int c = 0; c < from_edge.width(); ++c) {
      if (from_edge.test(r, c)) out.push_back(to_map.distance(r, c));
    }
  }
}

enum class Emptiness { BothEmpty, OneEmpty, Neither };

Emptiness emptiness(const BinaryMask2D& a, const BinaryMask2D& b) {
  const bool ea = a.none();
  const bool eb = b.none();
  if (ea && eb) return Emptiness::BothEmpty;
  if (ea || eb) return Emptiness::OneEmpty;
  return Emptiness::Neither;
}

double empty_case(const BinaryMask2D& a, Emptiness e, const DistanceOptions& options) {
  if (e == Emptiness::BothEmpty) return 0.0;
  if (options.policy == EmptyMaskPolicy::SkipRecord) {
    throw Error(ErrorCode::EmptyMask, "surface distance with exactly one empty mask under skip policy");
  }
  return image_diagonal(a.width(), a.height(), options.pixel_spacing);
}

}  // namespace

std::vector<double> pooled_surface_distances(const BinaryMask2D& a, const BinaryMask2D& b, double spacing) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimensionMismatch, "surface distance of masks with different dims");
  const BinaryMask2D edge_a = boundary(a);
  const BinaryMask2D edge_b = boundary(b);
  const DistanceMap to_a = edt(edge_a, spacing);
  const DistanceMap to_b = edt(edge_b, spacing);
  std::vector<double> pool;
  pool.reserve(edge_a.area() + edge_b.area());
  directed(edge_a, to_b, pool);
  directed(edge_b, to_a, pool);
  return pool;
}

double assd(const BinaryMask2D& a, const BinaryMask2D& b, const DistanceOptions& options) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimensionMismatch, "assd of masks with different dims");
  const Emptiness e = emptiness(a, b);
  if (e != Emptiness::Neither) return empty_case(a, e, options);
  const auto pool = pooled_surface_distances(a, b, options.pixel_spacing);
  return std::accumulate(pool.begin(), pool.end(), 0.0) / static_cast<double>(pool.size());
}

double hd95(const BinaryMask2D& a, const BinaryMask2D& b, const DistanceOptions& options) {
  if (!a.same_shape(b)) throw Error(ErrorCode::DimensionMismatch, "hd95 of masks with different dims");
  const Emptiness e = emptiness(a, b);
  if (e != Emptiness::Neither) return empty_case(a, e, options);
  auto pool = pooled_surface_distances(a, b, options.pixel_spacing);
  const std::size_t k = nearest_rank(pool.size(), 95);
  std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k - 1), pool.end());
  return pool[k - 1];
}

double MatchResult::total_iou() const noexcept {
  double s = 0.0;
  for (const auto& p : pairs) s += p.iou;
  return s;
}

MatchResult match_iou_table(const std::vector<std::vector<double>>& table, std::size_t n_gt) {
  const std::size_t n_pred = table.size();
  const std::size_t n = std::max(n_pred, n_gt);
  MatchResult result;
  if (n_pred == 0 || n_gt == 0) {
    for (std::size_t i = 0; i < n_pred; ++i) result.unmatched_pred.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < n_gt; ++j) result.unmatched_gt.push_back(static_cast<int>(j));
    return result;
  }

  // Square min-cost assignment with potentials; rows = preds, cols = gts,
  // padded with zero-cost dummies. 1-based indices, column 0 is the sentinel.
  auto cost = [&](std::size_t i, std::size_t j) -> double {
    if (i > n_pred || j > n_gt) return 0.0;
    return -table[i - 1][j - 1];
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(n + 1, 0.0);
  std::vector<std::size_t> owner(n + 1, 0);  // owner[j] = row assigned to column j
  std::vector<std::size_t> way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<char> pred_matched(n_pred, 0);
  std::vector<char> gt_matched(n_gt, 0);
  for (std::size_t j = 1; j <= n_gt; ++j) {
    const std::size_t i = owner[j];
    if (i == 0 || i > n_pred) continue;
    const double value = table[i - 1][j - 1];
    if (!(value > 0.0)) continue;
    result.pairs.push_back({static_cast<int>(i - 1), static_cast<int>(j - 1), value});
    pred_matched[i - 1] = 1;
    gt_matched[j - 1] = 1;
  }
  for (std::size_t i = 0; i < n_pred; ++i) {
    if (!pred_matched[i]) result.unmatched_pred.push_back(static_cast<int>(i));
  }
  for (std::size_t j = 0; j < n_gt; ++j) {
    if (!gt_matched[j]) result.unmatched_gt.push_back(static_cast<int>(j));
  }
  return result;
}

MatchResult match_fragments(const std::vector<BinaryMask2D>& preds, const std::vector<BinaryMask2D>& gts) {
  std::vector<std::vector<double>> table(preds.size(), std::vector<double>(gts.size(), 0.0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) table[i][j] = iou(preds[i], gts[j]);
  }
  return match_iou_table(table, gts.size());
}

namespace {

struct PairMetrics {
  double iou;
  double assd;
  double hd95;
};

PairMetrics nonempty_pair(const BinaryMask2D& p, const BinaryMask2D& g, double spacing) {
  auto pool = pooled_surface_distances(p, g, spacing);
  const double mean = std::accumulate(pool.begin(), pool.end(), 0.0) / static_cast<double>(pool.size());
  const std::size_t k = nearest_rank(pool.size(), 95);
  std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k - 1), pool.end());
  return {iou(p, g), mean, pool[k - 1]};
}

struct Indexed {
  std::vector<BinaryMask2D> masks;
  std::vector<int> original;
};

Indexed nonempty(const std::vector<BinaryMask2D>& list) {
  Indexed out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].none()) continue;
    out.masks.push_back(list[i]);
    out.original.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace

ImageEvaluation evaluate_image(const FragmentMaskSet& pred, const FragmentMaskSet& gt, const std::string& image_id,
                               const DistanceOptions& options) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw Error(ErrorCode::DimensionMismatch, "prediction and ground truth dims differ for " + image_id);
  }
  const double diagonal = image_diagonal(gt.width(), gt.height(), options.pixel_spacing);
  const bool skip = options.policy == EmptyMaskPolicy::SkipRecord;
  ImageEvaluation eval;

  for (CategoryId c : kAllCategories) {
    // Category level on fragment unions.
    {
      const BinaryMask2D up = pred.category_union(c);
      const BinaryMask2D ug = gt.category_union(c);
      MetricsRecord rec;
      rec.image_id = image_id;
      rec.category = c;
      rec.level = MetricLevel::Category;
      rec.flags.empty_pred = up.none();
      rec.flags.empty_gt = ug.none();
      bool emit = true;
      if (rec.flags.empty_pred && rec.flags.empty_gt) {
        rec.iou = 1.0;
      } else if (rec.flags.empty_pred || rec.flags.empty_gt) {
        emit = !skip;
        rec.iou = 0.0;
        rec.assd = rec.hd95 = diagonal;
        rec.flags.penalty_applied = true;
      } else {
        const auto m = nonempty_pair(up, ug, options.pixel_spacing);
        rec.iou = m.iou;
        rec.assd = m.assd;
        rec.hd95 = m.hd95;
      }
      if (emit) eval.records.push_back(std::move(rec));
    }

    // Fragment level: mean over GT fragments of the matched pair metrics.
    const Indexed gts = nonempty(gt.fragments(c));
    const Indexed preds = nonempty(pred.fragments(c));
    MetricsRecord rec;
    rec.image_id = image_id;
    rec.category = c;
    rec.level = MetricLevel::Fragment;
    rec.flags.empty_pred = preds.masks.empty();
    rec.flags.empty_gt = gts.masks.empty();
    rec.gt_fragments = static_cast<int>(gts.masks.size());

    if (gts.masks.empty()) {
      rec.unmatched_pred = static_cast<int>(preds.masks.size());
      if (preds.masks.empty()) {
        rec.iou = 1.0;
      } else {
        if (skip) continue;
        rec.iou = 0.0;
        rec.assd = rec.hd95 = diagonal;
        rec.flags.penalty_applied = true;
      }
      eval.records.push_back(std::move(rec));
      continue;
    }

    const MatchResult match = match_fragments(preds.masks, gts.masks);
    rec.unmatched_pred = static_cast<int>(match.unmatched_pred.size());
    rec.unmatched_gt = static_cast<int>(match.unmatched_gt.size());

    double iou_sum = 0.0;
    double assd_sum = 0.0;
    double hd_sum = 0.0;
    std::size_t distance_terms = 0;
    std::vector<int> pred_of_gt(gts.masks.size(), -1);
    for (const auto& p : match.pairs) pred_of_gt[static_cast<std::size_t>(p.gt)] = p.pred;
    for (std::size_t j = 0; j < gts.masks.size(); ++j) {
      FragmentScore score{c, gts.original[j], -1, 0.0, diagonal, diagonal};
      if (pred_of_gt[j] >= 0) {
        const auto pi = static_cast<std::size_t>(pred_of_gt[j]);
        const auto m = nonempty_pair(preds.masks[pi], gts.masks[j], options.pixel_spacing);
        score = {c, gts.original[j], preds.original[pi], m.iou, m.assd, m.hd95};
        assd_sum += m.assd;
        hd_sum += m.hd95;
        ++distance_terms;
      } else if (!skip) {
        assd_sum += diagonal;
        hd_sum += diagonal;
        ++distance_terms;
        rec.flags.penalty_applied = true;
      }
      iou_sum += score.iou;
      eval.fragments.push_back(score);
    }
    if (distance_terms == 0) continue;  // skip policy, nothing matched
    rec.iou = iou_sum / static_cast<double>(gts.masks.size());
    rec.assd = assd_sum / static_cast<double>(distance_terms);
    rec.hd95 = hd_sum / static_cast<double>(distance_terms);
    eval.records.push_back(std::move(rec));
  }
  return eval;
}

AggregateStats summarize(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::NoRecords, "cannot aggregate zero values");
  AggregateStats s;
  s.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

namespace {

MetricSummary aggregate_filtered(const std::vector<MetricsRecord>& records, MetricLevel level,
                                 const CategoryId* category) {
  std::vector<const MetricsRecord*> chosen;
  for (const auto& r : records) {
    if (r.level == level && (category == nullptr || r.category == *category)) chosen.push_back(&r);
  }
  if (chosen.empty()) throw Error(ErrorCode::NoRecords, "no " + std::string(to_string(level)) + " records");
  std::stable_sort(chosen.begin(), chosen.end(), [](const MetricsRecord* a, const MetricsRecord* b) {
    if (a->image_id != b->image_id) return a->image_id < b->image_id;
    return index_of(a->category) < index_of(b->category);
  });
  std::vector<double> i, a, h;
  for (const auto* r : chosen) {
    i.push_back(r->iou);
    a.push_back(r->assd);
    h.push_back(r->hd95);
  }
  return {summarize(i), summarize(a), summarize(h)};
}

}  // namespace

MetricSummary aggregate(const std::vector<MetricsRecord>& records, MetricLevel level) {
  return aggregate_filtered(records, level, nullptr);
}

MetricSummary aggregate(const std::vector<MetricsRecord>& records, MetricLevel level, CategoryId category) {
  return aggregate_filtered(records, level, &category);
}

std::string format_mean_sd(const AggregateStats& stats, int mean_digits, int sd_digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f (%.*f)", mean_digits, stats.mean, sd_digits, stats.sd);
  return buf;
}

}  // namespace cfs
