#include "cfs/overlap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cfs/mask_io.hpp"
#include "cfs/projector.hpp"

namespace cfs {

OverlapRow overlap_row(const std::string& image_id, double theta_deg, const FragmentMaskSet& gt,
                       const FragmentMaskSet& pred, const DistanceOptions& options) {
  OverlapRow row;
  row.image_id = image_id;
  row.theta_deg = theta_deg;
  if (!gt.category_union(CategoryId::LI).none()) row.overlap_ratio = overlap_ratio(gt, CategoryId::LI);

  const ImageEvaluation eval = evaluate_image(pred, gt, image_id, options);
  for (const auto& rec : eval.records) {
    if (rec.level == MetricLevel::Fragment) row.iou_f[static_cast<std::size_t>(index_of(rec.category))] = rec.iou;
  }
  for (const auto& f : eval.fragments) row.fragment_iou[{index_of(f.category), f.gt_index}] = f.iou;

  for (CategoryId c : kAllCategories) {
    const BinaryMask2D g = gt.category_union(c);
    const BinaryMask2D p = pred.category_union(c);
    auto pg = g.pixels();
    auto pp = p.pixels();
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t i = 0; i < pg.size(); ++i) {
      fp += (pp[i] && !pg[i]) ? 1 : 0;
      fn += (pg[i] && !pp[i]) ? 1 : 0;
    }
    row.false_positive[static_cast<std::size_t>(index_of(c))] = fp;
    row.false_negative[static_cast<std::size_t>(index_of(c))] = fn;
  }
  return row;
}

void sort_rows(std::vector<OverlapRow>& rows) {
  std::stable_partition(rows.begin(), rows.end(), [](const OverlapRow& r) { return !r.flagged(); });
  const auto split = std::find_if(rows.begin(), rows.end(), [](const OverlapRow& r) { return r.flagged(); });
  std::stable_sort(rows.begin(), split, [](const OverlapRow& a, const OverlapRow& b) {
    if (*a.overlap_ratio != *b.overlap_ratio) return *a.overlap_ratio > *b.overlap_ratio;
    return a.image_id < b.image_id;
  });
}

std::vector<OverlapRow> analyze(const std::vector<OverlapSample>& dataset, const DistanceOptions& options) {
  std::vector<OverlapRow> rows;
  rows.reserve(dataset.size());
  for (const auto& s : dataset) rows.push_back(overlap_row(s.image_id, s.theta_deg, s.gt, s.pred, options));
  sort_rows(rows);
  return rows;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "spearman series lengths " + std::to_string(xs.size()) + " and " + std::to_string(ys.size()));
  }
  if (xs.size() < 2) throw Error(ErrorCode::LengthMismatch, "spearman needs at least two samples");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateConstantSeries, "spearman of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// Column order of per-category fields follows the report convention SA, RI, LI.
constexpr std::array<CategoryId, 3> kReportOrder = {CategoryId::SA, CategoryId::RI, CategoryId::LI};

std::string lower(CategoryId c) {
  std::string s(category_name(c));
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> header() {
  std::vector<std::string> h{"image_id", "theta", "overlap_ratio"};
  for (CategoryId c : kReportOrder) h.push_back("iou_f_" + lower(c));
  for (CategoryId c : kReportOrder) {
    h.push_back("fp_" + lower(c));
    h.push_back("fn_" + lower(c));
  }
  for (CategoryId c : kReportOrder) {
    for (int f = 0; f < kMaxFragmentsPerCategory; ++f) h.push_back("iou_" + lower(c) + "_" + std::to_string(f));
  }
  return h;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bad number in report: '" + s + "'");
  }
}

}  // namespace

std::string report_csv(const std::vector<OverlapRow>& rows) {
  std::ostringstream out;
  const auto h = header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << "\n";
  for (const auto& r : rows) {
    if (r.image_id.find_first_of(",\n\r\"") != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "image id '" + r.image_id + "' cannot be written to CSV");
    }
    out << r.image_id << "," << num(r.theta_deg) << "," << (r.overlap_ratio ? num(*r.overlap_ratio) : "");
    for (CategoryId c : kReportOrder) out << "," << num(r.iou_f[static_cast<std::size_t>(index_of(c))]);
    for (CategoryId c : kReportOrder) {
      out << "," << r.false_positive[static_cast<std::size_t>(index_of(c))] << ","
          << r.false_negative[static_cast<std::size_t>(index_of(c))];
    }
    for (CategoryId c : kReportOrder) {
      for (int f = 0; f < kMaxFragmentsPerCategory; ++f) {
        out << ",";
        const auto it = r.fragment_iou.find({index_of(c), f});
        if (it != r.fragment_iou.end()) out << num(it->second);
      }
    }
    out << "\n";
  }
  return out.str();
}

std::vector<OverlapRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != header()) {
    throw Error(ErrorCode::InvalidArgument, "overlap report header mismatch");
  }
  const std::size_t columns = header().size();
  std::vector<OverlapRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != columns) throw Error(ErrorCode::InvalidArgument, "overlap report row has wrong arity");
    OverlapRow r;
    std::size_t k = 0;
    r.image_id = cells[k++];
    r.theta_deg = parse_double(cells[k++]);
    if (!cells[k].empty()) r.overlap_ratio = parse_double(cells[k]);
    ++k;
    for (CategoryId c : kReportOrder) r.iou_f[static_cast<std::size_t>(index_of(c))] = parse_double(cells[k++]);
    for (CategoryId c : kReportOrder) {
      r.false_positive[static_cast<std::size_t>(index_of(c))] = static_cast<std::size_t>(std::stoull(cells[k++]));
      r.false_negative[static_cast<std::size_t>(index_of(c))] = static_cast<std::size_t>(std::stoull(cells[k++]));
    }
    for (CategoryId c : kReportOrder) {
      for (int f = 0; f < kMaxFragmentsPerCategory; ++f) {
        const std::string& cell = cells[k++];
        if (!cell.empty()) r.fragment_iou[{index_of(c), f}] = parse_double(cell);
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

OverlapSummary summarize_rows(const std::vector<OverlapRow>& rows) {
  OverlapSummary s;
  s.rows = rows.size();
  std::vector<double> ratio;
  std::array<std::vector<double>, kNumCategories> per_cat;
  std::vector<double> mean;
  for (const auto& r : rows) {
    if (r.flagged()) {
      ++s.flagged;
      continue;
    }
    ratio.push_back(*r.overlap_ratio);
    for (int c = 0; c < kNumCategories; ++c) per_cat[static_cast<std::size_t>(c)].push_back(r.iou_f[static_cast<std::size_t>(c)]);
    mean.push_back(r.mean_iou_f());
  }
  auto rho = [&](const std::vector<double>& ys) -> std::optional<double> {
    if (ratio.size() < 2) return std::nullopt;
    try {
      return spearman(ratio, ys);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateConstantSeries) return std::nullopt;
      throw;
    }
  };
  s.rho_sa = rho(per_cat[0]);
  s.rho_li = rho(per_cat[1]);
  s.rho_ri = rho(per_cat[2]);
  s.rho_mean = rho(mean);
  return s;
}

std::string summary_json(const OverlapSummary& summary) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j = {
      {"rows", summary.rows},
      {"flagged_rows", summary.flagged},
      {"reference_category", "LI"},
      {"spearman",
       {{"overlap_ratio_vs_iou_f_sa", opt(summary.rho_sa)},
        {"overlap_ratio_vs_iou_f_ri", opt(summary.rho_ri)},
        {"overlap_ratio_vs_iou_f_li", opt(summary.rho_li)},
        {"overlap_ratio_vs_iou_f_mean", opt(summary.rho_mean)}}},
  };
  return j.dump(2) + "\n";
}

OverlapSummary emit_report(const std::vector<OverlapRow>& rows, const std::filesystem::path& csv_path,
                           const std::filesystem::path& summary_path) {
  if (rows.empty()) throw Error(ErrorCode::NoRecords, "overlap report needs at least one row");
  const OverlapSummary summary = summarize_rows(rows);
  write_text_atomic(csv_path, report_csv(rows));
  write_text_atomic(summary_path, summary_json(summary));
  return summary;
}

}  // namespace cfs
