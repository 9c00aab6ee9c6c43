// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfs/mask_io.hpp"
#include "cfs/metrics.hpp"
#include "cfs/morphology.hpp"
#include "cfs/overlap.hpp"
#include "cfs/pipeline.hpp"
#include "cfs/preprocess.hpp"
#include "cfs/projector.hpp"
#include "commands.hpp"
#include "oracles.hpp"

using namespace cfs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cfs");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("cfs_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

BinaryMask2D nonempty_mask(std::mt19937_64& rng, int w, int h) {
  for (;;) {
    const int kind = static_cast<int>(rng() % 3);
    BinaryMask2D m = kind == 0 ? oracle::random_mask(rng, w, h, 0.05 + 0.4 * double(rng() % 100) / 100.0)
                               : oracle::random_blobs(rng, w, h, 1 + static_cast<int>(rng() % 4));
    if (!m.none()) return m;
  }
}

double mean_fragment_iou(const std::vector<MetricsRecord>& records) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.level != MetricLevel::Fragment) continue;
    sum += r.iou;
    ++n;
  }
  return n ? sum / double(n) : 0.0;
}

// ---------------------------------------------------------------------------

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  int iou_bad = 0;
  double worst_assd = 0.0, worst_hd = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto a = nonempty_mask(rng, 32, 32);
    const auto b = nonempty_mask(rng, 32, 32);
    const auto [i, u] = oracle::brute_iou_counts(a, b);
    // IoU of masks is the exact quotient i/u; the double must be the correctly rounded one.
    if (iou(a, b) != static_cast<double>(i) / static_cast<double>(u)) ++iou_bad;
    worst_assd = std::max(worst_assd, std::abs(assd(a, b) - oracle::brute_assd(a, b)));
    worst_hd = std::max(worst_hd, std::abs(hd95(a, b) - oracle::brute_hd95(a, b)));
  }
  const double secs = seconds_since(t0);
  return {iou_bad == 0 && worst_assd <= 1e-9 && worst_hd <= 1e-9 && secs <= 10.0,
          fmt("200 pairs, iou mismatches %d, max |dASSD| %.3g, max |dHD95| %.3g, %.2f s", iou_bad, worst_assd,
              worst_hd, secs)};
}

Outcome edt_exactness() {
  std::mt19937_64 rng(1002);
  int bad = 0;
  for (int t = 0; t < 100; ++t) {
    auto m = oracle::random_mask(rng, 64, 64, t % 5 == 0 ? 0.002 : 0.02 + 0.3 * double(t % 7) / 7.0);
    if (m.none()) m.set(static_cast<int>(rng() % 64), static_cast<int>(rng() % 64));
    const auto map = edt(m);
    const auto got = map.squared.pixels();
    const auto want = oracle::brute_squared_edt(m);
    if (!std::equal(got.begin(), got.end(), want.begin(), want.end())) ++bad;
  }
  return {bad == 0, fmt("100 masks 64x64, %d differ from brute force", bad)};
}

Outcome pipeline_identity() {
  const auto dir = scratch("identity");
  const auto vol = (dir / "p.cfsv").string();
  if (cli({"generate", "--seed", "7", "--frags", "2,2,1", "--out", vol}) != 0) return {false, "generate failed"};
  if (cli({"project", "--volume", vol, "--views", "20", "--out", (dir / "d").string()}) != 0) {
    return {false, "project failed"};
  }
  if (cli({"pipeline", "--backend", "mock", "--mock", "identity", "--dataset", (dir / "d").string(), "--out",
           (dir / "r").string()}) != 0) {
    return {false, "pipeline failed"};
  }
  if (cli({"evaluate", "--pred", (dir / "r").string(), "--gt", (dir / "d").string(), "--out",
           (dir / "m.csv").string()}) != 0) {
    return {false, "evaluate failed"};
  }
  std::istringstream csv(slurp(dir / "m.csv"));
  std::string line;
  std::getline(csv, line);
  int records = 0, bad = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    ++records;
    if (f.size() < 6 || std::stod(f[3]) != 1.0 || std::stod(f[4]) != 0.0 || std::stod(f[5]) != 0.0) ++bad;
  }
  return {records == 20 * 6 && bad == 0, fmt("%d records, %d not IoU 1 / ASSD 0 / HD95 0", records, bad)};
}

Outcome refinement() {
  int fixtures = 0, checks = 0, decreased = 0, not_strict = 0, leaks = 0;
  ProjectionGeometry g;
  g.detector_width = 96;
  g.detector_height = 96;
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    PhantomSpec spec;
    spec.seed = seed;
    spec.dims = {64, 64, 64};
    spec.fragments = {2 + int(seed % 2), 2, 3};
    const LabelVolume vol = generate(spec);
    for (const auto& view : make_views(vol, 20, g)) {
      const auto& gt = view.projection.masks;
      ++fixtures;
      for (CategoryId c : kAllCategories) {
        const BinaryMask2D cat = gt.category_union(c);
        for (const auto& frag : gt.fragments(c)) {
          if (frag.none()) continue;
          for (int r : {1, 2, 3}) {
            const BinaryMask2D cand = dilate(frag, r);
            const BinaryMask2D refined = intersect_with_category(cand, cat);
            const double before = iou(cand, frag), after = iou(refined, frag);
            ++checks;
            if (after < before) ++decreased;
            if (!is_subset(cand, cat)) {
              ++leaks;
              if (!(after > before)) ++not_strict;
            }
          }
        }
      }
    }
  }
  return {fixtures >= 50 && decreased == 0 && not_strict == 0 && leaks > 0,
          fmt("%d fixtures, %d fragment checks, %d leaking; %d decreased, %d leaking not improved", fixtures, checks,
              leaks, decreased, not_strict)};
}

Outcome degradation_monotonicity() {
  PhantomSpec spec;
  spec.seed = 7;
  spec.fragments = {2, 2, 1};
  const auto views = make_views(generate(spec), 20, ProjectionGeometry{});
  std::vector<double> means;
  for (int r = 0; r <= 4; ++r) {
    const MockConfig mock = MockConfig::noisy(r, 55);
    std::vector<MetricsRecord> records;
    for (std::size_t k = 0; k < views.size(); ++k) {
      const auto& p = views[k].projection;
      const std::string id = "view" + std::to_string(k);
      MockPredictor backend(p.masks, mock);
      const auto out = run_cfs(p.image, id, backend);
      for (auto& rec : evaluate_image(out.fragments, p.masks, id).records) records.push_back(std::move(rec));
    }
    means.push_back(mean_fragment_iou(records));
  }
  bool ok = true;
  for (std::size_t i = 1; i < means.size(); ++i) ok = ok && means[i] <= means[i - 1];
  return {ok, fmt("mean IoU-F r=0..4: %.4f %.4f %.4f %.4f %.4f", means[0], means[1], means[2], means[3], means[4])};
}

Outcome projection_conservation() {
  std::mt19937_64 rng(1006);
  std::uniform_real_distribution<float> mu(0.0f, 0.08f);
  LabelVolume v({64, 64, 64}, {1, 1, 1});
  for (auto& m : v.mu()) m = mu(rng);
  double worst = 0.0;
  for (int theta : {0, 90}) {
    ProjectionGeometry g;
    g.theta_deg = theta;
    g.detector_width = 64;
    g.detector_height = 64;
    const auto p = project(v, g);
    const auto want = oracle::axis_sum(v, theta, 64, 64);
    const auto raw = p.image.raw->pixels();
    for (std::size_t i = 0; i < want.size(); ++i) {
      worst = std::max(worst, std::abs(raw[i] - want[i]) / std::max(std::abs(want[i]), 1e-12));
    }
  }
  return {worst <= 1e-6, fmt("random 64^3 volume, theta 0 and 90, max relative error %.3g", worst)};
}

Outcome overlap_plumbing() {
  PhantomSpec spec;
  spec.seed = 7;
  spec.fragments = {2, 2, 1};
  const LabelVolume vol = generate(spec);
  MockConfig mock = MockConfig::noisy(0, 77);
  mock.overlap_dilation_gain = 6.0;
  ProjectionGeometry g;
  const auto angles = view_angles(100);
  std::vector<OverlapRow> rows;
  int out_of_range = 0;
  for (std::size_t k = 0; k < angles.size(); ++k) {
    g.theta_deg = angles[k];
    const Projection p = project(vol, g);
    const std::string id = fmt("view%03zu", k);
    for (CategoryId c : kAllCategories) {
      const double r = overlap_ratio(p.masks, c);
      if (r < 0.0 || r > 1.0) ++out_of_range;
    }
    MockPredictor backend(p.masks, mock);
    const auto out = run_cfs(p.image, id, backend);
    rows.push_back(overlap_row(id, angles[k], p.masks, out.fragments));
  }
  sort_rows(rows);
  bool sorted = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    sorted = sorted && !rows[i].flagged() && !rows[i - 1].flagged() && *rows[i].overlap_ratio <= *rows[i - 1].overlap_ratio;
  }
  const auto dir = scratch("overlap");
  const auto summary = emit_report(rows, dir / "report.csv", dir / "summary.json");
  const bool round_trip = parse_report_csv(slurp(dir / "report.csv")) == rows;
  const double rho = summary.rho_mean.value_or(1.0);
  return {out_of_range == 0 && sorted && round_trip && summary.rho_mean && rho < 0.0,
          fmt("100 views, %d ratios outside [0,1], sorted %s, csv round trip %s, spearman(ratio, IoU-F) %.3f",
              out_of_range, sorted ? "yes" : "no", round_trip ? "yes" : "no", rho)};
}

Outcome round_trips() {
  std::mt19937_64 rng(1008);
  int enc_bad = 0, pad_bad = 0, file_bad = 0;
  std::uniform_int_distribution<int> side(1, 40), nfrag(0, 10), extra(0, 9);
  for (int t = 0; t < 1000; ++t) {
    const int w = side(rng), h = side(rng);
    FragmentMaskSet s(w, h);
    for (CategoryId c : kAllCategories) {
      std::vector<BinaryMask2D> frags;
      const int n = nfrag(rng);
      for (int f = 0; f < n; ++f) frags.push_back(oracle::random_mask(rng, w, h, 0.15));
      // Trailing empty slots are not representable; keep the last one nonempty.
      if (!frags.empty() && frags.back().none()) frags.back().set(0, 0);
      s.set_fragments(c, frags);
    }
    const EncodedMaskImage e = encode(s);
    if (!(decode(e) == s)) ++enc_bad;
    const auto bytes = serialize_mask(e);
    if (!(parse_mask(bytes) == e) || serialize_mask(parse_mask(bytes)) != bytes) ++file_bad;

    const PadTarget target{w + extra(rng), h + extra(rng)};
    const auto pm = zero_pad(e, target);
    if (!(crop(pm.image, pm.record) == e)) ++pad_bad;
    Image2D<double> img(w, h);
    for (auto& p : img.pixels()) p = double(rng() % 1000) / 999.0;
    const auto pr = zero_pad(Radiograph{img, std::nullopt}, target);
    if (!(crop(pr.image, pr.record).intensity == img)) ++pad_bad;
  }
  return {enc_bad == 0 && pad_bad == 0 && file_bad == 0,
          fmt("1000 sets: %d encode, %d pad, %d file failures", enc_bad, pad_bad, file_bad)};
}

Outcome matching_optimality() {
  std::mt19937_64 rng(1009);
  std::uniform_int_distribution<int> count(0, 4);
  int bad = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<BinaryMask2D> preds, gts;
    const int np = count(rng), ng = count(rng);
    for (int i = 0; i < ng; ++i) gts.push_back(oracle::random_blobs(rng, 24, 24, 1));
    for (int i = 0; i < np; ++i) {
      // Mostly perturbed copies of GT so that assignments actually compete.
      if (ng > 0 && rng() % 4 != 0) {
        preds.push_back(translate(dilate(gts[rng() % ng], int(rng() % 3)), int(rng() % 5) - 2, int(rng() % 5) - 2));
      } else {
        preds.push_back(oracle::random_blobs(rng, 24, 24, 1));
      }
    }
    std::vector<std::vector<double>> table(np, std::vector<double>(ng));
    for (int i = 0; i < np; ++i)
      for (int j = 0; j < ng; ++j) table[i][j] = iou(preds[i], gts[j]);
    const double best = oracle::exhaustive_best_total(table, ng);
    if (std::abs(match_fragments(preds, gts).total_iou() - best) > 1e-12) ++bad;
  }
  return {bad == 0, fmt("200 instances up to 4x4, %d below the exhaustive optimum", bad)};
}

Outcome determinism_throughput() {
  const auto dir = scratch("throughput");
  const auto vol = (dir / "p.cfsv").string();
  if (cli({"generate", "--seed", "7", "--frags", "2,2,1", "--dims", "128", "--out", vol}) != 0) {
    return {false, "generate failed"};
  }
  const int views = 4;
  double per_view = 0.0;
  std::map<std::string, std::map<std::string, std::string>> trees;
  for (const std::string w : {"1", "8"}) {
    const auto out = dir / ("w" + w);
    const auto t0 = Clock::now();
    if (cli({"project", "--volume", vol, "--views", std::to_string(views), "--detector", "448x448", "--workers", w,
             "--out", out.string()}) != 0) {
      return {false, "project failed"};
    }
    if (w == "1") per_view = seconds_since(t0) / views;
    for (const auto& e : fs::directory_iterator(out)) {
      if (e.path().filename() != "run.json") trees[w][e.path().filename().string()] = slurp(e.path());
    }
  }
  const bool same = trees["1"] == trees["8"] && trees["1"].size() == 2 * views + 1;
  return {per_view <= 2.0 && same,
          fmt("128^3 -> 448x448, %.3f s per view single-worker, workers 1 vs 8 byte-identical: %s", per_view,
              same ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric oracle equivalence", metric_oracles},
      {"EDT exactness", edt_exactness},
      {"pipeline identity", pipeline_identity},
      {"post-processing refinement", refinement},
      {"degradation monotonicity", degradation_monotonicity},
      {"projection conservation", projection_conservation},
      {"overlap analysis plumbing", overlap_plumbing},
      {"encoding and padding round trips", round_trips},
      {"matching optimality", matching_optimality},
      {"determinism and throughput", determinism_throughput},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
