#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include "cfs/mask_io.hpp"
#include "cfs/metrics.hpp"
#include "cfs/overlap.hpp"
#include "cfs/parallel.hpp"
#include "cfs/phantom.hpp"
#include "cfs/pipeline.hpp"
#include "cfs/preprocess.hpp"
#include "cfs/projector.hpp"
#include "dataset.hpp"

#ifndef CFS_VERSION
#define CFS_VERSION "0.0.0"
#endif

namespace cfs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

int to_int(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw Error(ErrorCode::InvalidArgument, "bad " + what + " '" + s + "'");
  return v;
}

std::array<int, 3> parse_triple_int(const std::string& s, const std::string& what) {
  const auto parts = split(s, ',');
  if (parts.size() == 1) {
    const int v = to_int(parts[0], what);
    return {v, v, v};
  }
  if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, what + " needs 1 or 3 comma-separated values");
  return {to_int(parts[0], what), to_int(parts[1], what), to_int(parts[2], what)};
}

std::array<double, 3> parse_triple_double(const std::string& s, const std::string& what) {
  const auto parts = split(s, ',');
  if (parts.size() != 1 && parts.size() != 3) {
    throw Error(ErrorCode::InvalidArgument, what + " needs 1 or 3 comma-separated values");
  }
  std::array<double, 3> out{};
  for (std::size_t a = 0; a < 3; ++a) {
    const std::string& p = parts[parts.size() == 1 ? 0 : a];
    try {
      std::size_t pos = 0;
      out[a] = std::stod(p, &pos);
      if (pos != p.size()) throw std::invalid_argument(p);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad " + what + " '" + p + "'");
    }
  }
  return out;
}

std::pair<int, int> parse_size(const std::string& s, const std::string& what) {
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) throw Error(ErrorCode::InvalidArgument, what + " must look like WxH");
  return {to_int(s.substr(0, x), what), to_int(s.substr(x + 1), what)};
}

std::uint64_t resolve_workers(int workers) {
  if (workers < 1) throw Error(ErrorCode::InvalidArgument, "--workers must be >= 1");
  return static_cast<std::uint64_t>(workers);
}

json bytes_to_json(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadManifest, path.string() + ": " + e.what());
  }
}

// --- run manifest ----------------------------------------------------------

struct RunLog {
  std::string subcommand;
  json config = json::object();
  json seeds = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
  json extra = json::object();
  fs::path manifest_path;
};

void write_manifest(const RunLog& log, double seconds) {
  json j = {{"tool", "cfs"},
            {"version", CFS_VERSION},
            {"subcommand", log.subcommand},
            {"config", log.config},
            {"seeds", log.seeds},
            {"inputs", log.inputs},
            {"outputs", log.outputs},
            {"warnings", log.warnings},
            {"duration_s", seconds}};
  for (const auto& [k, v] : log.extra.items()) j[k] = v;
  if (!log.manifest_path.parent_path().empty()) fs::create_directories(log.manifest_path.parent_path());
  write_text_atomic(log.manifest_path, j.dump(2) + "\n");
}

fs::path manifest_for_file(const fs::path& out) {
  fs::path p = out;
  p.replace_extension(".run.json");
  return p;
}

// --- options ---------------------------------------------------------------

struct GenerateOpts {
  std::uint64_t seed = 0;
  std::string frags = "1,1,1";
  std::string dims = "128";
  std::string spacing = "1";
  double tilt = PhantomSpec{}.fracture_tilt_deg;
  double mu_bone = PhantomSpec{}.mu_bone;
  double mu_soft = PhantomSpec{}.mu_soft;
  std::string out;
};

struct ProjectOpts {
  std::string volume;
  int views = 1;
  std::string detector = "448x448";
  double pixel_mm = 1.0;
  double tau_len = ProjectionGeometry{}.tau_len_mm;
  bool strict_fov = false;
  std::string stem;
  std::string out;
};

struct PreprocessOpts {
  std::string dataset;
  std::string target = "512x512";
  std::string out;
};

struct PredictMockOpts {
  std::string dataset;
  std::string mock = "identity";
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct PipelineOpts {
  std::string backend = "mock";
  std::string dataset;
  std::string pred_dir;
  std::string mock = "identity";
  std::optional<std::uint64_t> seed;
  double tau = PipelineConfig{}.confidence_threshold;
  double nms = PipelineConfig{}.nms_iou;
  double category_threshold = PipelineConfig{}.category_threshold;
  bool keep_empty = false;
  std::string out;
};

struct EvaluateOpts {
  std::string pred;
  std::string gt;
  std::string policy = "diagonal";
  double spacing = 1.0;
  std::string out;
  std::string summary;
};

struct OverlapOpts {
  std::string dataset;
  std::string pred;
  std::string policy = "diagonal";
  std::string out;
  std::string summary;
};

json mock_to_json(const MockConfig& m) {
  return {{"dilation_radius", m.dilation_radius},
          {"erosion_radius", m.erosion_radius},
          {"translate_rows", m.translate_rows},
          {"translate_cols", m.translate_cols},
          {"drop_probability", m.drop_probability},
          {"spurious_count", m.spurious_count},
          {"confidence_spread", m.confidence_spread},
          {"overlap_dilation_gain", m.overlap_dilation_gain},
          {"exact_categories", m.exact_categories},
          {"element", m.element == StructuringElement::Disc ? "disc" : "square"},
          {"seed", m.seed}};
}

MockConfig resolve_mock(const std::string& spec, const std::optional<std::uint64_t>& seed) {
  MockConfig m = parse_mock_profile(spec);
  if (seed) m.seed = *seed;
  validate(m);
  return m;
}

// --- subcommands -----------------------------------------------------------

void run_generate(const GenerateOpts& o, RunLog& log, std::ostream& out) {
  PhantomSpec spec;
  spec.seed = o.seed;
  spec.fragments = parse_triple_int(o.frags, "--frags");
  if (split(o.frags, ',').size() != 3) throw Error(ErrorCode::InvalidArgument, "--frags needs SA,LI,RI counts");
  spec.dims = parse_triple_int(o.dims, "--dims");
  spec.spacing_mm = parse_triple_double(o.spacing, "--spacing");
  spec.fracture_tilt_deg = o.tilt;
  spec.mu_bone = o.mu_bone;
  spec.mu_soft = o.mu_soft;

  log.config = {{"seed", o.seed},
                {"frags", spec.fragments},
                {"dims", spec.dims},
                {"spacing_mm", spec.spacing_mm},
                {"fracture_tilt_deg", spec.fracture_tilt_deg},
                {"mu_bone", spec.mu_bone},
                {"mu_soft", spec.mu_soft},
                {"out", o.out}};
  log.seeds = {{"phantom", o.seed}};
  log.manifest_path = manifest_for_file(o.out);

  const LabelVolume volume = generate(spec);
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  write_volume_file(volume, o.out);
  log.outputs.push_back(o.out);
  std::size_t counts[kNumCategories];
  for (CategoryId c : kAllCategories) counts[index_of(c)] = static_cast<std::size_t>(volume.fragment_count(c));
  out << "wrote " << o.out << " (" << spec.dims[0] << "x" << spec.dims[1] << "x" << spec.dims[2] << ", fragments SA "
      << counts[0] << " LI " << counts[1] << " RI " << counts[2] << ")\n";
}

void run_project(const ProjectOpts& o, int workers, RunLog& log, std::ostream& out, std::ostream& err) {
  if (o.views < 1) throw Error(ErrorCode::InvalidArgument, "--views must be >= 1");
  const auto [w, h] = parse_size(o.detector, "--detector");
  ProjectionGeometry geom;
  geom.detector_width = w;
  geom.detector_height = h;
  geom.pixel_mm = o.pixel_mm;
  geom.tau_len_mm = o.tau_len;
  geom.strict_fov = o.strict_fov;
  const std::string stem = o.stem.empty() ? fs::path(o.volume).stem().string() : o.stem;
  if (stem.empty() || stem.find_first_of("/\\,") != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "invalid --stem '" + stem + "'");
  }

  log.config = {{"volume", o.volume},   {"views", o.views},       {"detector", {w, h}},
                {"pixel_mm", o.pixel_mm}, {"tau_len_mm", o.tau_len}, {"strict_fov", o.strict_fov},
                {"stem", stem},         {"out", o.out}};
  log.inputs.push_back(o.volume);
  const fs::path dir = o.out;
  log.manifest_path = dir / "run.json";

  const LabelVolume volume = read_volume_file(o.volume);
  fs::create_directories(dir);
  Dataset ds;
  ds.dir = dir;
  ds.width = w;
  ds.height = h;
  ds.pixel_mm = o.pixel_mm;
  ds.source = o.volume;

  const auto angles = view_angles(o.views);
  for (std::size_t k = 0; k < angles.size(); ++k) {
    geom.theta_deg = angles[k];
    const Projection p = project(volume, geom, workers);
    char id[64];
    std::snprintf(id, sizeof id, "_view%03zu", k);
    DatasetEntry e;
    e.image_id = stem + id;
    e.theta_deg = angles[k];
    e.image_file = e.image_id + ".pgm";
    e.mask_file = e.image_id + ".cfsm";
    e.fov_clipped = p.fov_clipped;
    for (CategoryId c : kAllCategories) {
      if (!p.masks.category_union(c).none()) e.overlap[static_cast<std::size_t>(index_of(c))] = overlap_ratio(p.masks, c);
    }
    if (p.fov_clipped) {
      const std::string msg = e.image_id + ": DetectorTooSmall: volume extends beyond the detector";
      err << "warning: " << msg << "\n";
      log.warnings.push_back(msg);
    }
    write_pgm16(p.image.intensity, ds.image_path(e));
    write_mask_file(encode(p.masks), ds.mask_path(e));
    log.outputs.push_back(ds.image_path(e).string());
    log.outputs.push_back(ds.mask_path(e).string());
    ds.entries.push_back(std::move(e));
  }
  save_dataset(ds);
  log.outputs.push_back((dir / kDatasetFile).string());
  out << "wrote " << ds.entries.size() << " views to " << dir.string() << "\n";
}

void run_preprocess(const PreprocessOpts& o, int workers, RunLog& log, std::ostream& out) {
  const auto [tw, th] = parse_size(o.target, "--target");
  const PadTarget target{tw, th};
  log.config = {{"dataset", o.dataset}, {"target", {tw, th}}, {"out", o.out}};
  const Dataset in = load_dataset(o.dataset);
  log.inputs.push_back((in.dir / kDatasetFile).string());
  const fs::path dir = o.out;
  log.manifest_path = dir / "run.json";
  if (fs::exists(dir) && fs::equivalent(dir, in.dir)) {
    throw Error(ErrorCode::InvalidArgument, "--out must differ from the input dataset directory");
  }
  fs::create_directories(dir);

  Dataset ds = in;
  ds.dir = dir;
  ds.width = tw;
  ds.height = th;
  parallel_for(in.entries.size(), workers, [&](std::size_t i) {
    const DatasetEntry& src = in.entries[i];
    if (src.pad) throw Error(ErrorCode::InvalidArgument, src.image_id + " is already padded");
    const Image2D<double> image = read_pgm16(in.image_path(src));
    const EncodedMaskImage mask = read_mask_file(in.mask_path(src));
    if (image.width() != mask.width() || image.height() != mask.height()) {
      throw Error(ErrorCode::DimensionMismatch, src.image_id + ": image and mask sizes differ");
    }
    const PadRecord rec = plan_padding(image.width(), image.height(), target);
    DatasetEntry& dst = ds.entries[i];
    dst.pad = rec;
    write_pgm16(zero_pad(image, rec), ds.image_path(dst));
    write_mask_file(zero_pad(mask, rec), ds.mask_path(dst));
  });
  for (const auto& e : ds.entries) {
    log.outputs.push_back(ds.image_path(e).string());
    log.outputs.push_back(ds.mask_path(e).string());
  }
  save_dataset(ds);
  log.outputs.push_back((dir / kDatasetFile).string());
  out << "padded " << ds.entries.size() << " views to " << tw << "x" << th << "\n";
}

void run_predict_mock(const PredictMockOpts& o, int workers, RunLog& log, std::ostream& out) {
  const MockConfig mock = resolve_mock(o.mock, o.seed);
  log.config = {{"dataset", o.dataset}, {"mock", mock_to_json(mock)}, {"out", o.out}};
  log.seeds = {{"mock", mock.seed}};
  const Dataset ds = load_dataset(o.dataset);
  log.inputs.push_back((ds.dir / kDatasetFile).string());
  const fs::path dir = o.out;
  log.manifest_path = dir / "run.json";
  fs::create_directories(dir);

  parallel_for(ds.entries.size(), workers, [&](std::size_t i) {
    const DatasetEntry& e = ds.entries[i];
    // Predictions live in the frame the networks would see, padding included.
    const FragmentMaskSet gt = decode(read_mask_file(ds.mask_path(e)));
    ExternalPredictions preds;
    for (CategoryId c : kAllCategories) {
      preds.categories[static_cast<std::size_t>(index_of(c))] = mock_predict_category(gt, mock, c, e.image_id);
      for (auto& f : mock_predict_fragments(gt, mock, c, e.image_id)) preds.fragments.push_back(std::move(f));
    }
    write_external_predictions(preds, dir, e.image_id);
  });
  for (const auto& e : ds.entries) log.outputs.push_back((dir / e.image_id).string());
  out << "wrote mock predictions for " << ds.entries.size() << " views to " << dir.string() << "\n";
}

void run_pipeline(const PipelineOpts& o, int workers, RunLog& log, std::ostream& out) {
  PipelineConfig cfg;
  cfg.confidence_threshold = o.tau;
  cfg.nms_iou = o.nms;
  cfg.category_threshold = o.category_threshold;
  cfg.drop_empty = !o.keep_empty;
  validate(cfg);
  const bool external = o.backend == "external";
  if (!external && o.backend != "mock") {
    throw Error(ErrorCode::InvalidArgument, "--backend must be mock or external");
  }
  if (external && o.pred_dir.empty()) throw Error(ErrorCode::InvalidArgument, "--backend external needs --pred-dir");
  std::optional<MockConfig> mock;
  if (!external) mock = resolve_mock(o.mock, o.seed);

  log.config = {{"backend", o.backend},
                {"dataset", o.dataset},
                {"confidence_threshold", cfg.confidence_threshold},
                {"nms_iou", cfg.nms_iou},
                {"category_threshold", cfg.category_threshold},
                {"drop_empty", cfg.drop_empty},
                {"out", o.out}};
  if (external) log.config["pred_dir"] = o.pred_dir;
  if (mock) {
    log.config["mock"] = mock_to_json(*mock);
    log.seeds = {{"mock", mock->seed}};
  }

  const Dataset ds = load_dataset(o.dataset);
  log.inputs.push_back((ds.dir / kDatasetFile).string());
  if (external) log.inputs.push_back(o.pred_dir);
  const fs::path dir = o.out;
  log.manifest_path = dir / "run.json";
  fs::create_directories(dir);

  std::vector<std::vector<std::string>> warnings(ds.entries.size());
  parallel_for(ds.entries.size(), workers, [&](std::size_t i) {
    const DatasetEntry& e = ds.entries[i];
    const Radiograph image{read_pgm16(ds.image_path(e)), std::nullopt};
    CfsResult result;
    if (external) {
      ExternalPredictor backend(o.pred_dir);
      result = run_cfs(image, e.image_id, backend, cfg);
    } else {
      MockPredictor backend(decode(read_mask_file(ds.mask_path(e))), *mock);
      result = run_cfs(image, e.image_id, backend, cfg);
    }
    EncodedMaskImage encoded = encode(result.fragments);
    if (e.pad) encoded = crop(encoded, *e.pad);
    write_mask_file(encoded, dir / (e.image_id + ".cfsm"));
    for (const auto& w : result.warnings) warnings[i].push_back(e.image_id + ": " + w);
  });
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    log.outputs.push_back((dir / (ds.entries[i].image_id + ".cfsm")).string());
    for (auto& w : warnings[i]) log.warnings.push_back(std::move(w));
  }
  out << "segmented " << ds.entries.size() << " views into " << dir.string() << "\n";
}

json stats_json(const AggregateStats& s) { return {{"mean", s.mean}, {"sd", s.sd}, {"n", s.n}}; }

void run_evaluate(const EvaluateOpts& o, int workers, RunLog& log, std::ostream& out) {
  DistanceOptions dopt;
  dopt.policy = parse_empty_policy(o.policy);
  if (!(o.spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "--spacing must be positive");
  dopt.pixel_spacing = o.spacing;
  log.config = {{"pred", o.pred},         {"gt", o.gt},   {"policy", std::string(to_string(dopt.policy))},
                {"spacing", o.spacing}, {"out", o.out}, {"summary", o.summary}};
  const Dataset ds = load_dataset(o.gt);
  log.inputs = {(ds.dir / kDatasetFile).string(), o.pred};
  log.manifest_path = manifest_for_file(o.out);

  std::vector<std::vector<MetricsRecord>> per_image(ds.entries.size());
  parallel_for(ds.entries.size(), workers, [&](std::size_t i) {
    const DatasetEntry& e = ds.entries[i];
    const FragmentMaskSet gt = load_ground_truth(ds, e);
    const FragmentMaskSet pred = decode(read_mask_file(fs::path(o.pred) / (e.image_id + ".cfsm")));
    if (pred.width() != gt.width() || pred.height() != gt.height()) {
      throw Error(ErrorCode::DimensionMismatch, e.image_id + ": prediction and ground truth sizes differ");
    }
    per_image[i] = evaluate_image(pred, gt, e.image_id, dopt).records;
  });
  std::vector<MetricsRecord> records;
  for (auto& v : per_image)
    for (auto& r : v) records.push_back(std::move(r));

  std::ostringstream csv;
  csv << "image_id,category,level,iou,assd,hd95,empty_pred,empty_gt,penalty_applied,gt_fragments,unmatched_gt,"
         "unmatched_pred\n";
  for (const auto& r : records) {
    csv << r.image_id << ',' << category_name(r.category) << ',' << to_string(r.level) << ',' << fmt17(r.iou) << ','
        << fmt17(r.assd) << ',' << fmt17(r.hd95) << ',' << int(r.flags.empty_pred) << ',' << int(r.flags.empty_gt)
        << ',' << int(r.flags.penalty_applied) << ',' << r.gt_fragments << ',' << r.unmatched_gt << ','
        << r.unmatched_pred << '\n';
  }
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  write_text_atomic(o.out, csv.str());
  log.outputs.push_back(o.out);

  json summary = json::object();
  char line[160];
  std::snprintf(line, sizeof line, "%-9s %-4s %6s  %-14s %-14s %s\n", "level", "cat", "n", "IoU", "ASSD", "HD95");
  out << line;
  for (MetricLevel level : {MetricLevel::Category, MetricLevel::Fragment}) {
    const std::string lname(to_string(level));
    auto emit = [&](const std::string& cname, const MetricSummary& s) {
      summary[lname][cname] = {{"iou", stats_json(s.iou)}, {"assd", stats_json(s.assd)}, {"hd95", stats_json(s.hd95)}};
      std::snprintf(line, sizeof line, "%-9s %-4s %6zu  %-14s %-14s %s\n", lname.c_str(), cname.c_str(), s.iou.n,
                    format_mean_sd(s.iou).c_str(), format_mean_sd(s.assd).c_str(), format_mean_sd(s.hd95).c_str());
      out << line;
    };
    try {
      emit("all", aggregate(records, level));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoRecords) throw;
      continue;
    }
    for (CategoryId c : kAllCategories) {
      try {
        emit(std::string(category_name(c)), aggregate(records, level, c));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoRecords) throw;
      }
    }
  }
  log.extra["summary"] = summary;
  if (!o.summary.empty()) {
    write_text_atomic(o.summary, summary.dump(2) + "\n");
    log.outputs.push_back(o.summary);
  }
}

void run_overlap(const OverlapOpts& o, int workers, RunLog& log, std::ostream& out) {
  DistanceOptions dopt;
  dopt.policy = parse_empty_policy(o.policy);
  fs::path summary_path = o.summary;
  if (summary_path.empty()) {
    summary_path = o.out;
    summary_path.replace_extension(".summary.json");
  }
  log.config = {{"dataset", o.dataset},
                {"pred", o.pred},
                {"policy", std::string(to_string(dopt.policy))},
                {"out", o.out},
                {"summary", summary_path.string()}};
  const Dataset ds = load_dataset(o.dataset);
  log.inputs = {(ds.dir / kDatasetFile).string(), o.pred};
  log.manifest_path = manifest_for_file(o.out);

  // Rows are small; masks are loaded and dropped one image at a time.
  std::vector<OverlapRow> rows(ds.entries.size());
  parallel_for(ds.entries.size(), workers, [&](std::size_t i) {
    const DatasetEntry& e = ds.entries[i];
    const FragmentMaskSet gt = load_ground_truth(ds, e);
    const FragmentMaskSet pred = decode(read_mask_file(fs::path(o.pred) / (e.image_id + ".cfsm")));
    rows[i] = overlap_row(e.image_id, e.theta_deg, gt, pred, dopt);
  });
  sort_rows(rows);
  for (const auto& r : rows) {
    if (r.flagged()) log.warnings.push_back(r.image_id + ": EmptyReference: no LI pixels, row not ranked");
  }
  if (fs::path(o.out).has_parent_path()) fs::create_directories(fs::path(o.out).parent_path());
  const OverlapSummary s = emit_report(rows, o.out, summary_path);
  log.outputs = {o.out, summary_path.string()};
  auto rho = [](const std::optional<double>& v) { return v ? fmt17(*v) : std::string("n/a"); };
  out << "rows " << s.rows << " (flagged " << s.flagged << ")\n"
      << "spearman(overlap, IoU-F): SA " << rho(s.rho_sa) << " LI " << rho(s.rho_li) << " RI " << rho(s.rho_ri)
      << " mean " << rho(s.rho_mean) << "\n";
}

// --- config files ----------------------------------------------------------

const std::map<std::string, std::string>& config_aliases() {
  static const std::map<std::string, std::string> aliases{
      {"confidence_threshold", "tau"},
      {"nms_iou", "nms"},
  };
  return aliases;
}

// Turns a JSON object into flag tokens. They are placed ahead of the command
// line, and every option keeps its last value, so explicit flags win.
std::vector<std::string> config_tokens(const fs::path& path) {
  const json j = bytes_to_json(path);
  if (!j.is_object()) throw Error(ErrorCode::BadManifest, path.string() + ": config must be a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    std::string name = key;
    if (auto it = config_aliases().find(name); it != config_aliases().end()) name = it->second;
    if (name == "drop_empty") {
      if (!value.is_boolean()) throw Error(ErrorCode::BadManifest, path.string() + ": drop_empty must be boolean");
      if (!value.get<bool>()) tokens.push_back("--keep-empty");
      continue;
    }
    std::replace(name.begin(), name.end(), '_', '-');
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back("--" + name);
    } else if (value.is_string()) {
      tokens.insert(tokens.end(), {"--" + name, value.get<std::string>()});
    } else if (value.is_number()) {
      tokens.insert(tokens.end(), {"--" + name, value.dump()});
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) {
        if (!joined.empty()) joined += ',';
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      tokens.insert(tokens.end(), {"--" + name, joined});
    } else if (value.is_null()) {
      continue;
    } else {
      throw Error(ErrorCode::BadManifest, path.string() + ": unsupported value for '" + key + "'");
    }
  }
  return tokens;
}

std::optional<std::string> find_config(const std::vector<std::string>& args) {
  std::optional<std::string> found;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) found = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) found = args[i].substr(9);
  }
  return found;
}

}  // namespace

MockConfig parse_mock_profile(const std::string& spec) {
  if (spec == "identity") return MockConfig{};
  json j;
  if (!spec.empty() && spec.front() == '{') {
    try {
      j = json::parse(spec);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("mock profile: ") + e.what());
    }
  } else {
    j = bytes_to_json(spec);
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "mock profile must be a JSON object");
  MockConfig m;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "dilation_radius") m.dilation_radius = v.get<int>();
      else if (key == "erosion_radius") m.erosion_radius = v.get<int>();
      else if (key == "translate_rows") m.translate_rows = v.get<int>();
      else if (key == "translate_cols") m.translate_cols = v.get<int>();
      else if (key == "drop_probability") m.drop_probability = v.get<double>();
      else if (key == "spurious_count") m.spurious_count = v.get<int>();
      else if (key == "confidence_spread") m.confidence_spread = v.get<double>();
      else if (key == "overlap_dilation_gain") m.overlap_dilation_gain = v.get<double>();
      else if (key == "exact_categories") m.exact_categories = v.get<bool>();
      else if (key == "seed") m.seed = v.get<std::uint64_t>();
      else if (key == "element") {
        const auto name = v.get<std::string>();
        if (name == "disc") m.element = StructuringElement::Disc;
        else if (name == "square") m.element = StructuringElement::Square;
        else throw Error(ErrorCode::InvalidArgument, "mock element must be disc or square");
      } else {
        throw Error(ErrorCode::InvalidArgument, "unknown mock profile key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("mock profile: ") + e.what());
  }
  validate(m);
  return m;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic pelvic radiograph fragment segmentation toolkit", "cfs"};
  app.set_version_flag("--version", CFS_VERSION);
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  int workers = 1;
  std::string config_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file of option values; flags override it");
    sub->add_option("--workers", workers, "Worker threads")->capture_default_str();
  };

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic fractured pelvis volume");
  g->add_option("--seed", gen.seed, "Phantom seed")->capture_default_str();
  g->add_option("--frags", gen.frags, "Fragment counts SA,LI,RI")->capture_default_str();
  g->add_option("--dims", gen.dims, "Voxels per axis: N or X,Y,Z")->capture_default_str();
  g->add_option("--spacing", gen.spacing, "Voxel size in mm: S or SX,SY,SZ")->capture_default_str();
  g->add_option("--tilt", gen.tilt, "Max angle of cut normals from the z axis, degrees")->capture_default_str();
  g->add_option("--mu-bone", gen.mu_bone, "Bone attenuation, 1/mm")->capture_default_str();
  g->add_option("--mu-soft", gen.mu_soft, "Soft tissue attenuation, 1/mm")->capture_default_str();
  g->add_option("--out", gen.out, "Output .cfsv volume")->required();
  common(g);

  ProjectOpts proj;
  auto* p = app.add_subcommand("project", "Project a volume into radiographs and GT masks");
  p->add_option("--volume", proj.volume, "Input .cfsv volume")->required();
  p->add_option("--views", proj.views, "Number of views over 180 degrees")->capture_default_str();
  p->add_option("--detector", proj.detector, "Detector size WxH")->capture_default_str();
  p->add_option("--pixel-mm", proj.pixel_mm, "Detector pixel pitch, mm")->capture_default_str();
  p->add_option("--tau-len", proj.tau_len, "Min chord length for mask membership, mm")->capture_default_str();
  p->add_flag("--strict-fov", proj.strict_fov, "Fail when the volume exceeds the detector");
  p->add_option("--stem", proj.stem, "Image id prefix (default: volume file stem)");
  p->add_option("--out", proj.out, "Output dataset directory")->required();
  common(p);

  PreprocessOpts pre;
  auto* pp = app.add_subcommand("preprocess", "Zero-pad a dataset to a fixed size");
  pp->add_option("--dataset", pre.dataset, "Input dataset.json or its directory")->required();
  pp->add_option("--target", pre.target, "Padded size WxH")->capture_default_str();
  pp->add_option("--out", pre.out, "Output dataset directory")->required();
  common(pp);

  PredictMockOpts pm;
  auto* m = app.add_subcommand("predict-mock", "Write degraded-GT predictions in the exchange layout");
  m->add_option("--dataset", pm.dataset, "Dataset")->required();
  m->add_option("--mock", pm.mock, "identity, a JSON profile path, or inline JSON")->capture_default_str();
  m->add_option("--seed", pm.seed, "Overrides the profile seed");
  m->add_option("--out", pm.out, "Predictions root")->required();
  common(m);

  PipelineOpts pl;
  auto* pi = app.add_subcommand("pipeline", "Run category segmentation, fragment segmentation and post-processing");
  pi->add_option("--backend", pl.backend, "mock or external")->capture_default_str();
  pi->add_option("--dataset", pl.dataset, "Dataset")->required();
  pi->add_option("--pred-dir", pl.pred_dir, "Predictions root for the external backend");
  pi->add_option("--mock", pl.mock, "Mock profile for the mock backend")->capture_default_str();
  pi->add_option("--seed", pl.seed, "Overrides the mock profile seed");
  pi->add_option("--tau", pl.tau, "Fragment confidence threshold (strictly above)")->capture_default_str();
  pi->add_option("--nms", pl.nms, "Mask NMS IoU threshold; 1.0 disables")->capture_default_str();
  pi->add_option("--category-threshold", pl.category_threshold, "Category probability threshold")
      ->capture_default_str();
  pi->add_flag("--keep-empty", pl.keep_empty, "Keep fragments emptied by intersection");
  pi->add_option("--out", pl.out, "Output directory")->required();
  common(pi);

  EvaluateOpts ev;
  auto* e = app.add_subcommand("evaluate", "Score predictions against ground truth");
  e->add_option("--pred", ev.pred, "Directory of <image_id>.cfsm predictions")->required();
  e->add_option("--gt", ev.gt, "Ground-truth dataset")->required();
  e->add_option("--policy", ev.policy, "Empty-mask policy: diagonal or skip")->capture_default_str();
  e->add_option("--spacing", ev.spacing, "Pixel size applied to distances")->capture_default_str();
  e->add_option("--out", ev.out, "Per-record metrics CSV")->required();
  e->add_option("--summary", ev.summary, "Optional summary JSON");
  common(e);

  OverlapOpts ov;
  auto* o = app.add_subcommand("overlap-report", "Rank views by overlap ratio against fragment IoU");
  o->add_option("--dataset", ov.dataset, "Ground-truth dataset")->required();
  o->add_option("--pred", ov.pred, "Directory of <image_id>.cfsm predictions")->required();
  o->add_option("--policy", ov.policy, "Empty-mask policy: diagonal or skip")->capture_default_str();
  o->add_option("--out", ov.out, "Report CSV")->required();
  o->add_option("--summary", ov.summary, "Summary JSON (default: next to the CSV)");
  common(o);

  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);

  CLI::App* active = nullptr;
  try {
    if (!args.empty() && args[0].rfind("-", 0) != 0) {
      std::vector<std::string> tail(args.begin() + 1, args.end());
      if (const auto cfg = find_config(tail)) {
        auto tokens = config_tokens(*cfg);
        args.insert(args.begin() + 1, tokens.begin(), tokens.end());
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& pe) {
      for (auto* sub : app.get_subcommands()) active = sub;
      if (pe.get_exit_code() == 0) return app.exit(pe, out, err);
      err << "cfs: " << pe.what() << "\n\n" << (active ? active->help() : app.help());
      return 1;
    }
    active = app.get_subcommands().front();
    resolve_workers(workers);

    RunLog log;
    log.subcommand = active->get_name();
    const auto start = std::chrono::steady_clock::now();
    if (active == g) run_generate(gen, log, out);
    else if (active == p) run_project(proj, workers, log, out, err);
    else if (active == pp) run_preprocess(pre, workers, log, out);
    else if (active == m) run_predict_mock(pm, workers, log, out);
    else if (active == pi) run_pipeline(pl, workers, log, out);
    else if (active == e) run_evaluate(ev, workers, log, out);
    else run_overlap(ov, workers, log, out);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.config["workers"] = workers;
    if (!config_path.empty()) log.config["config"] = config_path;
    write_manifest(log, seconds);
    return 0;
  } catch (const Error& ex) {
    err << "cfs" << (active ? " " + active->get_name() : std::string()) << ": " << ex.what() << "\n";
    return is_io_error(ex.code()) ? 2 : 1;
  } catch (const fs::filesystem_error& ex) {
    err << "cfs" << (active ? " " + active->get_name() : std::string()) << ": IoError: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    err << "cfs" << (active ? " " + active->get_name() : std::string()) << ": " << ex.what() << "\n";
    return 1;
  }
}

}  // namespace cfs::cli
