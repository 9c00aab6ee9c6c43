#include "cfs/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cfs/mask_io.hpp"
#include "cfs/projector.hpp"
#include "cfs/rng.hpp"

namespace cfs {

namespace {

constexpr std::uint64_t kDropStream = 11;
constexpr std::uint64_t kConfidenceStream = 12;
constexpr std::uint64_t kSpuriousStream = 13;

CounterRng stream(const MockConfig& cfg, const std::string& image_id, CategoryId c, std::uint64_t purpose) {
  return CounterRng(CounterRng::derive(
      cfg.seed, {hash_string(image_id), static_cast<std::uint64_t>(index_of(c)), purpose}));
}

}  // namespace

CategoryPrediction binary_prediction(CategoryId category, const BinaryMask2D& mask) {
  CategoryPrediction p{category, Image2D<float>(mask.width(), mask.height(), 0.0f), true};
  auto src = mask.pixels();
  auto dst = p.probability.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 1.0f : 0.0f;
  return p;
}

MockConfig MockConfig::noisy(int dilation, std::uint64_t seed) {
  MockConfig cfg;
  cfg.dilation_radius = dilation;
  cfg.confidence_spread = 0.15;
  cfg.seed = seed;
  return cfg;
}

void validate(const MockConfig& cfg) {
  if (cfg.dilation_radius < 0 || cfg.erosion_radius < 0) {
    throw Error(ErrorCode::InvalidArgument, "mock radii must be >= 0");
  }
  if (cfg.dilation_radius > 0 && cfg.erosion_radius > 0) {
    throw Error(ErrorCode::InvalidArgument, "mock config may set dilation or erosion, not both");
  }
  if (!(cfg.drop_probability >= 0.0 && cfg.drop_probability <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "drop probability must be in [0,1]");
  }
  if (cfg.spurious_count < 0) throw Error(ErrorCode::InvalidArgument, "spurious count must be >= 0");
  if (!(cfg.confidence_spread >= 0.0 && cfg.confidence_spread <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence spread must be in [0,1]");
  }
  if (!(cfg.overlap_dilation_gain >= 0.0) || !std::isfinite(cfg.overlap_dilation_gain)) {
    throw Error(ErrorCode::InvalidArgument, "overlap dilation gain must be >= 0");
  }
}

BinaryMask2D degrade(const BinaryMask2D& mask, const MockConfig& cfg, int extra_dilation) {
  BinaryMask2D out = mask;
  const int grow = cfg.dilation_radius + extra_dilation;
  if (grow > 0) out = dilate(out, grow, cfg.element);
  if (cfg.erosion_radius > 0) out = erode(out, cfg.erosion_radius, cfg.element);
  return translate(out, cfg.translate_rows, cfg.translate_cols);
}

int overlap_extra_dilation(const FragmentMaskSet& gt, const MockConfig& cfg) {
  if (cfg.overlap_dilation_gain <= 0.0 || gt.category_union(CategoryId::LI).none()) return 0;
  return static_cast<int>(std::lround(cfg.overlap_dilation_gain * overlap_ratio(gt, CategoryId::LI)));
}

CategoryPrediction mock_predict_category(const FragmentMaskSet& gt, const MockConfig& cfg, CategoryId category,
                                         const std::string& /*image_id*/) {
  validate(cfg);
  const BinaryMask2D truth = gt.category_union(category);
  if (cfg.exact_categories) return binary_prediction(category, truth);
  return binary_prediction(category, degrade(truth, cfg, overlap_extra_dilation(gt, cfg)));
}

std::vector<FragmentCandidate> mock_predict_fragments(const FragmentMaskSet& gt, const MockConfig& cfg,
                                                      CategoryId category, const std::string& image_id) {
  validate(cfg);
  const int extra = overlap_extra_dilation(gt, cfg);
  CounterRng drop = stream(cfg, image_id, category, kDropStream);
  CounterRng conf = stream(cfg, image_id, category, kConfidenceStream);
  std::vector<FragmentCandidate> out;
  for (const BinaryMask2D& frag : gt.fragments(category)) {
    // One draw of each stream per GT slot keeps later fragments' outcomes
    // independent of earlier drops.
    const double u_drop = drop.uniform();
    const double u_conf = conf.uniform();
    if (frag.none() || u_drop < cfg.drop_probability) continue;
    FragmentCandidate cand;
    cand.category = category;
    cand.mask = degrade(frag, cfg, extra);
    cand.bbox = tight_bbox(cand.mask);
    cand.confidence = 1.0 - u_conf * cfg.confidence_spread;
    out.push_back(std::move(cand));
  }

  CounterRng spur = stream(cfg, image_id, category, kSpuriousStream);
  const int w = gt.width();
  const int h = gt.height();
  const int max_radius = std::max(2, std::min(w, h) / 16);
  for (int k = 0; k < cfg.spurious_count; ++k) {
    const int row = spur.uniform_int(0, h - 1);
    const int col = spur.uniform_int(0, w - 1);
    const int radius = spur.uniform_int(2, max_radius);
    FragmentCandidate cand;
    cand.category = category;
    cand.mask = BinaryMask2D(w, h);
    for (int y = std::max(0, row - radius); y <= std::min(h - 1, row + radius); ++y) {
      for (int x = std::max(0, col - radius); x <= std::min(w - 1, col + radius); ++x) {
        if ((y - row) * (y - row) + (x - col) * (x - col) <= radius * radius) cand.mask.set(y, x);
      }
    }
    cand.bbox = tight_bbox(cand.mask);
    cand.confidence = spur.uniform();
    out.push_back(std::move(cand));
  }
  return out;
}

CategoryPrediction MockPredictor::predict_category(const Radiograph& /*image*/, const std::string& image_id,
                                                   CategoryId category) {
  return mock_predict_category(gt_, cfg_, category, image_id);
}

std::vector<FragmentCandidate> MockPredictor::predict_fragments(const Radiograph& /*image*/,
                                                                const BinaryMask2D& /*category_mask*/,
                                                                const std::string& image_id, CategoryId category) {
  return mock_predict_fragments(gt_, cfg_, category, image_id);
}

// --- exchange layout -------------------------------------------------------

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string lower_name(CategoryId c) {
  std::string s(category_name(c));
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

[[noreturn]] void bad_manifest(const fs::path& dir, const std::string& what) {
  throw Error(ErrorCode::BadManifest, (dir / "fragments.json").string() + ": " + what);
}

CategoryPrediction load_category_file(const fs::path& file, CategoryId c, bool probability) {
  if (probability) {
    const Image2D<double> img = read_pgm16(file);
    CategoryPrediction p{c, Image2D<float>(img.width(), img.height(), 0.0f), false};
    auto src = img.pixels();
    auto dst = p.probability.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);
    return p;
  }
  return binary_prediction(c, decode_single(read_mask_file(file)));
}

BinaryMask2D binarize_exact(const CategoryPrediction& p) {
  BinaryMask2D m(p.probability.width(), p.probability.height());
  auto src = p.probability.pixels();
  auto dst = m.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= 0.5f ? 1 : 0;
  return m;
}

}  // namespace

ExternalPredictions load_external_predictions(const fs::path& root, const std::string& image_id) {
  const fs::path dir = root / image_id;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "no prediction directory " + dir.string());
  const fs::path manifest_path = dir / "fragments.json";
  if (!fs::exists(manifest_path)) bad_manifest(dir, "missing");

  json manifest;
  try {
    const auto bytes = read_file_bytes(manifest_path);
    manifest = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    bad_manifest(dir, std::string("invalid JSON: ") + e.what());
  }

  const json* fragment_list = &manifest;
  const json* category_table = nullptr;
  if (manifest.is_object()) {
    if (!manifest.contains("fragments") || !manifest["fragments"].is_array()) bad_manifest(dir, "no fragments array");
    fragment_list = &manifest["fragments"];
    if (manifest.contains("categories")) {
      if (!manifest["categories"].is_object()) bad_manifest(dir, "categories must be an object");
      category_table = &manifest["categories"];
    }
  } else if (!manifest.is_array()) {
    bad_manifest(dir, "top level must be an array or object");
  }

  ExternalPredictions out;
  for (CategoryId c : kAllCategories) {
    fs::path file;
    bool probability = false;
    const std::string key(category_name(c));
    if (category_table != nullptr && category_table->contains(key)) {
      const json& entry = (*category_table)[key];
      if (!entry.is_object() || !entry.contains("file") || !entry["file"].is_string()) {
        bad_manifest(dir, "category entry " + key + " needs a file");
      }
      file = dir / entry["file"].get<std::string>();
      const std::string kind = entry.value("kind", std::string("binary"));
      if (kind != "binary" && kind != "probability") bad_manifest(dir, "unknown category kind " + kind);
      probability = kind == "probability";
    } else if (fs::exists(dir / ("category_" + lower_name(c) + ".cfsm"))) {
      file = dir / ("category_" + lower_name(c) + ".cfsm");
    } else {
      file = dir / ("category_" + lower_name(c) + ".pgm");
      probability = true;
    }
    if (!fs::exists(file)) {
      throw Error(ErrorCode::MissingCategoryFile, "missing category map " + file.string());
    }
    out.categories[static_cast<std::size_t>(index_of(c))] = load_category_file(file, c, probability);
  }

  const int width = out.categories[0].probability.width();
  const int height = out.categories[0].probability.height();
  for (const auto& cp : out.categories) {
    if (cp.probability.width() != width || cp.probability.height() != height) {
      throw Error(ErrorCode::DimensionMismatch, "category maps of " + image_id + " differ in size");
    }
  }

  for (const json& item : *fragment_list) {
    if (!item.is_object()) bad_manifest(dir, "fragment entry must be an object");
    if (!item.contains("category") || !item["category"].is_string()) bad_manifest(dir, "fragment without category");
    if (!item.contains("mask") || !item["mask"].is_string()) bad_manifest(dir, "fragment without mask");
    if (!item.contains("score") || !item["score"].is_number()) bad_manifest(dir, "fragment without numeric score");
    FragmentCandidate cand;
    try {
      cand.category = parse_category(item["category"].get<std::string>());
    } catch (const Error&) {
      bad_manifest(dir, "unknown category " + item["category"].get<std::string>());
    }
    cand.confidence = item["score"].get<double>();
    if (!(cand.confidence >= 0.0 && cand.confidence <= 1.0)) {
      bad_manifest(dir, "score " + std::to_string(cand.confidence) + " outside [0,1]");
    }
    const fs::path mask_file = dir / item["mask"].get<std::string>();
    if (!fs::exists(mask_file)) bad_manifest(dir, "mask file " + mask_file.filename().string() + " not found");
    cand.mask = decode_single(read_mask_file(mask_file));
    if (cand.mask.width() != width || cand.mask.height() != height) {
      throw Error(ErrorCode::DimensionMismatch, "fragment mask " + mask_file.string() + " differs in size");
    }
    if (item.contains("bbox")) {
      const json& b = item["bbox"];
      if (!b.is_array() || b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number_integer(); })) {
        bad_manifest(dir, "bbox must be [r0,c0,r1,c1]");
      }
    }
    cand.bbox = tight_bbox(cand.mask);
    out.fragments.push_back(std::move(cand));
  }
  return out;
}

void write_external_predictions(const ExternalPredictions& preds, const fs::path& root, const std::string& image_id) {
  const fs::path dir = root / image_id;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  bool all_binary = true;
  json categories = json::object();
  for (CategoryId c : kAllCategories) {
    const auto& cp = preds.categories[static_cast<std::size_t>(index_of(c))];
    const std::string base = "category_" + lower_name(c);
    if (cp.is_binary) {
      write_mask_file(encode_single(binarize_exact(cp)), dir / (base + ".cfsm"));
      categories[std::string(category_name(c))] = {{"file", base + ".cfsm"}, {"kind", "binary"}};
    } else {
      all_binary = false;
      Image2D<double> img(cp.probability.width(), cp.probability.height(), 0.0);
      auto src = cp.probability.pixels();
      auto dst = img.pixels();
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
      write_pgm16(img, dir / (base + ".pgm"));
      categories[std::string(category_name(c))] = {{"file", base + ".pgm"}, {"kind", "probability"}};
    }
  }

  json fragments = json::array();
  for (std::size_t k = 0; k < preds.fragments.size(); ++k) {
    const auto& f = preds.fragments[k];
    char name[32];
    std::snprintf(name, sizeof name, "fragment_%03zu.cfsm", k);
    write_mask_file(encode_single(f.mask), dir / name);
    fragments.push_back({{"category", std::string(category_name(f.category))},
                         {"mask", name},
                         {"score", f.confidence},
                         {"bbox", {f.bbox.row0, f.bbox.col0, f.bbox.row1, f.bbox.col1}}});
  }
  const json manifest = all_binary ? fragments : json{{"categories", categories}, {"fragments", fragments}};
  write_text_atomic(dir / "fragments.json", manifest.dump(2) + "\n");
}

const ExternalPredictions& ExternalPredictor::load(const std::string& image_id) {
  if (!cached_ || cached_id_ != image_id) {
    cached_ = std::make_unique<ExternalPredictions>(load_external_predictions(root_, image_id));
    cached_id_ = image_id;
  }
  return *cached_;
}

CategoryPrediction ExternalPredictor::predict_category(const Radiograph& image, const std::string& image_id,
                                                       CategoryId category) {
  const auto& p = load(image_id).categories[static_cast<std::size_t>(index_of(category))];
  if (p.probability.width() != image.width() || p.probability.height() != image.height()) {
    throw Error(ErrorCode::DimensionMismatch, "external predictions for " + image_id + " do not match the image");
  }
  return p;
}

std::vector<FragmentCandidate> ExternalPredictor::predict_fragments(const Radiograph& /*image*/,
                                                                    const BinaryMask2D& /*category_mask*/,
                                                                    const std::string& image_id,
                                                                    CategoryId category) {
  std::vector<FragmentCandidate> out;
  for (const auto& f : load(image_id).fragments) {
    if (f.category == category) out.push_back(f);
  }
  return out;
}

}  // namespace cfs
