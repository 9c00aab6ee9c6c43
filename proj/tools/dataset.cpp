#include "dataset.hpp"

#include <json.hpp>

#include "cfs/mask_io.hpp"

namespace cfs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad(const fs::path& path, const std::string& what) {
  throw Error(ErrorCode::BadManifest, path.string() + ": " + what);
}

json pad_to_json(const PadRecord& p) {
  return {{"offset_row", p.offset_row},         {"offset_col", p.offset_col},
          {"original_width", p.original_width}, {"original_height", p.original_height},
          {"padded_width", p.padded_width},     {"padded_height", p.padded_height}};
}

PadRecord pad_from_json(const json& j) {
  PadRecord p;
  p.offset_row = j.at("offset_row").get<int>();
  p.offset_col = j.at("offset_col").get<int>();
  p.original_width = j.at("original_width").get<int>();
  p.original_height = j.at("original_height").get<int>();
  p.padded_width = j.at("padded_width").get<int>();
  p.padded_height = j.at("padded_height").get<int>();
  return p;
}

}  // namespace

Dataset load_dataset(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / kDatasetFile : path;
  const auto bytes = read_file_bytes(file);
  Dataset ds;
  ds.dir = file.parent_path();
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    ds.width = j.at("width").get<int>();
    ds.height = j.at("height").get<int>();
    ds.pixel_mm = j.value("pixel_mm", 1.0);
    ds.source = j.value("source", std::string());
    for (const auto& item : j.at("images")) {
      DatasetEntry e;
      e.image_id = item.at("image_id").get<std::string>();
      e.theta_deg = item.at("theta").get<double>();
      e.image_file = item.at("image").get<std::string>();
      e.mask_file = item.at("mask").get<std::string>();
      if (item.contains("overlap")) {
        for (CategoryId c : kAllCategories) {
          const auto& v = item["overlap"].value(std::string(category_name(c)), json());
          if (v.is_number()) e.overlap[static_cast<std::size_t>(index_of(c))] = v.get<double>();
        }
      }
      e.fov_clipped = item.value("fov_clipped", false);
      if (item.contains("pad")) e.pad = pad_from_json(item["pad"]);
      if (e.image_id.empty() || e.image_id.find_first_of("/\\,") != std::string::npos) {
        bad(file, "invalid image id '" + e.image_id + "'");
      }
      ds.entries.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    bad(file, ex.what());
  }
  if (ds.width < 1 || ds.height < 1) bad(file, "dataset dims must be positive");
  return ds;
}

void save_dataset(const Dataset& ds) {
  json images = json::array();
  for (const auto& e : ds.entries) {
    json overlap = json::object();
    for (CategoryId c : kAllCategories) {
      const auto& v = e.overlap[static_cast<std::size_t>(index_of(c))];
      overlap[std::string(category_name(c))] = v ? json(*v) : json();
    }
    json item = {{"image_id", e.image_id}, {"theta", e.theta_deg}, {"image", e.image_file},
                 {"mask", e.mask_file},    {"overlap", overlap},   {"fov_clipped", e.fov_clipped}};
    if (e.pad) item["pad"] = pad_to_json(*e.pad);
    images.push_back(std::move(item));
  }
  const json j = {{"format", "cfs-dataset"}, {"version", 1},      {"width", ds.width},
                  {"height", ds.height},     {"pixel_mm", ds.pixel_mm}, {"source", ds.source},
                  {"images", images}};
  write_text_atomic(ds.dir / kDatasetFile, j.dump(2) + "\n");
}

FragmentMaskSet load_ground_truth(const Dataset& ds, const DatasetEntry& e) {
  EncodedMaskImage encoded = read_mask_file(ds.mask_path(e));
  if (e.pad) encoded = crop(encoded, *e.pad);
  return decode(encoded);
}

}  // namespace cfs::cli
