#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cfs/mask_io.hpp"
#include "commands.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cfs");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cfs::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("cfs_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Every file except run manifests, which carry wall-clock durations.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.ends_with("run.json")) continue;
    files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

bool no_partials(const fs::path& root) {
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.path().string().ends_with(".partial")) return false;
  }
  return true;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// Small phantom and dataset shared by several cases.
fs::path small_dataset(const fs::path& dir, int views = 4) {
  REQUIRE(cli({"generate", "--seed", "7", "--frags", "2,2,1", "--dims", "48", "--out", (dir / "p.cfsv").string()}).code ==
          0);
  REQUIRE(cli({"project", "--volume", (dir / "p.cfsv").string(), "--views", std::to_string(views), "--detector",
               "64x64", "--out", (dir / "d").string()})
              .code == 0);
  return dir / "d";
}

}  // namespace

TEST_CASE("project writes image and mask pairs plus a dataset manifest") {
  const auto dir = scratch("project");
  const auto d = small_dataset(dir);
  for (int k = 0; k < 4; ++k) {
    CHECK(fs::exists(d / ("p_view00" + std::to_string(k) + ".pgm")));
    CHECK(fs::exists(d / ("p_view00" + std::to_string(k) + ".cfsm")));
  }
  const auto ds = read_json(d / "dataset.json");
  REQUIRE(ds["images"].size() == 4);
  CHECK(ds["images"][1]["theta"].get<double>() == 45.0);
  CHECK(ds["images"][0]["overlap"].contains("LI"));
  const auto run = read_json(d / "run.json");
  CHECK(run["subcommand"] == "project");
  CHECK(run["config"]["views"] == 4);
  CHECK(run["config"]["tau_len_mm"].get<double>() == 1e-6);
  CHECK(run.contains("duration_s"));
  CHECK(no_partials(dir));
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  const auto bad = cli({"project", "--volume", "x.cfsv", "--out", dir.string(), "--no-such-flag"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("--volume") != std::string::npos);  // usage text
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"project", "--volume", (dir / "missing.cfsv").string(), "--out", (dir / "o").string()}).code == 2);
  CHECK(cli({"generate", "--frags", "11,1,1", "--dims", "16", "--out", (dir / "v.cfsv").string()}).code == 1);
  CHECK(cli({"generate", "--frags", "1,1", "--dims", "16", "--out", (dir / "v.cfsv").string()}).code == 1);
  CHECK(cli({"generate", "--dims", "16", "--workers", "0", "--out", (dir / "v.cfsv").string()}).code == 1);

  std::ofstream(dir / "broken.cfsv") << "CFSVxx";
  CHECK(cli({"project", "--volume", (dir / "broken.cfsv").string(), "--out", (dir / "o").string()}).code == 1);
  CHECK(no_partials(dir));
}

TEST_CASE("identity pipeline evaluates to perfect scores") {
  const auto dir = scratch("identity");
  const auto d = small_dataset(dir);
  REQUIRE(cli({"pipeline", "--backend", "mock", "--mock", "identity", "--dataset", d.string(), "--out",
               (dir / "r").string()})
              .code == 0);
  const auto ev = cli({"evaluate", "--pred", (dir / "r").string(), "--gt", d.string(), "--out",
                       (dir / "m.csv").string(), "--summary", (dir / "s.json").string()});
  REQUIRE(ev.code == 0);
  const auto s = read_json(dir / "s.json");
  CHECK(s["category"]["all"]["iou"]["mean"].get<double>() == 1.0);
  CHECK(s["fragment"]["all"]["iou"]["mean"].get<double>() == 1.0);
  CHECK(s["fragment"]["all"]["hd95"]["mean"].get<double>() == 0.0);
  CHECK(ev.out.find("1.000 (0.00)") != std::string::npos);
  const auto csv = slurp(dir / "m.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 * 6);
}

TEST_CASE("padding, mock exchange and external backend compose") {
  const auto dir = scratch("external");
  const auto d = small_dataset(dir, 3);
  const auto d2 = dir / "d80";
  REQUIRE(cli({"preprocess", "--dataset", d.string(), "--target", "80x72", "--out", d2.string()}).code == 0);
  const auto ds = read_json(d2 / "dataset.json");
  CHECK(ds["width"] == 80);
  CHECK(ds["images"][0]["pad"]["offset_col"] == 8);
  CHECK(ds["images"][0]["pad"]["offset_row"] == 4);
  CHECK(cli({"preprocess", "--dataset", d.string(), "--target", "32x32", "--out", (dir / "x").string()}).code == 1);

  REQUIRE(cli({"predict-mock", "--dataset", d2.string(), "--mock", "identity", "--out", (dir / "preds").string()})
              .code == 0);
  REQUIRE(cli({"pipeline", "--backend", "external", "--dataset", d2.string(), "--pred-dir", (dir / "preds").string(),
               "--out", (dir / "r").string()})
              .code == 0);
  // Outputs are cropped back to the original frame and match the unpadded run.
  REQUIRE(cli({"pipeline", "--dataset", d.string(), "--out", (dir / "r0").string()}).code == 0);
  CHECK(tree(dir / "r") == tree(dir / "r0"));
  const auto m = cfs::read_mask_file(dir / "r" / "p_view000.cfsm");
  CHECK(m.width() == 64);

  CHECK(cli({"pipeline", "--backend", "external", "--dataset", d2.string(), "--out", (dir / "r").string()}).code == 1);
  fs::remove(dir / "preds" / "p_view001" / "category_sa.cfsm");
  CHECK(cli({"pipeline", "--backend", "external", "--dataset", d2.string(), "--pred-dir", (dir / "preds").string(),
             "--out", (dir / "r3").string()})
            .code == 2);
}

TEST_CASE("config files supply defaults and flags override them") {
  const auto dir = scratch("config");
  const auto d = small_dataset(dir, 2);
  std::ofstream(dir / "pl.json") << R"({"confidence_threshold": 0.6, "nms_iou": 0.4, "drop_empty": false})";
  REQUIRE(cli({"pipeline", "--config", (dir / "pl.json").string(), "--dataset", d.string(), "--nms", "0.7", "--out",
               (dir / "r").string()})
              .code == 0);
  const auto run = read_json(dir / "r" / "run.json");
  CHECK(run["config"]["confidence_threshold"].get<double>() == 0.6);
  CHECK(run["config"]["nms_iou"].get<double>() == 0.7);
  CHECK(run["config"]["drop_empty"] == false);

  std::ofstream(dir / "bad.json") << R"({"no_such_option": 1})";
  CHECK(cli({"pipeline", "--config", (dir / "bad.json").string(), "--dataset", d.string(), "--out",
             (dir / "r2").string()})
            .code == 1);
  std::ofstream(dir / "gen.json") << R"({"seed": 3, "frags": [2, 1, 1], "dims": 24})";
  REQUIRE(cli({"generate", "--config", (dir / "gen.json").string(), "--out", (dir / "g.cfsv").string()}).code == 0);
  const auto g = read_json(dir / "g.run.json");
  CHECK(g["config"]["frags"] == nlohmann::json::array({2, 1, 1}));
  CHECK(g["config"]["dims"] == nlohmann::json::array({24, 24, 24}));
  CHECK(g["seeds"]["phantom"] == 3);
}

TEST_CASE("outputs do not depend on worker count or rerun") {
  const auto dir = scratch("workers");
  const auto d = small_dataset(dir, 3);
  std::ofstream(dir / "noisy.json") << R"({"dilation_radius": 1, "confidence_spread": 0.15, "spurious_count": 2,
                                           "drop_probability": 0.2, "seed": 5})";
  for (const std::string w : {"1", "3"}) {
    const auto out = dir / ("w" + w);
    REQUIRE(cli({"project", "--volume", (dir / "p.cfsv").string(), "--views", "3", "--detector", "64x64",
                 "--workers", w, "--out", (out / "d").string()})
                .code == 0);
    REQUIRE(cli({"predict-mock", "--dataset", (out / "d").string(), "--mock", (dir / "noisy.json").string(),
                 "--workers", w, "--out", (out / "preds").string()})
                .code == 0);
    REQUIRE(cli({"pipeline", "--backend", "external", "--dataset", (out / "d").string(), "--pred-dir",
                 (out / "preds").string(), "--workers", w, "--out", (out / "r").string()})
                .code == 0);
    REQUIRE(cli({"evaluate", "--pred", (out / "r").string(), "--gt", (out / "d").string(), "--workers", w, "--out",
                 (out / "eval" / "m.csv").string()})
                .code == 0);
    REQUIRE(cli({"overlap-report", "--dataset", (out / "d").string(), "--pred", (out / "r").string(), "--workers", w,
                 "--out", (out / "eval" / "rep.csv").string()})
                .code == 0);
  }
  auto a = tree(dir / "w1"), b = tree(dir / "w3");
  // Dataset manifests record the source path, which is the same for both.
  CHECK(a == b);
  CHECK(a.size() > 20);

  REQUIRE(cli({"generate", "--seed", "7", "--frags", "2,2,1", "--dims", "48", "--out", (dir / "again.cfsv").string()})
              .code == 0);
  CHECK(slurp(dir / "again.cfsv") == slurp(dir / "p.cfsv"));
  CHECK(no_partials(dir));
}

TEST_CASE("overlap report is sorted and summarised") {
  const auto dir = scratch("overlap");
  const auto d = small_dataset(dir, 6);
  REQUIRE(cli({"pipeline", "--dataset", d.string(), "--mock", R"({"dilation_radius": 1})", "--out",
               (dir / "r").string()})
              .code == 0);
  const auto rep = cli({"overlap-report", "--dataset", d.string(), "--pred", (dir / "r").string(), "--out",
                        (dir / "rep.csv").string(), "--summary", (dir / "sum.json").string()});
  REQUIRE(rep.code == 0);
  std::istringstream csv(slurp(dir / "rep.csv"));
  std::string line;
  std::getline(csv, line);
  double prev = 2.0;
  int rows = 0;
  while (std::getline(csv, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const auto c3 = line.find(',', c2 + 1);
    const double ratio = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
    CHECK(ratio <= prev);
    CHECK(ratio >= 0.0);
    prev = ratio;
    ++rows;
  }
  CHECK(rows == 6);
  CHECK(read_json(dir / "sum.json")["rows"] == 6);
}
