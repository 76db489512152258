#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "geodesic_atlas/cli.hpp"
#include "geodesic_atlas/errors.hpp"
#include "geodesic_atlas/model.hpp"

using namespace geodesic_atlas;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("geodesic_atlas_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Csv {
  std::vector<std::string> comments;
  std::string header;
  std::vector<std::vector<double>> rows;
};

Csv read_csv(const fs::path& path) {
  Csv csv;
  std::ifstream is(path);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("#", 0) == 0) {
      csv.comments.push_back(line);
    } else if (csv.header.empty()) {
      csv.header = line;
    } else {
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          row.push_back(std::stod(cell));
        } catch (const std::invalid_argument&) {
          row.push_back(std::nan(""));  // text column
        }
      }
      csv.rows.push_back(std::move(row));
    }
  }
  return csv;
}

// The "R" line of a describe block.
double reported_ricci(const std::string& out) {
  const auto pos = out.find("  R        ");
  REQUIRE(pos != std::string::npos);
  return std::stod(out.substr(pos + 11));
}

// Zero network with a very negative output bias: φ equals the chordal
// distance, which on the plane is the exact distance.
fs::path exact_plane_checkpoint(const fs::path& dir) {
  const ImmersedManifold plane = make_plane();
  Architecture arch;
  arch.width = 8;
  arch.depth = 2;
  FieldParams params = init_params(plane, ChartPoint{0.0, 0.0}, arch, 1);
  params.values.setZero();
  params.tensor("output.bias")(0, 0) = -40.0;
  const fs::path path = dir / "exact.json";
  save_checkpoint(DistanceField(plane, params), path);
  return path;
}

}  // namespace

TEST_CASE("describe reports curvature and exports the grid") {
  const Run plane = cli({"describe", "plane", "--at", "0,0"});
  CHECK(plane.code == 0);
  CHECK(reported_ricci(plane.out) == 0.0);

  const Run sphere = cli({"describe", "unit-sphere", "--at", "0,0"});
  CHECK(sphere.code == 0);
  CHECK(std::abs(reported_ricci(sphere.out) - 2.0) < 1e-4);

  const fs::path dir = scratch("describe");
  CHECK(cli({"describe", "peaks", "--grid", "64", "-o", dir.string()}).code == 0);
  const Csv grid = read_csv(dir / "curvature_grid.csv");
  CHECK(grid.header == "x,y,ricci");
  CHECK(grid.rows.size() == 4096);
  REQUIRE(grid.comments.size() == 4);
  CHECK(grid.comments[0] == std::string("# geodesic-atlas ") + kToolVersion);
  CHECK(grid.comments[2] == "# seed: 0");
  CHECK(grid.comments[3].find("\"manifold\":\"peaks\"") != std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"bogus"}).code == 1);
  CHECK(cli({"describe", "plane", "--at", "9,9"}).code == 1);
  CHECK(cli({"describe", "plane", "--at", "1,x"}).code == 1);
  CHECK(cli({"describe", "torus"}).code == 1);
  CHECK(cli({"describe", "plane", "--preset", "laptop"}).code == 1);
  CHECK(cli({"symmetry", "plane", "--grid-k", "1"}).code == 1);
  CHECK(cli({"describe", "plane", "--help"}).code == 0);

  const fs::path dir = scratch("usage");
  std::ofstream(dir / "unknown.json") << R"({"manifold": "plane", "bogus": 1})";
  const Run unknown = cli({"describe", "--config", (dir / "unknown.json").string()});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("bogus") != std::string::npos);
  std::ofstream(dir / "nested.json") << R"({"train": {"adam_step": 5}})";
  CHECK(cli({"describe", "--config", (dir / "nested.json").string()}).code == 1);
  std::ofstream(dir / "typed.json") << R"({"train": {"adam_steps": "many"}})";
  CHECK(cli({"describe", "--config", (dir / "typed.json").string()}).code == 1);
  std::ofstream(dir / "broken.json") << R"({"manifold": )";
  CHECK(cli({"describe", "--config", (dir / "broken.json").string()}).code == 1);
}

TEST_CASE("config resolution: preset, then file, then flags") {
  const fs::path dir = scratch("config");
  std::ofstream(dir / "run.json") << R"({"preset": "paper", "manifold": "plane", "seed": 4,
                                        "train": {"adam_steps": 5, "lbfgs_steps": 3},
                                        "symmetry": {"oracle_resolution": 64}})";
  CHECK(cli({"describe", "--config", (dir / "run.json").string(), "--seed", "9", "--grid", "4", "-o", dir.string()}).code == 0);
  const Csv grid = read_csv(dir / "curvature_grid.csv");
  REQUIRE(grid.comments.size() == 4);
  const auto echo = nlohmann::json::parse(grid.comments[3].substr(std::string("# config: ").size()));
  CHECK(echo["preset"] == "paper");
  CHECK(echo["manifold"] == "plane");
  CHECK(echo["seed"] == 9);
  CHECK(grid.comments[2] == "# seed: 9");
  CHECK(echo["train"]["adam_steps"] == 5);
  CHECK(echo["train"]["lbfgs_steps"] == 3);
  CHECK(echo["train"]["batch_size"] == 8192);
  CHECK(echo["chains"]["burn_in"] == 50000);
  CHECK(echo["symmetry"]["grid_k"] == 7);
  CHECK(echo["symmetry"]["oracle_resolution"] == 64);

  const RunConfig paper = preset_config("paper");
  CHECK(paper.train.adam_steps == 100000);
  CHECK(paper.train.batch_size == 8192);
  CHECK(paper.train.lbfgs_steps == 1000);
  CHECK(paper.chains.n_chains == 5);
  CHECK(paper.symmetry_k == 7);
  const RunConfig desk = preset_config("desk");
  CHECK(desk.train.adam_steps == 20000);
  CHECK(desk.train.batch_size == 1024);
  CHECK(desk.train.lbfgs_steps == 200);
  CHECK(desk.symmetry_k == 3);
  CHECK_THROWS_AS(preset_config("laptop"), ConfigError);

  RunConfig cfg = desk;
  CHECK_THROWS_AS(apply_config(cfg, nlohmann::json{{"preset", "paper"}}), ConfigError);
  apply_config(cfg, nlohmann::json{{"domain", {{"lo", {-1.0, -2.0}}}}, {"manifold", "plane"}});
  const ImmersedManifold m = resolve_manifold(cfg);
  CHECK(m.domain().lo()[0] == -1.0);
  CHECK(m.domain().hi()[1] == 3.0);
  CHECK(resolve_origin(cfg, m).coords == ChartVector(m.domain().centre()));
}

TEST_CASE("sample writes samples and a KDE grid") {
  const fs::path a = scratch("sample_a"), b = scratch("sample_b");
  CHECK(cli({"sample", "plane", "-o", a.string()}).code == 0);
  CHECK(cli({"sample", "plane", "-o", b.string()}).code == 0);

  const Csv samples = read_csv(a / "samples.csv");
  CHECK(samples.header == "chain,index,q1,q2");
  CHECK(samples.rows.size() == 50000);
  const Csv grid = read_csv(a / "kde_grid.csv");
  CHECK(grid.header == "x,y,density");
  CHECK(grid.rows.size() == 64 * 64);
  double lo = 1e300, hi = 0;
  for (const auto& r : grid.rows) {
    lo = std::min(lo, r[2]);
    hi = std::max(hi, r[2]);
  }
  MESSAGE("flat-manifold KDE grid max/min = " << hi / lo);
  CHECK(hi / lo < 1.5);

  // The output directory is part of the echoed config, so compare bodies
  // and headers separately.
  CHECK(read_csv(a / "samples.csv").rows == read_csv(b / "samples.csv").rows);
  const fs::path c = scratch("sample_c");
  CHECK(cli({"sample", "plane", "-o", a.string()}).code == 0);
  fs::copy_file(a / "kde_grid.csv", c / "first.csv");
  CHECK(cli({"sample", "plane", "-o", a.string()}).code == 0);
  CHECK(slurp(a / "kde_grid.csv") == slurp(c / "first.csv"));

  const fs::path paper = scratch("sample_paper");
  CHECK(cli({"sample", "peaks", "--preset", "paper", "--keep", "50", "--kde-grid", "8", "-o", paper.string()}).code == 0);
  const Csv pg = read_csv(paper / "kde_grid.csv");
  const auto echo = nlohmann::json::parse(pg.comments[3].substr(std::string("# config: ").size()));
  CHECK(echo["chains"]["n_chains"] == 5);
  CHECK(echo["chains"]["burn_in"] == 50000);
}

TEST_CASE("train, field and trace") {
  const fs::path dir = scratch("pipeline");
  const Run trained = cli({"train", "plane", "--origin", "0.5,-0.5", "--adam-steps", "30", "--lbfgs-steps", "2",
                           "--batch-size", "64", "--width", "16", "--depth", "2", "--seed", "3", "-o", dir.string()});
  REQUIRE(trained.code == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(report["lr_schedule"]["0"] == doctest::Approx(1e-3));
  CHECK(report["lr_schedule"]["5000"] == doctest::Approx(1e-3));
  CHECK(report["lr_schedule"]["7000"] == doctest::Approx(9e-4));
  CHECK(report["adam_loss"].size() == 30);
  CHECK(report["provenance"]["config"]["origin"] == std::vector<double>{0.5, -0.5});
  CHECK(report["exact_comparison"]["min_phi_minus_chordal"].get<double>() >= 0.0);

  const fs::path ckpt = dir / "checkpoint.json";
  const auto stored = nlohmann::json::parse(slurp(ckpt));
  CHECK(stored["provenance"]["seed"] == 3);

  CHECK(cli({"field", ckpt.string(), "--grid", "16", "-o", dir.string()}).code == 0);
  const Csv field = read_csv(dir / "field.csv");
  CHECK(field.header == "x,y,phi,gradx,grady,flowx,flowy");
  CHECK(field.rows.size() == 256);
  for (const auto& r : field.rows) CHECK(r[2] >= std::hypot(r[0] - 0.5, r[1] + 0.5));
  const std::string first = slurp(dir / "field.csv");
  CHECK(cli({"field", ckpt.string(), "--grid", "16", "-o", dir.string()}).code == 0);
  CHECK(slurp(dir / "field.csv") == first);

  // A checkpoint whose parameters do not match its architecture.
  auto broken = stored;
  broken["parameters"]["output.bias"] = nlohmann::json::array({nlohmann::json::array({1.0, 2.0})});
  std::ofstream(dir / "broken.json") << broken.dump();
  CHECK(cli({"field", (dir / "broken.json").string(), "-o", dir.string()}).code == 2);
  CHECK(cli({"field", (dir / "missing.json").string(), "-o", dir.string()}).code == 2);
  CHECK(cli({"trace", ckpt.string(), "-o", dir.string()}).code == 1);
}

TEST_CASE("trace on the exact plane field follows the straight segment") {
  const fs::path dir = scratch("trace");
  const fs::path ckpt = exact_plane_checkpoint(dir);
  const Run run = cli({"trace", ckpt.string(), "--from", "2,1.5", "-o", dir.string()});
  REQUIRE(run.code == 0);
  const Csv summary = read_csv(dir / "trace_summary.csv");
  CHECK(summary.header == "q1,q2,phi,flow_points,flow_length,geodesic_length,max_deviation");
  REQUIRE(summary.rows.size() == 1);
  const auto& s = summary.rows[0];
  CHECK(s[2] == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(s[6] < 1e-3);
  CHECK(std::abs(s[4] - s[2]) / s[2] < 0.05);

  const Csv flow = read_csv(dir / "trace_flow.csv");
  CHECK(flow.header == "t,q1,q2,x1,x2,x3");
  for (const auto& r : flow.rows) CHECK(std::abs(1.5 * r[1] - 2.0 * r[2]) < 1e-9);  // on the line y = 0.75 x
  const Csv geodesic = read_csv(dir / "trace_geodesic.csv");
  CHECK(std::abs(geodesic.rows.back()[0] - flow.rows.back()[0]) < 1e-12);
}

TEST_CASE("symmetry writes every ordered pair") {
  const fs::path dir = scratch("symmetry");
  const Run run = cli({"symmetry", "plane", "--grid-k", "2", "--adam-steps", "20", "--lbfgs-steps", "1", "--batch-size",
                       "32", "--width", "8", "--depth", "1", "--sampler", "uniform", "--oracle-resolution", "16", "-o",
                       dir.string()});
  REQUIRE(run.code == 0);
  const Csv pairs = read_csv(dir / "symmetry_pairs.csv");
  CHECK(pairs.header == "p_index,q_index,px,py,qx,qy,phi_q_from_p,phi_p_from_q,oracle,asymmetry,mean_distance");
  CHECK(pairs.rows.size() == 4 * 3);
  for (const auto& r : pairs.rows) {
    CHECK(r[0] != r[1]);
    CHECK(r[9] == doctest::Approx(std::abs(r[6] - r[7])));
    CHECK(r[8] >= std::hypot(r[4] - r[2], r[5] - r[3]) - 1e-12);
  }
  const Csv origins = read_csv(dir / "symmetry_origins.csv");
  CHECK(origins.comments.size() == 4);
  CHECK(fs::exists(dir / "origin_3.json"));
  CHECK(run.out.find("ordered pairs 12") != std::string::npos);
}
