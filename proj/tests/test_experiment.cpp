#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "ntklab/experiment.hpp"
#include "ntklab/stats.hpp"

using namespace ntklab;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Minimal strictness check: tags balance, attributes are quoted, a single
// svg root element.
bool well_formed_xml(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  if (text.rfind("<?xml", 0) != 0) return false;
  i = text.find("?>");
  if (i == std::string::npos) return false;
  i += 2;
  while (i < text.size()) {
    const std::size_t open = text.find('<', i);
    if (open == std::string::npos) break;
    const std::size_t close = text.find('>', open);
    if (close == std::string::npos) return false;
    std::string tag = text.substr(open + 1, close - open - 1);
    i = close + 1;
    if (tag.empty()) return false;
    if (tag[0] == '/') {
      if (stack.empty()) return false;
      if (stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    if (self_closing) tag.pop_back();
    // unquoted attribute values would leave a stray '=' before a non-quote
    for (std::size_t p = 0; p + 1 < tag.size(); ++p)
      if (tag[p] == '=' && tag[p + 1] != '"') return false;
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
    if (!self_closing) stack.push_back(name);
  }
  return stack.empty();
}

ExperimentConfig smoke_config(const std::string& out) {
  ExperimentConfig cfg;
  cfg.widths = {16};
  cfg.seeds = {0};
  cfg.n_test = 8;
  cfg.ensemble_size = 4;
  cfg.num_heads = 4;
  cfg.max_steps = 300;
  cfg.tol = 1e-8;
  cfg.lr = 0.02;
  cfg.output_dir = out;
  return cfg;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("synthetic label values") {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  CHECK(synthetic_label(x) == 0.0);
  x << 1.0, 1.0, 1.0;
  CHECK(synthetic_label(x) == doctest::Approx(1.0));
  x << 1.0, -1.0, 2.0;
  CHECK(synthetic_label(x) == doctest::Approx(6.0));
  // documented generalization beyond three dimensions
  Eigen::VectorXd x4(4);
  x4 << 1.0, 1.0, 1.0, 2.0;
  CHECK(synthetic_label(x4) == doctest::Approx(5.0 - 4.0));
}

TEST_CASE("dataset generation") {
  ExperimentConfig cfg;
  cfg.n_train = 10;
  cfg.n_test = 30;
  const Dataset a = gen_dataset(cfg, 5);
  const Dataset b = gen_dataset(cfg, 5);
  const Dataset c = gen_dataset(cfg, 6);
  CHECK(a.train_x == b.train_x);
  CHECK(a.test_x == b.test_x);
  CHECK(a.train_x != c.train_x);
  CHECK(a.train_x.rows() == 10);
  CHECK(a.test_x.rows() == 30);
  for (int i = 0; i < 10; ++i)
    CHECK(a.train_y(i, 0) == synthetic_label(a.train_x.row(i).transpose()));
}

TEST_CASE("dataset files round trip") {
  const auto dir = temp_dir("ntklab_dataset_test");
  ExperimentConfig cfg;
  cfg.n_test = 7;
  const Dataset data = gen_dataset(cfg, 9);
  write_dataset(dir.string(), data);
  const Dataset loaded = load_dataset(dir.string());
  CHECK((loaded.train_x - data.train_x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.train_y - data.train_y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.test_x - data.test_x).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep smoke run emits one record per test point") {
  const auto dir = temp_dir("ntklab_sweep_smoke");
  const ExperimentConfig cfg = smoke_config(dir.string());
  const auto records = run_sweep(cfg);
  CHECK(records.size() == 8);
  for (int p = 0; p < 8; ++p) {
    CHECK(records[p].width == 16);
    CHECK(records[p].seed == 0);
    CHECK(records[p].test_point_id == p);
    CHECK(std::isfinite(records[p].ensemble_var));
    CHECK(std::isfinite(records[p].rnd_msq_half));
    CHECK(std::isfinite(records[p].bayes_var));
    CHECK(std::isfinite(records[p].bayes_rnd_msq_half));
    CHECK(records[p].analytic_var >= 0.0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep csv is deterministic and round trips") {
  const auto dir = temp_dir("ntklab_sweep_det");
  const ExperimentConfig cfg = smoke_config(dir.string());
  const auto records = run_sweep(cfg);
  const std::string p1 = (dir / "a.csv").string();
  const std::string p2 = (dir / "b.csv").string();
  write_sweep_csv(p1, records);
  write_sweep_csv(p2, run_sweep(cfg));
  CHECK(slurp(p1) == slurp(p2));

  const auto loaded = load_sweep_csv(p1);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].width == records[i].width);
    CHECK(loaded[i].ensemble_var == records[i].ensemble_var);
    CHECK(loaded[i].analytic_var == records[i].analytic_var);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed sweep csv names the offending row") {
  const auto dir = temp_dir("ntklab_sweep_bad");
  const std::string path = (dir / "bad.csv").string();
  {
    std::ofstream out(path);
    out << "width,seed,test_point_id,ensemble_var,rnd_msq_half,bayes_var,"
           "bayes_rnd_msq_half,analytic_var\n";
    out << "16,0,0,0.1,0.1,0.1,0.1,0.1\n";
    out << "16,0,oops,0.1\n";
  }
  CHECK_THROWS_WITH_AS(load_sweep_csv(path), doctest::Contains("row 3"), std::runtime_error);
  {
    std::ofstream out(path);
    out << "not,the,expected,header\n";
  }
  CHECK_THROWS_WITH_AS(load_sweep_csv(path), doctest::Contains("header"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("plots") {
  const auto dir = temp_dir("ntklab_plot_test");
  const std::string csv = (dir / "sweep.csv").string();

  // synthetic records across two widths and three seeds
  std::vector<SweepRecord> records;
  for (int width : {16, 256}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      for (int p = 0; p < 6; ++p) {
        SweepRecord r;
        r.width = width;
        r.seed = seed;
        r.test_point_id = p;
        const double base = 0.01 * (p + 1);
        const double wobble = width == 16 ? 0.004 * ((p + seed) % 3) : 0.0002 * (p % 2);
        r.ensemble_var = base;
        r.rnd_msq_half = base + wobble;
        r.bayes_var = 2.0 * base;
        r.bayes_rnd_msq_half = 2.0 * base + wobble;
        r.analytic_var = base;
        records.push_back(r);
      }
    }
  }
  write_sweep_csv(csv, records);

  SUBCASE("discrepancy plot is valid xml and deterministic") {
    const std::string svg1 = (dir / "d1.svg").string();
    const std::string svg2 = (dir / "d2.svg").string();
    plot(csv, PlotKind::DiscrepancyVsWidth, svg1);
    plot(csv, PlotKind::DiscrepancyVsWidth, svg2);
    const std::string body = slurp(svg1);
    CHECK(well_formed_xml(body));
    CHECK(body == slurp(svg2));
    CHECK(body.find("<svg") != std::string::npos);
    CHECK(body.find("polyline") != std::string::npos);
  }

  SUBCASE("scatter plot of identical columns lies on the identity line") {
    std::vector<SweepRecord> equal = records;
    for (auto& r : equal) r.rnd_msq_half = r.ensemble_var;
    const std::string csv_eq = (dir / "eq.csv").string();
    write_sweep_csv(csv_eq, equal);
    const std::string svg = (dir / "scatter.svg").string();
    plot(csv_eq, PlotKind::Scatter, svg);
    const std::string body = slurp(svg);
    CHECK(well_formed_xml(body));
    // identical coordinates: every circle has cx == cy up to formatting
    std::size_t at = 0;
    int circles = 0;
    while ((at = body.find("<circle cx=\"", at)) != std::string::npos) {
      const std::size_t cx_end = body.find('"', at + 12);
      const std::string cx = body.substr(at + 12, cx_end - at - 12);
      const std::size_t cy_start = body.find("cy=\"", cx_end) + 4;
      const std::size_t cy_end = body.find('"', cy_start);
      const std::string cy = body.substr(cy_start, cy_end - cy_start);
      // map pixels back to unit fractions of each axis; identical columns
      // must land on the identity line
      const double fx = (std::stod(cx) - 70.0) / (640.0 - 70.0 - 20.0);
      const double fy = (480.0 - 50.0 - std::stod(cy)) / (480.0 - 50.0 - 30.0);
      CHECK(std::abs(fx - fy) < 1e-4);
      ++circles;
      at = cy_end;
    }
    CHECK(circles > 0);
  }

  SUBCASE("empty record set is an error, not an empty plot") {
    const std::string empty_csv = (dir / "empty.csv").string();
    {
      std::ofstream out(empty_csv);
      out << "width,seed,test_point_id,ensemble_var,rnd_msq_half,bayes_var,"
             "bayes_rnd_msq_half,analytic_var\n";
    }
    CHECK_THROWS_WITH_AS(plot(empty_csv, PlotKind::Scatter, (dir / "x.svg").string()),
                         doctest::Contains("no records"), std::runtime_error);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("calibration correlation rises with width in a mini sweep") {
  const auto dir = temp_dir("ntklab_mini_sweep");
  ExperimentConfig cfg;
  cfg.widths = {16, 512};
  cfg.seeds = {1};
  cfg.n_test = 48;
  cfg.ensemble_size = 48;
  cfg.num_heads = 48;
  cfg.lr = 0.02;
  cfg.max_steps = 6000;
  cfg.tol = 1e-9;
  cfg.output_dir = dir.string();
  const auto records = run_sweep(cfg);

  auto pearson = [&](int width) {
    std::vector<double> a, b;
    for (const auto& r : records)
      if (r.width == width) {
        a.push_back(r.ensemble_var);
        b.push_back(r.rnd_msq_half);
      }
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num += (a[i] - ma) * (b[i] - mb);
      da += (a[i] - ma) * (a[i] - ma);
      db += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(da * db);
  };
  CHECK(pearson(512) > pearson(16));
  std::filesystem::remove_all(dir);
}
