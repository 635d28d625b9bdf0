#include "ntklab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ntklab/stats.hpp"
#include "ntklab/trainers.hpp"

namespace ntklab {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

Architecture ExperimentConfig::make_arch(int width, int heads) const {
  Architecture arch;
  arch.input_dim = input_dim;
  arch.hidden_widths = {width};
  arch.num_heads = heads;
  arch.activation = activation;
  arch.sigma_w = sigma_w;
  arch.sigma_b = sigma_b;
  return arch;
}

KernelSpec ExperimentConfig::kappa_spec(int heads) const {
  KernelSpec spec = nngp_spec(make_arch(1, heads));
  spec.quadrature_order = quadrature_order;
  return spec;
}

KernelSpec ExperimentConfig::theta_spec(int heads) const {
  KernelSpec spec = ntk_spec(make_arch(1, heads));
  spec.quadrature_order = quadrature_order;
  return spec;
}

double synthetic_label(const Eigen::VectorXd& x) {
  return x.sum() - 2.0 * x.prod();
}

Dataset gen_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  const Rng master(seed);
  Rng train_rng = master.child(0);
  Rng test_rng = master.child(1);

  Dataset data;
  data.train_x = train_rng.normal_matrix(cfg.n_train, cfg.input_dim);
  data.test_x = test_rng.normal_matrix(cfg.n_test, cfg.input_dim);
  data.train_y.resize(cfg.n_train, 1);
  for (int i = 0; i < cfg.n_train; ++i)
    data.train_y(i, 0) = synthetic_label(data.train_x.row(i).transpose());
  return data;
}

void write_dataset(const std::string& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/train.csv");
    if (!out) throw std::runtime_error("cannot open " + dir + "/train.csv");
    for (Eigen::Index j = 0; j < data.train_x.cols(); ++j) out << "x" << j << ",";
    out << "y\n";
    for (Eigen::Index i = 0; i < data.train_x.rows(); ++i) {
      for (Eigen::Index j = 0; j < data.train_x.cols(); ++j)
        out << fmt(data.train_x(i, j)) << ",";
      out << fmt(data.train_y(i, 0)) << "\n";
    }
  }
  std::ofstream out(dir + "/test.csv");
  if (!out) throw std::runtime_error("cannot open " + dir + "/test.csv");
  for (Eigen::Index j = 0; j < data.test_x.cols(); ++j)
    out << "x" << j << (j + 1 < data.test_x.cols() ? "," : "");
  out << "\n";
  for (Eigen::Index i = 0; i < data.test_x.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.test_x.cols(); ++j)
      out << fmt(data.test_x(i, j)) << (j + 1 < data.test_x.cols() ? "," : "");
    out << "\n";
  }
}

namespace {

std::vector<std::vector<double>> read_csv_rows(const std::string& path, bool skip_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (skip_header && line_no == 1) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ": malformed value '" + cell + "' at row " +
                                 std::to_string(line_no));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  const auto train_rows = read_csv_rows(dir + "/train.csv", true);
  const auto test_rows = read_csv_rows(dir + "/test.csv", true);
  if (train_rows.empty()) throw std::runtime_error("empty train set in " + dir);
  const std::size_t d = train_rows.front().size() - 1;

  Dataset data;
  data.train_x.resize(static_cast<Eigen::Index>(train_rows.size()), static_cast<Eigen::Index>(d));
  data.train_y.resize(static_cast<Eigen::Index>(train_rows.size()), 1);
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    if (train_rows[i].size() != d + 1)
      throw std::runtime_error(dir + "/train.csv: ragged row " + std::to_string(i + 2));
    for (std::size_t j = 0; j < d; ++j) data.train_x(i, j) = train_rows[i][j];
    data.train_y(i, 0) = train_rows[i][d];
  }
  data.test_x.resize(static_cast<Eigen::Index>(test_rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    if (test_rows[i].size() != d)
      throw std::runtime_error(dir + "/test.csv: ragged row " + std::to_string(i + 2));
    for (std::size_t j = 0; j < d; ++j) data.test_x(i, j) = test_rows[i][j];
  }
  return data;
}

namespace {

Eigen::VectorXd column_variance(const Eigen::MatrixXd& m) {
  // Unbiased variance down each column.
  const Eigen::RowVectorXd mean = m.colwise().mean();
  return ((m.rowwise() - mean).colwise().squaredNorm() /
          static_cast<double>(m.rows() - 1))
      .transpose();
}

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::vector<SweepRecord> run_sweep(const ExperimentConfig& cfg) {
  std::vector<SweepRecord> records;
  const KernelSpec kappa1 = cfg.kappa_spec();
  const KernelSpec theta1 = cfg.theta_spec();

  for (const std::uint64_t seed : cfg.seeds) {
    const Dataset data = gen_dataset(cfg, seed);
    // Analytic law once per dataset; it does not depend on width.
    const Eigen::VectorXd analytic_var =
        converged_ensemble_variances(kappa1, theta1, data, data.test_x);

    for (const int width : cfg.widths) {
      const Rng cell_rng = Rng(seed).child(static_cast<std::uint64_t>(width));
      TrainConfig train_cfg;
      train_cfg.learning_rate = cfg.lr;
      train_cfg.max_steps = cfg.max_steps;
      train_cfg.tol = cfg.tol;

      Eigen::VectorXd ens_var = Eigen::VectorXd::Constant(cfg.n_test, kNan);
      Eigen::VectorXd rnd_half = Eigen::VectorXd::Constant(cfg.n_test, kNan);
      Eigen::VectorXd bayes_var = Eigen::VectorXd::Constant(cfg.n_test, kNan);
      Eigen::VectorXd bayes_msq = Eigen::VectorXd::Constant(cfg.n_test, kNan);

      try {
        TrainConfig ens_cfg = train_cfg;
        ens_cfg.seed = cell_rng.child(0).stream_key();
        const auto members = train_ensemble(cfg.make_arch(width, 1), data.train_x, data.train_y,
                                            cfg.ensemble_size, ens_cfg);
        ens_var = column_variance(ensemble_predictions(members, data.test_x));
      } catch (const std::exception& e) {
        std::fprintf(stderr, "sweep cell (width=%d seed=%llu) ensemble diverged: %s\n", width,
                     static_cast<unsigned long long>(seed), e.what());
      }

      try {
        RndModel rnd = make_rnd_model(cfg.make_arch(width, cfg.num_heads),
                                      TargetKind::StandardNet, cell_rng.child(1).stream_key());
        rnd = train_rnd(rnd, data.train_x, train_cfg);
        const Eigen::MatrixXd errors = rnd_errors(rnd, data.test_x);
        rnd_half = (0.5 * errors.array().square().rowwise().mean()).matrix();
      } catch (const std::exception& e) {
        std::fprintf(stderr, "sweep cell (width=%d seed=%llu) rnd diverged: %s\n", width,
                     static_cast<unsigned long long>(seed), e.what());
      }

      try {
        RndModel bayes = make_rnd_model(cfg.make_arch(width, cfg.num_heads),
                                        TargetKind::BayesianJvp, cell_rng.child(2).stream_key());
        bayes = train_rnd(bayes, data.train_x, train_cfg);
        const Eigen::MatrixXd errors = rnd_errors(bayes, data.test_x);
        bayes_msq = errors.array().square().rowwise().mean().matrix();
        bayes_var = column_variance(errors.transpose());
      } catch (const std::exception& e) {
        std::fprintf(stderr, "sweep cell (width=%d seed=%llu) bayes-rnd diverged: %s\n", width,
                     static_cast<unsigned long long>(seed), e.what());
      }

      for (int p = 0; p < cfg.n_test; ++p) {
        SweepRecord rec;
        rec.width = width;
        rec.seed = seed;
        rec.test_point_id = p;
        rec.ensemble_var = ens_var[p];
        rec.rnd_msq_half = rnd_half[p];
        rec.bayes_var = bayes_var[p];
        rec.bayes_rnd_msq_half = bayes_msq[p];
        rec.analytic_var = analytic_var[p];
        records.push_back(rec);
      }
    }
  }
  return records;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "width,seed,test_point_id,ensemble_var,rnd_msq_half,bayes_var,"
         "bayes_rnd_msq_half,analytic_var\n";
  for (const auto& r : records) {
    out << r.width << ',' << r.seed << ',' << r.test_point_id << ',' << fmt(r.ensemble_var)
        << ',' << fmt(r.rnd_msq_half) << ',' << fmt(r.bayes_var) << ','
        << fmt(r.bayes_rnd_msq_half) << ',' << fmt(r.analytic_var) << '\n';
  }
}

std::vector<SweepRecord> load_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error(path + ": empty file");
  if (header != "width,seed,test_point_id,ensemble_var,rnd_msq_half,bayes_var,"
                "bayes_rnd_msq_half,analytic_var")
    throw std::runtime_error(path + ": unexpected header row");

  std::vector<SweepRecord> records;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8)
      throw std::runtime_error(path + ": malformed row " + std::to_string(line_no));
    try {
      SweepRecord r;
      r.width = std::stoi(cells[0]);
      r.seed = std::stoull(cells[1]);
      r.test_point_id = std::stoi(cells[2]);
      r.ensemble_var = std::stod(cells[3]);
      r.rnd_msq_half = std::stod(cells[4]);
      r.bayes_var = std::stod(cells[5]);
      r.bayes_rnd_msq_half = std::stod(cells[6]);
      r.analytic_var = std::stod(cells[7]);
      records.push_back(r);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": malformed row " + std::to_string(line_no));
    }
  }
  return records;
}

std::string run_sweep_to_dir(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  const auto records = run_sweep(cfg);
  const std::string csv_path = cfg.output_dir + "/sweep.csv";
  write_sweep_csv(csv_path, records);

  nlohmann::json meta;
  meta["widths"] = cfg.widths;
  meta["n_train"] = cfg.n_train;
  meta["n_test"] = cfg.n_test;
  meta["input_dim"] = cfg.input_dim;
  meta["ensemble_size"] = cfg.ensemble_size;
  meta["num_heads"] = cfg.num_heads;
  meta["lr"] = cfg.lr;
  meta["max_steps"] = cfg.max_steps;
  meta["tol"] = cfg.tol;
  meta["seeds"] = cfg.seeds;
  meta["activation"] = to_string(cfg.activation);
  meta["sigma_w"] = cfg.sigma_w;
  meta["sigma_b"] = cfg.sigma_b;
  meta["quadrature_order"] = cfg.quadrature_order;
  std::ofstream meta_out(cfg.output_dir + "/sweep.meta.json");
  meta_out << meta.dump(2) << '\n';
  return csv_path;
}

// ---------------------------------------------------------------------------
// SVG rendering

namespace {

struct SvgCanvas {
  static constexpr double width = 640.0;
  static constexpr double height = 480.0;
  static constexpr double margin_left = 70.0;
  static constexpr double margin_right = 20.0;
  static constexpr double margin_top = 30.0;
  static constexpr double margin_bottom = 50.0;

  std::ostringstream body;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool log_x = false, log_y = false;

  double tx(double x) const {
    const double v = log_x ? std::log10(x) : x;
    const double lo = log_x ? std::log10(x_min) : x_min;
    const double hi = log_x ? std::log10(x_max) : x_max;
    return margin_left + (v - lo) / (hi - lo) * (width - margin_left - margin_right);
  }
  double ty(double y) const {
    const double v = log_y ? std::log10(y) : y;
    const double lo = log_y ? std::log10(y_min) : y_min;
    const double hi = log_y ? std::log10(y_max) : y_max;
    return height - margin_bottom - (v - lo) / (hi - lo) * (height - margin_top - margin_bottom);
  }

  void line(double x1, double y1, double x2, double y2, const std::string& style) {
    body << "<line x1=\"" << fmt6(x1) << "\" y1=\"" << fmt6(y1) << "\" x2=\"" << fmt6(x2)
         << "\" y2=\"" << fmt6(y2) << "\" style=\"" << style << "\"/>\n";
  }
  void circle(double cx, double cy, double r, const std::string& fill) {
    body << "<circle cx=\"" << fmt6(cx) << "\" cy=\"" << fmt6(cy) << "\" r=\"" << fmt6(r)
         << "\" fill=\"" << fill << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& extra = "") {
    body << "<text x=\"" << fmt6(x) << "\" y=\"" << fmt6(y)
         << "\" font-family=\"sans-serif\" font-size=\"12\"" << (extra.empty() ? "" : " ")
         << extra << ">" << s << "</text>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& style) {
    body << "<polyline fill=\"none\" style=\"" << style << "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      body << fmt6(pts[i].first) << "," << fmt6(pts[i].second)
           << (i + 1 < pts.size() ? " " : "");
    body << "\"/>\n";
  }
  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill) {
    body << "<polygon fill=\"" << fill << "\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      body << fmt6(pts[i].first) << "," << fmt6(pts[i].second)
           << (i + 1 < pts.size() ? " " : "");
    body << "\"/>\n";
  }

  void axes(const std::string& x_label, const std::string& y_label) {
    line(margin_left, height - margin_bottom, width - margin_right, height - margin_bottom,
         "stroke:black;stroke-width:1");
    line(margin_left, margin_top, margin_left, height - margin_bottom,
         "stroke:black;stroke-width:1");
    text((margin_left + width - margin_right) / 2 - 30, height - 12, x_label);
    text(12, margin_top - 10, y_label);
    if (log_x) {
      for (int e = static_cast<int>(std::floor(std::log10(x_min)));
           e <= static_cast<int>(std::ceil(std::log10(x_max))); ++e) {
        const double v = std::pow(10.0, e);
        if (v < x_min * 0.999 || v > x_max * 1.001) continue;
        const double px = tx(v);
        line(px, height - margin_bottom, px, height - margin_bottom + 5,
             "stroke:black;stroke-width:1");
        text(px - 12, height - margin_bottom + 20, "1e" + std::to_string(e));
      }
    }
    if (log_y) {
      for (int e = static_cast<int>(std::floor(std::log10(y_min)));
           e <= static_cast<int>(std::ceil(std::log10(y_max))); ++e) {
        const double v = std::pow(10.0, e);
        if (v < y_min * 0.999 || v > y_max * 1.001) continue;
        const double py = ty(v);
        line(margin_left - 5, py, margin_left, py, "stroke:black;stroke-width:1");
        text(margin_left - 48, py + 4, "1e" + std::to_string(e));
      }
    }
  }

  std::string finalize(const std::string& title) const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt6(width) << "\" height=\""
        << fmt6(height) << "\" viewBox=\"0 0 " << fmt6(width) << " " << fmt6(height) << "\">\n"
        << "<title>" << title << "</title>\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body.str() << "</svg>\n";
    return out.str();
  }
};

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quartile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

struct SeriesStats {
  std::vector<double> widths, med, q25, q75;
};

// Per (width, seed) mean squared difference between the two columns, then
// median and quartiles across seeds.
SeriesStats discrepancy_series(const std::vector<SweepRecord>& records, bool bayes) {
  std::map<int, std::map<std::uint64_t, std::pair<std::vector<double>, std::vector<double>>>>
      cells;
  for (const auto& r : records) {
    const double a = bayes ? r.bayes_var : r.ensemble_var;
    const double b = bayes ? r.bayes_rnd_msq_half : r.rnd_msq_half;
    if (!std::isfinite(a) || !std::isfinite(b)) continue;  // divergence markers
    auto& cell = cells[r.width][r.seed];
    cell.first.push_back(a);
    cell.second.push_back(b);
  }
  SeriesStats out;
  for (const auto& [width, by_seed] : cells) {
    std::vector<double> msds;
    for (const auto& [seed, cols] : by_seed)
      if (!cols.first.empty())
        msds.push_back(discrepancy(cols.first, cols.second, DiscrepancyKind::MSD));
    if (msds.empty()) continue;
    out.widths.push_back(width);
    out.med.push_back(median_of(msds));
    out.q25.push_back(quartile_of(msds, 0.25));
    out.q75.push_back(quartile_of(msds, 0.75));
  }
  return out;
}

void draw_series(SvgCanvas& svg, const SeriesStats& s, const std::string& color) {
  std::vector<std::pair<double, double>> band;
  for (std::size_t i = 0; i < s.widths.size(); ++i)
    band.emplace_back(svg.tx(s.widths[i]), svg.ty(std::max(s.q75[i], 1e-300)));
  for (std::size_t i = s.widths.size(); i-- > 0;)
    band.emplace_back(svg.tx(s.widths[i]), svg.ty(std::max(s.q25[i], 1e-300)));
  if (band.size() >= 3) svg.polygon(band, color + ";fill-opacity:0.15");

  std::vector<std::pair<double, double>> line;
  for (std::size_t i = 0; i < s.widths.size(); ++i)
    line.emplace_back(svg.tx(s.widths[i]), svg.ty(std::max(s.med[i], 1e-300)));
  svg.polyline(line, "stroke:" + color + ";stroke-width:2");
  for (const auto& [px, py] : line) svg.circle(px, py, 3.0, color);
}

void plot_discrepancy(const std::vector<SweepRecord>& records, const std::string& out_path) {
  const SeriesStats standard = discrepancy_series(records, false);
  const SeriesStats bayes = discrepancy_series(records, true);
  if (standard.widths.empty() && bayes.widths.empty())
    throw std::runtime_error("no finite records to plot");

  SvgCanvas svg;
  svg.log_x = svg.log_y = true;
  svg.x_min = 1e300;
  svg.x_max = 1e-300;
  svg.y_min = 1e300;
  svg.y_max = 1e-300;
  for (const SeriesStats* s : {&standard, &bayes}) {
    for (double w : s->widths) {
      svg.x_min = std::min(svg.x_min, w);
      svg.x_max = std::max(svg.x_max, w);
    }
    for (std::size_t i = 0; i < s->widths.size(); ++i) {
      svg.y_min = std::min(svg.y_min, std::max(s->q25[i], 1e-300));
      svg.y_max = std::max(svg.y_max, s->q75[i]);
    }
  }
  if (svg.x_min == svg.x_max) {
    svg.x_min /= 2.0;
    svg.x_max *= 2.0;
  }
  svg.y_min = std::max(svg.y_min / 2.0, 1e-300);
  svg.y_max *= 2.0;

  svg.axes("width", "mean squared discrepancy");
  if (!standard.widths.empty()) draw_series(svg, standard, "#1f77b4");
  if (!bayes.widths.empty()) draw_series(svg, bayes, "#d62728");
  svg.text(SvgCanvas::width - 200, SvgCanvas::margin_top + 10,
           "ensemble vs rnd", "fill=\"#1f77b4\"");
  svg.text(SvgCanvas::width - 200, SvgCanvas::margin_top + 26,
           "bayes vs bayes-rnd", "fill=\"#d62728\"");

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
  out << svg.finalize("discrepancy vs width");
}

void plot_scatter(const std::vector<SweepRecord>& records, const std::string& out_path) {
  static const std::vector<std::string> palette = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                                   "#d62728", "#9467bd", "#8c564b"};
  std::map<int, std::vector<std::pair<double, double>>> by_width;
  double lo = 1e300, hi = 1e-300;
  for (const auto& r : records) {
    if (!std::isfinite(r.ensemble_var) || !std::isfinite(r.rnd_msq_half)) continue;
    const double x = std::max(r.ensemble_var, 1e-300);
    const double y = std::max(r.rnd_msq_half, 1e-300);
    by_width[r.width].emplace_back(x, y);
    lo = std::min({lo, x, y});
    hi = std::max({hi, x, y});
  }
  if (by_width.empty()) throw std::runtime_error("no finite records to plot");

  SvgCanvas svg;
  svg.log_x = svg.log_y = true;
  svg.x_min = svg.y_min = lo / 2.0;
  svg.x_max = svg.y_max = hi * 2.0;
  svg.axes("ensemble variance", "rnd squared error / 2");
  svg.line(svg.tx(svg.x_min), svg.ty(svg.x_min), svg.tx(svg.x_max), svg.ty(svg.x_max),
           "stroke:gray;stroke-width:1;stroke-dasharray:4 3");

  std::size_t color_index = 0;
  double legend_y = SvgCanvas::margin_top + 10;
  for (const auto& [width, pts] : by_width) {
    const std::string& color = palette[color_index++ % palette.size()];
    for (const auto& [x, y] : pts) svg.circle(svg.tx(x), svg.ty(y), 2.0, color);
    svg.text(SvgCanvas::width - 140, legend_y, "width " + std::to_string(width),
             "fill=\"" + color + "\"");
    legend_y += 16.0;
  }

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open " + out_path + " for writing");
  out << svg.finalize("calibration scatter");
}

}  // namespace

void plot(const std::string& csv_path, PlotKind kind, const std::string& out_path) {
  const auto records = load_sweep_csv(csv_path);
  if (records.empty()) throw std::runtime_error(csv_path + ": no records");
  if (kind == PlotKind::DiscrepancyVsWidth)
    plot_discrepancy(records, out_path);
  else
    plot_scatter(records, out_path);
}

}  // namespace ntklab
