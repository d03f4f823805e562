#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "difflab/cli.hpp"
#include "difflab/error.hpp"
#include "difflab/tabular.hpp"

namespace difflab::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape(const std::string& text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

class Svg {
 public:
  Svg(double width, double height) : width_(width), height_(height) {}

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& extra = "") {
    body_ << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
          << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\"" << extra << "/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0, const std::string& extra = "") {
    body_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
          << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(width)
          << "\"" << extra << "/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& points, const std::string& stroke) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : points) body_ << fmt(x) << ',' << fmt(y) << ' ';
    body_ << "\"/>\n";
  }
  void polygon(const std::vector<std::pair<double, double>>& points, const std::string& fill) {
    body_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"0.35\" stroke=\"none\" points=\"";
    for (const auto& [x, y] : points) body_ << fmt(x) << ',' << fmt(y) << ' ';
    body_ << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(r)
          << "\" fill=\"" << fill << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, double size = 11,
            const std::string& anchor = "middle", double rotate = 0.0) {
    body_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << fmt(size, 1)
          << "\" text-anchor=\"" << anchor << "\" font-family=\"sans-serif\"";
    if (rotate != 0.0) body_ << " transform=\"rotate(" << fmt(rotate, 1) << ' ' << fmt(x) << ' ' << fmt(y) << ")\"";
    body_ << '>' << escape(s) << "</text>\n";
  }

  void save(const fs::path& path) const {
    auto out = open_for_write(path);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width_, 0) << "\" height=\""
        << fmt(height_, 0) << "\" viewBox=\"0 0 " << fmt(width_, 0) << ' ' << fmt(height_, 0)
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
  }

 private:
  double width_;
  double height_;
  std::ostringstream body_;
};

// Data-to-pixel mapping for one plot panel, with a simple tick frame.
struct Axes {
  double x0, y0, w, h;
  double xmin, xmax, ymin, ymax;
  bool x_ticks = true;

  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
  double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }

  void draw(Svg& svg, const std::string& xlabel, const std::string& ylabel,
            const std::string& title) const {
    svg.line(x0, y0 + h, x0 + w, y0 + h, "black");
    svg.line(x0, y0, x0, y0 + h, "black");
    for (int t = 0; t <= 4; ++t) {
      const double fx = xmin + (xmax - xmin) * t / 4.0;
      const double fy = ymin + (ymax - ymin) * t / 4.0;
      if (x_ticks) {
        svg.line(px(fx), y0 + h, px(fx), y0 + h + 4, "black");
        svg.text(px(fx), y0 + h + 16, tick(fx), 10);
      }
      svg.line(x0 - 4, py(fy), x0, py(fy), "black");
      svg.text(x0 - 6, py(fy) + 3, tick(fy), 10, "end");
    }
    svg.text(x0 + w / 2, y0 + h + 34, xlabel, 12);
    svg.text(x0 - 46, y0 + h / 2, ylabel, 12, "middle", -90);
    svg.text(x0 + w / 2, y0 - 10, title, 13);
  }

  static std::string tick(double v) {
    const double a = std::fabs(v);
    if (a != 0.0 && (a < 0.01 || a >= 1e5)) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1e", v);
      return buf;
    }
    return fmt(v, a >= 100 ? 0 : 2);
  }
};

void pad_range(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi <= lo) {
    const double c = lo;
    lo = c - 0.5;
    hi = c + 0.5;
  }
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_artifact(const fs::path& path, FigureKind kind) {
  auto in = open_for_read(path);
  const auto mismatch = [&](const std::string& why) {
    fail(path.string() + ": schema mismatch for " + figure_kind_name(kind) + " figure: " + why);
  };
  Table table;
  std::string line;
  if (!std::getline(in, line) || line.empty()) mismatch("empty file");
  if (line.back() == '\r') line.pop_back();
  for (const auto f : split_fields(line)) table.header.emplace_back(f);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> row;
    for (const auto f : split_fields(line)) row.emplace_back(f);
    if (row.size() != table.header.size()) mismatch("row with " + std::to_string(row.size()) + " fields");
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) mismatch("no data rows");
  return table;
}

void expect_header(const Table& t, const std::vector<std::string>& expected, const fs::path& path,
                   FigureKind kind) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    fail(path.string() + ": schema mismatch for " + figure_kind_name(kind) +
         " figure: expected header '" + want + "'");
  }
}

double num(const std::string& field, const fs::path& path) { return parse_double(field, path.string()); }

// Diverging blue-white-red for values in [-1, 1]; grey for NaN.
std::string heat_color(double v) {
  if (std::isnan(v)) return "#cccccc";
  v = std::clamp(v, -1.0, 1.0);
  int r, g, b;
  if (v >= 0) {
    r = 255;
    g = b = static_cast<int>(std::lround(255 * (1 - v)));
  } else {
    b = 255;
    r = g = static_cast<int>(std::lround(255 * (1 + v)));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

void heatmap(const Table& t, const fs::path& path, const fs::path& output) {
  const std::size_t s = t.rows.size();
  if (t.header.empty() || t.header[0] != "kind" || t.header.size() != s + 1) {
    fail(path.string() + ": schema mismatch for heatmap figure: expected a square 'kind,...' table");
  }
  const double cell = 56, left = 150, top = 40;
  Svg svg(left + cell * static_cast<double>(s) + 30, top + cell * static_cast<double>(s) + 120);
  svg.text(left + cell * static_cast<double>(s) / 2, 24, path.stem().string(), 13);
  for (std::size_t i = 0; i < s; ++i) {
    if (t.rows[i][0] != t.header[i + 1]) {
      fail(path.string() + ": schema mismatch for heatmap figure: row " + std::to_string(i) +
           " is '" + t.rows[i][0] + "' but column is '" + t.header[i + 1] + "'");
    }
    svg.text(left - 6, top + cell * (static_cast<double>(i) + 0.5) + 4, t.rows[i][0], 11, "end");
    const double cx = left + cell * (static_cast<double>(i) + 0.5);
    const double cy = top + cell * static_cast<double>(s) + 8;
    svg.text(cx, cy, t.header[i + 1], 11, "end", -45);
    for (std::size_t j = 0; j < s; ++j) {
      const double v = num(t.rows[i][j + 1], path);
      const double x = left + cell * static_cast<double>(j), y = top + cell * static_cast<double>(i);
      svg.rect(x, y, cell, cell, heat_color(v), " stroke=\"white\"");
      svg.text(x + cell / 2, y + cell / 2 + 4, std::isnan(v) ? "n/a" : fmt(v), 11);
    }
  }
  svg.save(output);
}

void stability(const Table& t, const fs::path& path, const fs::path& output) {
  expect_header(t, {"score_kind", "k", "median_rank_change", "p95_rank_change", "disagreement"},
                path, FigureKind::kStability);
  std::map<std::string, std::vector<std::array<double, 3>>> series;
  std::vector<std::string> order;
  double kmax = 1, rmax = 0, dmax = 0;
  for (const auto& row : t.rows) {
    if (!series.count(row[0])) order.push_back(row[0]);
    const double k = num(row[1], path), r = num(row[2], path), d = num(row[4], path);
    series[row[0]].push_back({k, r, d});
    kmax = std::max(kmax, k);
    rmax = std::max(rmax, r);
    dmax = std::max(dmax, d);
  }
  Svg svg(960, 420);
  const Axes rank{80, 40, 300, 300, 0, kmax, 0, rmax > 0 ? rmax * 1.05 : 1};
  const Axes dis{480, 40, 300, 300, 0, kmax, 0, dmax > 0 ? dmax * 1.05 : 1};
  rank.draw(svg, "runs averaged (k)", "median rank change", "rank stability");
  dis.draw(svg, "runs averaged (k)", "split disagreement", "threshold split stability");
  for (std::size_t s = 0; s < order.size(); ++s) {
    const auto* color = kPalette[s % 10];
    std::vector<std::pair<double, double>> a, b;
    for (const auto& p : series[order[s]]) {
      a.emplace_back(rank.px(p[0]), rank.py(p[1]));
      b.emplace_back(dis.px(p[0]), dis.py(p[2]));
    }
    svg.polyline(a, color);
    svg.polyline(b, color);
    for (const auto& [x, y] : a) svg.circle(x, y, 2.5, color);
    for (const auto& [x, y] : b) svg.circle(x, y, 2.5, color);
    svg.rect(800, 50 + 18.0 * static_cast<double>(s), 10, 10, color);
    svg.text(815, 59 + 18.0 * static_cast<double>(s), order[s], 10, "start");
  }
  svg.save(output);
}

void pca(const Table& t, const fs::path& path, const fs::path& output) {
  if (t.header.size() < 5 || t.header[0] != "component" || t.header[1] != "eigenvalue" ||
      t.header[2] != "explained_variance_ratio") {
    fail(path.string() +
         ": schema mismatch for pca figure: expected 'component,eigenvalue,explained_variance_ratio,<kinds>'");
  }
  const std::size_t s = t.header.size() - 3;
  Svg svg(920, 440);
  const Axes load{80, 40, 520, 300, 0, static_cast<double>(s), -1, 1, false};
  load.draw(svg, "", "loading", "PC1 and PC2 loadings");
  svg.line(load.x0, load.py(0), load.x0 + load.w, load.py(0), "#888888");
  const double slot = load.w / static_cast<double>(s);
  for (std::size_t c = 0; c < std::min<std::size_t>(2, t.rows.size()); ++c) {
    for (std::size_t j = 0; j < s; ++j) {
      const double v = num(t.rows[c][j + 3], path);
      const double x = load.x0 + slot * static_cast<double>(j) + slot * (0.15 + 0.35 * static_cast<double>(c));
      const double y = std::min(load.py(v), load.py(0));
      svg.rect(x, y, slot * 0.33, std::fabs(load.py(v) - load.py(0)), kPalette[c]);
    }
  }
  for (std::size_t j = 0; j < s; ++j) {
    svg.text(load.x0 + slot * (static_cast<double>(j) + 0.5), load.y0 + load.h + 14, t.header[j + 3],
             10, "end", -40);
  }
  svg.rect(620, 48, 10, 10, kPalette[0]);
  svg.text(635, 57, "PC1", 10, "start");
  svg.rect(620, 64, 10, 10, kPalette[1]);
  svg.text(635, 73, "PC2", 10, "start");

  const Axes bar{760, 40, 60, 300, 0, 1, 0, 1};
  svg.text(bar.x0 + bar.w / 2, 30, "explained variance", 12);
  double acc = 0.0;
  for (std::size_t c = 0; c < t.rows.size(); ++c) {
    const double r = num(t.rows[c][2], path);
    svg.rect(bar.x0, bar.py(acc + r), bar.w, bar.py(acc) - bar.py(acc + r), kPalette[c % 10],
             " stroke=\"white\"");
    if (r > 0.04) svg.text(bar.x0 + bar.w + 4, bar.py(acc + r / 2) + 4, "PC" + t.rows[c][0] + " " + fmt(r), 10, "start");
    acc += r;
  }
  svg.save(output);
}

void neglogp(const Table& t, const fs::path& path, const fs::path& output) {
  expect_header(t, {"example_id", "t_statistic", "p_value", "mean_difference"}, path,
                FigureKind::kNegLogP);
  std::vector<double> values;
  for (const auto& row : t.rows) {
    const double p = num(row[2], path);
    values.push_back(-std::log10(std::max(p, 1e-300)));
  }
  const double bonferroni = -std::log10(0.01 / static_cast<double>(values.size()));
  double hi = std::max(*std::max_element(values.begin(), values.end()), bonferroni) * 1.05;
  double lo = 0.0;
  pad_range(lo, hi);
  constexpr int kBins = 40;
  std::vector<double> counts(kBins, 0.0);
  for (const double v : values) {
    const int b = std::min(kBins - 1, static_cast<int>((v - lo) / (hi - lo) * kBins));
    counts[static_cast<std::size_t>(b)] += 1;
  }
  const double top = *std::max_element(counts.begin(), counts.end());
  Svg svg(640, 420);
  const Axes ax{80, 40, 500, 300, lo, hi, 0, top * 1.05};
  ax.draw(svg, "-log10 p", "examples", path.stem().string());
  const double bw = ax.w / kBins;
  for (int b = 0; b < kBins; ++b) {
    const double c = counts[static_cast<std::size_t>(b)];
    if (c == 0) continue;
    svg.rect(ax.x0 + bw * b, ax.py(c), bw - 1, ax.py(0) - ax.py(c), kPalette[0]);
  }
  svg.line(ax.px(bonferroni), ax.y0, ax.px(bonferroni), ax.y0 + ax.h, kPalette[3], 1.5,
           " stroke-dasharray=\"4 3\"");
  svg.text(ax.px(bonferroni) + 4, ax.y0 + 12, "Bonferroni 0.01", 10, "start");
  svg.save(output);
}

void size_ratio(const Table& t, const fs::path& path, const fs::path& output) {
  expect_header(t, {"model_a", "model_b", "param_count_a", "param_count_b", "size_ratio", "mean_neglog_p"},
                path, FigureKind::kSizeRatio);
  double xlo = 1, xhi = 1, ylo = 0, yhi = 0;
  for (const auto& row : t.rows) {
    xhi = std::max(xhi, num(row[4], path));
    yhi = std::max(yhi, num(row[5], path));
  }
  xhi *= 1.1;
  yhi *= 1.1;
  pad_range(xlo, xhi);
  pad_range(ylo, yhi);
  Svg svg(640, 420);
  const Axes ax{80, 40, 500, 300, xlo, xhi, ylo, yhi};
  ax.draw(svg, "parameter count ratio", "mean -log10 p", "bias vs size ratio");
  for (const auto& row : t.rows) {
    const double x = ax.px(num(row[4], path)), y = ax.py(num(row[5], path));
    svg.circle(x, y, 4, kPalette[0]);
    svg.text(x + 6, y - 4, row[0] + " / " + row[1], 9, "start");
  }
  svg.save(output);
}

void fingerprint(const Table& t, const fs::path& path, const fs::path& output) {
  expect_header(t, {"score_kind", "mode", "k", "holdout_accuracy", "train_accuracy"}, path,
                FigureKind::kFingerprint);
  std::map<std::string, std::map<double, std::pair<double, int>>> by_mode;
  std::vector<std::string> modes;
  double kmax = 1;
  for (const auto& row : t.rows) {
    if (!by_mode.count(row[1])) modes.push_back(row[1]);
    const double k = num(row[2], path);
    auto& cell = by_mode[row[1]][k];
    cell.first += num(row[3], path);
    cell.second += 1;
    kmax = std::max(kmax, k);
  }
  Svg svg(640, 420);
  const Axes ax{80, 40, 460, 300, 0, kmax, 0, 1};
  ax.draw(svg, "examples used (k)", "held-out accuracy (mean over scores)", "fingerprint accuracy");
  svg.line(ax.x0, ax.py(0.5), ax.x0 + ax.w, ax.py(0.5), "#aaaaaa", 1, " stroke-dasharray=\"3 3\"");
  for (std::size_t m = 0; m < modes.size(); ++m) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [k, cell] : by_mode[modes[m]]) pts.emplace_back(ax.px(k), ax.py(cell.first / cell.second));
    svg.polyline(pts, kPalette[m % 10]);
    for (const auto& [x, y] : pts) svg.circle(x, y, 3, kPalette[m % 10]);
    svg.rect(560, 50 + 18.0 * static_cast<double>(m), 10, 10, kPalette[m % 10]);
    svg.text(575, 59 + 18.0 * static_cast<double>(m), modes[m], 10, "start");
  }
  svg.save(output);
}

void bands(const Table& t, const fs::path& path, const fs::path& output) {
  expect_header(t, {"bin", "position", "lower", "mean", "upper"}, path, FigureKind::kBands);
  std::vector<std::array<double, 4>> rows;
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto& row : t.rows) {
    const std::array<double, 4> r{num(row[1], path), num(row[2], path), num(row[3], path), num(row[4], path)};
    rows.push_back(r);
    xlo = std::min(xlo, r[0]);
    xhi = std::max(xhi, r[0]);
    ylo = std::min(ylo, r[1]);
    yhi = std::max(yhi, r[3]);
  }
  pad_range(xlo, xhi);
  pad_range(ylo, yhi);
  Svg svg(640, 420);
  const Axes ax{80, 40, 500, 300, xlo, xhi, ylo, yhi};
  ax.draw(svg, "examples ordered by mean score", "score", path.stem().string());
  std::vector<std::pair<double, double>> area, mean;
  for (const auto& r : rows) area.emplace_back(ax.px(r[0]), ax.py(r[3]));
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) area.emplace_back(ax.px((*it)[0]), ax.py((*it)[1]));
  for (const auto& r : rows) mean.emplace_back(ax.px(r[0]), ax.py(r[2]));
  svg.polygon(area, kPalette[0]);
  svg.polyline(mean, kPalette[0]);
  svg.save(output);
}

}  // namespace

FigureKind parse_figure_kind(std::string_view name) {
  if (name == "heatmap") return FigureKind::kHeatmap;
  if (name == "stability") return FigureKind::kStability;
  if (name == "pca") return FigureKind::kPca;
  if (name == "neglogp") return FigureKind::kNegLogP;
  if (name == "size-ratio") return FigureKind::kSizeRatio;
  if (name == "fingerprint") return FigureKind::kFingerprint;
  if (name == "bands") return FigureKind::kBands;
  fail("unknown figure kind '" + std::string(name) +
       "' (expected heatmap, stability, pca, neglogp, size-ratio, fingerprint or bands)");
}

std::string figure_kind_name(FigureKind kind) {
  switch (kind) {
    case FigureKind::kHeatmap: return "heatmap";
    case FigureKind::kStability: return "stability";
    case FigureKind::kPca: return "pca";
    case FigureKind::kNegLogP: return "neglogp";
    case FigureKind::kSizeRatio: return "size-ratio";
    case FigureKind::kFingerprint: return "fingerprint";
    case FigureKind::kBands: return "bands";
  }
  return "unknown";
}

void render_figure(const fs::path& artifact, FigureKind kind, const fs::path& output) {
  const auto table = read_artifact(artifact, kind);
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  switch (kind) {
    case FigureKind::kHeatmap: heatmap(table, artifact, output); break;
    case FigureKind::kStability: stability(table, artifact, output); break;
    case FigureKind::kPca: pca(table, artifact, output); break;
    case FigureKind::kNegLogP: neglogp(table, artifact, output); break;
    case FigureKind::kSizeRatio: size_ratio(table, artifact, output); break;
    case FigureKind::kFingerprint: fingerprint(table, artifact, output); break;
    case FigureKind::kBands: bands(table, artifact, output); break;
  }
}

}  // namespace difflab::cli
