// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

#include "lodrank/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "lodrank/io.hpp"

namespace lodrank {

std::string to_string(PlotKind k) {
  switch (k) {
    case PlotKind::sigma: return "sigma";
    case PlotKind::distance: return "distance";
    case PlotKind::loss: return "loss";
    case PlotKind::total_rank: return "total_rank";
    case PlotKind::ranks: return "ranks";
    case PlotKind::prune: return "prune";
    case PlotKind::sweep: return "sweep";
  }
  return "?";
}

PlotKind parse_plot_kind(const std::string& s) {
  for (PlotKind k : {PlotKind::sigma, PlotKind::distance, PlotKind::loss, PlotKind::total_rank,
                     PlotKind::ranks, PlotKind::prune, PlotKind::sweep}) {
    if (to_string(k) == s) return k;
  }
  throw ContractError("unknown plot kind '" + s +
                      "' (sigma, distance, loss, total_rank, ranks, prune, sweep)");
}

namespace {

struct Columns {
  std::string x;
  std::vector<std::string> ys;
};

Columns columns_for(const CsvTable& t, PlotKind kind) {
  switch (kind) {
    case PlotKind::sigma:
    case PlotKind::distance: {
      const std::string prefix = kind == PlotKind::sigma ? "s" : "k";
      auto ys = t.numbered(prefix);
      if (ys.empty()) t.column(prefix + "1");  // throws naming the column
      return {"iteration", ys};
    }
    case PlotKind::loss:
      if (!t.has("epoch") && t.has("iteration")) return {"iteration", {"loss"}};
      return {"epoch", {"task_loss"}};
    case PlotKind::total_rank: return {"epoch", {"total_rank"}};
    case PlotKind::ranks: return {"layer", {"rank"}};
    case PlotKind::prune: return {"macs", {"test_acc"}};
    case PlotKind::sweep: return {"params", {"final_acc"}};
  }
  return {};
}

const char* title_of(PlotKind k) {
  switch (k) {
    case PlotKind::sigma: return "importance per rank";
    case PlotKind::distance: return "distance to truncated SVD";
    case PlotKind::loss: return "training loss";
    case PlotKind::total_rank: return "total rank";
    case PlotKind::ranks: return "final rank per layer";
    case PlotKind::prune: return "accuracy vs served MACs";
    case PlotKind::sweep: return "accuracy vs served parameters";
  }
  return "";
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Range padded so a flat series still spans some height.
std::pair<double, double> padded(double lo, double hi) {
  if (!(lo <= hi)) return {0.0, 1.0};
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    const double d = std::max(0.5, std::abs(hi) * 0.05);
    return {lo - d, hi + d};
  }
  return {lo, hi};
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

Figure figure_from_tables(const std::vector<std::pair<std::string, CsvTable>>& tables,
                          PlotKind kind) {
  Figure fig;
  fig.title = title_of(kind);
  for (const auto& [name, table] : tables) {
    const Columns cols = columns_for(table, kind);
    table.column(cols.x);
    for (const auto& y : cols.ys) table.column(y);
    fig.x_label = cols.x;
    fig.y_label = cols.ys.size() == 1 ? cols.ys[0] : "";
    for (const auto& y : cols.ys) {
      Series s;
      s.name = tables.size() > 1 ? name + (cols.ys.size() > 1 ? ":" + y : "") : y;
      for (std::size_t r = 0; r < table.rows.size(); ++r)
        s.points.emplace_back(table.number(r, cols.x), table.number(r, y));
      fig.series.push_back(std::move(s));
    }
  }
  if (fig.x_label.empty()) fig.x_label = "x";
  return fig;
}

std::string render_svg(const Figure& fig) {
  constexpr double W = 720, H = 440, left = 70, right = 170, top = 40, bottom = 55;
  const double pw = W - left - right, ph = H - top - bottom;

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : fig.series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  std::tie(x0, x1) = padded(x0, x1);
  std::tie(y0, y1) = padded(y0, y1);
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
     << escape(fig.title) << "</text>\n";

  // Axes with five ticks each.
  os << "<g class=\"axes\" stroke=\"black\">\n"
     << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
     << top + ph << "\"/>\n"
     << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
     << "\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    os << "<line x1=\"" << fixed(px(fx)) << "\" y1=\"" << top + ph << "\" x2=\"" << fixed(px(fx))
       << "\" y2=\"" << top + ph + 5 << "\"/>\n"
       << "<line x1=\"" << left - 5 << "\" y1=\"" << fixed(py(fy)) << "\" x2=\"" << left
       << "\" y2=\"" << fixed(py(fy)) << "\"/>\n";
  }
  os << "</g>\n<g class=\"tick-labels\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    os << "<text x=\"" << fixed(px(fx)) << "\" y=\"" << top + ph + 18
       << "\" text-anchor=\"middle\">" << tick_label(fx) << "</text>\n"
       << "<text x=\"" << left - 8 << "\" y=\"" << fixed(py(fy) + 4)
       << "\" text-anchor=\"end\">" << tick_label(fy) << "</text>\n";
  }
  os << "</g>\n"
     << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
     << escape(fig.x_label) << "</text>\n"
     << "<text transform=\"translate(16 " << top + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">" << escape(fig.y_label) << "</text>\n";

  os << "<g class=\"series\" fill=\"none\" stroke-width=\"1.5\">\n";
  for (std::size_t i = 0; i < fig.series.size(); ++i) {
    std::string pts;
    for (const auto& [x, y] : fig.series[i].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!pts.empty()) pts += ' ';
      pts += fixed(px(x)) + "," + fixed(py(y));
    }
    if (pts.empty()) continue;
    os << "<polyline data-series=\"" << escape(fig.series[i].name) << "\" stroke=\""
       << kPalette[i % std::size(kPalette)] << "\" points=\"" << pts << "\"/>\n";
  }
  os << "</g>\n<g class=\"legend\">\n";
  for (std::size_t i = 0; i < fig.series.size(); ++i) {
    const double y = top + 10 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << y << "\" x2=\"" << left + pw + 35
       << "\" y2=\"" << y << "\" stroke=\"" << kPalette[i % std::size(kPalette)]
       << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << left + pw + 40 << "\" y=\"" << y + 4 << "\">"
       << escape(fig.series[i].name) << "</text>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

std::string emit_svg_plot(const std::vector<std::string>& csv_paths, PlotKind kind) {
  namespace fs = std::filesystem;
  std::set<std::string> stems;
  for (const auto& p : csv_paths) stems.insert(fs::path(p).stem().string());
  const bool use_parent = stems.size() < csv_paths.size();
  std::vector<std::pair<std::string, CsvTable>> tables;
  for (const auto& p : csv_paths) {
    const fs::path path(p);
    std::string name =
        use_parent ? fs::absolute(path).parent_path().filename().string() : path.stem().string();
    tables.emplace_back(std::move(name), read_csv(p));
  }
  return render_svg(figure_from_tables(tables, kind));
}

}  // namespace lodrank
