// Copyright (c) 2026, The lodrank Authors
// SPDX-License-Identifier: Apache-2.0

// Line charts of run CSVs as standalone SVG.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lodrank/experiment.hpp"

namespace lodrank {

/// Which columns a plot reads:
///   sigma       sigma.csv     iteration vs s1..sN
///   distance    distance.csv  iteration vs k1..kN
///   loss        history.csv   epoch vs task_loss (loss.csv: iteration vs loss)
///   total_rank  history.csv   epoch vs total_rank
///   ranks       ranks.csv     layer vs rank
///   prune       trace.csv     macs vs test_acc
///   sweep       sweep.csv     params vs final_acc
enum class PlotKind { sigma, distance, loss, total_rank, ranks, prune, sweep };

std::string to_string(PlotKind k);
PlotKind parse_plot_kind(const std::string& s);

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  ///< non-finite points are skipped when drawn
};

struct Figure {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Builds the series for `kind` from one or more named tables. With several
/// tables, series names are prefixed by the table name. Throws FormatError
/// naming the first missing column.
Figure figure_from_tables(const std::vector<std::pair<std::string, CsvTable>>& tables,
                          PlotKind kind);

/// One <polyline> per series with at least one finite point.
std::string render_svg(const Figure& figure);

/// Reads the CSV files and renders them; table names are the file stems, or
/// the parent directory names when the stems collide.
std::string emit_svg_plot(const std::vector<std::string>& csv_paths, PlotKind kind);

}  // namespace lodrank
