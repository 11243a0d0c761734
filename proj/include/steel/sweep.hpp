#pragma once
/*
 * Coefficient grids over layer groups. A grid is a table: rows are the
 * coarse (first-block) coefficient, columns the deep-block coefficient.
 * Cells are independent runs executed by a bounded worker pool.
 */

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "steel/config.hpp"
#include "steel/error.hpp"
#include "steel/layer_id.hpp"
#include "steel/runner.hpp"
#include "steel/weights_io.hpp"

namespace steel {

enum class GridFamily { TwoLayers, ThreeLayers, TwoBlocks, Baseline };

inline std::string to_string(GridFamily f) {
  switch (f) {
    case GridFamily::TwoLayers: return "TwoLayers";
    case GridFamily::ThreeLayers: return "ThreeLayers";
    case GridFamily::TwoBlocks: return "TwoBlocks";
    case GridFamily::Baseline: return "Baseline";
  }
  return "?";
}

inline GridFamily parse_grid_family(const std::string& s) {
  for (auto f : {GridFamily::TwoLayers, GridFamily::ThreeLayers, GridFamily::TwoBlocks, GridFamily::Baseline})
    if (to_string(f) == s) return f;
  throw ValidationError("unknown grid family '" + s + "' (TwoLayers, ThreeLayers, TwoBlocks, Baseline)");
}

struct GridSpec {
  RunConfig base;
  GridFamily family = GridFamily::TwoLayers;
  int deep_block = 5;
  std::vector<double> coarse_values{0, 20, 200, 2000};
  std::vector<double> deep_values{20, 200, 2000};

  void validate() const {
    if (family != GridFamily::Baseline && (deep_block < 3 || deep_block > 5)) {
      throw ValidationError("deep_block must be 3, 4 or 5");
    }
    for (double v : coarse_values)
      if (!(v >= 0.0)) throw ValidationError("coarse_values must be non-negative");
    for (double v : deep_values)
      if (!(v >= 0.0)) throw ValidationError("deep_values must be non-negative");
  }
};

inline std::vector<LayerId> coarse_layers(GridFamily f) {
  if (f == GridFamily::TwoBlocks) return {LayerId(1, 1), LayerId(1, 2)};
  return {LayerId(1, 2)};
}

inline std::vector<LayerId> deep_layers(GridFamily f, int block) {
  auto all = LayerId::block_layers(block);
  switch (f) {
    case GridFamily::TwoLayers: return {all.back()};
    case GridFamily::ThreeLayers: return std::vector<LayerId>(all.end() - 2, all.end());
    default: return all;
  }
}

struct SweepCell {
  std::string id;
  double coarse = 0.0;
  double deep = 0.0;
  RunConfig config;
};

inline std::vector<SweepCell> expand(const GridSpec& grid) {
  grid.validate();
  std::vector<SweepCell> cells;
  if (grid.family == GridFamily::Baseline) {
    for (const char* name : {"baseline", "baseline-0.02", "baseline-0.002"}) {
      SweepCell cell;
      cell.config = grid.base;
      cell.config.style = style_preset(name);
      cell.config.style.content_layer = grid.base.style.content_layer;
      cell.config.style.content_weight = grid.base.style.content_weight;
      cell.coarse = cell.deep = cell.config.style.coefficients.begin()->second;
      cell.id = "baseline-" + format_number(cell.coarse);
      cell.config.output_dir = grid.base.output_dir / cell.id;
      cells.push_back(std::move(cell));
    }
    return cells;
  }
  for (double coarse : grid.coarse_values) {
    for (double deep : grid.deep_values) {
      SweepCell cell;
      cell.coarse = coarse;
      cell.deep = deep;
      cell.id = "coarse-" + format_number(coarse) + "_deep-" + format_number(deep);
      cell.config = grid.base;
      cell.config.style.coefficients.clear();
      for (const LayerId id : coarse_layers(grid.family)) cell.config.style.coefficients[id] = coarse;
      for (const LayerId id : deep_layers(grid.family, grid.deep_block)) cell.config.style.coefficients[id] = deep;
      cell.config.output_dir = grid.base.output_dir / cell.id;
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

inline GridSpec grid_spec_from_json(const nlohmann::json& j) {
  GridSpec g;
  try {
    detail::for_each_key(j, "", [&](const std::string& key, const nlohmann::json& v) {
      if (key == "base") g.base = run_config_from_json(v);
      else if (key == "family") g.family = parse_grid_family(v.get<std::string>());
      else if (key == "deep_block") g.deep_block = v.get<int>();
      else if (key == "coarse_values") g.coarse_values = v.get<std::vector<double>>();
      else if (key == "deep_values") g.deep_values = v.get<std::vector<double>>();
      else return false;
      return true;
    });
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed grid: ") + e.what());
  }
  g.validate();
  return g;
}

struct CellOutcome {
  std::string id;
  double coarse = 0.0;
  double deep = 0.0;
  std::filesystem::path output_dir;
  bool ok = false;
  std::string error;
  RunLog log;
  double wall_seconds = 0.0;
};

struct SweepReport {
  std::vector<CellOutcome> cells;  // same order as the input cells

  std::size_t ok_count() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.ok; }));
  }
  std::size_t failed_count() const { return cells.size() - ok_count(); }
};

namespace detail {

inline void write_combined_losses(const std::filesystem::path& path, const SweepReport& report) {
  std::set<LayerId> layer_set;
  for (const auto& c : report.cells) layer_set.insert(c.log.layers.begin(), c.log.layers.end());

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "cell_id,iteration,total,content";
  for (const LayerId id : layer_set) out << ',' << id.str() << ":weighted," << id.str() << ":raw";
  out << '\n';
  for (const auto& c : report.cells) {
    for (const auto& row : c.log.rows) {
      out << c.id << ',' << row.iteration << ',' << format_number(row.total) << ',' << format_number(row.content);
      for (const LayerId id : layer_set) {
        auto it = std::find_if(row.style.begin(), row.style.end(), [&](const LayerLoss& l) { return l.layer == id; });
        if (it == row.style.end()) out << ",,";
        else out << ',' << format_number(it->weighted) << ',' << format_number(it->raw);
      }
      out << '\n';
    }
  }
}

inline nlohmann::json report_to_json(const SweepReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json j{{"id", c.id},
                     {"coarse", c.coarse},
                     {"deep", c.deep},
                     {"output_dir", c.output_dir.string()},
                     {"ok", c.ok},
                     {"wall_seconds", c.wall_seconds},
                     {"log_rows", c.log.rows.size()}};
    if (!c.ok) j["error"] = c.error;
    if (c.ok && !c.log.rows.empty()) {
      const auto& last = c.log.rows.back();
      nlohmann::json style = nlohmann::json::object();
      for (const auto& l : last.style) style[l.layer.str()] = {{"weighted", l.weighted}, {"raw", l.raw}};
      j["final"] = {{"iteration", last.iteration}, {"total", last.total}, {"content", last.content}, {"style", style}};
    }
    cells.push_back(std::move(j));
  }
  return {{"cells", cells}, {"ok", report.ok_count()}, {"failed", report.failed_count()}};
}

}  // namespace detail

// Runs every cell with at most `jobs` concurrent runs. A failing cell is
// recorded in the report and does not stop the others.
inline SweepReport run_cells(const std::vector<SweepCell>& cells, std::size_t jobs, const VggWeights& weights,
                             const std::filesystem::path& root) {
  SweepReport report;
  report.cells.resize(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex collector;

  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& cell = cells[i];
      CellOutcome out{cell.id, cell.coarse, cell.deep, cell.config.output_dir, false, {}, {}, 0.0};
      const auto started = std::chrono::steady_clock::now();
      try {
        out.log = run(cell.config, weights).log;
        out.ok = true;
      } catch (const std::exception& e) {
        out.error = e.what();
      }
      out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      std::lock_guard lock(collector);
      report.cells[i] = std::move(out);
    }
  };

  const std::size_t n = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, cells.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
  }

  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw IoError("cannot create sweep directory " + root.string() + ": " + ec.message());
  detail::write_combined_losses(root / "losses.csv", report);
  detail::write_json(root / "sweep_report.json", detail::report_to_json(report));
  return report;
}

inline SweepReport run_sweep(const GridSpec& grid, std::size_t jobs, const VggWeights& weights) {
  const auto cells = expand(grid);
  if (cells.empty()) throw ValidationError("grid expands to no runs");
  return run_cells(cells, jobs, weights, grid.base.output_dir);
}

}  // namespace steel
