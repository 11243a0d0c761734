#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "steel/steel.hpp"

using namespace steel;
namespace fs = std::filesystem;

namespace {

const VggWeights& shared_weights() {
  static const VggWeights w = fixtures::synthetic_weights(9);
  return w;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

GridSpec tiny_grid(const std::string& name) {
  const auto dir = fixtures::scratch_dir(name);
  GridSpec g;
  g.base.content_path = fixtures::write_image(dir / "content.png", fixtures::corporate_logo(32));
  g.base.style_path = fixtures::write_image(dir / "style.png", fixtures::metal_logo(32));
  g.base.output_dir = dir / "sweep";
  g.base.image_size = 32;
  g.base.iterations = 3;
  g.base.log_every = 2;
  g.base.snapshot_every = 100;
  g.base.style.style_weight = 1e-3;
  g.family = GridFamily::TwoLayers;
  g.deep_block = 3;
  g.coarse_values = {0, 200};
  g.deep_values = {20, 2000};
  return g;
}

std::map<LayerId, double> active_map(const RunConfig& c) {
  std::map<LayerId, double> out;
  for (const LayerId id : c.style.active_layers()) out[id] = c.style.coefficient(id);
  return out;
}

}  // namespace

TEST(Expand, TwoLayersDefaultsRowMajor) {
  GridSpec g;
  g.family = GridFamily::TwoLayers;
  g.deep_block = 5;
  const auto cells = expand(g);
  ASSERT_EQ(cells.size(), 12u);
  std::size_t k = 0;
  for (double coarse : {0.0, 20.0, 200.0, 2000.0})
    for (double deep : {20.0, 200.0, 2000.0}) {
      EXPECT_EQ(cells[k].coarse, coarse);
      EXPECT_EQ(cells[k].deep, deep);
      EXPECT_EQ(cells[k].config.style.coefficient(LayerId(1, 2)), coarse);
      EXPECT_EQ(cells[k].config.style.coefficient(LayerId(5, 3)), deep);
      ++k;
    }
  EXPECT_EQ(cells[0].id, "coarse-0_deep-20");
  EXPECT_EQ(active_map(cells[0].config), (std::map<LayerId, double>{{LayerId(5, 3), 20.0}}));
}

TEST(Expand, FamilyActiveSets) {
  GridSpec g;
  g.coarse_values = {2000};
  g.deep_values = {200};
  g.deep_block = 4;

  g.family = GridFamily::ThreeLayers;
  EXPECT_EQ(active_map(expand(g).at(0).config),
            (std::map<LayerId, double>{{LayerId(1, 2), 2000}, {LayerId(4, 2), 200}, {LayerId(4, 3), 200}}));

  g.family = GridFamily::TwoBlocks;
  const auto best = expand(g);
  ASSERT_EQ(best.size(), 1u);
  EXPECT_EQ(active_map(best[0].config), (std::map<LayerId, double>{{LayerId(1, 1), 2000},
                                                                   {LayerId(1, 2), 2000},
                                                                   {LayerId(4, 1), 200},
                                                                   {LayerId(4, 2), 200},
                                                                   {LayerId(4, 3), 200}}));
  EXPECT_EQ(active_map(best[0].config), active_map(RunConfig{.style = style_preset("coarse-block4")}));
}

TEST(Expand, CountIsProductForAllGridFamilies) {
  for (auto f : {GridFamily::TwoLayers, GridFamily::ThreeLayers, GridFamily::TwoBlocks}) {
    for (int block : {3, 4, 5}) {
      GridSpec g;
      g.family = f;
      g.deep_block = block;
      g.coarse_values = {0, 1, 2};
      g.deep_values = {5, 6};
      EXPECT_EQ(expand(g).size(), 6u);
      g.deep_values.clear();
      EXPECT_TRUE(expand(g).empty());
    }
  }
}

TEST(Expand, BaseCoefficientsDoNotLeak) {
  GridSpec g;
  g.base.style.coefficients = {{LayerId(2, 1), 5.0}};
  g.coarse_values = {1};
  g.deep_values = {2};
  EXPECT_EQ(expand(g).at(0).config.style.coefficient(LayerId(2, 1)), 0.0);
}

TEST(Expand, BaselineFamilyEmitsThreeVariants) {
  GridSpec g;
  g.family = GridFamily::Baseline;
  const auto cells = expand(g);
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_EQ(cells[0].id, "baseline-0.2");
  EXPECT_EQ(cells[2].config.style.coefficient(LayerId(5, 3)), 0.002);
  EXPECT_EQ(cells[1].config.style.active_layers().size(), 5u);
}

TEST(Expand, RejectsBadGrid) {
  GridSpec g;
  g.deep_block = 2;
  EXPECT_THROW(expand(g), ValidationError);
  EXPECT_THROW(grid_spec_from_json(nlohmann::json{{"famly", "TwoLayers"}}), ValidationError);
  EXPECT_THROW(grid_spec_from_json(nlohmann::json{{"family", "FourLayers"}}), ValidationError);
}

TEST(Sweep, FailedCellIsRecorded) {
  auto g = tiny_grid("sweep_fail");
  g.coarse_values = {200};
  g.deep_values = {20, 2000};
  auto cells = expand(g);
  cells[1].config.style_path = "/nonexistent/style.png";
  const auto report = run_cells(cells, 2, shared_weights(), g.base.output_dir);
  EXPECT_EQ(report.ok_count(), 1u);
  EXPECT_EQ(report.failed_count(), 1u);
  EXPECT_TRUE(report.cells[0].ok);
  EXPECT_FALSE(report.cells[1].ok);
  EXPECT_NE(report.cells[1].error.find("style.png"), std::string::npos);

  std::ifstream in(g.base.output_dir / "sweep_report.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("failed"), 1);
  EXPECT_FALSE(j.at("cells").at(1).at("ok").get<bool>());
  EXPECT_TRUE(j.at("cells").at(0).contains("final"));
}

TEST(Sweep, CombinedCsvAccountsForEveryRow) {
  const auto g = tiny_grid("sweep_rows");
  const auto report = run_sweep(g, 2, shared_weights());
  ASSERT_EQ(report.ok_count(), 4u);
  std::size_t rows = 0;
  for (const auto& c : report.cells) {
    rows += c.log.rows.size();
    EXPECT_EQ(count_lines(c.output_dir / "run_log.csv"), c.log.rows.size() + 1);
    EXPECT_TRUE(fs::exists(c.output_dir / "final.png"));
  }
  EXPECT_EQ(count_lines(g.base.output_dir / "losses.csv"), rows + 1);
  std::ifstream in(g.base.output_dir / "losses.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "cell_id,iteration,total,content,conv1_2:weighted,conv1_2:raw,conv3_3:weighted,conv3_3:raw");
}

TEST(Sweep, ParallelismDoesNotChangeArtifacts) {
  auto g1 = tiny_grid("sweep_j1");
  auto g4 = tiny_grid("sweep_j4");
  const auto r1 = run_sweep(g1, 1, shared_weights());
  const auto r4 = run_sweep(g4, 4, shared_weights());
  ASSERT_EQ(r1.cells.size(), r4.cells.size());
  for (std::size_t i = 0; i < r1.cells.size(); ++i) {
    ASSERT_TRUE(r1.cells[i].ok && r4.cells[i].ok);
    EXPECT_EQ(read_text(r1.cells[i].output_dir / "run_log.csv"), read_text(r4.cells[i].output_dir / "run_log.csv"));
    EXPECT_EQ(read_text(r1.cells[i].output_dir / "final.png"), read_text(r4.cells[i].output_dir / "final.png"));
  }
  EXPECT_EQ(read_text(g1.base.output_dir / "losses.csv"), read_text(g4.base.output_dir / "losses.csv"));
}

TEST(Sweep, EmptyGridIsRejected) {
  auto g = tiny_grid("sweep_empty");
  g.deep_values.clear();
  EXPECT_THROW(run_sweep(g, 1, shared_weights()), ValidationError);
}
