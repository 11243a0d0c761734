// steel: command-line front end for runs, sweeps and weight checks.
//
// Exit codes: 0 success, 1 validation error (bad flags, config, weights or a
// failed gradient check), 2 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "steel/steel.hpp"

namespace {

std::string default_weights() {
  const char* env = std::getenv("STEEL_WEIGHTS");
  return env ? env : "";
}

std::vector<steel::LayerId> parse_layer_list(const std::string& csv) {
  std::vector<steel::LayerId> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(steel::LayerId::parse(item));
  }
  if (out.empty()) throw steel::ValidationError("--layers is empty");
  return out;
}

void print_row(const steel::RunLogRow& row) {
  std::printf("iter %8lld  total %.6g  content %.6g", static_cast<long long>(row.iteration), row.total, row.content);
  for (const auto& l : row.style) std::printf("  %s %.6g", l.layer.str().c_str(), l.weighted);
  std::printf("\n");
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Style transfer by Gram-matrix matching on VGG16 conv features"};
  app.require_subcommand(1);

  std::string config_path, grid_path, weights_path, out_dir, layers_csv;
  std::vector<std::string> overrides;
  std::size_t jobs = 1;
  steel::GradcheckOptions gc;
  double gc_coefficient = 200.0;
  double gc_tolerance = 1e-3;

  auto* run_cmd = app.add_subcommand("run", "Optimize one image");
  run_cmd->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--set", overrides, "Override a config key: key.path=value")->take_all();
  run_cmd->add_option("--weights", weights_path, "Weight manifest (default: config, then $STEEL_WEIGHTS)");
  run_cmd->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a coefficient grid");
  sweep_cmd->add_option("--grid", grid_path, "Grid spec (JSON)")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--set", overrides, "Override a grid key: key.path=value")->take_all();
  sweep_cmd->add_option("--weights", weights_path, "Weight manifest (default: grid base, then $STEEL_WEIGHTS)");
  sweep_cmd->add_option("--out", out_dir, "Sweep root directory (overrides base.output_dir)");

  auto* validate_cmd = app.add_subcommand("validate-weights", "Load and check a weight file");
  validate_cmd->add_option("--weights", weights_path, "Weight manifest");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare input gradients with finite differences");
  grad_cmd->add_option("--weights", weights_path, "Weight manifest");
  grad_cmd->add_option("--layers", layers_csv, "Active style layers, e.g. conv1_2,conv3_3")->required();
  grad_cmd->add_option("--coefficient", gc_coefficient, "Coefficient for every listed layer");
  grad_cmd->add_option("--size", gc.image_size, "Random image size");
  grad_cmd->add_option("--samples", gc.samples, "Number of sampled pixels");
  grad_cmd->add_option("--step", gc.step, "Finite-difference step (pixel units)");
  grad_cmd->add_option("--seed", gc.seed, "RNG seed");
  grad_cmd->add_option("--tolerance", gc_tolerance, "Maximum accepted relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto resolve_weights = [&](const std::string& from_config) -> std::string {
    if (!weights_path.empty()) return weights_path;
    if (!from_config.empty()) return from_config;
    const auto env = default_weights();
    if (env.empty()) throw steel::ValidationError("no weights given (--weights, config, or STEEL_WEIGHTS)");
    return env;
  };

  try {
    if (*run_cmd) {
      auto doc = steel::read_json_file(config_path);
      for (const auto& o : overrides) steel::apply_override(doc, o);
      auto cfg = steel::run_config_from_json(doc);
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      cfg.weights_path = resolve_weights(cfg.weights_path.string());
      const auto weights = steel::load_weights(cfg.weights_path);
      auto result = steel::run(cfg, weights, {print_row});
      std::printf("wrote %s\n", (cfg.output_dir / "final.png").string().c_str());
      return 0;
    }

    if (*sweep_cmd) {
      auto doc = steel::read_json_file(grid_path);
      for (const auto& o : overrides) steel::apply_override(doc, o);
      auto grid = steel::grid_spec_from_json(doc);
      if (!out_dir.empty()) grid.base.output_dir = out_dir;
      grid.base.weights_path = resolve_weights(grid.base.weights_path.string());
      const auto weights = steel::load_weights(grid.base.weights_path);
      const auto report = steel::run_sweep(grid, jobs, weights);
      for (const auto& c : report.cells) {
        std::printf("%-28s %s%s\n", c.id.c_str(), c.ok ? "ok" : "FAILED ", c.ok ? "" : c.error.c_str());
      }
      std::printf("%zu ok, %zu failed; report in %s\n", report.ok_count(), report.failed_count(),
                  (grid.base.output_dir / "sweep_report.json").string().c_str());
      return 0;
    }

    if (*validate_cmd) {
      const auto path = resolve_weights("");
      const auto w = steel::load_weights(path);
      std::printf("weights   %s\nchecksum  %s\n", path.c_str(), w.source_checksum().c_str());
      const auto& pre = w.preprocessing();
      std::printf("channels  %s, mean [%g, %g, %g]\n", steel::to_string(pre.channel_order).c_str(), pre.mean[0],
                  pre.mean[1], pre.mean[2]);
      for (const auto id : steel::LayerId::all()) {
        const auto& l = w.layer(id);
        std::printf("%-8s kernel %-14s bias %zu\n", id.str().c_str(), l.kernel.shape().str().c_str(), l.bias.size());
      }
      std::printf("13 layers OK\n");
      return 0;
    }

    if (*grad_cmd) {
      const auto w = steel::load_weights(resolve_weights(""));
      steel::StyleConfig cfg;
      for (const auto id : parse_layer_list(layers_csv)) cfg.coefficients[id] = gc_coefficient;
      const auto report = steel::gradcheck_total_loss(w, cfg, gc);
      for (const auto& s : report.samples) {
        std::printf("pixel %6zu  analytic % .8e  numeric % .8e  rel %.3e\n", s.index, s.analytic, s.numeric,
                    s.rel_error);
      }
      std::printf("max relative error %.6e (tolerance %g)\n", report.max_rel_error, gc_tolerance);
      return report.max_rel_error < gc_tolerance ? 0 : 1;
    }
  } catch (const steel::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure: %s\n", e.what());
    return 2;
  }
  return 1;
}
