#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "homoflow/error.hpp"
#include "homoflow/harness.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Gradient-flow laboratory for positively homogeneous predictors"};
  app.require_subcommand(1);

  std::uint64_t seed = 42;
  std::size_t n_raw = 200;
  double margin_floor = 0.2;
  std::string generator = "synthetic";
  std::string out_path;
  auto* gen = app.add_subcommand("gen-data", "Generate a labeled planar dataset");
  gen->add_option("--seed", seed, "Generator seed")->required();
  gen->add_option("--n", n_raw, "Points sampled before thinning")->required();
  gen->add_option("--margin-floor", margin_floor, "Relative score floor")->required();
  gen->add_option("--out", out_path, "Output JSON path")->required();
  gen->add_option("--generator", generator, "synthetic | planar | linear")
      ->check(CLI::IsMember({"synthetic", "planar", "linear"}));

  std::string config_path;
  auto* run = app.add_subcommand("run", "Train and write trajectory.csv and margins.csv");
  run->add_option("--config", config_path, "Experiment config")->required();

  std::size_t resolution = 101;
  auto* grid = app.add_subcommand("grid", "Train and write grid.csv");
  grid->add_option("--config", config_path, "Experiment config")->required();
  grid->add_option("--resolution", resolution, "Points per axis")->required();

  std::string which;
  auto* verify = app.add_subcommand("verify", "Train and check against the oracles");
  verify->add_option("which", which, "deep-linear | two-homo")
      ->required()
      ->check(CLI::IsMember({"deep-linear", "two-homo"}));
  verify->add_option("--config", config_path, "Experiment config")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      homoflow::Dataset data;
      if (generator == "planar") {
        data = homoflow::gen_planar(seed, n_raw, margin_floor);
      } else if (generator == "linear") {
        data = homoflow::gen_linear(seed, n_raw, margin_floor);
      } else {
        data = homoflow::gen_synthetic(seed, n_raw, margin_floor);
      }
      homoflow::save_dataset(data, out_path);
      std::cout << "wrote " << data.size() << " examples to " << out_path << "\n";
      return 0;
    }
    const fs::path base = fs::path(config_path).parent_path();
    const homoflow::ExperimentConfig config = homoflow::load_config(config_path);
    if (run->parsed()) {
      const homoflow::Trajectory traj = homoflow::cmd_run(config, base);
      std::cout << "wrote " << traj.records.size() << " checkpoints to "
                << homoflow::output_dir(config, base).string() << "\n";
      return 0;
    }
    if (grid->parsed()) {
      homoflow::cmd_grid(config, resolution, base);
      std::cout << "wrote grid.csv to " << homoflow::output_dir(config, base).string() << "\n";
      return 0;
    }
    const auto kind = which == "deep-linear" ? homoflow::VerifyKind::DeepLinear
                                             : homoflow::VerifyKind::TwoHomo;
    const homoflow::VerifyReport report = homoflow::cmd_verify(config, kind, base);
    for (const auto& c : report.checks) {
      std::cout << (c.tolerance ? (c.pass ? "pass " : "FAIL ") : "info ") << c.name << " "
                << homoflow::format_real(c.value) << "\n";
    }
    return report.all_pass() ? 0 : 1;
  } catch (const homoflow::Error& e) {
    std::cerr << "homoflow: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "homoflow: " << e.what() << "\n";
    return 2;
  }
}
