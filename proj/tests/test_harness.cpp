#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "homoflow/error.hpp"
#include "homoflow/harness.hpp"

using namespace homoflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() /
                       ("homoflow_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.model.width = 16;
  c.data.generator = "planar";
  c.data.n_raw = 40;
  c.flow.target_accuracy = 8.0;
  c.flow.clamp = 0.01;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("generators") {
  const Dataset a = gen_synthetic(42, 200, 0.2);
  const Dataset b = gen_synthetic(42, 200, 0.2);
  CHECK(dataset_to_json(a).dump() == dataset_to_json(b).dump());
  CHECK(a.size() < 200);
  CHECK(gen_synthetic(42, 200, 0.0).size() == 200);
  bool pos = false, neg = false;
  const double scale = std::stod(a.meta.at("scale"));
  for (const auto& ex : a.examples) {
    CHECK(ex.x.size() == 3);
    CHECK(std::sqrt(ex.x[0] * ex.x[0] + ex.x[1] * ex.x[1] + ex.x[2] * ex.x[2]) <= 1.0 + 1e-15);
    CHECK(ex.x[2] == doctest::Approx(scale).epsilon(1e-15));
    pos |= ex.y == 1;
    neg |= ex.y == -1;
  }
  CHECK(pos);
  CHECK(neg);
  CHECK(dataset_to_json(gen_synthetic(43, 200, 0.2)).dump() != dataset_to_json(a).dump());

  const Dataset p = gen_planar(1, 50, 0.1);
  for (const auto& ex : p.examples) {
    CHECK(ex.x.size() == 2);
    CHECK(std::hypot(ex.x[0], ex.x[1]) <= 1.0 + 1e-15);
  }
  CHECK(gen_linear(2, 30, 0.0, 4).dim() == 4);
  CHECK_THROWS_AS(gen_synthetic(1, 3, 0.2), DomainError);
  CHECK_THROWS_AS(gen_synthetic(1, 10, 1.0), DomainError);
}

TEST_CASE("config round trip") {
  ExperimentConfig c = small_config();
  c.model.kind = ModelKind::ReluMlp;
  c.model.hidden = {4, 4};
  c.model.pool_window = 2;
  c.loss = LossKind::Logistic;
  c.flow.base_step = 0.1 / 3.0;
  c.data.source = "file";
  c.data.path = "d.json";
  c.verify.negative_control = true;
  c.verify.two.cover_grid = 512;
  c.grid.x_min = -2.5;
  const nlohmann::json j = config_to_json(c);
  const ExperimentConfig back = config_from_json(nlohmann::json::parse(j.dump()));
  CHECK(same_config(c, back));
  CHECK(config_to_json(back).dump() == j.dump());
  CHECK(same_config(config_from_json(nlohmann::json::object()), ExperimentConfig{}));
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"loss": "hinge"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"model": {"kind": "cnn"}})")), ConfigError);
}

TEST_CASE("dataset files") {
  const fs::path dir = scratch("data");
  const Dataset a = gen_linear(5, 20, 0.1);
  save_dataset(a, dir / "d.json");
  const Dataset b = load_dataset(dir / "d.json");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.examples[i].x == b.examples[i].x);
    CHECK(a.examples[i].y == b.examples[i].y);
  }
  write_file_atomic(dir / "bad.json", R"({"examples": [{"x": [1, 2], "y": 0}]})");
  CHECK_THROWS_AS(load_dataset(dir / "bad.json"), DomainError);
  write_file_atomic(dir / "ragged.json", R"({"examples": [{"x": [1, 2], "y": 1}, {"x": [1], "y": -1}]})");
  CHECK_THROWS_AS(load_dataset(dir / "ragged.json"), ShapeMismatch);
  fs::remove_all(dir);
}

TEST_CASE("atomic writes leave no temporaries") {
  const fs::path dir = scratch("atomic");
  write_file_atomic(dir / "f.txt", "one");
  write_file_atomic(dir / "f.txt", "two");
  CHECK(read_file(dir / "f.txt") == "two");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
  fs::remove_all(dir);
}

TEST_CASE("format_real round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
    CHECK(std::stod(format_real(v)) == v);
  }
}

TEST_CASE("run, grid and verify outputs") {
  const fs::path dir = scratch("run");
  ExperimentConfig c = small_config();
  c.output_dir = (dir / "out").string();
  const Trajectory t = cmd_run(c);
  const std::string traj = read_file(dir / "out" / "trajectory.csv");
  const std::string marg = read_file(dir / "out" / "margins.csv");
  CHECK(first_line(traj) ==
        "step,tau,log_loss,norm_w,alpha,alpha_norm,beta,zeta,theta,j_potential,"
        "euler_residual,rate_alpha,rate_zeta");
  CHECK(first_line(marg) == "tau,example_index,normalized_margin,dual_weight");
  CHECK(count_lines(traj) == 1 + t.records.size());
  const std::size_t n = prepare(c).data.size();
  CHECK(count_lines(marg) == 1 + n * t.records.size());

  cmd_run(c);
  CHECK(read_file(dir / "out" / "trajectory.csv") == traj);
  CHECK(read_file(dir / "out" / "margins.csv") == marg);

  cmd_grid(c, 2);
  const std::string grid = read_file(dir / "out" / "grid.csv");
  CHECK(first_line(grid) == "x,y,normalized_prediction");
  CHECK(count_lines(grid) == 5);

  // Trained predictions carry the labels at the training points.
  c.flow.target_accuracy = 6.0;
  const Experiment e = prepare(c);
  const Trajectory tr = train(c, e);
  for (const auto& ex : e.data.examples) CHECK(ex.y * forward(e.spec, tr.final.w, ex.x) > 0.0);

  ExperimentConfig bias = small_config();
  bias.data.generator = "linear";
  bias.data.dim = 3;
  bias.output_dir = c.output_dir;
  CHECK_THROWS_AS(cmd_grid(bias, 4), UnsupportedDimension);
  fs::remove_all(dir);
}

TEST_CASE("verify commands") {
  const fs::path dir = scratch("verify");
  Dataset sym;
  sym.examples = {{{1, 0.2}, 1}, {{-1, -0.2}, -1}};
  save_dataset(sym, dir / "sym.json");
  ExperimentConfig deep;
  deep.model.kind = ModelKind::DeepLinear;
  deep.model.hidden = {3, 3};
  deep.model.init_scale = 0.01;
  deep.flow.clamp = 0.01;
  deep.data.source = "file";
  deep.data.path = "sym.json";
  deep.output_dir = "out";
  deep.seed = 4;
  const VerifyReport ok = cmd_verify(deep, VerifyKind::DeepLinear, dir);
  CHECK(ok.all_pass());
  const std::string json = read_file(dir / "out" / "verify.json");
  const auto parsed = nlohmann::json::parse(json);
  CHECK(parsed.contains("product_angle"));
  CHECK(parsed["product_angle"].contains("tolerance"));
  CHECK(parsed["product_angle"]["pass"].get<bool>());
  CHECK(cmd_verify(deep, VerifyKind::DeepLinear, dir).checks.size() == ok.checks.size());
  CHECK(read_file(dir / "out" / "verify.json") == json);

  deep.verify.negative_control = true;
  deep.model.init_scale = 1.0;
  CHECK_FALSE(cmd_verify(deep, VerifyKind::DeepLinear, dir).all_pass());

  Dataset one;
  one.examples = {{{0.8, 0.6}, 1}};
  save_dataset(one, dir / "one.json");
  ExperimentConfig two;
  two.model.width = 2;
  two.model.init_scale = 0.1;
  two.flow.clamp = 0.01;
  two.flow.target_accuracy = 30.0;
  two.data.source = "file";
  two.data.path = "one.json";
  two.output_dir = "out2";
  // The positive node must start active on the example; at seed 0 it does not.
  CHECK_THROWS_AS(cmd_verify(two, VerifyKind::TwoHomo, dir), WarmupFailed);
  two.seed = 1;
  const VerifyReport r2 = cmd_verify(two, VerifyKind::TwoHomo, dir);
  CHECK(r2.find("local_guarantee_residual")->value <= 1e-3);
  CHECK(r2.all_pass());
  fs::remove_all(dir);
}

TEST_CASE("precision from the environment") {
  ::setenv("HOMOFLOW_PRECISION", "extended", 1);
  CHECK(with_environment(ExperimentConfig{}).flow.extended_precision);
  ::setenv("HOMOFLOW_PRECISION", "quad", 1);
  CHECK_THROWS_AS(with_environment(ExperimentConfig{}), ConfigError);
  ::unsetenv("HOMOFLOW_PRECISION");
  CHECK_FALSE(with_environment(ExperimentConfig{}).flow.extended_precision);
}
