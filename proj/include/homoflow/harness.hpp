#pragma once

// Experiment plumbing: planar data generators, JSON configs and datasets,
// deterministic CSV/JSON emission, and the command implementations behind the
// homoflow executable.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "homoflow/dataset.hpp"
#include "homoflow/flow.hpp"
#include "homoflow/losses.hpp"
#include "homoflow/models.hpp"
#include "homoflow/verify.hpp"

namespace homoflow {

/// Uniform points in [-1,1]^2 labeled by a seeded 16-unit ReLU scorer with
/// biases, thinned to |score| >= margin_floor * max|score|, embedded as
/// (x, y, 1) and rescaled into the unit ball.
Dataset gen_synthetic(std::uint64_t seed, std::size_t n_raw, double margin_floor);

/// Points on the annulus 0.5 <= |x| <= 1 in R^2 (no bias coordinate) labeled
/// by the same kind of scorer evaluated at x / |x|.
Dataset gen_planar(std::uint64_t seed, std::size_t n_raw, double margin_floor);

/// Uniform points in [-1,1]^dim labeled by a random hyperplane through 0.
Dataset gen_linear(std::uint64_t seed, std::size_t n_raw, double margin_floor,
                   std::size_t dim = 2);

struct ModelConfig {
  ModelKind kind = ModelKind::SquaredRelu;
  std::size_t width = 256;            // SquaredRelu, NtkFrozen
  std::vector<std::size_t> hidden;    // DeepLinear, ReluMlp
  std::size_t pool_window = 1;        // ReluMlp
  double init_scale = 0.05;
  bool operator==(const ModelConfig&) const = default;
};

struct DataConfig {
  std::string source = "generated";     // generated | file
  std::string generator = "synthetic";  // synthetic | planar | linear
  std::uint64_t seed = 42;
  std::size_t n_raw = 200;
  double margin_floor = 0.2;
  std::size_t dim = 2;                  // linear generator only
  std::string path;                     // file source, relative to the config
  bool operator==(const DataConfig&) const = default;
};

struct VerifyConfig {
  bool negative_control = false;  // verify the untrained initialization
  DeepLinearTolerances deep;
  TwoHomoTolerances two;
};

struct GridBounds {
  double x_min = -1.0;
  double x_max = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;
  bool operator==(const GridBounds&) const = default;
};

struct ExperimentConfig {
  ModelConfig model;
  LossKind loss = LossKind::Exp;
  FlowConfig flow;
  DataConfig data;
  VerifyConfig verify;
  GridBounds grid;
  std::string output_dir = "out";
  std::uint64_t seed = 0;  // initialization and frozen NTK weights
};

nlohmann::json config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown enum strings throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
bool same_config(const ExperimentConfig& a, const ExperimentConfig& b);

nlohmann::json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const nlohmann::json& j);

/// Reads or writes a file; writes go through a temporary file and a rename.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

ExperimentConfig load_config(const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

/// %.17g.
std::string format_real(double v);

std::string trajectory_csv(const Trajectory& trajectory);
/// Rows per checkpoint, examples ordered by their final normalized margin.
std::string margins_csv(const Trajectory& trajectory);

/// Model, data and untrained parameters described by a config. base_dir
/// resolves a relative dataset path.
struct Experiment {
  PredictorSpec spec;
  Dataset data;
  ParamVec w_init;
};
Experiment prepare(const ExperimentConfig& config, const std::filesystem::path& base_dir = {});

/// Warmup then flow.
Trajectory train(const ExperimentConfig& config, const Experiment& experiment);

/// Applies HOMOFLOW_PRECISION from the environment.
ExperimentConfig with_environment(ExperimentConfig config);

std::filesystem::path output_dir(const ExperimentConfig& config,
                                 const std::filesystem::path& base_dir);

/// Writes trajectory.csv and margins.csv.
Trajectory cmd_run(const ExperimentConfig& config, const std::filesystem::path& base_dir = {});

/// Writes grid.csv with R x R rows of Phi(point; W) / |W|^L.
void cmd_grid(const ExperimentConfig& config, std::size_t resolution,
              const std::filesystem::path& base_dir = {});

enum class VerifyKind { DeepLinear, TwoHomo };

/// Writes verify.json and returns the report.
VerifyReport cmd_verify(const ExperimentConfig& config, VerifyKind which,
                        const std::filesystem::path& base_dir = {});

std::string report_json(const VerifyReport& report);

}  // namespace homoflow
