#include "homoflow/harness.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "homoflow/error.hpp"
#include "homoflow/metrics.hpp"

namespace homoflow {
namespace {

constexpr int kMaxAttempts = 100;
constexpr std::size_t kScorerUnits = 16;

struct Scorer {
  std::array<double, kScorerUnits> ux{}, uy{}, bias{}, out{};
  double offset = 0.0;

  double operator()(double x, double y) const {
    double s = offset;
    for (std::size_t k = 0; k < kScorerUnits; ++k) {
      s += out[k] * std::max(0.0, ux[k] * x + uy[k] * y + bias[k]);
    }
    return s;
  }
};

Scorer draw_scorer(std::mt19937_64& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> shift(0.0, 0.5);
  Scorer s;
  for (std::size_t k = 0; k < kScorerUnits; ++k) {
    s.ux[k] = unit(rng);
    s.uy[k] = unit(rng);
    s.bias[k] = shift(rng);
    s.out[k] = unit(rng);
  }
  return s;
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

void check_generator_args(std::size_t n_raw, double margin_floor) {
  if (n_raw < 4) throw DomainError("n_raw must be at least 4");
  if (!(margin_floor >= 0.0 && margin_floor < 1.0)) {
    throw DomainError("margin_floor must lie in [0, 1)");
  }
}

// Keeps points with |score| >= floor * max|score|, labels by sign, and
// reports whether both classes survived.
bool thin_and_label(const std::vector<double>& scores, double margin_floor,
                    std::vector<std::size_t>& kept, std::vector<int>& labels) {
  double top = 0.0;
  for (double s : scores) top = std::max(top, std::abs(s));
  kept.clear();
  labels.clear();
  bool pos = false;
  bool neg = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::abs(scores[i]) < margin_floor * top) continue;
    const int y = scores[i] >= 0.0 ? 1 : -1;
    kept.push_back(i);
    labels.push_back(y);
    (y > 0 ? pos : neg) = true;
  }
  return pos && neg;
}

void rescale_into_ball(Dataset& data) {
  double top = 0.0;
  for (const Example& ex : data.examples) top = std::max(top, norm(ex.x));
  if (top == 0.0) throw DegenerateData("all generated points are at the origin");
  for (Example& ex : data.examples) {
    for (double& v : ex.x) v /= top;
  }
  data.meta["scale"] = format_real(1.0 / top);
}

void base_meta(Dataset& data, const char* generator, std::uint64_t seed, std::size_t n_raw,
               double margin_floor, int attempts) {
  data.meta["generator"] = generator;
  data.meta["seed"] = std::to_string(seed);
  data.meta["n_raw"] = std::to_string(n_raw);
  data.meta["margin_floor"] = format_real(margin_floor);
  data.meta["attempts"] = std::to_string(attempts);
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Dataset gen_synthetic(std::uint64_t seed, std::size_t n_raw, double margin_floor) {
  check_generator_args(n_raw, margin_floor);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  std::vector<std::size_t> kept;
  std::vector<int> labels;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    Scorer scorer = draw_scorer(rng);
    std::vector<std::array<double, 2>> pts(n_raw);
    std::vector<double> scores(n_raw);
    for (std::size_t i = 0; i < n_raw; ++i) {
      pts[i] = {box(rng), box(rng)};
      scores[i] = scorer(pts[i][0], pts[i][1]);
    }
    const double centre = median(scores);
    for (double& s : scores) s -= centre;
    if (!thin_and_label(scores, margin_floor, kept, labels)) continue;

    Dataset data;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const auto& p = pts[kept[k]];
      data.examples.push_back({{p[0], p[1], 1.0}, labels[k]});
    }
    base_meta(data, "synthetic", seed, n_raw, margin_floor, attempt);
    data.meta["embedding"] = "bias";
    rescale_into_ball(data);
    return data;
  }
  throw DegenerateData("one class empty after " + std::to_string(kMaxAttempts) + " attempts");
}

Dataset gen_planar(std::uint64_t seed, std::size_t n_raw, double margin_floor) {
  check_generator_args(n_raw, margin_floor);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::acos(-1.0));
  std::uniform_real_distribution<double> radius(0.5, 1.0);
  std::vector<std::size_t> kept;
  std::vector<int> labels;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    Scorer scorer = draw_scorer(rng);
    std::vector<std::array<double, 2>> pts(n_raw);
    std::vector<double> scores(n_raw);
    for (std::size_t i = 0; i < n_raw; ++i) {
      const double a = angle(rng);
      const double r = radius(rng);
      pts[i] = {r * std::cos(a), r * std::sin(a)};
      scores[i] = scorer(std::cos(a), std::sin(a));
    }
    const double centre = median(scores);
    for (double& s : scores) s -= centre;
    if (!thin_and_label(scores, margin_floor, kept, labels)) continue;

    Dataset data;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const auto& p = pts[kept[k]];
      data.examples.push_back({{p[0], p[1]}, labels[k]});
    }
    base_meta(data, "planar", seed, n_raw, margin_floor, attempt);
    data.meta["embedding"] = "plane";
    rescale_into_ball(data);
    return data;
  }
  throw DegenerateData("one class empty after " + std::to_string(kMaxAttempts) + " attempts");
}

Dataset gen_linear(std::uint64_t seed, std::size_t n_raw, double margin_floor,
                   std::size_t dim) {
  check_generator_args(n_raw, margin_floor);
  if (dim == 0) throw DomainError("dimension must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> kept;
  std::vector<int> labels;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    std::vector<double> u(dim);
    for (double& v : u) v = unit(rng);
    std::vector<std::vector<double>> pts(n_raw, std::vector<double>(dim));
    std::vector<double> scores(n_raw);
    for (std::size_t i = 0; i < n_raw; ++i) {
      for (double& v : pts[i]) v = box(rng);
      scores[i] = inner(pts[i], u);
    }
    if (!thin_and_label(scores, margin_floor, kept, labels)) continue;

    Dataset data;
    for (std::size_t k = 0; k < kept.size(); ++k) data.examples.push_back({pts[kept[k]], labels[k]});
    base_meta(data, "linear", seed, n_raw, margin_floor, attempt);
    data.meta["embedding"] = dim == 2 ? "plane" : "none";
    rescale_into_ball(data);
    return data;
  }
  throw DegenerateData("one class empty after " + std::to_string(kMaxAttempts) + " attempts");
}

namespace {

const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::SquaredRelu: return "squared_relu";
    case ModelKind::DeepLinear: return "deep_linear";
    case ModelKind::ReluMlp: return "relu_mlp";
    case ModelKind::NtkFrozen: return "ntk_frozen";
  }
  return "";
}

ModelKind kind_from(const std::string& s) {
  for (ModelKind k : {ModelKind::SquaredRelu, ModelKind::DeepLinear, ModelKind::ReluMlp,
                      ModelKind::NtkFrozen}) {
    if (s == kind_name(k)) return k;
  }
  throw ConfigError("unknown model kind '" + s + "'");
}

const char* loss_name(LossKind k) { return k == LossKind::Exp ? "exp" : "logistic"; }

LossKind loss_from(const std::string& s) {
  if (s == "exp") return LossKind::Exp;
  if (s == "logistic") return LossKind::Logistic;
  throw ConfigError("unknown loss '" + s + "'");
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

nlohmann::json config_to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["loss"] = loss_name(c.loss);
  j["model"] = {{"kind", kind_name(c.model.kind)},
                {"width", c.model.width},
                {"hidden", c.model.hidden},
                {"pool_window", c.model.pool_window},
                {"init_scale", c.model.init_scale}};
  j["flow"] = {{"base_step", c.flow.base_step},
               {"clamp", c.flow.clamp},
               {"target_accuracy", c.flow.target_accuracy},
               {"checkpoint_spacing", c.flow.checkpoint_spacing},
               {"max_steps", c.flow.max_steps},
               {"seed", c.flow.seed},
               {"warmup_step", c.flow.warmup_step},
               {"warmup_max_steps", c.flow.warmup_max_steps},
               {"extended_precision", c.flow.extended_precision}};
  j["data"] = {{"source", c.data.source},         {"generator", c.data.generator},
               {"seed", c.data.seed},             {"n_raw", c.data.n_raw},
               {"margin_floor", c.data.margin_floor}, {"dim", c.data.dim},
               {"path", c.data.path}};
  const DeepLinearTolerances& d = c.verify.deep;
  const TwoHomoTolerances& t = c.verify.two;
  j["verify"] = {
      {"negative_control", c.verify.negative_control},
      {"deep", {{"rank", d.rank}, {"angle", d.angle}, {"oracle", d.oracle}}},
      {"two",
       {{"local", t.local},
        {"share_sum", t.share_sum},
        {"support_share", t.support_share},
        {"vanish_share", t.vanish_share},
        {"support_value", t.support_value},
        {"dual_sum", t.dual_sum},
        {"dual_off_support", t.dual_off_support},
        {"off_support_band", t.off_support_band},
        {"global", t.global},
        {"game", t.game},
        {"cover_grid", t.cover_grid}}}};
  j["grid"] = {{"x_min", c.grid.x_min},
               {"x_max", c.grid.x_max},
               {"y_min", c.grid.y_min},
               {"y_max", c.grid.y_max}};
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    read(j, "seed", c.seed);
    read(j, "output_dir", c.output_dir);
    if (j.contains("loss")) c.loss = loss_from(j.at("loss").get<std::string>());
    if (j.contains("model")) {
      const auto& m = j.at("model");
      if (m.contains("kind")) c.model.kind = kind_from(m.at("kind").get<std::string>());
      read(m, "width", c.model.width);
      read(m, "hidden", c.model.hidden);
      read(m, "pool_window", c.model.pool_window);
      read(m, "init_scale", c.model.init_scale);
    }
    if (j.contains("flow")) {
      const auto& f = j.at("flow");
      read(f, "base_step", c.flow.base_step);
      read(f, "clamp", c.flow.clamp);
      read(f, "target_accuracy", c.flow.target_accuracy);
      read(f, "checkpoint_spacing", c.flow.checkpoint_spacing);
      read(f, "max_steps", c.flow.max_steps);
      read(f, "seed", c.flow.seed);
      read(f, "warmup_step", c.flow.warmup_step);
      read(f, "warmup_max_steps", c.flow.warmup_max_steps);
      read(f, "extended_precision", c.flow.extended_precision);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      read(d, "source", c.data.source);
      read(d, "generator", c.data.generator);
      read(d, "seed", c.data.seed);
      read(d, "n_raw", c.data.n_raw);
      read(d, "margin_floor", c.data.margin_floor);
      read(d, "dim", c.data.dim);
      read(d, "path", c.data.path);
    }
    if (j.contains("verify")) {
      const auto& v = j.at("verify");
      read(v, "negative_control", c.verify.negative_control);
      if (v.contains("deep")) {
        const auto& d = v.at("deep");
        read(d, "rank", c.verify.deep.rank);
        read(d, "angle", c.verify.deep.angle);
        read(d, "oracle", c.verify.deep.oracle);
      }
      if (v.contains("two")) {
        const auto& t = v.at("two");
        TwoHomoTolerances& o = c.verify.two;
        read(t, "local", o.local);
        read(t, "share_sum", o.share_sum);
        read(t, "support_share", o.support_share);
        read(t, "vanish_share", o.vanish_share);
        read(t, "support_value", o.support_value);
        read(t, "dual_sum", o.dual_sum);
        read(t, "dual_off_support", o.dual_off_support);
        read(t, "off_support_band", o.off_support_band);
        read(t, "global", o.global);
        read(t, "game", o.game);
        read(t, "cover_grid", o.cover_grid);
      }
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      read(g, "x_min", c.grid.x_min);
      read(g, "x_max", c.grid.x_max);
      read(g, "y_min", c.grid.y_min);
      read(g, "y_max", c.grid.y_max);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  if (c.data.source != "generated" && c.data.source != "file") {
    throw ConfigError("data.source must be 'generated' or 'file'");
  }
  return c;
}

bool same_config(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

nlohmann::json dataset_to_json(const Dataset& data) {
  nlohmann::json j;
  j["meta"] = data.meta;
  nlohmann::json rows = nlohmann::json::array();
  for (const Example& ex : data.examples) rows.push_back({{"x", ex.x}, {"y", ex.y}});
  j["examples"] = std::move(rows);
  return j;
}

Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset data;
  try {
    if (j.contains("meta")) data.meta = j.at("meta").get<std::map<std::string, std::string>>();
    for (const auto& row : j.at("examples")) {
      data.examples.push_back({row.at("x").get<std::vector<double>>(), row.at("y").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  data.validate();
  return data;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ConfigError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

Dataset load_dataset(const std::filesystem::path& path) {
  try {
    return dataset_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  write_file_atomic(path, dataset_to_json(data).dump(1) + "\n");
}

std::string trajectory_csv(const Trajectory& trajectory) {
  std::string out =
      "step,tau,log_loss,norm_w,alpha,alpha_norm,beta,zeta,theta,j_potential,"
      "euler_residual,rate_alpha,rate_zeta\n";
  for (const MetricsRecord& r : trajectory.records) {
    out += std::to_string(r.step);
    for (double v : {r.tau, r.log_loss, r.norm_w, r.alpha, r.alpha_norm, r.beta, r.zeta,
                     r.theta, r.j_potential, r.euler_residual, r.rate_alpha, r.rate_zeta}) {
      out += ',';
      out += format_real(v);
    }
    out += '\n';
  }
  return out;
}

std::string margins_csv(const Trajectory& trajectory) {
  std::string out = "tau,example_index,normalized_margin,dual_weight\n";
  if (trajectory.records.empty()) return out;
  const std::vector<double>& last = trajectory.records.back().margins_norm;
  std::vector<std::size_t> order(last.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return last[a] < last[b]; });
  for (const MetricsRecord& r : trajectory.records) {
    const std::string tau = format_real(r.tau);
    for (std::size_t i : order) {
      out += tau + ',' + std::to_string(i) + ',' + format_real(r.margins_norm[i]) + ',' +
             format_real(r.duals[i]) + '\n';
    }
  }
  return out;
}

Experiment prepare(const ExperimentConfig& config, const std::filesystem::path& base_dir) {
  Dataset data;
  const DataConfig& dc = config.data;
  if (dc.source == "file") {
    std::filesystem::path p(dc.path);
    if (p.is_relative()) p = base_dir / p;
    data = load_dataset(p);
  } else if (dc.generator == "synthetic") {
    data = gen_synthetic(dc.seed, dc.n_raw, dc.margin_floor);
  } else if (dc.generator == "planar") {
    data = gen_planar(dc.seed, dc.n_raw, dc.margin_floor);
  } else if (dc.generator == "linear") {
    data = gen_linear(dc.seed, dc.n_raw, dc.margin_floor, dc.dim);
  } else {
    throw ConfigError("unknown generator '" + dc.generator + "'");
  }
  data.validate();

  const std::size_t d = data.dim();
  std::vector<std::size_t> dims{d};
  dims.insert(dims.end(), config.model.hidden.begin(), config.model.hidden.end());
  dims.push_back(1);
  PredictorSpec spec = PredictorSpec::squared_relu(d, config.model.width);
  switch (config.model.kind) {
    case ModelKind::SquaredRelu:
      break;
    case ModelKind::DeepLinear:
      spec = PredictorSpec::deep_linear(dims);
      break;
    case ModelKind::ReluMlp:
      spec = PredictorSpec::relu_mlp(dims, config.model.pool_window);
      break;
    case ModelKind::NtkFrozen: {
      std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
      std::normal_distribution<double> unit(0.0, 1.0);
      std::vector<double> base(config.model.width * d);
      for (double& v : base) v = unit(rng);
      spec = PredictorSpec::ntk_frozen(d, std::move(base));
      break;
    }
  }
  ParamVec w_init = spec.random_params(config.seed, config.model.init_scale);
  return {std::move(spec), std::move(data), std::move(w_init)};
}

Trajectory train(const ExperimentConfig& config, const Experiment& experiment) {
  config.flow.validate();
  const ParamVec w0 =
      warmup(experiment.spec, experiment.data, experiment.w_init, config.loss, config.flow);
  return run(experiment.spec, experiment.data, config.loss, config.flow, w0);
}

ExperimentConfig with_environment(ExperimentConfig config) {
  if (const char* p = std::getenv("HOMOFLOW_PRECISION")) {
    const std::string v(p);
    if (v == "extended") {
      config.flow.extended_precision = true;
    } else if (v == "double" || v.empty()) {
      config.flow.extended_precision = false;
    } else {
      throw ConfigError("HOMOFLOW_PRECISION must be 'extended' or 'double'");
    }
  }
  return config;
}

std::filesystem::path output_dir(const ExperimentConfig& config,
                                 const std::filesystem::path& base_dir) {
  std::filesystem::path p(config.output_dir);
  if (p.is_relative()) p = base_dir / p;
  std::filesystem::create_directories(p);
  return p;
}

Trajectory cmd_run(const ExperimentConfig& raw, const std::filesystem::path& base_dir) {
  const ExperimentConfig config = with_environment(raw);
  const Experiment exp = prepare(config, base_dir);
  Trajectory traj = train(config, exp);
  const std::filesystem::path dir = output_dir(config, base_dir);
  write_file_atomic(dir / "trajectory.csv", trajectory_csv(traj));
  write_file_atomic(dir / "margins.csv", margins_csv(traj));
  return traj;
}

void cmd_grid(const ExperimentConfig& raw, std::size_t resolution,
              const std::filesystem::path& base_dir) {
  if (resolution == 0) throw DomainError("grid resolution must be positive");
  const ExperimentConfig config = with_environment(raw);
  const Experiment exp = prepare(config, base_dir);
  const std::size_t d = exp.data.dim();
  const auto emb = exp.data.meta.find("embedding");
  const bool bias = emb != exp.data.meta.end() && emb->second == "bias" && d == 3;
  if (!bias && d != 2) {
    throw UnsupportedDimension("grid needs planar inputs, got d = " + std::to_string(d));
  }
  const Trajectory traj = train(config, exp);
  const ParamVec& w = traj.final.w;
  const double scale = std::pow(norm(w), exp.spec.degree());
  if (scale == 0.0) throw ZeroNorm("grid needs |W| > 0");
  auto axis = [resolution](double lo, double hi, std::size_t k) {
    if (resolution == 1) return lo;
    return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(resolution - 1);
  };
  std::string out = "x,y,normalized_prediction\n";
  std::vector<double> point(d, 1.0);
  for (std::size_t ix = 0; ix < resolution; ++ix) {
    for (std::size_t iy = 0; iy < resolution; ++iy) {
      point[0] = axis(config.grid.x_min, config.grid.x_max, ix);
      point[1] = axis(config.grid.y_min, config.grid.y_max, iy);
      const double value = forward(exp.spec, w, point) / scale;
      out += format_real(point[0]) + ',' + format_real(point[1]) + ',' + format_real(value) + '\n';
    }
  }
  write_file_atomic(output_dir(config, base_dir) / "grid.csv", out);
}

std::string report_json(const VerifyReport& report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const Check& c : report.checks) {
    nlohmann::ordered_json entry;
    entry["value"] = c.value;
    if (c.tolerance) {
      entry["tolerance"] = *c.tolerance;
    } else {
      entry["tolerance"] = nullptr;
    }
    entry["pass"] = c.pass;
    j[c.name] = std::move(entry);
  }
  return j.dump(2) + "\n";
}

VerifyReport cmd_verify(const ExperimentConfig& raw, VerifyKind which,
                        const std::filesystem::path& base_dir) {
  const ExperimentConfig config = with_environment(raw);
  const Experiment exp = prepare(config, base_dir);
  ParamVec w = exp.w_init;
  std::vector<std::vector<double>> cover;
  if (config.verify.negative_control) {
    if (exp.spec.kind() == ModelKind::SquaredRelu) cover = node_directions(w);
  } else {
    Trajectory traj = train(config, exp);
    w = traj.final.w;
    cover = traj.records.front().node_dirs;
  }
  VerifyReport report;
  if (which == VerifyKind::DeepLinear) {
    report = verify_deep_linear(exp.spec, w, exp.data, config.verify.deep);
  } else {
    report = verify_two_homo(exp.spec, w, exp.data, config.loss, cover, config.verify.two);
  }
  write_file_atomic(output_dir(config, base_dir) / "verify.json", report_json(report));
  return report;
}

}  // namespace homoflow
