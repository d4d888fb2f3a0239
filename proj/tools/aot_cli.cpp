// Command-line front end: transfer, metrics, dual-demo, mask-demo, bench.
//
// Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 solver failure,
// 5 tolerance failure (dual-demo).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "aot/aot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kBadArgs = 2, kIoError = 3, kSolverError = 4, kToleranceFail = 5 };

int exit_code_for(aot::ErrorKind kind) {
  switch (kind) {
    case aot::ErrorKind::invalid_argument: return kBadArgs;
    case aot::ErrorKind::io: return kIoError;
    case aot::ErrorKind::solver: return kSolverError;
  }
  return kBadArgs;
}

// ---- transfer configuration ---------------------------------------------

struct RunConfig {
  std::optional<std::string> source, target, out, report, checkpoint;
  std::optional<std::string> position_map, normal_map, target_position_map, target_normal_map;
  aot::TransferOptions options;
  aot::LossWeights loss_weights;

  json to_json() const {
    auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
    const auto& o = options;
    return {{"source", opt(source)},
            {"target", opt(target)},
            {"out", opt(out)},
            {"report", opt(report)},
            {"checkpoint", opt(checkpoint)},
            {"position_map", opt(position_map)},
            {"normal_map", opt(normal_map)},
            {"target_position_map", opt(target_position_map)},
            {"target_normal_map", opt(target_normal_map)},
            {"method", aot::to_string(o.method)},
            {"max_points", o.resolved_max_points()},
            {"epsilon", o.epsilon},
            {"sinkhorn_max_iter", o.sinkhorn_max_iter},
            {"sinkhorn_tol", o.sinkhorn_tol},
            {"position_weight", o.position_weight},
            {"normal_weight", o.normal_weight},
            {"seed", o.seed},
            {"smoothing_radius", o.smoothing_radius},
            {"cost", o.cost == aot::CostKind::euclidean ? "euclidean" : "squared_euclidean"},
            {"neural",
             {{"learning_rate", o.neural.learning_rate},
              {"critic_steps", o.neural.critic_steps},
              {"total_iterations", o.neural.total_iterations},
              {"batch_size", o.neural.batch_size},
              {"clip_bound", o.neural.clip_bound},
              {"hidden_width", o.neural.hidden_width}}},
            {"loss_weights",
             {{"content", loss_weights.content},
              {"appearance", loss_weights.appearance},
              {"recon", loss_weights.recon},
              {"msd", loss_weights.msd}}}};
  }
};

template <class T>
T json_get(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    aot::fail(aot::ErrorKind::invalid_argument, "config key '" + key + "' has the wrong type");
  }
}

void apply_config_file(RunConfig& cfg, const json& j) {
  if (!j.is_object()) aot::fail(aot::ErrorKind::invalid_argument, "config file must contain a JSON object");
  auto& o = cfg.options;
  for (const auto& [key, v] : j.items()) {
    auto str = [&] { return std::optional<std::string>(json_get<std::string>(v, key)); };
    if (key == "source") cfg.source = str();
    else if (key == "target") cfg.target = str();
    else if (key == "out") cfg.out = str();
    else if (key == "report") cfg.report = str();
    else if (key == "checkpoint") cfg.checkpoint = str();
    else if (key == "position_map") cfg.position_map = str();
    else if (key == "normal_map") cfg.normal_map = str();
    else if (key == "target_position_map") cfg.target_position_map = str();
    else if (key == "target_normal_map") cfg.target_normal_map = str();
    else if (key == "method") o.method = aot::parse_method(json_get<std::string>(v, key));
    else if (key == "max_points") o.max_points = json_get<std::size_t>(v, key);
    else if (key == "epsilon") o.epsilon = json_get<double>(v, key);
    else if (key == "sinkhorn_max_iter") o.sinkhorn_max_iter = json_get<int>(v, key);
    else if (key == "sinkhorn_tol") o.sinkhorn_tol = json_get<double>(v, key);
    else if (key == "position_weight") o.position_weight = json_get<double>(v, key);
    else if (key == "normal_weight") o.normal_weight = json_get<double>(v, key);
    else if (key == "seed") o.seed = json_get<std::uint64_t>(v, key);
    else if (key == "smoothing_radius") o.smoothing_radius = json_get<std::size_t>(v, key);
    else if (key == "cost") {
      const auto c = json_get<std::string>(v, key);
      if (c == "squared_euclidean") o.cost = aot::CostKind::squared_euclidean;
      else if (c == "euclidean") o.cost = aot::CostKind::euclidean;
      else aot::fail(aot::ErrorKind::invalid_argument, "config key 'cost' must be squared_euclidean or euclidean");
    } else if (key == "neural") {
      if (!v.is_object()) aot::fail(aot::ErrorKind::invalid_argument, "config key 'neural' must be an object");
      for (const auto& [nk, nv] : v.items()) {
        const std::string full = "neural." + nk;
        if (nk == "learning_rate") o.neural.learning_rate = json_get<double>(nv, full);
        else if (nk == "critic_steps") o.neural.critic_steps = json_get<int>(nv, full);
        else if (nk == "total_iterations") o.neural.total_iterations = json_get<int>(nv, full);
        else if (nk == "batch_size") o.neural.batch_size = json_get<std::size_t>(nv, full);
        else if (nk == "clip_bound") o.neural.clip_bound = json_get<double>(nv, full);
        else if (nk == "hidden_width") o.neural.hidden_width = json_get<std::size_t>(nv, full);
        else aot::fail(aot::ErrorKind::invalid_argument, "unknown config key '" + full + "'");
      }
    } else if (key == "loss_weights") {
      if (!v.is_object()) aot::fail(aot::ErrorKind::invalid_argument, "config key 'loss_weights' must be an object");
      for (const auto& [lk, lv] : v.items()) {
        const std::string full = "loss_weights." + lk;
        if (lk == "content") cfg.loss_weights.content = json_get<double>(lv, full);
        else if (lk == "appearance") cfg.loss_weights.appearance = json_get<double>(lv, full);
        else if (lk == "recon") cfg.loss_weights.recon = json_get<double>(lv, full);
        else if (lk == "msd") cfg.loss_weights.msd = json_get<double>(lv, full);
        else aot::fail(aot::ErrorKind::invalid_argument, "unknown config key '" + full + "'");
      }
    } else {
      aot::fail(aot::ErrorKind::invalid_argument, "unknown config key '" + key + "'");
    }
  }
}

void require_input_file(const std::optional<std::string>& path, const std::string& what) {
  if (path && !fs::is_regular_file(*path)) aot::fail(aot::ErrorKind::io, what + " not found: " + *path);
}

void require_output_dir(const std::optional<std::string>& path, const std::string& what) {
  if (!path) return;
  const auto parent = fs::path(*path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent))
    aot::fail(aot::ErrorKind::io, what + " directory does not exist: " + parent.string());
}

void write_json(const json& j, const std::optional<std::string>& path) {
  if (path) aot::save_json(j, *path);
  else std::cout << j.dump(2) << '\n';
}

// ---- commands -------------------------------------------------------------

struct TransferFlags {
  std::optional<std::string> source, target, out, method, position_map, normal_map, target_position_map, target_normal_map,
      config, report, checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_points, smoothing_radius;
  std::optional<double> epsilon, position_weight, normal_weight;
  std::optional<int> iterations;
};

int cmd_transfer(const TransferFlags& f, const std::string& usage) {
  RunConfig cfg;
  if (f.config) {
    require_input_file(f.config, "config file");
    apply_config_file(cfg, aot::load_json(*f.config));
  }
  auto over = [](auto& dst, const auto& src) {
    if (src) dst = *src;
  };
  over(cfg.source, f.source);
  over(cfg.target, f.target);
  over(cfg.out, f.out);
  over(cfg.report, f.report);
  over(cfg.checkpoint, f.checkpoint);
  over(cfg.position_map, f.position_map);
  over(cfg.normal_map, f.normal_map);
  over(cfg.target_position_map, f.target_position_map);
  over(cfg.target_normal_map, f.target_normal_map);
  if (f.method) cfg.options.method = aot::parse_method(*f.method);
  over(cfg.options.seed, f.seed);
  over(cfg.options.max_points, f.max_points);
  over(cfg.options.smoothing_radius, f.smoothing_radius);
  over(cfg.options.epsilon, f.epsilon);
  over(cfg.options.position_weight, f.position_weight);
  over(cfg.options.normal_weight, f.normal_weight);
  over(cfg.options.neural.total_iterations, f.iterations);

  std::string missing;
  if (!cfg.source) missing += " --source";
  if (!cfg.target) missing += " --target";
  if (!cfg.out) missing += " --out";
  if (!missing.empty()) {
    std::cerr << "transfer: missing required option(s):" << missing << "\n\n" << usage;
    return kBadArgs;
  }
  if (cfg.position_map.has_value() != cfg.target_position_map.has_value())
    aot::fail(aot::ErrorKind::invalid_argument, "--position-map and --target-position-map must be given together");
  if (cfg.normal_map.has_value() != cfg.target_normal_map.has_value())
    aot::fail(aot::ErrorKind::invalid_argument, "--normal-map and --target-normal-map must be given together");
  if (cfg.checkpoint && cfg.options.method != aot::TransferMethod::neural)
    aot::fail(aot::ErrorKind::invalid_argument, "--checkpoint is only meaningful with --method neural");
  cfg.options.validate();
  cfg.loss_weights.validate();

  require_input_file(cfg.source, "source image");
  require_input_file(cfg.target, "target image");
  require_input_file(cfg.position_map, "position map");
  require_input_file(cfg.normal_map, "normal map");
  require_input_file(cfg.target_position_map, "target position map");
  require_input_file(cfg.target_normal_map, "target normal map");
  require_output_dir(cfg.out, "output image");
  require_output_dir(cfg.report, "report");
  require_output_dir(cfg.checkpoint, "checkpoint");

  const auto source = aot::load_image(*cfg.source);
  const auto target = aot::load_image(*cfg.target);
  aot::GeometryMaps sg, tg;
  if (cfg.position_map) {
    sg.position_map = aot::load_image(*cfg.position_map);
    tg.position_map = aot::load_image(*cfg.target_position_map);
  }
  if (cfg.normal_map) {
    sg.normal_map = aot::load_image(*cfg.normal_map);
    tg.normal_map = aot::load_image(*cfg.target_normal_map);
  }

  const auto result = aot::transfer_appearance(source, target, sg, tg, cfg.options);
  aot::save_image(result.image, *cfg.out);
  if (cfg.checkpoint) aot::save_json(aot::transport_model_to_json(*result.neural_model), *cfg.checkpoint);

  json report = result.report.to_json();
  report["tool_version"] = aot::kVersion;
  report["config"] = cfg.to_json();
  if (cfg.report) aot::save_json(report, *cfg.report);
  std::cerr << "transfer: " << aot::to_string(result.report.method) << " cost=" << result.report.cost
            << " histogram_w " << result.report.histogram_distance_before << " -> " << result.report.histogram_distance_after
            << '\n';
  return kOk;
}

struct MetricsFlags {
  std::string a, b;
  std::optional<std::string> source, out;
  std::uint64_t seed = 0;
};

int cmd_metrics(const MetricsFlags& f) {
  require_input_file(f.a, "image --a");
  require_input_file(f.b, "image --b");
  require_input_file(f.source, "image --source");
  require_output_dir(f.out, "report");
  const auto a = aot::load_image(f.a);
  const auto b = aot::load_image(f.b);
  const auto edge_ref = f.source ? aot::load_image(*f.source) : b;
  if (!a.same_shape(b) || !a.same_shape(edge_ref))
    aot::fail(aot::ErrorKind::invalid_argument, "metrics: image dimensions differ (" + std::to_string(a.width()) + "x" +
                                                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                                                    std::to_string(b.height()) + ")");
  const aot::FeatureBank bank(f.seed);
  auto r = aot::compute_metrics(a, b, edge_ref, bank);
  r.histogram_w = aot::histogram_w_distance(a, b, aot::kHistogramMaxPoints, f.seed);
  json j = r.to_json();
  j["tool_version"] = aot::kVersion;
  j["edge_operator"] = "sobel";
  j["feature_bank"] = {{"kernels", bank.size()}, {"seed", bank.seed()}, {"scales", {1.0, 0.5}}};
  j["config"] = {{"a", f.a},
                 {"b", f.b},
                 {"source", f.source ? json(*f.source) : json(nullptr)},
                 {"ssim_edge_reference", f.source ? "source" : "b"},
                 {"seed", f.seed}};
  write_json(j, f.out);
  return kOk;
}

struct DualDemoFlags {
  std::string task;
  std::uint64_t seed = 0;
  std::optional<int> iters;
};

struct DualTask {
  aot::Matrix source, target;
  double oracle = 0.0;            // value the clipped critic estimates
  std::optional<double> oracle_euclidean;
  bool absolute = false;          // identity: |estimate| < tolerance
  double tolerance = 0.10;
};

DualTask make_dual_task(const std::string& task, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DualTask t;
  const std::size_t n = 512;
  if (task == "shift1d" || task == "identity") {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    t.source = aot::Matrix(n, 1);
    t.target = aot::Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      t.source(i, 0) = u(rng);
      t.target(i, 0) = 2.0 + u(rng);
    }
    t.oracle = 2.0;
    if (task == "identity") {
      t.target = t.source;
      t.oracle = 0.0;
      t.absolute = true;
      t.tolerance = 0.05;
    }
  } else if (task == "shift2d") {
    std::normal_distribution<double> g(0.0, 0.1);
    t.source = aot::Matrix(n, 2);
    t.target = aot::Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      t.source(i, 0) = g(rng);
      t.source(i, 1) = g(rng);
      t.target(i, 0) = 1.0 + g(rng);
      t.target(i, 1) = 0.5 + g(rng);
    }
    // A weight-clipped critic is Lipschitz in the l1 ground metric, whose W1 for
    // a translation is the l1 norm of the shift.
    t.oracle = 1.5;
    t.oracle_euclidean = std::hypot(1.0, 0.5);
  } else {
    aot::fail(aot::ErrorKind::invalid_argument, "unknown task '" + task + "' (expected shift1d, shift2d or identity)");
  }
  return t;
}

int cmd_dual_demo(const DualDemoFlags& f) {
  const auto task = make_dual_task(f.task, f.seed);
  aot::TrainConfig cfg;
  cfg.seed = f.seed;
  cfg.clip_bound = aot::unit_slope_clip_bound(cfg.hidden_width);
  if (f.iters) cfg.total_iterations = *f.iters;
  const auto t0 = std::chrono::steady_clock::now();
  const auto est = aot::estimate_w1(task.source, task.target, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double rel = task.absolute ? std::abs(est.estimate) : std::abs(est.estimate - task.oracle) / task.oracle;
  const bool pass = rel < task.tolerance;

  std::cout << std::setprecision(6) << std::fixed;
  std::cout << "task: " << f.task << '\n';
  std::cout << "seed: " << f.seed << '\n';
  std::cout << "iterations: " << cfg.total_iterations << '\n';
  std::cout << "clip_bound: " << cfg.clip_bound << '\n';
  std::cout << "oracle_w1: " << task.oracle << '\n';
  if (task.oracle_euclidean) std::cout << "oracle_w1_euclidean: " << *task.oracle_euclidean << '\n';
  std::cout << "estimate: " << est.estimate << '\n';
  std::cout << (task.absolute ? "absolute_error: " : "relative_error: ") << rel << '\n';
  std::cout << "tolerance: " << task.tolerance << '\n';
  std::cout << "seconds: " << secs << '\n';
  std::cout << "status: " << (pass ? "pass" : "fail") << '\n';
  return pass ? kOk : kToleranceFail;
}

struct MaskDemoFlags {
  std::string a, b, out, mixed;
  std::size_t patches = 1;
  std::uint64_t seed = 0;
  double min_frac = 0.1, max_frac = 0.5;
  std::size_t soft_edge = 0;
};

int cmd_mask_demo(const MaskDemoFlags& f) {
  require_input_file(f.a, "image --a");
  require_input_file(f.b, "image --b");
  require_output_dir(f.out, "mask");
  require_output_dir(f.mixed, "mixed image");
  const auto a = aot::load_image(f.a);
  const auto b = aot::load_image(f.b);
  if (!a.same_shape(b)) aot::fail(aot::ErrorKind::invalid_argument, "mask-demo: --a and --b differ in size");
  const auto mask = aot::generate_mix_mask(a.height(), a.width(), f.patches, f.min_frac, f.max_frac, f.soft_edge, f.seed);
  aot::save_plane_png(mask.values, f.out);
  aot::save_image(aot::mix_images(a, b, mask), f.mixed);
  return kOk;
}

struct BenchFlags {
  std::string sizes = "16,64,256,1024";
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  double epsilon = 0.005;
  int max_iter = 2000;
  int neural_iters = 300;
};

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || v == 0) aot::fail(aot::ErrorKind::invalid_argument, "invalid size '" + tok + "' in --sizes");
    out.push_back(v);
  }
  if (out.empty()) aot::fail(aot::ErrorKind::invalid_argument, "--sizes is empty");
  return out;
}

// Three-component Gaussian mixture in the RGB cube.
aot::WeightedPointCloud mixture_cloud(std::size_t n, std::mt19937_64& rng, double offset) {
  static constexpr double kCenters[3][3] = {{0.2, 0.3, 0.7}, {0.7, 0.2, 0.3}, {0.4, 0.7, 0.4}};
  std::normal_distribution<double> g(0.0, 0.07);
  aot::Matrix pts(n, 3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < 3; ++k) pts(i, k) = kCenters[i % 3][k] + offset + g(rng);
  return aot::uniform_cloud(pts);
}

int cmd_bench(const BenchFlags& f) {
  const auto sizes = parse_sizes(f.sizes);
  require_output_dir(f.out, "bench output");
  std::ostringstream csv;
  csv << std::setprecision(10);
  csv << "method,n_points,cost_or_estimate,marginal_error,seconds\n";
  for (std::size_t n : sizes) {
    std::mt19937_64 rng(f.seed * 1000003ULL + n);
    const auto a = mixture_cloud(n, rng, 0.0);
    const auto b = mixture_cloud(n, rng, 0.1);
    const auto c = aot::cost_matrix(a, b);
    auto timed = [](auto&& fn) {
      const auto t0 = std::chrono::steady_clock::now();
      auto r = fn();
      return std::pair{r, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    };
    {
      auto [plan, secs] = timed([&] { return aot::sinkhorn(c, a.weights, b.weights, f.epsilon, f.max_iter, 1e-9); });
      csv << "sinkhorn," << n << ',' << aot::plan_cost(plan, c) << ','
          << std::max(plan.row_marginal_error, plan.col_marginal_error) << ',' << secs << '\n';
    }
    if (n <= aot::kExactMaxSize) {
      auto [plan, secs] = timed([&] { return aot::exact_ot_small(c, a.weights, b.weights); });
      csv << "exact," << n << ',' << aot::plan_cost(plan, c) << ','
          << std::max(plan.row_marginal_error, plan.col_marginal_error) << ',' << secs << '\n';
    }
    {
      aot::TrainConfig cfg;
      cfg.seed = f.seed;
      cfg.total_iterations = f.neural_iters;
      cfg.clip_bound = aot::unit_slope_clip_bound(cfg.hidden_width);
      auto [est, secs] = timed([&] { return aot::estimate_w1(a, b, cfg); });
      csv << "neural," << n << ',' << est.estimate << ",NA," << secs << '\n';
    }
  }
  if (f.out) {
    std::ofstream out(*f.out, std::ios::trunc);
    if (!out) aot::fail(aot::ErrorKind::io, "cannot open " + *f.out + " for writing");
    out << csv.str();
    if (!out) aot::fail(aot::ErrorKind::io, "write error on " + *f.out);
  } else {
    std::cout << csv.str();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geometry-aware optimal-transport appearance transfer"};
  app.set_version_flag("--version", std::string(aot::kVersion));
  app.require_subcommand(1);

  TransferFlags tf;
  auto* transfer = app.add_subcommand("transfer", "Map the color distribution of --source onto --target");
  transfer->add_option("--source", tf.source, "Source image (PNG/PPM)");
  transfer->add_option("--target", tf.target, "Target image (PNG/PPM)");
  transfer->add_option("--out", tf.out, "Output image (.png or .ppm)");
  transfer->add_option("--method", tf.method, "sinkhorn | exact | neural")->check(CLI::IsMember({"sinkhorn", "exact", "neural"}));
  transfer->add_option("--position-map", tf.position_map, "Source position map");
  transfer->add_option("--normal-map", tf.normal_map, "Source normal map, encoded (n+1)/2");
  transfer->add_option("--target-position-map", tf.target_position_map, "Target position map");
  transfer->add_option("--target-normal-map", tf.target_normal_map, "Target normal map");
  transfer->add_option("--config", tf.config, "JSON config file; flags override its values");
  transfer->add_option("--seed", tf.seed, "Random seed");
  transfer->add_option("--report", tf.report, "Write the JSON transfer report here");
  transfer->add_option("--checkpoint", tf.checkpoint, "Save the trained transport network (neural method)");
  transfer->add_option("--max-points", tf.max_points, "Cloud size (0 = method default)");
  transfer->add_option("--epsilon", tf.epsilon, "Entropic regularization for sinkhorn");
  transfer->add_option("--position-weight", tf.position_weight, "Scale of the position features");
  transfer->add_option("--normal-weight", tf.normal_weight, "Scale of the normal features");
  transfer->add_option("--smoothing-radius", tf.smoothing_radius, "Box radius for smoothing the color displacement");
  transfer->add_option("--iters", tf.iterations, "Outer iterations for the neural method");

  MetricsFlags mf;
  auto* metrics = app.add_subcommand("metrics", "SSIM-whole, SSIM-edge, Gram, content and histogram metrics");
  metrics->add_option("--a", mf.a, "Result image")->required();
  metrics->add_option("--b", mf.b, "Reference image")->required();
  metrics->add_option("--source", mf.source, "Edge reference for SSIM-edge (defaults to --b)");
  metrics->add_option("--out", mf.out, "Write the JSON report here (stdout otherwise)");
  metrics->add_option("--seed", mf.seed, "Feature bank and quantization seed");

  DualDemoFlags df;
  auto* dual = app.add_subcommand("dual-demo", "Neural Wasserstein-1 dual estimate on a closed-form benchmark");
  dual->add_option("--task", df.task, "shift1d | shift2d | identity")->required();
  dual->add_option("--seed", df.seed, "Random seed");
  dual->add_option("--iters", df.iters, "Critic iterations");

  MaskDemoFlags kf;
  auto* mask = app.add_subcommand("mask-demo", "Generate a mix-mask and blend two images with it");
  mask->add_option("--a", kf.a, "Generated image (mask value 0)")->required();
  mask->add_option("--b", kf.b, "Real image (mask value 1)")->required();
  mask->add_option("--patches", kf.patches, "Number of rectangular patches");
  mask->add_option("--seed", kf.seed, "Random seed");
  mask->add_option("--out", kf.out, "Mask PNG")->required();
  mask->add_option("--mixed", kf.mixed, "Mixed image")->required();
  mask->add_option("--min-frac", kf.min_frac, "Smallest patch side as a fraction of the frame");
  mask->add_option("--max-frac", kf.max_frac, "Largest patch side as a fraction of the frame");
  mask->add_option("--soft-edge", kf.soft_edge, "Width in pixels of the linear border ramp");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "Time sinkhorn, exact and neural solvers on synthetic clouds");
  bench->add_option("--sizes", bf.sizes, "Comma-separated cloud sizes");
  bench->add_option("--seed", bf.seed, "Random seed");
  bench->add_option("--out", bf.out, "CSV output (stdout otherwise)");
  bench->add_option("--epsilon", bf.epsilon, "Sinkhorn regularization");
  bench->add_option("--max-iter", bf.max_iter, "Sinkhorn iteration cap");
  bench->add_option("--neural-iters", bf.neural_iters, "Critic iterations for the neural estimate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kBadArgs;
  }

  try {
    if (*transfer) return cmd_transfer(tf, transfer->help());
    if (*metrics) return cmd_metrics(mf);
    if (*dual) return cmd_dual_demo(df);
    if (*mask) return cmd_mask_demo(kf);
    if (*bench) return cmd_bench(bf);
  } catch (const aot::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadArgs;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kBadArgs;
}
