#include "mdfo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mdfo/metrics.hpp"
#include "mdfo/parallel.hpp"
#include "mdfo/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mdfo {

namespace {

constexpr std::uint64_t kStreamX0 = 100;
constexpr std::uint64_t kStreamProblem = 200;

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 12);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

json problem_to_json(const ProblemSpec& p) {
  json j;
  j["name"] = p.name;
  j["dim"] = p.dim;
  if (p.name == "synthetic") {
    j["n"] = p.n;
    j["seed"] = p.seed;
    if (p.raw_encoder_init) j["raw_encoder_init"] = true;
  }
  j["sigma"] = p.sigma;
  return j;
}

ProblemSpec problem_from_json(const json& j) {
  ProblemSpec p;
  p.name = j.at("name").get<std::string>();
  p.dim = j.at("dim").get<int>();
  p.n = j.value("n", 0);
  p.seed = j.value("seed", static_cast<std::uint64_t>(0));
  p.sigma = j.value("sigma", 0.0);
  p.raw_encoder_init = j.value("raw_encoder_init", false);
  return p;
}

json optimizer_to_json(const OptimizerConfig& o) {
  json j;
  j["alpha"] = o.alpha;
  j["delta"] = o.delta;
  j["k_e"] = o.k_e;
  j["k_m"] = o.k_m;
  if (o.beta.has_value()) {
    j["beta"] = *o.beta;
  } else {
    j["beta"] = "auto";
  }
  j["max_evals"] = o.max_evals;
  j["stop_grad_tol"] = o.stop_grad_tol;
  j["stop_window"] = o.stop_window;
  if (o.top_b.has_value()) j["top_b"] = *o.top_b;
  j["step_std_scaling"] = o.step_std_scaling;
  j["estimator_sum_mode"] = o.estimator_sum_mode;
  j["manifold_dim"] = o.manifold_dim;
  j["metrics_every"] = o.metrics_every;
  j["metrics_probe_k"] = o.metrics_probe_k;
  j["record_wall_time"] = o.record_wall_time;
  return j;
}

OptimizerConfig optimizer_from_json(const json& j) {
  OptimizerConfig o;
  o.alpha = j.value("alpha", o.alpha);
  o.delta = j.value("delta", o.delta);
  o.k_e = j.value("k_e", o.k_e);
  o.k_m = j.value("k_m", o.k_m);
  if (j.contains("beta") && !j["beta"].is_null()) {
    if (j["beta"].is_string()) {
      if (j["beta"].get<std::string>() != "auto")
        throw std::invalid_argument("optimizer.beta: expected a number or \"auto\"");
    } else {
      o.beta = j["beta"].get<double>();
    }
  }
  o.max_evals = j.value("max_evals", o.max_evals);
  o.stop_grad_tol = j.value("stop_grad_tol", o.stop_grad_tol);
  o.stop_window = j.value("stop_window", o.stop_window);
  if (j.contains("top_b") && !j["top_b"].is_null()) o.top_b = j["top_b"].get<int>();
  o.step_std_scaling = j.value("step_std_scaling", o.step_std_scaling);
  o.estimator_sum_mode = j.value("estimator_sum_mode", o.estimator_sum_mode);
  o.manifold_dim = j.value("manifold_dim", o.manifold_dim);
  o.metrics_every = j.value("metrics_every", o.metrics_every);
  o.metrics_probe_k = j.value("metrics_probe_k", o.metrics_probe_k);
  o.record_wall_time = j.value("record_wall_time", o.record_wall_time);
  return o;
}

json learner_to_json(const LearnerConfig& l) {
  json j;
  j["lambda"] = l.lambda;
  j["learning_rate"] = l.learning_rate;
  j["momentum"] = l.momentum;
  j["minibatch"] = l.minibatch;
  j["inner_epochs"] = l.inner_epochs;
  j["full_resolve_period"] = l.full_resolve_period;
  j["full_resolve_epochs"] = l.full_resolve_epochs;
  j["reinit_threshold"] = l.reinit_threshold;
  j["buffer_capacity"] = l.buffer_capacity;
  j["raw_sum_mode"] = l.raw_sum_mode;
  j["exploration_records_only"] = l.exploration_records_only;
  return j;
}

LearnerConfig learner_from_json(const json& j) {
  LearnerConfig l;
  l.lambda = j.value("lambda", l.lambda);
  l.learning_rate = j.value("learning_rate", l.learning_rate);
  l.momentum = j.value("momentum", l.momentum);
  l.minibatch = j.value("minibatch", l.minibatch);
  l.inner_epochs = j.value("inner_epochs", l.inner_epochs);
  l.full_resolve_period = j.value("full_resolve_period", l.full_resolve_period);
  l.full_resolve_epochs = j.value("full_resolve_epochs", l.full_resolve_epochs);
  l.reinit_threshold = j.value("reinit_threshold", l.reinit_threshold);
  l.buffer_capacity = j.value("buffer_capacity", l.buffer_capacity);
  l.raw_sum_mode = j.value("raw_sum_mode", l.raw_sum_mode);
  l.exploration_records_only = j.value("exploration_records_only", l.exploration_records_only);
  return l;
}

json grid_point_config(const ExperimentConfig& cfg, const GridPoint& gp) {
  json j;
  j["version"] = kVersion;
  j["method"] = cfg.method;
  j["problem"] = problem_to_json(cfg.problem);
  j["optimizer"] = optimizer_to_json(gp.opt);
  if (cfg.method == "lmrs") j["learner"] = learner_to_json(gp.learner);
  j["seeds"] = cfg.seeds;
  j["x0_mode"] = cfg.x0_mode;
  if (cfg.threshold.has_value()) j["threshold"] = *cfg.threshold;
  j["stop_at_threshold"] = cfg.stop_at_threshold;
  return j;
}

std::string stop_to_string(StopReason stop) {
  switch (stop) {
    case StopReason::kMaxEvals: return "max_evals";
    case StopReason::kStationary: return "stationary";
    case StopReason::kThreshold: return "threshold";
    case StopReason::kNonFinite: return "non_finite";
  }
  return "unknown";
}

struct RunJob {
  GridPoint point;
  std::uint64_t seed = 0;
  fs::path dir;
  std::string config_hash;
};

}  // namespace

std::string ProblemSpec::tag() const {
  std::ostringstream out;
  out << name << "_d" << dim;
  if (name == "synthetic") out << "_n" << n << "_s" << seed;
  if (sigma > 0.0) out << "_sig" << sigma;
  std::string s = out.str();
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}

std::string ProblemSpec::to_json() const { return problem_to_json(*this).dump(); }

void ExperimentConfig::validate() const {
  if (method != "rs" && method != "mrs" && method != "lmrs")
    throw std::invalid_argument("method must be rs, mrs, or lmrs");
  if (problem.dim < 1) throw std::invalid_argument("problem.dim must be >= 1");
  if (problem.name == "synthetic") {
    if (problem.n < 1 || problem.n > problem.dim)
      throw std::invalid_argument("synthetic problem needs 1 <= n <= dim");
  } else {
    const auto& names = benchmark_names();
    if (std::find(names.begin(), names.end(), problem.name) == names.end())
      throw std::invalid_argument("unknown problem: " + problem.name);
  }
  if (method == "mrs" && problem.name != "synthetic")
    throw std::invalid_argument("mrs needs a synthetic problem (oracle jacobian)");
  if (problem.sigma < 0.0) throw std::invalid_argument("problem.sigma must be >= 0");
  if (seeds.empty()) throw std::invalid_argument("seeds must be non-empty");
  if (x0_mode != "standard_normal" && x0_mode != "zeros")
    throw std::invalid_argument("x0_mode must be standard_normal or zeros");
  for (const auto& [key, values] : sweep) {
    if (key != "delta" && key != "k" && key != "alpha" && key != "learning_rate")
      throw std::invalid_argument("unknown sweep field: " + key);
    if (values.empty()) throw std::invalid_argument("sweep." + key + " is empty");
  }
  if (stop_at_threshold && !threshold.has_value())
    throw std::invalid_argument("stop_at_threshold needs a threshold");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    cfg.problem = problem_from_json(j.at("problem"));
    cfg.method = j.at("method").get<std::string>();
    if (j.contains("optimizer")) cfg.opt = optimizer_from_json(j["optimizer"]);
    if (j.contains("learner")) cfg.learner = learner_from_json(j["learner"]);
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("sweep")) {
      for (const auto& [key, values] : j["sweep"].items())
        cfg.sweep[key] = values.get<std::vector<double>>();
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.x0_mode = j.value("x0_mode", cfg.x0_mode);
    if (j.contains("threshold") && !j["threshold"].is_null())
      cfg.threshold = j["threshold"].get<double>();
    cfg.stop_at_threshold = j.value("stop_at_threshold", false);

    // Defaults that depend on the method: one exploration pair for rs,
    // one manifold pair for mrs, one of each for lmrs.
    if (cfg.opt.k_e == 0 && (cfg.method == "rs" || cfg.method == "lmrs")) cfg.opt.k_e = 1;
    if (cfg.opt.k_m == 0 && (cfg.method == "mrs" || cfg.method == "lmrs")) cfg.opt.k_m = 1;

    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  return parse_config(read_file(path));
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& cfg) {
  const auto grid_or = [&](const char* key, double base) {
    auto it = cfg.sweep.find(key);
    if (it == cfg.sweep.end()) return std::vector<double>{base};
    return it->second;
  };
  const std::vector<double> deltas = grid_or("delta", cfg.opt.delta);
  const std::vector<double> ks =
      grid_or("k", static_cast<double>(std::max(cfg.opt.k_e, cfg.opt.k_m)));
  const std::vector<double> alphas = grid_or("alpha", cfg.opt.alpha);
  const std::vector<double> lrs = cfg.method == "lmrs"
                                      ? grid_or("learning_rate", cfg.learner.learning_rate)
                                      : std::vector<double>{cfg.learner.learning_rate};

  std::vector<GridPoint> points;
  for (double delta : deltas) {
    for (double kval : ks) {
      const int k = static_cast<int>(kval);
      if (k < 1 || static_cast<double>(k) != kval)
        throw std::invalid_argument("sweep.k must contain positive integers");
      for (double alpha : alphas) {
        for (double lr : lrs) {
          GridPoint gp{cfg.opt, cfg.learner};
          gp.opt.delta = delta;
          gp.opt.alpha = alpha;
          gp.learner.learning_rate = lr;
          if (cfg.method == "rs") {
            gp.opt.k_e = k;
            gp.opt.k_m = 0;
          } else if (cfg.method == "mrs") {
            gp.opt.k_m = k;
            gp.opt.k_e = 0;
          } else {
            gp.opt.k_e = k;
            gp.opt.k_m = k;
          }
          if (cfg.stop_at_threshold) gp.opt.stop_threshold = cfg.threshold;
          points.push_back(std::move(gp));
        }
      }
    }
  }
  return points;
}

Objective build_objective(const ProblemSpec& spec, JacobianFn* oracle_out) {
  Objective base;
  if (spec.name == "synthetic") {
    RngStream rng = RngStream(spec.seed).derive(kStreamProblem);
    SyntheticResult synth = make_synthetic(spec.dim, spec.n, rng, spec.raw_encoder_init);
    if (oracle_out != nullptr) {
      auto problem = synth.problem;
      *oracle_out = [problem](const Vec& x) { return oracle_jacobian(*problem, x); };
    }
    base = synth.objective;
  } else {
    base = make_benchmark(spec.name, spec.dim);
    if (oracle_out != nullptr) *oracle_out = nullptr;
  }
  return spec.sigma > 0.0 ? with_noise(base, spec.sigma) : base;
}

Vec make_x0(const ProblemSpec& problem, const std::string& x0_mode, std::uint64_t seed) {
  Vec x0(static_cast<std::size_t>(problem.dim), 0.0);
  if (x0_mode == "standard_normal") {
    RngStream rng = RngStream(seed).derive(kStreamX0);
    for (double& v : x0) v = rng.next_gaussian();
  }
  return x0;
}

namespace {

json run_one(const ExperimentConfig& cfg, const RunJob& job) {
  Objective objective;
  JacobianFn oracle;
  objective = build_objective(cfg.problem, &oracle);
  const Vec x0 = make_x0(cfg.problem, cfg.x0_mode, job.seed);
  RngStream rng(job.seed);

  RunResult run;
  std::optional<LmrsResult> lmrs_result;
  if (cfg.method == "rs") {
    run = random_search(objective, x0, job.point.opt, rng);
  } else if (cfg.method == "mrs") {
    run = manifold_random_search(objective, x0, oracle, job.point.opt, rng);
  } else {
    lmrs_result = lmrs(objective, x0, job.point.opt, job.point.learner, rng);
    run = std::move(lmrs_result->run);
  }

  const std::string seed_tag = "seed" + std::to_string(job.seed);
  write_file_atomic(job.dir / ("trace_" + seed_tag + ".csv"), trace_to_csv(run.trace));
  if (cfg.method == "lmrs") {
    write_file_atomic(job.dir / ("learner_" + seed_tag + ".csv"),
                      learner_trace_to_csv(run.trace));
    write_file_atomic(job.dir / ("checkpoint_" + seed_tag + ".json"),
                      model_to_json(lmrs_result->model, lmrs_result->learner_rng_state));
  }

  json summary;
  summary["version"] = kVersion;
  summary["method"] = cfg.method;
  summary["problem"] = problem_to_json(cfg.problem);
  summary["problem_tag"] = cfg.problem.tag();
  summary["seed"] = job.seed;
  summary["config_hash"] = job.config_hash;
  summary["final_f"] = run.trace.rows.empty() ? 0.0 : run.trace.rows.back().f;
  summary["iterations"] = run.iterations;
  summary["budget_evals"] = run.budget_evals;
  summary["metrics_evals"] = run.metrics_evals;
  summary["objective_evals"] = objective.eval_count();
  summary["stop"] = stop_to_string(run.stop);
  if (!run.error.empty()) summary["error"] = run.error;
  summary["learner_degrade_count"] = run.learner_degrade_count;
  summary["reinit_count"] = run.reinit_count;
  summary["fallback_count"] = run.fallback_count;
  if (cfg.threshold.has_value()) {
    const auto solved =
        evals_to_threshold(run.trace, *cfg.threshold, ThresholdDirection::kMinimize);
    if (solved.has_value()) {
      summary["evals_to_threshold"] = *solved;
    } else {
      summary["evals_to_threshold"] = "unsolved";
    }
  }
  write_file_atomic(job.dir / ("summary_" + seed_tag + ".json"), summary.dump(2));
  if (!run.error.empty()) throw std::runtime_error("run failed: " + run.error);
  return summary;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<GridPoint> points = expand_grid(cfg);

  std::vector<RunJob> jobs;
  for (const GridPoint& gp : points) {
    const json resolved = grid_point_config(cfg, gp);
    json ident = resolved;
    ident.erase("seeds");  // one directory per grid point, seeds inside
    const std::string hash = fnv1a_hex(ident.dump());
    const fs::path dir =
        fs::path(cfg.output_dir) / cfg.method / cfg.problem.tag() / hash;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
      std::cerr << "error: cannot create " << dir << ": " << ec.message() << "\n";
      return 3;
    }
    write_file_atomic(dir / "config.json", resolved.dump(2) + "\n");
    for (std::uint64_t seed : cfg.seeds) jobs.push_back(RunJob{gp, seed, dir, hash});
  }

  std::vector<std::string> errors(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), [&](int i) {
    try {
      run_one(cfg, jobs[static_cast<std::size_t>(i)]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  });
  bool failed = false;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!errors[i].empty()) {
      std::cerr << "error: seed " << jobs[i].seed << ": " << errors[i] << "\n";
      failed = true;
    }
  }
  return failed ? 3 : 0;
}

namespace {

double median_or_inf(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::infinity();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct GridSummary {
  std::string method;
  std::string problem_tag;
  std::string hash;
  fs::path dir;
  std::vector<double> final_f;
  std::vector<double> solve_evals;  // +inf = unsolved
};

double summary_solve_evals(const json& summary) {
  if (summary.contains("evals_to_threshold")) {
    const auto& v = summary["evals_to_threshold"];
    if (v.is_number()) return v.get<double>();
    return std::numeric_limits<double>::infinity();
  }
  if (summary.value("stop", "") == "stationary")
    return summary.value("budget_evals", 0.0);
  return std::numeric_limits<double>::infinity();
}

std::vector<GridSummary> collect_grid_summaries(const fs::path& root) {
  std::vector<GridSummary> out;
  if (!fs::exists(root)) throw std::runtime_error("no such directory: " + root.string());
  std::vector<fs::path> config_files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == "config.json")
      config_files.push_back(entry.path());
  }
  std::sort(config_files.begin(), config_files.end());
  for (const fs::path& cfg_path : config_files) {
    const json cfg = json::parse(read_file(cfg_path));
    GridSummary gs;
    gs.dir = cfg_path.parent_path();
    gs.hash = gs.dir.filename().string();
    gs.method = cfg.value("method", "");
    gs.problem_tag = problem_from_json(cfg.at("problem")).tag();
    std::vector<fs::path> summaries;
    for (const auto& entry : fs::directory_iterator(gs.dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("summary_seed", 0) == 0) summaries.push_back(entry.path());
    }
    std::sort(summaries.begin(), summaries.end());
    for (const fs::path& p : summaries) {
      const json s = json::parse(read_file(p));
      gs.final_f.push_back(s.value("final_f", 0.0));
      gs.solve_evals.push_back(summary_solve_evals(s));
    }
    if (!gs.final_f.empty()) out.push_back(std::move(gs));
  }
  return out;
}

void emit_output(const std::string& content, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_file_atomic(out_path, content);
  }
}

}  // namespace

int sweep_select(const std::string& output_dir, const std::string& criterion,
                 const std::string& out_path) {
  if (criterion != "min_final_f" && criterion != "min_evals_to_threshold") {
    std::cerr << "error: criterion must be min_final_f or min_evals_to_threshold\n";
    return 2;
  }
  std::vector<GridSummary> grids;
  try {
    grids = collect_grid_summaries(output_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  if (grids.empty()) {
    std::cerr << "error: no completed runs under " << output_dir << "\n";
    return 3;
  }

  std::map<std::pair<std::string, std::string>, const GridSummary*> best;
  for (const GridSummary& gs : grids) {
    const auto key = std::make_pair(gs.method, gs.problem_tag);
    const auto rank = [&](const GridSummary& g) {
      const double primary = criterion == "min_final_f" ? median_or_inf(g.final_f)
                                                        : median_or_inf(g.solve_evals);
      return std::make_tuple(primary, median_or_inf(g.solve_evals), g.hash);
    };
    auto it = best.find(key);
    if (it == best.end() || rank(gs) < rank(*it->second)) best[key] = &gs;
  }

  json report;
  report["criterion"] = criterion;
  report["selections"] = json::array();
  for (const auto& [key, gs] : best) {
    json sel;
    sel["method"] = key.first;
    sel["problem"] = key.second;
    sel["config_hash"] = gs->hash;
    sel["median_final_f"] = median_or_inf(gs->final_f);
    const double solve = median_or_inf(gs->solve_evals);
    if (std::isfinite(solve)) {
      sel["median_evals_to_threshold"] = solve;
    } else {
      sel["median_evals_to_threshold"] = "unsolved";
    }
    sel["config"] = json::parse(read_file(gs->dir / "config.json"));
    report["selections"].push_back(sel);
  }
  emit_output(report.dump(2) + "\n", out_path);
  return 0;
}

namespace {

std::vector<double> parse_tau_grid(const std::string& spec, const MethodCosts& costs) {
  if (spec.empty() || spec == "auto") return default_tau_grid(costs);
  if (spec.rfind("log:", 0) == 0) {
    double lo = 0, hi = 0;
    int count = 0;
    if (std::sscanf(spec.c_str(), "log:%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 2 ||
        lo <= 0 || hi < lo)
      throw std::invalid_argument("bad tau grid spec: " + spec);
    std::vector<double> grid;
    for (int i = 0; i < count; ++i) {
      const double t = static_cast<double>(i) / (count - 1);
      grid.push_back(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
    }
    return grid;
  }
  std::vector<double> grid;
  std::istringstream in(spec);
  std::string token;
  while (std::getline(in, token, ',')) grid.push_back(std::stod(token));
  if (grid.empty()) throw std::invalid_argument("bad tau grid spec: " + spec);
  return grid;
}

}  // namespace

int profile_command(const std::vector<std::string>& dirs, const std::string& tau_spec,
                    const std::string& out_path) {
  std::vector<GridSummary> grids;
  try {
    for (const std::string& dir : dirs) {
      std::vector<GridSummary> part = collect_grid_summaries(dir);
      grids.insert(grids.end(), part.begin(), part.end());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  if (grids.empty()) {
    std::cerr << "error: no completed runs\n";
    return 3;
  }

  // Median cost over seeds; when several grid points exist for one
  // (method, problem), the best median is used (tuned-hyperparameter view).
  MethodCosts costs;
  for (const GridSummary& gs : grids) {
    const double med = median_or_inf(gs.solve_evals);
    auto& slot = costs[gs.method][gs.problem_tag];
    const double cur = slot.has_value() ? static_cast<double>(*slot)
                                        : std::numeric_limits<double>::infinity();
    if (med < cur) slot = static_cast<long>(med);
  }
  if (costs.size() < 2) {
    std::cerr << "error: need runs for at least 2 methods\n";
    return 3;
  }

  // All methods must cover one shared problem set.
  std::map<std::string, std::vector<std::string>> missing;
  std::vector<std::string> all_problems;
  for (const auto& [method, table] : costs)
    for (const auto& [problem, cost] : table)
      if (std::find(all_problems.begin(), all_problems.end(), problem) == all_problems.end())
        all_problems.push_back(problem);
  for (const auto& [method, table] : costs)
    for (const std::string& problem : all_problems)
      if (table.find(problem) == table.end()) missing[method].push_back(problem);
  if (!missing.empty()) {
    std::cerr << "error: mismatched problem sets:\n";
    for (const auto& [method, problems] : missing) {
      std::cerr << "  " << method << " missing:";
      for (const std::string& p : problems) std::cerr << ' ' << p;
      std::cerr << "\n";
    }
    return 3;
  }

  try {
    const std::vector<double> grid = parse_tau_grid(tau_spec, costs);
    const ProfileTable table = performance_profile(costs, grid);
    emit_output(profile_to_csv(table), out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace mdfo
