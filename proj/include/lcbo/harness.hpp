#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "lcbo/beam.hpp"
#include "lcbo/lcbo.hpp"
#include "lcbo/problem.hpp"
#include "lcbo/rff.hpp"
#include "lcbo/truss.hpp"

namespace lcbo {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Method { Lcbo, RandomSearch };

struct ExperimentConfig {
  std::string problem = "toy_circle";  // toy_circle | synthetic | truss | beam
  int dim = 25;                        // synthetic dimension
  std::uint64_t problem_seed = 0;      // synthetic instance seed
  std::string truss_file;              // empty -> bundled data file
  Method method = Method::Lcbo;
  int budget = 1000;                   // evaluations (one = all outputs at a point)
  int repetitions = 10;
  std::uint64_t base_seed = 0;
  std::string out_dir = "out";
  bool plots = false;
  bool judge_noisy = false;            // feasibility judged on noisy observations
  double equality_feasibility_tol = 1e-2;
  int jobs = 1;
  LCBOConfig lcbo;

  void validate() const {
    if (repetitions < 1) throw ConfigError("config: repetitions must be >= 1");
    if (budget < 1) throw ConfigError("config: budget must be >= 1");
    if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
  }
};

struct TraceRow {
  int eval = 0;
  std::uint64_t seed = 0;
  double best_feasible = std::numeric_limits<double>::infinity();
  double rs_hat = std::numeric_limits<double>::quiet_NaN();
  double rf_hat = std::numeric_limits<double>::quiet_NaN();
};

struct AggregateRow {
  int eval = 0;
  double median = 0.0, q25 = 0.0, q75 = 0.0;
};

namespace detail {

inline bool feasible_from_values(const Vector& c, ConstraintSense sense, double eq_tol) {
  if (sense == ConstraintSense::Equality) return c.cwiseAbs().maxCoeff() <= eq_tol;
  return (c.array() <= 0.0).all();
}

}  // namespace detail

/// Running best-feasible tracker; judges feasibility on noiseless truth by
/// default, or on the observed values when judge_noisy is set.
class BestFeasibleTracker {
 public:
  BestFeasibleTracker(const ProblemDef& p, bool judge_noisy, double eq_tol)
      : p_(p), judge_noisy_(judge_noisy), eq_tol_(eq_tol) {}

  /// y_observed is the noisy (m+1)-vector recorded at x; may be empty in
  /// truth mode.
  void update(const Vector& x, const Vector& y_observed) {
    bool feas;
    double obj;
    if (judge_noisy_) {
      feas = detail::feasible_from_values(y_observed.tail(p_.num_constraints), p_.sense, eq_tol_);
      obj = y_observed(0);
    } else {
      feas = detail::feasible_from_values(p_.constraint_values(x), p_.sense, eq_tol_);
      obj = p_.objective(x);
    }
    if (feas && obj < best_) best_ = obj;
  }

  double best() const { return best_; }

 private:
  const ProblemDef& p_;
  bool judge_noisy_;
  double eq_tol_;
  double best_ = std::numeric_limits<double>::infinity();
};

struct ColdStart {
  Matrix X0;  // d points, original units
  Matrix Y0;  // noisy observations
  Vector x1;  // starting candidate
};

/// Protocol cold start: d uniform points, then the feasible point with the
/// lowest objective, or the least-violating point when none is feasible.
/// Selection uses noiseless truth unless judge_noisy is set.
inline ColdStart cold_start(const ProblemDef& p, std::uint64_t seed, bool judge_noisy = false,
                            double eq_tol = 1e-2) {
  Rng rng = Rng::for_stream(seed, Stream::ColdStart);
  const int d = p.dim, q = p.num_constraints + 1;
  ColdStart cs;
  cs.X0.resize(d, d);
  cs.Y0.resize(d, q);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) cs.X0(r, c) = rng.uniform(p.domain.lower(c), p.domain.upper(c));
    cs.Y0.row(r) = noisy_observe(p, cs.X0.row(r).transpose(), rng).transpose();
  }

  int best_feas = -1, best_viol = 0;
  double best_obj = std::numeric_limits<double>::infinity();
  double min_viol = std::numeric_limits<double>::infinity();
  for (int r = 0; r < d; ++r) {
    const Vector x = cs.X0.row(r).transpose();
    Vector c = judge_noisy ? cs.Y0.row(r).tail(p.num_constraints).transpose().eval()
                           : p.constraint_values(x);
    const double obj = judge_noisy ? cs.Y0(r, 0) : p.objective(x);
    const bool feas = detail::feasible_from_values(c, p.sense, eq_tol);
    const double viol =
        p.sense == ConstraintSense::Equality ? c.norm() : c.cwiseMax(0.0).norm();
    if (feas && obj < best_obj) {
      best_feas = r;
      best_obj = obj;
    }
    if (viol < min_viol) {
      min_viol = viol;
      best_viol = r;
    }
  }
  cs.x1 = cs.X0.row(best_feas >= 0 ? best_feas : best_viol).transpose();
  return cs;
}

/// Uniform-sampling baseline with the same evaluation accounting and trace
/// schema as the main method.
inline std::vector<TraceRow> random_search_baseline(const ProblemDef& p, int budget_evals,
                                                    std::uint64_t seed, bool judge_noisy = false,
                                                    double eq_tol = 1e-2) {
  Rng rng = Rng::for_stream(seed, Stream::RandomSearch);
  BestFeasibleTracker tracker(p, judge_noisy, eq_tol);
  std::vector<TraceRow> rows;
  rows.reserve(static_cast<std::size_t>(std::max(0, budget_evals)));
  Vector x(p.dim);
  for (int e = 1; e <= budget_evals; ++e) {
    for (int c = 0; c < p.dim; ++c) x(c) = rng.uniform(p.domain.lower(c), p.domain.upper(c));
    const Vector y = noisy_observe(p, x, rng);
    tracker.update(x, y);
    rows.push_back({e, seed, tracker.best(),
                    std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN()});
  }
  return rows;
}

/// One LCBO repetition flattened to per-evaluation trace rows (cold start
/// first), padded with the final state up to the full budget so every
/// trace has exactly `budget` rows.
inline std::vector<TraceRow> lcbo_trace(const ProblemDef& p, const ExperimentConfig& cfg,
                                        std::uint64_t seed) {
  const int q = p.num_constraints + 1;
  if (cfg.budget < p.dim + 1)
    throw ConfigError("config: budget must cover the cold start plus one step");

  const ColdStart cs = cold_start(p, seed, cfg.judge_noisy, cfg.equality_feasibility_tol);
  BestFeasibleTracker tracker(p, cfg.judge_noisy, cfg.equality_feasibility_tol);
  std::vector<TraceRow> rows;
  rows.reserve(static_cast<std::size_t>(cfg.budget));
  for (int r = 0; r < p.dim; ++r) {
    tracker.update(cs.X0.row(r).transpose(), cs.Y0.row(r).transpose());
    rows.push_back({static_cast<int>(rows.size()) + 1, seed, tracker.best(),
                    std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN()});
  }

  LCBOConfig lc = cfg.lcbo;
  lc.constraint_sense = p.sense;
  lc.budget = static_cast<long>(cfg.budget - p.dim) * q;
  RunInputs init;
  init.X0 = cs.X0;
  init.Y0 = cs.Y0;
  init.x1 = cs.x1;
  const auto records = run(p, lc, seed, init);

  for (const auto& rec : records) {
    for (Eigen::Index r = 0; r < rec.batch.rows(); ++r) {
      tracker.update(rec.batch.row(r).transpose(), rec.observations.row(r).transpose());
      rows.push_back({static_cast<int>(rows.size()) + 1, seed, tracker.best(), rec.rs_hat,
                      rec.rf_hat});
    }
  }
  while (static_cast<int>(rows.size()) < cfg.budget) {
    TraceRow padded = rows.back();
    padded.eval = static_cast<int>(rows.size()) + 1;
    rows.push_back(padded);
  }
  return rows;
}

// ---- quantiles on the extended real line -------------------------------

inline double quantile_sorted(const std::vector<double>& v, double prob) {
  const std::size_t n = v.size();
  if (n == 0) throw std::invalid_argument("quantile of empty set");
  const double h = double(n - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - double(lo);
  if (frac == 0.0 || lo + 1 >= n) return v[lo];
  const double a = v[lo], b = v[lo + 1];
  if (a == b) return a;
  if (std::isinf(b)) return b;
  if (std::isinf(a)) return a;
  return a + frac * (b - a);
}

inline std::vector<AggregateRow> aggregate_traces(const std::vector<std::vector<TraceRow>>& traces) {
  if (traces.empty()) throw std::invalid_argument("aggregate: no traces");
  const std::size_t len = traces.front().size();
  for (const auto& t : traces)
    if (t.size() != len) throw std::invalid_argument("aggregate: traces have unequal lengths");
  std::vector<AggregateRow> out(len);
  std::vector<double> col(traces.size());
  for (std::size_t e = 0; e < len; ++e) {
    for (std::size_t s = 0; s < traces.size(); ++s) col[s] = traces[s][e].best_feasible;
    std::sort(col.begin(), col.end());
    out[e] = {traces.front()[e].eval, quantile_sorted(col, 0.5), quantile_sorted(col, 0.25),
              quantile_sorted(col, 0.75)};
  }
  return out;
}

// ---- CSV ----------------------------------------------------------------

inline std::string format_csv_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline constexpr const char* kTraceHeader = "eval,seed,best_feasible,rs_hat,rf_hat";
inline constexpr const char* kAggregateHeader = "eval,median,q25,q75";

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kTraceHeader << "\n";
  for (const auto& r : rows)
    out << r.eval << ',' << r.seed << ',' << format_csv_value(r.best_feasible) << ','
        << format_csv_value(r.rs_hat) << ',' << format_csv_value(r.rf_hat) << "\n";
}

inline void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kAggregateHeader << "\n";
  for (const auto& r : rows)
    out << r.eval << ',' << format_csv_value(r.median) << ',' << format_csv_value(r.q25) << ','
        << format_csv_value(r.q75) << "\n";
}

inline std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw std::runtime_error("unexpected trace header in " + path);
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TraceRow r;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::string bf, rs, rf;
    if (!(ls >> r.eval >> r.seed >> bf >> rs >> rf))
      throw std::runtime_error("malformed trace row in " + path);
    r.best_feasible = std::strtod(bf.c_str(), nullptr);
    r.rs_hat = std::strtod(rs.c_str(), nullptr);
    r.rf_hat = std::strtod(rf.c_str(), nullptr);
    rows.push_back(r);
  }
  return rows;
}

// ---- experiment driver ----------------------------------------------------

inline ProblemDef make_problem(const ExperimentConfig& cfg) {
  if (cfg.problem == "toy_circle") return make_toy_circle();
  if (cfg.problem == "synthetic") return make_synthetic(cfg.dim, cfg.problem_seed);
  if (cfg.problem == "truss") {
    const std::string path =
        cfg.truss_file.empty() ? std::string(LCBO_DATA_DIR) + "/truss25.txt" : cfg.truss_file;
    return make_truss_problem(load_truss(path));
  }
  if (cfg.problem == "beam") return make_beam_problem();
  throw ConfigError("config: unknown problem selector '" + cfg.problem + "'");
}

inline std::vector<TraceRow> run_single(const ProblemDef& p, const ExperimentConfig& cfg,
                                        std::uint64_t seed) {
  switch (cfg.method) {
    case Method::Lcbo:
      return lcbo_trace(p, cfg, seed);
    case Method::RandomSearch:
      return random_search_baseline(p, cfg.budget, seed, cfg.judge_noisy,
                                    cfg.equality_feasibility_tol);
  }
  throw std::logic_error("unknown method");
}

inline void write_convergence_svg(const std::string& path, const std::vector<AggregateRow>& rows);

struct ExperimentResult {
  std::vector<std::vector<TraceRow>> traces;  // per repetition
  std::vector<AggregateRow> aggregate;
};

/// Runs all repetitions (seed r uses base_seed + r), writes one trace CSV
/// per seed plus the aggregate CSV, optionally a convergence plot. Output
/// is deterministic for a given config, independent of the job count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const ProblemDef p = make_problem(cfg);
  std::filesystem::create_directories(cfg.out_dir);

  ExperimentResult result;
  result.traces.resize(static_cast<std::size_t>(cfg.repetitions));

  const int jobs = std::max(1, std::min(cfg.jobs, cfg.repetitions));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&](int begin, int stride) {
    for (int r = begin; r < cfg.repetitions; r += stride) {
      try {
        result.traces[static_cast<std::size_t>(r)] =
            run_single(p, cfg, cfg.base_seed + static_cast<std::uint64_t>(r));
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (jobs == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker, j, jobs);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (int r = 0; r < cfg.repetitions; ++r) {
    const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(r);
    write_trace_csv(cfg.out_dir + "/trace_seed" + std::to_string(seed) + ".csv",
                    result.traces[static_cast<std::size_t>(r)]);
  }
  result.aggregate = aggregate_traces(result.traces);
  write_aggregate_csv(cfg.out_dir + "/aggregate.csv", result.aggregate);
  if (cfg.plots) write_convergence_svg(cfg.out_dir + "/convergence.svg", result.aggregate);
  return result;
}

// ---- config file ----------------------------------------------------------

/// Key/value config format: one `key = value` pair per line, '#' comments.
inline ExperimentConfig parse_experiment_config(std::istream& in,
                                                ExperimentConfig base = ExperimentConfig{}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      std::istringstream probe(line);
      std::string tok;
      if (probe >> tok)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");

    auto as_int = [&](const std::string& v) {
      try {
        return std::stoi(v);
      } catch (...) {
        throw ConfigError("config: bad integer for " + key + ": " + v);
      }
    };
    auto as_double = [&](const std::string& v) {
      try {
        return std::stod(v);
      } catch (...) {
        throw ConfigError("config: bad number for " + key + ": " + v);
      }
    };
    auto as_bool = [&](const std::string& v) {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw ConfigError("config: bad boolean for " + key + ": " + v);
    };

    if (key == "problem") base.problem = value;
    else if (key == "dim") base.dim = as_int(value);
    else if (key == "problem_seed") base.problem_seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "truss_file") base.truss_file = value;
    else if (key == "method") {
      if (value == "lcbo") base.method = Method::Lcbo;
      else if (value == "random_search") base.method = Method::RandomSearch;
      else throw ConfigError("config: unknown method '" + value + "'");
    }
    else if (key == "budget") base.budget = as_int(value);
    else if (key == "reps") base.repetitions = as_int(value);
    else if (key == "seed") base.base_seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (key == "out") base.out_dir = value;
    else if (key == "plots") base.plots = as_bool(value);
    else if (key == "judge_noisy") base.judge_noisy = as_bool(value);
    else if (key == "equality_feasibility_tol") base.equality_feasibility_tol = as_double(value);
    else if (key == "jobs") base.jobs = as_int(value);
    else if (key == "step_scale") base.lcbo.step_scale = as_double(value);
    else if (key == "step_mode") {
      if (value == "decaying") base.lcbo.step_mode = StepMode::Decaying;
      else if (value == "constant") base.lcbo.step_mode = StepMode::Constant;
      else throw ConfigError("config: unknown step_mode '" + value + "'");
    }
    else if (key == "penalty_scale") base.lcbo.penalty_scale = as_double(value);
    else if (key == "penalty_exponent") base.lcbo.penalty_exponent = as_double(value);
    else if (key == "batch_schedule") {
      if (value == "fixed") base.lcbo.batch_schedule = BatchSchedule::Fixed;
      else if (value == "large") base.lcbo.batch_schedule = BatchSchedule::Large;
      else if (value == "growing") base.lcbo.batch_schedule = BatchSchedule::Growing;
      else if (value == "theoretical") base.lcbo.batch_schedule = BatchSchedule::Theoretical;
      else throw ConfigError("config: unknown batch_schedule '" + value + "'");
    }
    else if (key == "b1") base.lcbo.fixed_b1 = as_int(value);
    else if (key == "b2") base.lcbo.fixed_b2 = as_int(value);
    else if (key == "window") base.lcbo.window = as_int(value);
    else if (key == "local_radius") base.lcbo.local_radius = as_double(value);
    else if (key == "refit_period") base.lcbo.refit_period = as_int(value);
    else if (key == "noise_var") base.lcbo.noise_var = as_double(value);
    else if (key == "ground_truth_hypers") base.lcbo.use_ground_truth_hypers = as_bool(value);
    else if (key == "lse_temperature") base.lcbo.lse_temperature = as_double(value);
    else if (key == "acq_restarts") base.lcbo.acq_restarts = as_int(value);
    else if (key == "acq_max_steps") base.lcbo.acq_max_steps = as_int(value);
    else if (key == "acq_step_length") base.lcbo.acq_step_length = as_double(value);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  return base;
}

}  // namespace lcbo

#include "lcbo/svgplot.hpp"
