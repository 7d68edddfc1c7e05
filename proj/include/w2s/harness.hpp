#pragma once

// Experiment orchestration behind the w2s_lab command line tool: JSON
// configuration, the replication sweep over u, phase-diagram rasters, tail
// tables and clean-fit survival traces. Every command produces CSV tables whose
// bytes depend only on the configuration and the seed.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "w2s/csv.hpp"
#include "w2s/diagnostics.hpp"
#include "w2s/ensemble.hpp"
#include "w2s/error.hpp"
#include "w2s/interpolator.hpp"
#include "w2s/pipeline.hpp"
#include "w2s/random.hpp"
#include "w2s/regimes.hpp"
#include "w2s/stats.hpp"
#include "w2s/tails.hpp"

namespace w2s::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigInvalid = 2;
inline constexpr int kExitTotalFailure = 3;
inline constexpr int kExitPartialFailure = 4;

struct DiagnoseSection {
  std::vector<std::size_t> n_grid{50, 100, 200, 400};
  std::size_t trials = 32;
  std::size_t n_test = 100;
};

struct TailsSection {
  std::vector<std::size_t> N{100, 1000, 10000};
  std::vector<double> rho0{0.3, 0.5, 0.7};
  std::vector<double> delta0{0.0, 0.25, 0.5};
  std::size_t samples = 100000;
  tails::QuadratureOptions quadrature;
};

struct RegimesSection {
  regimes::AxisSpec axis1{"p", 1.5, 4.0, 51};
  regimes::AxisSpec axis2{"u", 1.0, 2.5, 51};
  regimes::RegimeInputs fixed{2.0, 0.9, 0.8, 1.4, 0.9, 0.4, 1.5, 0.0};
};

struct ExperimentConfig {
  /// Ensemble, mode and class count; `w2s.u` is replaced by each u_grid entry.
  W2SConfig w2s;
  std::vector<double> u_grid{1.0, 1.075, 1.15, 1.225, 1.3};
  std::size_t trials_weak = 8;
  std::size_t trials_wts = 16;
  std::size_t n_test = 100;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  bool clean_m = true;
  bool clean_n = true;
  bool averaging = true;
  bool soft_pseudolabels = false;
  DiagnoseSection diagnose;
  TailsSection tails;
  RegimesSection regimes;
};

namespace detail {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config_invalid, std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void read_exponents(const nlohmann::json& j, const char* key, Exponents& e) {
  if (!j.contains(key)) return;
  const auto& s = j.at(key);
  if (!s.is_object()) fail(ErrorKind::config_invalid, std::string("'") + key + "' must be an object");
  read(s, "p", e.p);
  read(s, "q", e.q);
  read(s, "r", e.r);
}

inline void read_axis(const nlohmann::json& j, const char* key, regimes::AxisSpec& a) {
  if (!j.contains(key)) return;
  const auto& s = j.at(key);
  read(s, "name", a.name);
  read(s, "min", a.min);
  read(s, "max", a.max);
  read(s, "steps", a.steps);
}

}  // namespace detail

/// Checks the structural invariants of an experiment configuration.
inline void validate(const ExperimentConfig& c) {
  if (c.trials_weak < 1 || c.trials_wts < 1) fail(ErrorKind::config_invalid, "trial counts must be >= 1");
  if (c.n_test < 1) fail(ErrorKind::config_invalid, "n_test must be >= 1");
  if (c.parallelism < 1) fail(ErrorKind::config_invalid, "parallelism must be >= 1");
  if (c.u_grid.empty()) fail(ErrorKind::config_invalid, "u_grid is empty");
  for (std::size_t i = 1; i < c.u_grid.size(); ++i) {
    if (!(c.u_grid[i] > c.u_grid[i - 1])) fail(ErrorKind::config_invalid, "u_grid must be strictly increasing");
  }
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::config_invalid, "configuration must be a JSON object");
  ExperimentConfig c;
  detail::read(j, "n", c.w2s.n);
  detail::read_exponents(j, "strong", c.w2s.strong);
  detail::read_exponents(j, "weak", c.w2s.weak);
  detail::read(j, "u_grid", c.u_grid);
  if (j.contains("mode")) {
    std::string mode;
    detail::read(j, "mode", mode);
    if (mode == "binary") c.w2s.mode = Mode::binary;
    else if (mode == "multilabel") c.w2s.mode = Mode::multilabel;
    else if (mode == "multiclass") c.w2s.mode = Mode::multiclass;
    else fail(ErrorKind::config_invalid, "unknown mode '" + mode + "'");
  }
  detail::read(j, "k", c.w2s.k);
  if (j.contains("t") && !j.at("t").is_null()) {
    double t = 0.0;
    detail::read(j, "t", t);
    c.w2s.t = t;
  }
  detail::read(j, "c_k", c.w2s.c_k);
  detail::read(j, "trials_weak", c.trials_weak);
  detail::read(j, "trials_wts", c.trials_wts);
  detail::read(j, "n_test", c.n_test);
  detail::read(j, "seed", c.seed);
  detail::read(j, "parallelism", c.parallelism);
  if (j.contains("baselines")) {
    const auto& b = j.at("baselines");
    detail::read(b, "clean_m", c.clean_m);
    detail::read(b, "clean_n", c.clean_n);
    detail::read(b, "averaging", c.averaging);
  }
  detail::read(j, "soft_pseudolabels", c.soft_pseudolabels);
  if (j.contains("diagnose")) {
    const auto& d = j.at("diagnose");
    detail::read(d, "n_grid", c.diagnose.n_grid);
    detail::read(d, "trials", c.diagnose.trials);
    detail::read(d, "n_test", c.diagnose.n_test);
  }
  if (j.contains("tails")) {
    const auto& t = j.at("tails");
    detail::read(t, "N", c.tails.N);
    detail::read(t, "rho0", c.tails.rho0);
    detail::read(t, "delta0", c.tails.delta0);
    detail::read(t, "samples", c.tails.samples);
    if (t.contains("quadrature")) {
      const auto& q = t.at("quadrature");
      detail::read(q, "max_depth", c.tails.quadrature.max_depth);
      detail::read(q, "absolute_target", c.tails.quadrature.absolute_target);
    }
  }
  if (j.contains("regimes")) {
    const auto& r = j.at("regimes");
    detail::read_axis(r, "axis1", c.regimes.axis1);
    detail::read_axis(r, "axis2", c.regimes.axis2);
    if (r.contains("fixed")) {
      const auto& f = r.at("fixed");
      auto& in = c.regimes.fixed;
      detail::read(f, "p", in.p);
      detail::read(f, "q", in.q);
      detail::read(f, "r", in.r);
      detail::read(f, "p_w", in.p_w);
      detail::read(f, "q_w", in.q_w);
      detail::read(f, "r_w", in.r_w);
      detail::read(f, "u", in.u);
      detail::read(f, "t", in.t);
    }
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::config_invalid, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config_invalid, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any body is rethrown after all workers stop.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Tables produced by one command plus the per-row failure tally.
struct CommandResult {
  csv::Table table{{}};
  std::optional<csv::Table> aggregate;
  std::size_t rows = 0;
  std::size_t failed_rows = 0;

  int exit_code() const noexcept {
    if (rows > 0 && failed_rows == rows) return kExitTotalFailure;
    if (failed_rows > 0) return kExitPartialFailure;
    return kExitOk;
  }
};

inline std::string status_of(const Error& e) { return std::string(to_string(e.kind())); }

// ---------------------------------------------------------------------------
// replicate-appendix-e

inline const std::vector<std::string>& replicate_header() {
  static const std::vector<std::string> h{"u",        "m",  "model", "trial_weak",
                                          "trial_wts", "accuracy", "su",    "cn",
                                          "pseudolabel_agreement", "seed_used", "status"};
  return h;
}

inline bool is_hypothesis(const std::string& name) {
  return name == "q+r>u" || name == "q_w+r_w>1" || name == regimes::kCapHypothesis || name == "u>1";
}

inline regimes::RegimeInputs regime_inputs(const W2SConfig& c) {
  regimes::RegimeInputs in;
  in.p = c.strong.p;
  in.q = c.strong.q;
  in.r = c.strong.r;
  in.p_w = c.weak.p;
  in.q_w = c.weak.q;
  in.r_w = c.weak.r;
  in.u = c.u;
  in.t = c.mode == Mode::multiclass && c.t ? *c.t : 0.0;
  return in;
}

struct ReplicateRow {
  std::string model;
  std::int64_t trial_wts = -1;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double su = std::numeric_limits<double>::quiet_NaN();
  double cn = std::numeric_limits<double>::quiet_NaN();
  double agreement = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed_used = 0;
  std::string status = "ok";
};

namespace detail {

inline void fill_sucn(ReplicateRow& row, const std::vector<LinearModel>& models, const Levels& levels) {
  const SuCn sc = contamination(models.front(), levels, 0);
  row.su = sc.su;
  row.cn = sc.cn;
}

inline ReplicateRow evaluate(std::string model, std::int64_t trial_wts, const std::vector<LinearModel>& models,
                             const Levels& levels, const EnsembleSampler& sampler, std::size_t n_test,
                             random::StreamKey test_key, std::uint64_t seed_used) {
  ReplicateRow row;
  row.model = std::move(model);
  row.trial_wts = trial_wts;
  row.seed_used = seed_used;
  row.accuracy = empirical_accuracy(models, sampler, n_test, test_key).accuracy;
  fill_sucn(row, models, levels);
  return row;
}

}  // namespace detail

/// The replication sweep: for every u of the grid, trials_weak weak models and
/// for each of them trials_wts weak-to-strong runs.
///
/// Keys: weak training set (trial_weak), unlabelled pool (u, trial_weak,
/// trial_wts) and test points per row; the weak model is shared across u.
/// Rows for one (u, trial_weak) are: weak, strong_clean_n, then per trial_wts
/// wts_mni, wts_avg, strong_clean_m (baselines only when enabled).
inline CommandResult replicate(const ExperimentConfig& cfg, bool force = false) {
  validate(cfg);
  const random::StreamKey base{cfg.seed};

  std::vector<std::string> phases;
  std::size_t in_theory = 0;
  for (double u : cfg.u_grid) {
    W2SConfig c = cfg.w2s;
    c.u = u;
    std::string structural;
    bool ok = true;
    for (const auto& v : validate_w2s(c)) {
      if (is_hypothesis(v.name)) ok = false;
      else structural += (structural.empty() ? "" : "; ") + v.name + " (" + v.detail + ")";
    }
    if (!structural.empty()) fail(ErrorKind::config_invalid, "invalid ensemble: " + structural);
    const auto verdict = regimes::classify_w2s(regime_inputs(c));
    in_theory += ok;
    phases.push_back(regimes::to_string(verdict.phase));
  }
  if (in_theory == 0 && !force) {
    fail(ErrorKind::config_invalid, "every u in the grid violates the theorem hypotheses (use --force)");
  }

  const W2SConfig& base_cfg = cfg.w2s;
  const std::size_t U = cfg.u_grid.size(), TW = cfg.trials_weak, TS = cfg.trials_wts;

  // Weak models, one per outer trial.
  std::vector<std::optional<WeakFit>> weak(TW);
  std::vector<std::string> weak_status(TW, "ok");
  {
    W2SConfig c = base_cfg;
    c.u = cfg.u_grid.front();
    const EnsembleSampler sampler(c);
    parallel_for(TW, cfg.parallelism, [&](std::size_t tw) {
      try {
        weak[tw] = train_weak(sampler, stage_key(base, Stage::weak_train, 0, tw, 0));
      } catch (const Error& e) {
        if (!e.is_numerical()) throw;
        weak_status[tw] = status_of(e);
      }
    });
  }

  const RunOptions options{cfg.clean_m, cfg.clean_n, cfg.averaging, cfg.soft_pseudolabels};
  const std::size_t per_outer = 1 + (cfg.clean_n ? 1 : 0);
  const std::size_t per_inner = 1 + (cfg.averaging ? 1 : 0) + (cfg.clean_m ? 1 : 0);
  const std::size_t per_block = per_outer + TS * per_inner;
  std::vector<ReplicateRow> rows(U * TW * per_block);

  // One work item per (u, trial_weak, slot) where slot TS is the weak-side rows.
  parallel_for(U * TW * (TS + 1), cfg.parallelism, [&](std::size_t item) {
    const std::size_t slot = item % (TS + 1);
    const std::size_t tw = (item / (TS + 1)) % TW;
    const std::size_t ui = item / ((TS + 1) * TW);
    W2SConfig c = base_cfg;
    c.u = cfg.u_grid[ui];
    const EnsembleSampler sampler(c);
    ReplicateRow* block = &rows[(ui * TW + tw) * per_block];
    const std::uint64_t weak_seed = stage_key(base, Stage::weak_train, 0, tw, 0).value;

    if (!weak[tw]) {
      auto mark = [&](ReplicateRow& r, std::string model, std::int64_t ts) {
        r.model = std::move(model);
        r.trial_wts = ts;
        r.seed_used = weak_seed;
        r.status = weak_status[tw];
      };
      if (slot == TS) {
        mark(block[0], "weak", -1);
        if (cfg.clean_n) mark(block[1], "strong_clean_n", -1);
      } else {
        ReplicateRow* r = block + per_outer + slot * per_inner;
        std::size_t i = 0;
        mark(r[i++], "wts_mni", static_cast<std::int64_t>(slot));
        if (cfg.averaging) mark(r[i++], "wts_avg", static_cast<std::int64_t>(slot));
        if (cfg.clean_m) mark(r[i++], "strong_clean_m", static_cast<std::int64_t>(slot));
      }
      return;
    }
    const WeakFit& wf = *weak[tw];

    if (slot == TS) {
      const auto test_key = stage_key(base, Stage::weak_test, ui, tw, 0);
      block[0] = detail::evaluate("weak", -1, wf.models, sampler.weak(), sampler, cfg.n_test, test_key, weak_seed);
      if (cfg.clean_n) {
        try {
          const auto f = fit_mni_heads(wf.batch.strong_X, clean_targets(wf.batch, c.mode));
          block[1] = detail::evaluate("strong_clean_n", -1, f, sampler.strong(), sampler, cfg.n_test, test_key, weak_seed);
        } catch (const Error& e) {
          if (!e.is_numerical()) throw;
          block[1].model = "strong_clean_n";
          block[1].seed_used = weak_seed;
          block[1].status = status_of(e);
        }
      }
      return;
    }

    const auto pool_key = stage_key(base, Stage::unlabeled, ui, tw, slot);
    const auto test_key = stage_key(base, Stage::test, ui, tw, slot);
    const auto ts = static_cast<std::int64_t>(slot);
    ReplicateRow* r = block + per_outer + slot * per_inner;
    RunOptions inner = options;
    inner.clean_n = false;
    try {
      const W2SRun run = train_w2s_from_weak(sampler, wf, pool_key, inner);
      std::size_t i = 0;
      r[i] = detail::evaluate("wts_mni", ts, run.f_wts, sampler.strong(), sampler, cfg.n_test, test_key, pool_key.value);
      r[i++].agreement = run.pseudolabel_agreement;
      if (cfg.averaging) {
        r[i] = detail::evaluate("wts_avg", ts, *run.f_wts_avg, sampler.strong(), sampler, cfg.n_test, test_key,
                                pool_key.value);
        r[i++].agreement = run.pseudolabel_agreement;
      }
      if (cfg.clean_m) {
        r[i++] = detail::evaluate("strong_clean_m", ts, *run.f_strong_clean_m, sampler.strong(), sampler, cfg.n_test,
                                  test_key, pool_key.value);
      }
    } catch (const Error& e) {
      if (!e.is_numerical()) throw;
      std::size_t i = 0;
      for (const char* model : {"wts_mni", "wts_avg", "strong_clean_m"}) {
        const std::string name = model;
        if ((name == "wts_avg" && !cfg.averaging) || (name == "strong_clean_m" && !cfg.clean_m)) continue;
        r[i] = ReplicateRow{};
        r[i].model = name;
        r[i].trial_wts = ts;
        r[i].seed_used = pool_key.value;
        r[i].status = status_of(e);
        ++i;
      }
    }
  });

  CommandResult out;
  out.table = csv::Table(replicate_header());
  csv::Table agg({"u", "m", "model", "count", "mean_accuracy", "ci_low", "ci_high", "phase"});
  for (std::size_t ui = 0; ui < U; ++ui) {
    W2SConfig c = base_cfg;
    c.u = cfg.u_grid[ui];
    const std::size_t m = c.m();
    std::vector<std::string> order;
    std::vector<std::vector<double>> acc;
    for (std::size_t tw = 0; tw < TW; ++tw) {
      for (std::size_t k = 0; k < per_block; ++k) {
        const ReplicateRow& r = rows[(ui * TW + tw) * per_block + k];
        out.table.row() << c.u << m << r.model << tw << r.trial_wts << r.accuracy << r.su << r.cn << r.agreement
                        << r.seed_used << r.status;
        ++out.rows;
        if (r.status != "ok") {
          ++out.failed_rows;
          continue;
        }
        auto it = std::find(order.begin(), order.end(), r.model);
        if (it == order.end()) {
          order.push_back(r.model);
          acc.emplace_back();
          it = order.end() - 1;
        }
        acc[static_cast<std::size_t>(it - order.begin())].push_back(r.accuracy);
      }
    }
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& xs = acc[k];
      const double mean = stats::mean(xs);
      stats::Interval ci{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
      if (xs.size() >= 2) ci = stats::mean_ci95(xs);
      agg.row() << c.u << m << order[k] << xs.size() << mean << ci.low << ci.high << phases[ui];
    }
  }
  out.aggregate = std::move(agg);
  return out;
}

// ---------------------------------------------------------------------------
// regimes

inline CommandResult regimes_table(const ExperimentConfig& cfg) {
  const auto& rs = cfg.regimes;
  const auto cells = regimes::sweep(rs.axis1, rs.axis2, rs.fixed);
  CommandResult out;
  out.table = csv::Table({"axis1", "axis2", "phase", "tau_strong", "tau_weak", "tau_w2s", "threshold_u", "weak_fails",
                          "capability", "pca_fails", "strong_fails_n_clean", "nonvacuous", "violated", "axis1_name",
                          "axis2_name"});
  for (const auto& cell : cells) {
    const auto& v = cell.verdict;
    std::string violated;
    for (const auto& name : v.violated) violated += (violated.empty() ? "" : ";") + name;
    out.table.row() << cell.axis1 << cell.axis2 << regimes::to_string(v.phase) << v.tau_strong << v.tau_weak
                    << v.tau_w2s << v.threshold_u << v.flags.weak_fails << v.flags.capability << v.flags.pca_fails
                    << v.flags.strong_fails_n_clean << v.flags.nonvacuous << violated << rs.axis1.name
                    << rs.axis2.name;
    ++out.rows;
  }
  return out;
}

// ---------------------------------------------------------------------------
// tails

/// One row per (N, rho0, delta0) at t = t_N(delta0).
inline CommandResult tails_table(const ExperimentConfig& cfg) {
  const auto& ts = cfg.tails;
  if (ts.N.empty() || ts.rho0.empty() || ts.delta0.empty()) fail(ErrorKind::empty_grid, "tails grid is empty");
  if (ts.samples < 1000) fail(ErrorKind::config_invalid, "tails.samples must be >= 1000");
  struct Cell {
    tails::TailParams params;
    tails::TailBound bound;
    double exact = std::numeric_limits<double>::quiet_NaN();
    tails::McEstimate mc;
    std::string status = "ok";
  };
  std::vector<Cell> cells;
  for (std::size_t N : ts.N) {
    if (N < 3) fail(ErrorKind::config_invalid, "tails.N entries must be >= 3");
    for (double rho0 : ts.rho0) {
      for (double delta0 : ts.delta0) {
        Cell c;
        try {
          c.params = tails::make_tail_params(N, rho0, delta0);
        } catch (const Error& e) {
          fail(ErrorKind::config_invalid, e.what());
        }
        c.bound = tails::tail_bound(c.params);
        cells.push_back(c);
      }
    }
  }
  const random::StreamKey base{cfg.seed};
  parallel_for(cells.size(), cfg.parallelism, [&](std::size_t i) {
    Cell& c = cells[i];
    const auto& p = c.params;
    try {
      c.exact = tails::exact_tail_quadrature(p.N, p.rho0, p.t_N, ts.quadrature);
    } catch (const Error& e) {
      if (!e.is_numerical()) throw;
      c.status = status_of(e);
    }
    c.mc = tails::mc_tail_estimate(p.N, p.rho0, p.t_N, ts.samples, stage_key(base, Stage::probe, i, 0, 0));
  });
  CommandResult out;
  out.table = csv::Table({"N", "rho0", "delta0", "t", "bound_raw", "bound_clipped", "exact_quadrature", "mc_estimate",
                          "mc_stderr", "status"});
  for (const Cell& c : cells) {
    out.table.row() << c.params.N << c.params.rho0 << c.params.delta0 << c.params.t_N << c.bound.raw
                    << c.bound.clipped << c.exact << c.mc.estimate << c.mc.std_error << c.status;
    ++out.rows;
    out.failed_rows += c.status != "ok";
  }
  return out;
}

// ---------------------------------------------------------------------------
// diagnose

/// mu_n^2 n^{r-1} + n^{1-p}, the order of the squared contamination of a clean fit.
inline double contamination_lower_bound(const Levels& lv, std::size_t n, const Exponents& e) {
  const double nn = static_cast<double>(n);
  return lv.mu * lv.mu * std::pow(nn, e.r - 1.0) + std::pow(nn, 1.0 - e.p);
}

/// Clean binary fits of the strong ensemble across diagnose.n_grid.
inline CommandResult diagnose_table(const ExperimentConfig& cfg) {
  const auto& ds = cfg.diagnose;
  if (ds.n_grid.empty() || ds.trials < 1) fail(ErrorKind::empty_grid, "diagnose grid is empty");
  if (ds.n_test < 1) fail(ErrorKind::config_invalid, "diagnose.n_test must be >= 1");
  for (std::size_t n : ds.n_grid) {
    try {
      derive_levels({n, cfg.w2s.strong});
    } catch (const Error& e) {
      fail(ErrorKind::config_invalid, e.what());
    }
  }
  const random::StreamKey base{cfg.seed};
  const std::size_t total = ds.n_grid.size() * ds.trials;
  std::vector<std::optional<CleanTrace>> traces(total);
  std::vector<std::string> status(total, "ok");
  parallel_for(total, cfg.parallelism, [&](std::size_t i) {
    const std::size_t ni = i / ds.trials, trial = i % ds.trials;
    try {
      traces[i] = trace_clean_fit({ds.n_grid[ni], cfg.w2s.strong}, ds.n_test,
                                  stage_key(base, Stage::clean_train, ni, trial, 0),
                                  stage_key(base, Stage::test, ni, trial, 0));
    } catch (const Error& e) {
      if (!e.is_numerical()) throw;
      status[i] = status_of(e);
    }
  });
  CommandResult out;
  out.table = csv::Table({"n", "trial", "d", "s", "su", "cn", "total_var", "ratio", "closed_form_accuracy",
                          "empirical_accuracy", "mu", "cn_lower_bound", "seed_used", "status"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t ni = i / ds.trials, trial = i % ds.trials;
    const std::size_t n = ds.n_grid[ni];
    const Levels lv = derive_levels({n, cfg.w2s.strong});
    const std::uint64_t seed = stage_key(base, Stage::clean_train, ni, trial, 0).value;
    const double bound = contamination_lower_bound(lv, n, cfg.w2s.strong);
    if (traces[i]) {
      const auto& t = *traces[i];
      out.table.row() << n << trial << lv.d << lv.s << t.sucn.su << t.sucn.cn << t.sucn.total_var << t.sucn.ratio
                      << t.closed_form << t.empirical.accuracy << lv.mu << bound << seed << status[i];
    } else {
      out.table.row() << n << trial << lv.d << lv.s << nan << nan << nan << nan << nan << nan << lv.mu << bound << seed
                      << status[i];
      ++out.failed_rows;
    }
    ++out.rows;
  }
  return out;
}

// ---------------------------------------------------------------------------
// command dispatch

inline std::string aggregate_path(const std::string& out) {
  const auto slash = out.find_last_of('/');
  const auto dot = out.find_last_of('.');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? out.substr(0, dot) : out) + "_aggregate.csv";
}

/// Runs one command, writes its CSV output(s) and returns the exit code.
/// Errors are reported on `log` rather than thrown.
inline int run_command(const std::string& command, const ExperimentConfig& cfg, const std::string& out_path,
                       bool force, std::ostream& log) {
  try {
    CommandResult result;
    if (command == "replicate-appendix-e") result = replicate(cfg, force);
    else if (command == "regimes") result = regimes_table(cfg);
    else if (command == "tails") result = tails_table(cfg);
    else if (command == "diagnose") result = diagnose_table(cfg);
    else fail(ErrorKind::config_invalid, "unknown command '" + command + "'");
    result.table.write(out_path);
    if (result.aggregate) result.aggregate->write(aggregate_path(out_path));
    if (result.failed_rows > 0) {
      log << result.failed_rows << " of " << result.rows << " rows failed numerically\n";
    }
    return result.exit_code();
  } catch (const Error& e) {
    log << e.what() << "\n";
    return e.is_numerical() ? kExitTotalFailure : kExitConfigInvalid;
  }
}

}  // namespace w2s::harness
