#pragma once

// Experiment runner: config parsing (flat key = value file with one section
// per subcommand, command-line flags take precedence), dispatch to the
// checkers / simulator / coupling harness / bound verdicts, and reproducible
// artifacts on disk. Every run writes the fully resolved config plus a
// manifest next to its outputs; data files (CSV/JSON) are byte-deterministic
// for a fixed config, independent of the worker count. Environment overrides:
// NSFDE_OUTDIR (output directory) and NSFDE_WORKERS (worker count) only.
//
// Exit codes: 0 on PASS verdicts, 1 on FAIL, 2 on error.

#include <nsfde/nsfde.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <bit>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nsfde::cli {

using nlohmann::json;

struct CliConfig {
  std::string subcommand;
  // model
  std::string model = "point_delay";
  std::size_t d = 1;
  double r = 1.0;
  double kappa = 0.1;
  double tau = 1.0;
  double a = -1.0;      // drift A = a*I
  double bcoef = 0.5;   // drift B = b*I
  double sigma0 = 0.2;  // additive noise
  double sigma1 = 0.3;  // multiplicative noise, Sigma1 = sigma1*I
  double rate = 1.0;    // ou
  double noise = 0.5;   // ou
  double growth = 0.5;  // exp
  double L = 0.0;       // declared coercivity; 0 = derived default
  std::vector<double> xi{1.0};  // constant initial data (broadcast to d)
  // discretization / Monte Carlo
  std::uint64_t n = 0;  // 0 = ceil(r/ln2) rounded up to a power of two
  double T = 2.0;
  double R = 0.0;  // 0 = 12 * max(||xi||_r, 1)
  std::uint64_t paths = 100;
  std::uint64_t seed = 0;
  double tol = 1e-10;
  double eps_fix = 1e-12;
  bool halt_on_stop = false;
  std::string outdir = "out";
  // check
  std::uint64_t trials = 10000;
  double radius = 2.0;
  std::uint64_t knots = 17;
  double span = 6.0;
  // converge
  std::vector<std::uint64_t> levels{64, 128};
  std::uint64_t fine = 0;  // 0 = lcm of levels
  std::vector<double> eps_list{0.01, 0.05, 0.1};
  bool nonexplosion = false;
  std::vector<double> R_list;
  // bounds
  double epsilon = 0.5;
  double T_growth = 16.0;
  std::uint64_t n_growth = 64;
  std::uint64_t paths_growth = 0;  // 0 = paths
  double xi_norm_sq = -1.0;        // <0 = fading_norm(xi)^2

  unsigned workers() const { return worker_count_from_env(); }
};

inline std::uint64_t default_resolution(double r) {
  const auto need = static_cast<std::uint64_t>(std::ceil(r / std::log(2.0)));
  return std::bit_ceil(std::max<std::uint64_t>(need, 1));
}

inline InitialData build_initial(const CliConfig& c) {
  Vec xi = c.xi;
  if (xi.size() == 1 && c.d > 1) xi.assign(c.d, c.xi[0]);
  if (xi.size() != c.d)
    throw ConfigError("xi: expected 1 or d components, got " +
                      std::to_string(xi.size()));
  return InitialData::constant(xi);
}

inline double derived_L(const CliConfig& c) {
  // coarse analytic coercivity bound for the linear family; the check
  // subcommand validates it by sampling
  const double edelay = std::exp(c.r * c.tau);
  const double kk = c.model == "point_delay" ? c.kappa * edelay
                    : c.model == "fading_average" ? c.kappa
                                                  : 0.0;
  const double drift = 2.0 * (1.0 + kk) * (std::abs(c.a) + std::abs(c.bcoef) * edelay);
  const double diff = 2.0 * c.sigma0 * c.sigma0 + 2.0 * c.sigma1 * c.sigma1;
  return std::max({drift, diff, 1e-12});
}

inline ModelSpec build_model(const CliConfig& c) {
  const double L = c.L > 0.0 ? c.L : derived_L(c);
  const Mat A = Mat::scaled_identity(c.d, c.a);
  const Mat B = Mat::scaled_identity(c.d, c.bcoef);
  const Vec s0(c.d, c.sigma0);
  const Mat s1 = Mat::scaled_identity(c.d, c.sigma1);
  if (c.model == "point_delay")
    return point_delay_neutral(c.d, c.kappa, c.tau, A, B, s0, s1, c.r, L);
  if (c.model == "fading_average")
    return fading_average_neutral(c.d, c.kappa, A, B, c.tau, s0, s1, c.r, L);
  if (c.model == "zero")
    return zero_neutral(c.d, A, B, c.tau, s0, s1, c.r, L);
  if (c.model == "ou") {
    if (c.d != 1) throw ConfigError("model ou: scalar only (d = 1)");
    return ou_model(c.rate, c.noise, c.r);
  }
  if (c.model == "exp") {
    if (c.d != 1) throw ConfigError("model exp: scalar only (d = 1)");
    return deterministic_exponential(c.growth, c.r);
  }
  throw ConfigError("model: unknown id '" + c.model +
                    "' (point_delay|fading_average|zero|ou|exp)");
}

/// Applies defaults and re-validates the numeric constraints owned by the
/// downstream modules, naming the offending key.
inline void resolve(CliConfig& c) {
  if (const char* env = std::getenv("NSFDE_OUTDIR")) c.outdir = env;
  if (!(c.r > 0.0)) throw ConfigError("r: must be > 0");
  if (c.n == 0) c.n = default_resolution(c.r);
  if (static_cast<double>(c.n) < c.r / std::log(2.0))
    throw ConfigError("n: must satisfy n >= r/ln 2 = " +
                      std::to_string(c.r / std::log(2.0)));
  if (!(c.T > 0.0)) throw ConfigError("T: must be > 0");
  const double steps = c.T * static_cast<double>(c.n);
  if (std::abs(steps - std::llround(steps)) > 1e-9)
    throw ConfigError("T: T*n must be an integer number of steps");
  if (c.paths < 1) throw ConfigError("paths: must be >= 1");
  if (!(c.tol > 0.0)) throw ConfigError("tol: must be > 0");
  if (!(c.eps_fix > 0.0)) throw ConfigError("eps-fix: must be > 0");
  // model constraints surface early with key names
  if (c.model == "point_delay" && c.kappa * std::exp(c.r * c.tau) >= 1.0)
    throw ConfigError("kappa: kappa*e^{r tau} must be < 1 (neutral contraction)");
  if (c.model == "fading_average" && c.kappa >= 1.0)
    throw ConfigError("kappa: must be < 1 (neutral contraction)");
  HistoryPath probe(build_initial(c), c.r);
  const double xi_norm = probe.initial_norm();
  if (c.R == 0.0) c.R = 12.0 * std::max(xi_norm, 1.0);
  if (!(c.R > 3.0 * xi_norm))
    throw ConfigError(
        "R: stopping radius requires R > 3*||xi||_r = " +
        std::to_string(3.0 * xi_norm) +
        " (the monitors fire once |x| or ||x_t||_r reaches R/3)");
  if (c.xi_norm_sq < 0.0) c.xi_norm_sq = xi_norm * xi_norm;
  if (c.subcommand == "converge" && !c.nonexplosion) {
    if (c.levels.size() < 2)
      throw ConfigError("levels: need at least two resolutions");
    for (auto lv : c.levels)
      if (static_cast<double>(lv) < c.r / std::log(2.0))
        throw ConfigError("levels: every resolution must satisfy n >= r/ln 2");
  }
  if (c.subcommand == "converge" && c.nonexplosion && c.R_list.empty()) {
    c.R_list = {4.0 * std::max(xi_norm, 1.0), 8.0 * std::max(xi_norm, 1.0),
                16.0 * std::max(xi_norm, 1.0), 32.0 * std::max(xi_norm, 1.0)};
  }
  if (c.paths_growth == 0) c.paths_growth = c.paths;
}

// ---------------------------------------------------------------------------
// serialization helpers
// ---------------------------------------------------------------------------

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string join17(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt17(v[i]);
  }
  return out;
}

inline std::string join_u64(const std::vector<std::uint64_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

/// Flat key = value echo of the resolved config, one section per subcommand,
/// keys sorted; byte-deterministic.
inline void write_resolved_config(const CliConfig& c,
                                  const std::filesystem::path& file) {
  std::map<std::string, std::string> kv;
  kv["model"] = c.model;
  kv["d"] = std::to_string(c.d);
  kv["r"] = fmt17(c.r);
  kv["kappa"] = fmt17(c.kappa);
  kv["tau"] = fmt17(c.tau);
  kv["a"] = fmt17(c.a);
  kv["bcoef"] = fmt17(c.bcoef);
  kv["sigma0"] = fmt17(c.sigma0);
  kv["sigma1"] = fmt17(c.sigma1);
  kv["rate"] = fmt17(c.rate);
  kv["noise"] = fmt17(c.noise);
  kv["growth"] = fmt17(c.growth);
  kv["L"] = fmt17(c.L);
  kv["xi"] = join17(c.xi);
  kv["n"] = std::to_string(c.n);
  kv["T"] = fmt17(c.T);
  kv["R"] = fmt17(c.R);
  kv["paths"] = std::to_string(c.paths);
  kv["seed"] = std::to_string(c.seed);
  kv["tol"] = fmt17(c.tol);
  kv["eps-fix"] = fmt17(c.eps_fix);
  kv["halt-on-stop"] = c.halt_on_stop ? "true" : "false";
  if (c.subcommand == "check") {
    kv["trials"] = std::to_string(c.trials);
    kv["radius"] = fmt17(c.radius);
    kv["knots"] = std::to_string(c.knots);
    kv["span"] = fmt17(c.span);
  }
  if (c.subcommand == "converge") {
    kv["levels"] = join_u64(c.levels);
    kv["fine"] = std::to_string(c.fine);
    kv["eps-list"] = join17(c.eps_list);
    kv["nonexplosion"] = c.nonexplosion ? "true" : "false";
    kv["R-list"] = join17(c.R_list);
  }
  if (c.subcommand == "bounds") {
    kv["epsilon"] = fmt17(c.epsilon);
    kv["T-growth"] = fmt17(c.T_growth);
    kv["n-growth"] = std::to_string(c.n_growth);
    kv["paths-growth"] = std::to_string(c.paths_growth);
    kv["xi-norm-sq"] = fmt17(c.xi_norm_sq);
  }
  std::ofstream out(file);
  out << "[" << c.subcommand << "]\n";
  for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
}

struct ArtifactWriter {
  std::filesystem::path dir;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  explicit ArtifactWriter(const CliConfig& c) : dir(c.outdir) {
    std::filesystem::create_directories(dir);
    write_resolved_config(c, dir / "resolved_config.ini");
    outputs.push_back("resolved_config.ini");
  }

  void write_text(const std::string& name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    out << body;
    outputs.push_back(name);
  }

  void write_json(const std::string& name, const json& j) {
    write_text(name, j.dump(2) + "\n");
  }

  /// Manifest carries provenance (inputs, seed, version, wall time); it is
  /// the one artifact that is not byte-reproducible across runs.
  void finish(const CliConfig& c) {
    json manifest;
    manifest["version"] = kVersion;
    manifest["subcommand"] = c.subcommand;
    manifest["seed"] = c.seed;
    manifest["config_echo"] = "resolved_config.ini";
    manifest["outputs"] = outputs;
    manifest["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
  }
};

inline json report_json(const CheckReport& r) {
  return json{{"check", r.check},       {"model", r.model},
              {"constant", r.declared}, {"estimate", r.estimate},
              {"trials", r.trials},     {"worst_case_sample_id", r.worst_case_sample_id},
              {"pass", r.pass},         {"note", r.note}};
}

// ---------------------------------------------------------------------------
// subcommand runners (return process exit codes)
// ---------------------------------------------------------------------------

inline int run_check(const CliConfig& c) {
  const ModelSpec model = build_model(c);
  ArtifactWriter art(c);
  SegmentSampler::Options so;
  so.d = c.d;
  so.r = c.r;
  so.knots = c.knots;
  so.span = c.span;
  so.max_norm = c.radius;
  so.seed = c.seed;
  if (model.name == "point_delay") so.bump_site = -c.tau;
  SegmentSampler sampler(so);
  const PairSampler pairs = [&](std::uint64_t id) { return sampler.draw_pair(id); };
  const SingleSampler singles = [&](std::uint64_t id) { return sampler.draw(id); };

  std::vector<CheckReport> reports;
  reports.push_back(check_A3(model, pairs, c.trials));
  reports.push_back(check_A1(model, pairs, c.radius, c.trials));
  reports.push_back(check_A2(model, singles, c.trials));
  reports.push_back(check_lemma(model, singles, c.trials));

  json out = json::array();
  bool all_pass = true;
  for (const auto& r : reports) {
    out.push_back(report_json(r));
    all_pass = all_pass && r.pass;
    std::printf("[%s] %s: estimate=%.6g declared=%.6g %s\n", r.check.c_str(),
                r.model.c_str(), r.estimate, r.declared,
                r.pass ? "PASS" : "FAIL");
  }
  art.write_json("checks.json", out);
  art.finish(c);
  return all_pass ? 0 : 1;
}

inline int run_simulate(const CliConfig& c) {
  const ModelSpec model = build_model(c);
  const InitialData init = build_initial(c);
  ArtifactWriter art(c);
  EmConfig cfg;
  cfg.n = c.n;
  cfg.T = c.T;
  cfg.R = c.R;
  cfg.halt_on_stop = c.halt_on_stop;
  cfg.track_norm = true;
  cfg.check_invariants = true;
  cfg.record_diagnostics = true;
  cfg.tol = c.tol;
  cfg.eps_fix = c.eps_fix;

  std::vector<std::optional<RunResult>> results(c.paths);
  parallel_paths(c.paths, c.workers(), [&](std::uint64_t p) {
    BrownianDriver driver(c.seed, p, model.m, c.n);
    results[p] = run(model, init, cfg, driver);
  });

  // single writer, rows ordered by (path_id, step)
  std::string csv = "time,path_id";
  for (std::size_t i = 0; i < c.d; ++i) csv += ",x_" + std::to_string(i);
  csv += ",seg_norm,running_sup_abs2,stopped_flag\n";
  std::uint64_t loc1 = 0, xtn = 0, stopped_paths = 0;
  int max_iters = 0;
  double sup_norm2 = 0.0, sup_gamma2 = 0.0;
  Vec x;
  for (std::uint64_t p = 0; p < c.paths; ++p) {
    const RunResult& res = *results[p];
    loc1 += res.loc1_violations;
    xtn += res.xtn_violations;
    stopped_paths += res.monitor.stopped() ? 1 : 0;
    max_iters = std::max(max_iters, res.max_fixed_point_iters);
    sup_norm2 = std::max(sup_norm2, res.sup_e2rt_norm2);
    sup_gamma2 = std::max(sup_gamma2, res.sup_e2rt_gamma2);
    res.path.value_at(0.0, x);
    double run_sup = dot(x, x);
    auto row = [&](double t, double seg_norm, double abs_x, bool stop) {
      run_sup = std::max(run_sup, abs_x * abs_x);
      csv += fmt17(t);
      csv += ',';
      csv += std::to_string(p);
      for (std::size_t i = 0; i < c.d; ++i) {
        csv += ',';
        csv += fmt17(x[i]);
      }
      csv += ',';
      csv += fmt17(seg_norm);
      csv += ',';
      csv += fmt17(run_sup);
      csv += stop ? ",1\n" : ",0\n";
    };
    row(0.0, res.path.initial_norm(), norm2(x), false);
    for (const auto& dg : res.diagnostics) {
      res.path.value_at(dg.t, x);
      row(dg.t, dg.seg_norm, dg.abs_x, dg.stopped);
    }
  }
  art.write_text("trajectory.csv", csv);

  json summary;
  summary["paths"] = c.paths;
  summary["loc1_violations"] = loc1;
  summary["xtn_violations"] = xtn;
  summary["stop_rate"] =
      static_cast<double>(stopped_paths) / static_cast<double>(c.paths);
  summary["max_fixed_point_iters"] = max_iters;
  summary["sup_e2rt_seg_norm2"] = sup_norm2;
  summary["sup_e2rt_gamma2"] = sup_gamma2;
  summary["pass"] = (loc1 == 0 && xtn == 0);
  art.write_json("simulate_summary.json", summary);
  art.finish(c);
  std::printf("simulate: %llu paths, localization violations %llu/%llu, %s\n",
              static_cast<unsigned long long>(c.paths),
              static_cast<unsigned long long>(loc1),
              static_cast<unsigned long long>(xtn),
              (loc1 == 0 && xtn == 0) ? "PASS" : "FAIL");
  return (loc1 == 0 && xtn == 0) ? 0 : 1;
}

inline int run_converge(const CliConfig& c) {
  const ModelSpec model = build_model(c);
  const InitialData init = build_initial(c);
  ArtifactWriter art(c);
  CouplingOptions opt;
  opt.eps_list = c.eps_list;
  opt.tol = c.tol;
  opt.workers = c.workers();

  if (c.nonexplosion) {
    const auto rows = nonexplosion_scan(model, init, c.T, c.n, c.R_list,
                                        c.paths, c.seed, opt);
    std::string csv = "R,p_emp,wilson_lo,wilson_hi,gamma_hat,cheby_bound\n";
    json jrows = json::array();
    bool monotone = true, dominated = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      csv += fmt17(row.R) + "," + fmt17(row.p_emp) + "," + fmt17(row.wilson_lo) +
             "," + fmt17(row.wilson_hi) + "," + fmt17(row.gamma_hat) + "," +
             fmt17(row.cheby_bound) + "\n";
      jrows.push_back({{"R", row.R},
                       {"p_emp", row.p_emp},
                       {"wilson_lo", row.wilson_lo},
                       {"wilson_hi", row.wilson_hi},
                       {"gamma_hat", row.gamma_hat},
                       {"gamma_stderr", row.gamma_stderr},
                       {"cheby_bound", row.cheby_bound}});
      if (i > 0 && row.p_emp > rows[i - 1].p_emp + 1e-12) monotone = false;
      const double mc_slack =
          3.0 * (std::sqrt(row.p_emp * (1.0 - row.p_emp) /
                           static_cast<double>(c.paths)) +
                 16.0 * row.gamma_stderr / (row.R * row.R));
      if (row.p_emp > row.cheby_bound + mc_slack) dominated = false;
    }
    art.write_text("nonexplosion.csv", csv);
    json out;
    out["rows"] = jrows;
    out["monotone_in_R"] = monotone;
    out["dominated_by_chebyshev"] = dominated;
    out["pass"] = monotone && dominated;
    art.write_json("nonexplosion.json", out);
    art.finish(c);
    std::printf("nonexplosion scan: monotone=%d dominated=%d %s\n", monotone,
                dominated, (monotone && dominated) ? "PASS" : "FAIL");
    return (monotone && dominated) ? 0 : 1;
  }

  std::uint64_t fine = c.fine;
  if (fine == 0) {
    fine = 1;
    for (auto lv : c.levels) fine = detail::lcm_u64(fine, lv);
  }
  opt.n_fine = fine;
  json jlevels = json::array();
  std::string csv = "path_id,n,m,sup_distance,stopped_n,stopped_m\n";
  std::vector<double> medians;
  for (std::size_t i = 0; i + 1 < c.levels.size(); ++i) {
    const CauchyReport rep = coupled_pair(model, init, c.levels[i],
                                          c.levels[i + 1], c.T, c.R, c.paths,
                                          c.seed, opt);
    medians.push_back(rep.median_sup_distance);
    json jexc = json::array();
    for (const auto& e : rep.exceedance)
      jexc.push_back({{"eps", e.eps},
                      {"p", e.p},
                      {"wilson_lo", e.wilson_lo},
                      {"wilson_hi", e.wilson_hi}});
    jlevels.push_back({{"n", rep.n},
                       {"m", rep.m},
                       {"median_sup_distance", rep.median_sup_distance},
                       {"mean_sup_distance", rep.mean_sup_distance},
                       {"stop_rate_n", rep.stop_rate_n},
                       {"stop_rate_m", rep.stop_rate_m},
                       {"exceedance", jexc}});
    for (const auto& pd : rep.per_path)
      csv += std::to_string(pd.path_id) + "," + std::to_string(rep.n) + "," +
             std::to_string(rep.m) + "," + fmt17(pd.sup_distance) + "," +
             (pd.stopped_n ? "1," : "0,") + (pd.stopped_m ? "1\n" : "0\n");
  }
  const bool pass = medians.size() < 2 || medians.back() <= medians.front();
  json out;
  out["fine"] = fine;
  out["levels"] = jlevels;
  out["pass"] = pass;
  art.write_json("cauchy.json", out);
  art.write_text("distances.csv", csv);
  art.finish(c);
  std::printf("converge: %zu level pairs, %s\n", medians.size(),
              pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

inline int run_bounds(const CliConfig& c) {
  const ModelSpec model = build_model(c);
  const InitialData init = build_initial(c);
  ArtifactWriter art(c);

  // precondition of the moment bound: declared constants validated by sampling
  SegmentSampler::Options so;
  so.d = c.d;
  so.r = c.r;
  so.seed = c.seed;
  if (model.name == "point_delay") so.bump_site = -c.tau;
  SegmentSampler sampler(so);
  const CheckReport a3 = check_A3(
      model, [&](std::uint64_t id) { return sampler.draw_pair(id); }, 2000);
  const CheckReport a2 = check_A2(
      model, [&](std::uint64_t id) { return sampler.draw(id); }, 2000);

  const BoundConstants constants =
      bound_constants(model.k, model.L, model.r, c.T, c.xi_norm_sq);

  MomentOptions mo;
  mo.n = c.n;
  mo.T = c.T;
  mo.paths = c.paths;
  mo.seed = c.seed;
  mo.workers = c.workers();
  const MomentCurve mc = moment_curve(model, init, mo, constants);
  std::string csv = "time,estimate,stderr,envelope\n";
  for (std::size_t i = 0; i < mc.t.size(); ++i)
    csv += fmt17(mc.t[i]) + "," + fmt17(mc.estimate[i]) + "," +
           fmt17(mc.stderr_[i]) + "," + fmt17(std::exp(mc.log_envelope[i])) +
           "\n";
  art.write_text("moment.csv", csv);

  GrowthOptions go;
  go.n = c.n_growth;
  go.T = c.T_growth;
  go.paths = c.paths_growth;
  go.seed = c.seed;
  go.workers = c.workers();
  go.epsilon = c.epsilon;
  const BoundConstants gconstants =
      bound_constants(model.k, model.L, model.r, c.T_growth, c.xi_norm_sq);
  const GrowthReport gr = growth_report(model, init, go, gconstants);
  std::string gcsv = "window,freq,log_threshold\n";
  for (std::size_t w = 0; w < gr.window_freq.size(); ++w)
    gcsv += std::to_string(w + 1) + "," + fmt17(gr.window_freq[w]) + "," +
            fmt17(gr.window_log_thresh[w]) + "\n";
  art.write_text("growth.csv", gcsv);

  const bool pass = a3.pass && a2.pass && mc.pass && gr.pass;
  json verdicts;
  verdicts["constants"] = {{"k", constants.k},     {"L", constants.L},
                           {"r", constants.r},     {"T", constants.T},
                           {"xi_norm_sq", constants.xi_norm_sq},
                           {"C4", constants.C4},   {"C5", constants.C5},
                           {"C_hat", constants.C_hat},
                           {"C1_Lk_info", constants.C1_Lk},
                           {"C2_Lk_info", constants.C2_Lk}};
  verdicts["checks"] = {report_json(a3), report_json(a2)};
  verdicts["moment"] = {{"pass", mc.pass},
                        {"paths", mc.paths},
                        {"worst_log_margin", mc.worst_log_margin}};
  verdicts["growth"] = {{"pass", gr.pass},
                        {"freq_monotone", gr.freq_monotone},
                        {"frac_below_ceiling", gr.frac_below_ceiling},
                        {"ceiling", gr.ceiling},
                        {"terminal_rate_max", gr.terminal_rate_max},
                        {"terminal_rate_median", gr.terminal_rate_median}};
  verdicts["pass"] = pass;
  art.write_json("verdicts.json", verdicts);
  art.finish(c);
  std::printf("bounds: A3 %s, A2 %s, moment %s, growth %s => %s\n",
              a3.pass ? "PASS" : "FAIL", a2.pass ? "PASS" : "FAIL",
              mc.pass ? "PASS" : "FAIL", gr.pass ? "PASS" : "FAIL",
              pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// app wiring
// ---------------------------------------------------------------------------

inline void add_common_options(CLI::App* sub, CliConfig& c) {
  sub->add_option("--model", c.model,
                  "model id: point_delay|fading_average|zero|ou|exp");
  sub->add_option("--d", c.d, "state dimension");
  sub->add_option("--r", c.r, "fading-memory decay rate");
  sub->add_option("--kappa", c.kappa, "neutral coefficient");
  sub->add_option("--tau", c.tau, "point delay");
  sub->add_option("--a", c.a, "drift A = a*I");
  sub->add_option("--bcoef", c.bcoef, "drift B = bcoef*I");
  sub->add_option("--sigma0", c.sigma0, "additive noise level");
  sub->add_option("--sigma1", c.sigma1, "multiplicative noise level");
  sub->add_option("--rate", c.rate, "ou mean-reversion rate");
  sub->add_option("--noise", c.noise, "ou noise level");
  sub->add_option("--growth", c.growth, "exp growth rate");
  sub->add_option("--L", c.L, "declared coercivity constant (0 = derived)");
  sub->add_option("--xi", c.xi, "constant initial data (scalar or d values)")
      ->delimiter(',');
  sub->add_option("--n", c.n,
                  "steps per unit time (0 = ceil(r/ln2) rounded to power of 2)");
  sub->add_option("--T", c.T, "horizon");
  sub->add_option("--R", c.R, "truncation radius (0 = 12*max(||xi||_r,1))");
  sub->add_option("--paths,-M", c.paths, "Monte Carlo path count");
  sub->add_option("--seed", c.seed, "RNG seed");
  sub->add_option("--tol", c.tol, "norm tolerance");
  sub->add_option("--eps-fix", c.eps_fix, "neutral fixed-point tolerance");
  sub->add_flag("--halt-on-stop", c.halt_on_stop,
                "absorb paths at the stopping time");
  sub->add_option("--outdir", c.outdir,
                  "output directory (env NSFDE_OUTDIR overrides)");
}

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"nsfde: neutral stochastic functional differential equations "
               "with infinite delay on the fading-memory space C_r"};
  app.set_config("--config", "", "flat key = value config, [section] per subcommand");
  app.require_subcommand(1);
  CliConfig c;

  CLI::App* s_check = app.add_subcommand(
      "check", "sampling checkers for the model assumptions");
  add_common_options(s_check, c);
  s_check->add_option("--trials", c.trials, "sampled segments/pairs");
  s_check->add_option("--radius", c.radius, "sampler norm bound");
  s_check->add_option("--knots", c.knots, "sampler knots");
  s_check->add_option("--span", c.span, "sampler support span");
  s_check->configurable();

  CLI::App* s_sim = app.add_subcommand(
      "simulate", "integrate Monte Carlo paths, write trajectories");
  add_common_options(s_sim, c);
  s_sim->configurable();

  CLI::App* s_conv = app.add_subcommand(
      "converge", "coupled-resolution Cauchy harness / non-explosion scan");
  add_common_options(s_conv, c);
  s_conv->add_option("--levels", c.levels, "resolution list (consecutive pairs)")
      ->delimiter(',');
  s_conv->add_option("--fine", c.fine, "fine grid (0 = lcm of levels)");
  s_conv->add_option("--eps-list", c.eps_list, "exceedance thresholds")
      ->delimiter(',');
  s_conv->add_flag("--nonexplosion", c.nonexplosion, "run the R-scan instead");
  s_conv->add_option("--R-list", c.R_list, "radii for the scan")->delimiter(',');
  s_conv->configurable();

  CLI::App* s_bounds = app.add_subcommand(
      "bounds", "moment envelope and growth-ceiling verdicts");
  add_common_options(s_bounds, c);
  s_bounds->add_option("--epsilon", c.epsilon, "growth window slack");
  s_bounds->add_option("--T-growth", c.T_growth, "growth horizon (>= 8)");
  s_bounds->add_option("--n-growth", c.n_growth, "growth resolution");
  s_bounds->add_option("--paths-growth", c.paths_growth,
                       "growth path count (0 = paths)");
  s_bounds->add_option("--xi-norm-sq", c.xi_norm_sq,
                       "E||xi||_r^2 override (<0 = from xi)");
  s_bounds->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    for (auto* sub : {s_check, s_sim, s_conv, s_bounds}) {
      if (sub->parsed()) {
        c.subcommand = sub->get_name();
        resolve(c);
        if (c.subcommand == "check") return run_check(c);
        if (c.subcommand == "simulate") return run_simulate(c);
        if (c.subcommand == "converge") return run_converge(c);
        return run_bounds(c);
      }
    }
    std::fprintf(stderr, "error: no subcommand given\n");
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [%s]: %s\n", c.subcommand.c_str(), e.what());
    return 2;
  }
}

}  // namespace nsfde::cli
