#pragma once

// Cauchy-in-probability convergence harness: pairs of resolutions driven by
// the same fine-grid Brownian increments, the per-path localized sup of the
// segment distance, exceedance frequencies with Wilson intervals, and the
// non-explosion scan with its Chebyshev-style bound 16 Gamma_hat / R^2.

#include <nsfde/brownian.hpp>
#include <nsfde/common.hpp>
#include <nsfde/em_scheme.hpp>
#include <nsfde/history_path.hpp>
#include <nsfde/model.hpp>
#include <nsfde/monte_carlo.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace nsfde {

struct ExceedanceStat {
  double eps = 0.0;
  double p = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

struct PathDistance {
  std::uint64_t path_id = 0;
  double sup_distance = 0.0;
  bool stopped_n = false;
  bool stopped_m = false;
};

struct CauchyReport {
  std::uint64_t n = 0;
  std::uint64_t m = 0;
  std::uint64_t paths = 0;
  std::uint64_t seed = 0;
  double median_sup_distance = 0.0;
  double mean_sup_distance = 0.0;
  double stop_rate_n = 0.0;
  double stop_rate_m = 0.0;
  std::vector<ExceedanceStat> exceedance;
  std::vector<PathDistance> per_path;
};

struct CouplingOptions {
  std::vector<double> eps_list{0.01, 0.05, 0.1, 0.5};
  std::uint64_t n_fine = 0;  // 0 = lcm(n, m)
  double tol = 1e-10;
  unsigned workers = 1;
  bool keep_per_path = true;
};

namespace detail {

inline std::uint64_t lcm_u64(std::uint64_t a, std::uint64_t b) {
  return a / std::gcd(a, b) * b;
}

/// sup over union-grid anchors t <= t_max of ||x^n_t - x^m_t||_r for two
/// paths sharing initial data. The difference vanishes on the shared past,
/// is piecewise affine on union cells, and the anchored sup satisfies
///     d_{t+dt} = max(e^{-r dt} d_t, sup over the newest cell),
/// with its maximum over anchors attained at grid anchors.
inline double coupled_sup_distance(const HistoryPath& a, const HistoryPath& b,
                                   std::uint64_t n_union, double t_max,
                                   double tol) {
  const double r = a.r();
  const double h = 1.0 / static_cast<double>(n_union);
  const double decay = std::exp(-r * h);
  const auto steps = static_cast<std::uint64_t>(std::llround(t_max * n_union));
  detail::WeightedSup cell(r, tol);
  Vec va(a.dim()), vb(a.dim()), prev_diff(a.dim(), 0.0), next_diff(a.dim());
  double d = 0.0;      // ||x^n_t - x^m_t||_r at the current anchor
  double best = 0.0;   // sup over anchors so far
  for (std::uint64_t i = 1; i <= steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n_union);
    a.value_at(t, va);
    b.value_at(t, vb);
    for (std::size_t c = 0; c < va.size(); ++c) next_diff[c] = va[c] - vb[c];
    cell.reset();
    cell.linear_cell(-h, 0.0, prev_diff, next_diff);
    d = std::max(d * decay, cell.running());
    best = std::max(best, d);
    std::swap(prev_diff, next_diff);
  }
  return best;
}

}  // namespace detail

/// Runs resolutions n and m against the same BrownianDriver per path and
/// aggregates the localized sup distances sup_{t <= T ^ tau^n ^ tau^m}.
inline CauchyReport coupled_pair(const ModelSpec& model, const InitialData& init,
                                 std::uint64_t n, std::uint64_t m, double T,
                                 double R, std::uint64_t paths,
                                 std::uint64_t seed,
                                 const CouplingOptions& opt = {}) {
  const double min_n = model.r / std::log(2.0);
  if (static_cast<double>(n) < min_n || static_cast<double>(m) < min_n)
    throw ConfigError("coupled_pair: both resolutions must satisfy n >= r/ln 2");
  const std::uint64_t fine =
      opt.n_fine == 0 ? detail::lcm_u64(n, m) : opt.n_fine;
  if (fine % n != 0 || fine % m != 0)
    throw ResolutionMismatch("coupled_pair: resolutions must divide the fine grid");
  const std::uint64_t n_union = detail::lcm_u64(n, m);

  std::vector<PathDistance> rows(paths);
  parallel_paths(paths, opt.workers, [&](std::uint64_t p) {
    BrownianDriver driver(seed, p, model.m, fine);
    EmConfig cfg;
    cfg.T = T;
    cfg.R = R;
    cfg.tol = opt.tol;
    cfg.track_norm = true;
    cfg.n = n;
    RunResult run_n = run(model, init, cfg, driver);
    cfg.n = m;
    RunResult run_m = run(model, init, cfg, driver);
    double t_cut = T;
    if (run_n.monitor.tau) t_cut = std::min(t_cut, *run_n.monitor.tau);
    if (run_m.monitor.tau) t_cut = std::min(t_cut, *run_m.monitor.tau);
    // localized anchor cut, rounded down to the union grid
    const double t_max =
        std::floor(t_cut * static_cast<double>(n_union) + 1e-9) /
        static_cast<double>(n_union);
    rows[p] = {p,
               detail::coupled_sup_distance(run_n.path, run_m.path, n_union,
                                            t_max, opt.tol),
               run_n.monitor.tau.has_value(), run_m.monitor.tau.has_value()};
  });

  CauchyReport rep;
  rep.n = n;
  rep.m = m;
  rep.paths = paths;
  rep.seed = seed;
  std::vector<double> dists(paths);
  std::uint64_t stop_n = 0, stop_m = 0;
  double sum = 0.0;
  for (std::uint64_t p = 0; p < paths; ++p) {
    dists[p] = rows[p].sup_distance;
    sum += dists[p];
    stop_n += rows[p].stopped_n ? 1 : 0;
    stop_m += rows[p].stopped_m ? 1 : 0;
  }
  rep.mean_sup_distance = paths ? sum / static_cast<double>(paths) : 0.0;
  std::vector<double> sorted = dists;
  std::sort(sorted.begin(), sorted.end());
  rep.median_sup_distance = paths ? sorted[paths / 2] : 0.0;
  rep.stop_rate_n = paths ? static_cast<double>(stop_n) / paths : 0.0;
  rep.stop_rate_m = paths ? static_cast<double>(stop_m) / paths : 0.0;
  for (double eps : opt.eps_list) {
    const auto hits = static_cast<std::uint64_t>(
        std::count_if(dists.begin(), dists.end(),
                      [eps](double d) { return d >= eps; }));
    const WilsonInterval w = wilson95(hits, paths);
    rep.exceedance.push_back({eps, w.p, w.lo, w.hi});
  }
  if (opt.keep_per_path) rep.per_path = std::move(rows);
  return rep;
}

struct ScanRow {
  double R = 0.0;
  double p_emp = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  double gamma_hat = 0.0;     // MC mean of sup e^{2rt} |Gamma(t)|^2 up to tau_R
  double cheby_bound = 0.0;   // 16 gamma_hat / R^2
  double gamma_stderr = 0.0;
};

/// Empirical P(tau_R <= T) against the R-list, one simulation per path with
/// every tau_R extracted from the same trajectory, plus the Chebyshev column.
inline std::vector<ScanRow> nonexplosion_scan(
    const ModelSpec& model, const InitialData& init, double T, std::uint64_t n,
    const std::vector<double>& R_list, std::uint64_t paths, std::uint64_t seed,
    const CouplingOptions& opt = {}) {
  if (R_list.empty()) throw ConfigError("nonexplosion_scan: empty R list");
  HistoryPath probe(init, model.r);
  const double xi_norm = probe.initial_norm();
  for (std::size_t i = 0; i < R_list.size(); ++i) {
    if (!(R_list[i] > 3.0 * xi_norm))
      throw ConfigError("nonexplosion_scan: every R must exceed 3 ||xi||_r");
    if (i > 0 && !(R_list[i] > R_list[i - 1]))
      throw ConfigError("nonexplosion_scan: R list must be increasing");
  }
  const std::size_t nR = R_list.size();
  // per path, per R: stopped flag and localized sup of e^{2rt}|Gamma|^2
  std::vector<std::uint8_t> stopped(paths * nR, 0);
  std::vector<double> gamma_sup(paths * nR, 0.0);
  parallel_paths(paths, opt.workers, [&](std::uint64_t p) {
    BrownianDriver driver(seed, p, model.m, n);
    EmConfig cfg;
    cfg.n = n;
    cfg.T = T;
    cfg.tol = opt.tol;
    cfg.track_norm = false;
    EmState state(model, init, cfg);
    const auto steps = static_cast<std::uint64_t>(std::llround(T * n));
    std::vector<double> sup_g(nR, 0.0);
    std::vector<double> tau(nR, std::numeric_limits<double>::infinity());
    double e2g = std::exp(0.0) * dot(state.gamma(), state.gamma());
    for (std::size_t k = 0; k < nR; ++k) sup_g[k] = e2g;
    Vec dw, x;
    for (std::uint64_t j = 0; j < steps; ++j) {
      driver.increment(n, j, dw);
      state.em_step(dw);
      const double t = state.time();
      state.path().value_at(t, x);
      const double ax = norm2(x);
      e2g = std::exp(2.0 * model.r * t) * dot(state.gamma(), state.gamma());
      for (std::size_t k = 0; k < nR; ++k) {
        if (t <= tau[k]) {
          sup_g[k] = std::max(sup_g[k], e2g);
          if (!std::isfinite(tau[k]) && ax >= R_list[k] / 3.0) tau[k] = t;
        }
      }
    }
    for (std::size_t k = 0; k < nR; ++k) {
      stopped[p * nR + k] = std::isfinite(tau[k]) ? 1 : 0;
      gamma_sup[p * nR + k] = sup_g[k];
    }
  });

  std::vector<ScanRow> rows(nR);
  for (std::size_t k = 0; k < nR; ++k) {
    std::uint64_t hits = 0;
    double mean = 0.0;
    for (std::uint64_t p = 0; p < paths; ++p) {
      hits += stopped[p * nR + k];
      mean += gamma_sup[p * nR + k];
    }
    mean /= static_cast<double>(paths);
    double var = 0.0;
    for (std::uint64_t p = 0; p < paths; ++p) {
      const double dev = gamma_sup[p * nR + k] - mean;
      var += dev * dev;
    }
    var = paths > 1 ? var / static_cast<double>(paths - 1) : 0.0;
    const WilsonInterval w = wilson95(hits, paths);
    rows[k] = {R_list[k], w.p,   w.lo,
               w.hi,      mean,  16.0 * mean / (R_list[k] * R_list[k]),
               std::sqrt(var / static_cast<double>(paths))};
  }
  return rows;
}

}  // namespace nsfde
