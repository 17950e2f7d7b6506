#pragma once

// Explicit constants of the second-moment bound
//     E[sup_{0<=s<=t} |x(s)|^2] <= C4 e^{C5 t},   C5 = 292 L,
// with C4 = (2k^2 + 4(1+k)^2 + 146 L / r) E||xi||_r^2 + 292 L T, scaled by
// 1/(1 - 2k^2) (defined for k < 1/sqrt(2)), and the almost-sure growth
// ceiling limsup (1/t) log|x(t)| <= C_hat = 146 L, checked per unit window
// by exceedance counting. Envelopes are evaluated in log space so huge
// exponents compare cleanly.

#include <nsfde/brownian.hpp>
#include <nsfde/common.hpp>
#include <nsfde/em_scheme.hpp>
#include <nsfde/model.hpp>
#include <nsfde/monte_carlo.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace nsfde {

struct BoundConstants {
  double k = 0.0;
  double L = 0.0;
  double r = 1.0;
  double T = 1.0;
  double xi_norm_sq = 0.0;  // E ||xi||_r^2
  double C4 = 0.0;
  double C5 = 0.0;
  double C_hat = 0.0;
  // informational Gronwall-layer constants, excluded from verdicts
  double C1_Lk = 0.0;  // 4 r (1 + 3 k^2) + 3 L
  double C2_Lk = 0.0;  // C1_Lk + 216 L

  double log_envelope(double t) const {
    return (C4 > 0.0 ? std::log(C4) : -std::numeric_limits<double>::infinity()) +
           C5 * t;
  }
  double envelope(double t) const { return std::exp(log_envelope(t)); }
};

/// k in [0, 1/sqrt 2); L >= 0 (0 degenerates to a constant envelope).
inline BoundConstants bound_constants(double k, double L, double r, double T,
                                      double xi_norm_sq) {
  if (!(k >= 0.0) || k * k >= 0.5)
    throw ContractionTooLarge(
        "bound_constants: k must lie in [0, 1/sqrt(2)) for the 1/(1-2k^2) factor");
  if (!(L >= 0.0) || !(r > 0.0) || !(T > 0.0) || !(xi_norm_sq >= 0.0))
    throw ConfigError("bound_constants: need L >= 0, r > 0, T > 0, xi_norm_sq >= 0");
  BoundConstants c;
  c.k = k;
  c.L = L;
  c.r = r;
  c.T = T;
  c.xi_norm_sq = xi_norm_sq;
  c.C5 = 292.0 * L;
  c.C_hat = 146.0 * L;
  const double onek = 1.0 + k;
  c.C4 = ((2.0 * k * k + 4.0 * onek * onek + 146.0 * L / r) * xi_norm_sq +
          292.0 * L * T) /
         (1.0 - 2.0 * k * k);
  c.C1_Lk = 4.0 * r * (1.0 + 3.0 * k * k) + 3.0 * L;
  c.C2_Lk = c.C1_Lk + 216.0 * L;
  return c;
}

struct MomentCurve {
  std::vector<double> t;
  std::vector<double> estimate;  // MC mean of sup_{0<=s<=t} |x(s)|^2
  std::vector<double> stderr_;
  std::vector<double> log_envelope;
  std::uint64_t paths = 0;
  bool pass = false;
  double worst_log_margin =
      -std::numeric_limits<double>::infinity();  // max log(est+3se) - log env
};

struct MomentOptions {
  std::uint64_t n = 256;
  double T = 2.0;
  std::uint64_t paths = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::uint64_t output_stride = 1;  // record every stride-th grid time
};

/// Monte Carlo estimate of E[sup_{0<=s<=t} |x(s)|^2] against the envelope;
/// PASS iff estimate + 3 stderr stays below C4 e^{C5 t} at every grid time.
inline MomentCurve moment_curve(const ModelSpec& model, const InitialData& init,
                                const MomentOptions& opt,
                                const BoundConstants& constants) {
  const auto steps = static_cast<std::uint64_t>(std::llround(opt.T * opt.n));
  const std::uint64_t stride = std::max<std::uint64_t>(1, opt.output_stride);
  const std::uint64_t n_out = steps / stride;
  // per-path running-sup curves, reduced in path order afterwards
  std::vector<double> curves(opt.paths * n_out);
  parallel_paths(opt.paths, opt.workers, [&](std::uint64_t p) {
    BrownianDriver driver(opt.seed, p, model.m, opt.n);
    EmConfig cfg;
    cfg.n = opt.n;
    cfg.T = opt.T;
    cfg.track_norm = false;
    EmState state(model, init, cfg);
    Vec dw, x;
    state.path().value_at(0.0, x);
    double sup = dot(x, x);
    for (std::uint64_t j = 0; j < steps; ++j) {
      driver.increment(opt.n, j, dw);
      state.em_step(dw);
      state.path().value_at(state.time(), x);
      sup = std::max(sup, dot(x, x));
      if ((j + 1) % stride == 0) curves[p * n_out + (j + 1) / stride - 1] = sup;
    }
  });

  MomentCurve mc;
  mc.paths = opt.paths;
  mc.pass = true;
  for (std::uint64_t i = 0; i < n_out; ++i) {
    const double t = static_cast<double>((i + 1) * stride) /
                     static_cast<double>(opt.n);
    double mean = 0.0;
    for (std::uint64_t p = 0; p < opt.paths; ++p) mean += curves[p * n_out + i];
    mean /= static_cast<double>(opt.paths);
    double var = 0.0;
    for (std::uint64_t p = 0; p < opt.paths; ++p) {
      const double dev = curves[p * n_out + i] - mean;
      var += dev * dev;
    }
    var = opt.paths > 1 ? var / static_cast<double>(opt.paths - 1) : 0.0;
    const double se = std::sqrt(var / static_cast<double>(opt.paths));
    const double log_env = constants.log_envelope(t);
    const double upper = mean + 3.0 * se;
    const double log_upper =
        upper > 0.0 ? std::log(upper) : -std::numeric_limits<double>::infinity();
    mc.t.push_back(t);
    mc.estimate.push_back(mean);
    mc.stderr_.push_back(se);
    mc.log_envelope.push_back(log_env);
    mc.worst_log_margin = std::max(mc.worst_log_margin, log_upper - log_env);
    if (log_upper > log_env) mc.pass = false;
  }
  return mc;
}

struct GrowthReport {
  std::vector<double> window_freq;       // P(sup_{m-1<=t<=m} |x|^2 > e^{(C5+eps) m})
  std::vector<double> window_log_thresh; // (C5 + eps) m
  double epsilon = 0.5;
  double ceiling = 0.0;                  // C_hat + eps/2
  double frac_below_ceiling = 0.0;       // terminal pathwise rates under it
  double terminal_rate_max = 0.0;
  double terminal_rate_p99 = 0.0;
  double terminal_rate_median = 0.0;
  std::uint64_t paths = 0;
  bool freq_monotone = false;
  bool pass = false;
};

struct GrowthOptions {
  std::uint64_t n = 64;
  double T = 16.0;
  std::uint64_t paths = 1000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double epsilon = 0.5;
};

/// Unit-window exceedance frequencies against e^{(292 L + eps) m} and the
/// pathwise terminal rates (1/T) log |x(T)|. PASS iff the frequencies decay
/// monotonically (within Monte Carlo noise) and >= 99% of paths end with a
/// rate at or below C_hat + eps/2.
inline GrowthReport growth_report(const ModelSpec& model, const InitialData& init,
                                  const GrowthOptions& opt,
                                  const BoundConstants& constants) {
  if (!(opt.T >= 8.0))
    throw ConfigError("growth_report: horizon must cover at least 8 unit windows");
  if (!(opt.epsilon > 0.0))
    throw ConfigError("growth_report: epsilon must be > 0");
  const auto steps = static_cast<std::uint64_t>(std::llround(opt.T * opt.n));
  const auto windows = static_cast<std::size_t>(std::floor(opt.T));
  std::vector<double> window_sup_log2(opt.paths * windows,
                                      -std::numeric_limits<double>::infinity());
  std::vector<double> terminal_rate(opt.paths);
  parallel_paths(opt.paths, opt.workers, [&](std::uint64_t p) {
    BrownianDriver driver(opt.seed, p, model.m, opt.n);
    EmConfig cfg;
    cfg.n = opt.n;
    cfg.T = opt.T;
    cfg.track_norm = false;
    EmState state(model, init, cfg);
    Vec dw, x;
    auto record = [&](double t, double ax) {
      const double lg = ax > 0.0 ? 2.0 * std::log(ax)
                                 : -std::numeric_limits<double>::infinity();
      auto w = static_cast<std::size_t>(
          std::max(0.0, std::ceil(t - 1e-12) - 1.0));
      w = std::min(w, windows - 1);
      auto& slot = window_sup_log2[p * windows + w];
      slot = std::max(slot, lg);
      // grid times on integer boundaries belong to both adjacent windows
      if (std::abs(t - std::round(t)) < 1e-12 && w + 1 < windows) {
        auto& next = window_sup_log2[p * windows + w + 1];
        next = std::max(next, lg);
      }
    };
    state.path().value_at(0.0, x);
    record(1e-12, norm2(x));
    for (std::uint64_t j = 0; j < steps; ++j) {
      driver.increment(opt.n, j, dw);
      state.em_step(dw);
      const double t = state.time();
      state.path().value_at(t, x);
      const double ax = norm2(x);
      record(t, ax);
      if (j + 1 == steps)
        terminal_rate[p] = ax > 0.0
                               ? std::log(ax) / opt.T
                               : -std::numeric_limits<double>::infinity();
    }
  });

  GrowthReport rep;
  rep.paths = opt.paths;
  rep.epsilon = opt.epsilon;
  rep.ceiling = constants.C_hat + 0.5 * opt.epsilon;
  for (std::size_t w = 0; w < windows; ++w) {
    const double log_thresh =
        (constants.C5 + opt.epsilon) * static_cast<double>(w + 1);
    std::uint64_t hits = 0;
    for (std::uint64_t p = 0; p < opt.paths; ++p)
      if (window_sup_log2[p * windows + w] > log_thresh) ++hits;
    rep.window_freq.push_back(static_cast<double>(hits) /
                              static_cast<double>(opt.paths));
    rep.window_log_thresh.push_back(log_thresh);
  }
  rep.freq_monotone = true;
  for (std::size_t w = 1; w < windows; ++w) {
    const double prev = rep.window_freq[w - 1];
    const double noise =
        2.0 * std::sqrt(std::max(prev * (1.0 - prev), 0.0) /
                        static_cast<double>(opt.paths)) +
        1.0 / static_cast<double>(opt.paths);
    if (rep.window_freq[w] > prev + noise) rep.freq_monotone = false;
  }
  std::vector<double> rates = terminal_rate;
  std::sort(rates.begin(), rates.end());
  rep.terminal_rate_max = rates.back();
  rep.terminal_rate_p99 = rates[static_cast<std::size_t>(
      std::min<double>(static_cast<double>(rates.size()) - 1.0,
                       std::ceil(0.99 * rates.size()) - 1.0))];
  rep.terminal_rate_median = rates[rates.size() / 2];
  std::uint64_t below = 0;
  for (double rate : terminal_rate)
    if (rate <= rep.ceiling) ++below;
  rep.frac_below_ceiling =
      static_cast<double>(below) / static_cast<double>(opt.paths);
  rep.pass = rep.freq_monotone && rep.frac_below_ceiling >= 0.99;
  return rep;
}

}  // namespace nsfde
