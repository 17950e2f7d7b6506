#pragma once

// Euler-Maruyama discretization with frozen segments. Over the step
// (t_j, t_{j+1}] the coefficients are evaluated on the segment at the left
// endpoint and the new frontier value solves
//     x = D(segment at t_{j+1} with x spliced at theta = 0) + gamma_new,
// a k-contraction in x because changing only the theta = 0 value moves the
// segment norm by exactly |dx| (weight e^0 = 1). The paper-side process
// Gamma(t) = x(t) - D(x_hat_t) is carried exactly; the splice is resolved by
// Picard iteration to eps_fix.
//
// The segment norm ||x_{t_j}||_r is maintained incrementally:
//     ||x_{t+h}||_r = max(e^{-rh} ||x_t||_r, sup over the newest cell),
// which keeps stopping monitors and diagnostics O(1) per step. Unit tests
// cross-check it against the from-scratch fading_norm.

#include <nsfde/brownian.hpp>
#include <nsfde/common.hpp>
#include <nsfde/history_path.hpp>
#include <nsfde/model.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace nsfde {

struct EmConfig {
  std::uint64_t n = 0;  // steps per unit time, grid h = 1/n
  double T = 1.0;
  double R = std::numeric_limits<double>::infinity();  // inf = no monitor
  bool halt_on_stop = false;
  bool track_norm = true;
  bool check_invariants = false;
  bool record_diagnostics = false;
  double tol = 1e-10;      // norm tolerance
  double eps_fix = 1e-12;  // fixed-point tolerance (relative)
  int iter_cap = 200;
};

/// First times the discrete solution leaves the R/3 ball in magnitude (tau)
/// and in segment norm (alpha). On the grid the two coincide whenever
/// R > 3 ||xi||_r; both are recorded.
struct StoppingMonitor {
  double R = std::numeric_limits<double>::infinity();
  std::optional<double> tau;
  std::optional<double> alpha;
  bool stopped() const { return tau.has_value() || alpha.has_value(); }
};

struct StepDiagnostics {
  std::uint64_t step;
  double t;
  double abs_x;
  double seg_norm;          // ||x_t||_r at the grid anchor
  double displacement_mid;  // ||p_t||_r at the step midpoint
  int fixed_point_iters;
  bool stopped;
};

/// t_n for the frozen segment: the last grid time at or before t, with the
/// cap inactive exactly at grid points. Detection of "t is a grid point" is
/// done against the step index, never by flooring n*t blindly.
inline double grid_floor_time(std::uint64_t n, double t) {
  const double s = t * static_cast<double>(n);
  const double k = std::llround(s);
  if (std::abs(s - k) <= 1e-9 * std::max(1.0, std::abs(s)))
    return k / static_cast<double>(n);
  return std::floor(s) / static_cast<double>(n);
}

class EmState {
 public:
  EmState(const ModelSpec& model, InitialData init, EmConfig cfg)
      : model_(&model),
        cfg_(cfg),
        path_(std::move(init), model.r),
        sup_cell_(model.r, cfg.tol),
        gamma_(model.d, 0.0) {
    validate_model(model);
    if (cfg_.n == 0 || static_cast<double>(cfg_.n) < model.r / std::log(2.0))
      throw ConfigError("em scheme: n must satisfy n >= r / ln 2");
    if (path_.dim() != model.d)
      throw DimensionMismatch("em scheme: initial data dimension != model d");
    seg_norm_ = path_.initial_norm();
    if (std::isfinite(cfg_.R)) {
      if (!(cfg_.R > 3.0 * seg_norm_))
        throw ConfigError("em scheme: R must exceed 3 ||xi||_r");
      monitor_.R = cfg_.R;
    }
    // gamma(0) = xi(0) - D(xi)
    Vec x0;
    path_.value_at(0.0, x0);
    const Vec d0 = model.neutral_at(path_.segment(0.0));
    for (std::size_t i = 0; i < model.d; ++i) gamma_[i] = x0[i] - d0[i];
    decay_ = std::exp(-model.r / static_cast<double>(cfg_.n));
    half_decay_ = std::exp(-0.5 * model.r / static_cast<double>(cfg_.n));
    update_sups(0.0, x0);
  }

  const HistoryPath& path() const { return path_; }
  HistoryPath&& take_path() { return std::move(path_); }
  const ModelSpec& model() const { return *model_; }
  const EmConfig& config() const { return cfg_; }
  std::uint64_t step_index() const { return j_; }
  double time() const { return t_of(j_); }
  double h() const { return 1.0 / static_cast<double>(cfg_.n); }
  double seg_norm() const { return seg_norm_; }
  const Vec& gamma() const { return gamma_; }
  const StoppingMonitor& monitor() const { return monitor_; }
  const std::vector<StepDiagnostics>& diagnostics() const { return diags_; }
  std::uint64_t loc1_violations() const { return loc1_violations_; }
  std::uint64_t xtn_violations() const { return xtn_violations_; }
  double sup_e2rt_norm2() const { return sup_e2rt_norm2_; }
  double sup_e2rt_gamma2() const { return sup_e2rt_gamma2_; }
  double max_abs_drift() const { return max_abs_drift_; }
  int max_fixed_point_iters() const { return max_fp_iters_; }

  /// One step with the supplied Brownian increment (variance h per channel).
  void em_step(const Vec& dw) {
    if (dw.size() != model_->m)
      throw DimensionMismatch("em_step: increment dimension != m");
    if (cfg_.halt_on_stop && monitor_.stopped())
      throw StoppedState("em_step: stepping a halted path");
    const double t_j = t_of(j_);
    const double t_next = t_of(j_ + 1);
    const double step_h = t_next - t_j;

    const SegmentView left = path_.segment(t_j);
    const Vec bv = model_->drift(left);
    const Mat sv = model_->diffusion(left);
    max_abs_drift_ = std::max(max_abs_drift_, norm2(bv));

    Vec gamma_new = gamma_;
    axpy(step_h, bv, gamma_new);
    for (std::size_t i = 0; i < model_->d; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < model_->m; ++c) s += sv(i, c) * dw[c];
      gamma_new[i] += s;
    }

    Vec x_prev;
    path_.value_at(t_j, x_prev);
    const double prev_norm = seg_norm_;

    int iters = 0;
    Vec x = x_prev;
    path_.append(t_next, x);
    if (!model_->has_neutral()) {
      x = gamma_new;
      path_.set_last(x);
      iters = 1;
    } else {
      for (;;) {
        ++iters;
        Vec x_new = model_->neutral(path_.segment(t_next));
        axpy(1.0, gamma_new, x_new);
        const double res = dist2(x_new, x);
        x = std::move(x_new);
        path_.set_last(x);
        if (res <= cfg_.eps_fix * (1.0 + norm2(x))) break;
        if (iters >= cfg_.iter_cap)
          throw FixedPointDivergence(
              "em_step: neutral fixed point did not converge (k >= 1 or "
              "model inconsistent with declared contraction)");
      }
    }
    gamma_ = std::move(gamma_new);
    max_fp_iters_ = std::max(max_fp_iters_, iters);
    ++j_;

    double disp_mid = 0.0;
    if (cfg_.check_invariants || cfg_.record_diagnostics) {
      // segment norms at the step midpoint, where the frozen cap is active
      Vec x_mid;
      lerp_into(x_prev, x, 0.5, x_mid);
      sup_cell_.reset();
      sup_cell_.linear_cell(-0.5 * step_h, 0.0, x_prev, x_mid);
      const double norm_mid =
          std::max(prev_norm * half_decay_, sup_cell_.running());
      const double frozen_mid = std::max(prev_norm * half_decay_, norm2(x_prev));
      if (cfg_.check_invariants) {
        const double slack = 1.0 + 1e-9;
        if (frozen_mid > 3.0 * norm_mid * slack) ++loc1_violations_;
        if (norm2(x_prev) > 2.0 * norm_mid * slack) ++xtn_violations_;
      }
      // ||p_t||_r at the midpoint: difference to the frozen segment is
      // supported on the current half-cell and vanishes at its left edge
      Vec zero(model_->d, 0.0), gap(model_->d);
      for (std::size_t i = 0; i < model_->d; ++i) gap[i] = x_mid[i] - x_prev[i];
      sup_cell_.reset();
      sup_cell_.linear_cell(-0.5 * step_h, 0.0, zero, gap);
      disp_mid = sup_cell_.running();
    }

    if (cfg_.track_norm) {
      sup_cell_.reset();
      sup_cell_.linear_cell(-step_h, 0.0, x_prev, x);
      seg_norm_ = std::max(seg_norm_ * decay_, sup_cell_.running());
    }
    update_sups(t_next, x);

    if (std::isfinite(monitor_.R)) {
      const double third = monitor_.R / 3.0;
      if (!monitor_.tau && norm2(x) >= third) monitor_.tau = t_next;
      if (cfg_.track_norm && !monitor_.alpha && seg_norm_ >= third)
        monitor_.alpha = t_next;
    }
    if (cfg_.record_diagnostics)
      diags_.push_back({j_, t_next, norm2(x), seg_norm_, disp_mid, iters,
                        monitor_.stopped()});
  }

  /// The frozen segment x_hat_t for t in the simulated horizon.
  SegmentView frozen_segment(double t) const {
    return path_.frozen_segment(t, grid_floor_time(cfg_.n, t));
  }

 private:
  double t_of(std::uint64_t j) const {
    return static_cast<double>(j) / static_cast<double>(cfg_.n);
  }

  void update_sups(double t, const Vec&) {
    const double e2 = std::exp(2.0 * model_->r * t);
    if (cfg_.track_norm)
      sup_e2rt_norm2_ = std::max(sup_e2rt_norm2_, e2 * seg_norm_ * seg_norm_);
    sup_e2rt_gamma2_ = std::max(sup_e2rt_gamma2_, e2 * dot(gamma_, gamma_));
  }

  const ModelSpec* model_;
  EmConfig cfg_;
  HistoryPath path_;
  detail::WeightedSup sup_cell_;
  Vec gamma_;
  double seg_norm_ = 0.0;
  double decay_ = 1.0;
  double half_decay_ = 1.0;
  std::uint64_t j_ = 0;
  StoppingMonitor monitor_;
  std::vector<StepDiagnostics> diags_;
  std::uint64_t loc1_violations_ = 0;
  std::uint64_t xtn_violations_ = 0;
  double sup_e2rt_norm2_ = 0.0;
  double sup_e2rt_gamma2_ = 0.0;
  double max_abs_drift_ = 0.0;
  int max_fp_iters_ = 0;
};

/// ||p_t||_r = ||x_t - x_hat_t||_r. The difference is supported on
/// (t_n - t, 0] and is affine there, so the computation is local to the
/// current step. Zero at grid times.
inline double displacement(const HistoryPath& path, std::uint64_t n, double t,
                           double tol = 1e-10) {
  if (t < 0.0 || t > path.frontier() + 1e-12)
    throw QueryBeyondFrontier("displacement: t outside the simulated horizon");
  const double tn = grid_floor_time(n, t);
  if (tn >= t) return 0.0;
  Vec x_t, x_tn;
  path.value_at(t, x_t);
  path.value_at(tn, x_tn);
  Vec zero(path.dim(), 0.0), gap(path.dim());
  for (std::size_t i = 0; i < path.dim(); ++i) gap[i] = x_t[i] - x_tn[i];
  detail::WeightedSup acc(path.r(), tol);
  acc.linear_cell(tn - t, 0.0, zero, gap);
  return acc.running();
}

struct RunResult {
  HistoryPath path;
  StoppingMonitor monitor;
  std::vector<StepDiagnostics> diagnostics;
  std::uint64_t steps = 0;
  std::uint64_t loc1_violations = 0;
  std::uint64_t xtn_violations = 0;
  double sup_e2rt_norm2 = 0.0;
  double sup_e2rt_gamma2 = 0.0;
  double max_abs_drift = 0.0;
  int max_fixed_point_iters = 0;
  bool halted = false;
};

/// Integrates one path over [0, T] (or up to the stopping time when
/// halt_on_stop is set), consuming increments from the injected driver.
inline RunResult run(const ModelSpec& model, const InitialData& init,
                     const EmConfig& cfg, BrownianDriver& driver) {
  const double steps_real = cfg.T * static_cast<double>(cfg.n);
  const auto n_steps = static_cast<std::uint64_t>(std::llround(steps_real));
  if (std::abs(steps_real - static_cast<double>(n_steps)) > 1e-9)
    throw ConfigError("run: T*n must be an integer number of steps");
  EmState state(model, init, cfg);
  Vec dw;
  bool halted = false;
  for (std::uint64_t j = 0; j < n_steps; ++j) {
    if (cfg.halt_on_stop && state.monitor().stopped()) {
      halted = true;
      break;
    }
    driver.increment(cfg.n, j, dw);
    state.em_step(dw);
  }
  RunResult out{state.take_path(),
                state.monitor(),
                state.diagnostics(),
                state.step_index(),
                state.loc1_violations(),
                state.xtn_violations(),
                state.sup_e2rt_norm2(),
                state.sup_e2rt_gamma2(),
                state.max_abs_drift(),
                state.max_fixed_point_iters(),
                halted};
  return out;
}

}  // namespace nsfde
