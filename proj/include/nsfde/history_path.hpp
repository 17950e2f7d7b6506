#pragma once

// Trajectory histories on (-inf, t] and the fading-memory norm
//   ||phi||_r = sup_{theta <= 0} e^{r theta} |phi(theta)|.
//
// A history is an analytic initial-data descriptor on (-inf, 0] spliced to
// piecewise-linear grid samples on [0, t]. The infinite past enters norms and
// integral transforms through closed-form tail rules, so every sup/integral
// is computed over a finite window with a controlled relative error.

#include <nsfde/common.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace nsfde {

/// Behaviour of an initial-data descriptor left of its support:
/// phi(theta) = v_junction * exp(-alpha * (theta - theta_junction)).
/// alpha = 0 is a constant tail. Membership in C_r requires alpha <= r.
struct TailRule {
  double alpha = 0.0;
};

/// Initial data xi on (-inf, 0]: a constant, a sampled table with linear
/// interpolation, or a closed-form function handle, each with a tail rule
/// below its support.
class InitialData {
 public:
  enum class Kind { Constant, Table, Function };

  static InitialData constant(Vec c) {
    InitialData d;
    d.kind_ = Kind::Constant;
    d.dim_ = c.size();
    d.support_start_ = 0.0;
    d.junction_ = std::move(c);
    if (d.dim_ == 0) throw DimensionMismatch("initial data: empty constant");
    return d;
  }

  /// thetas strictly increasing, last must be 0; values[i] at thetas[i].
  static InitialData table(std::vector<double> thetas, std::vector<Vec> values,
                           TailRule tail = {}) {
    InitialData d;
    d.kind_ = Kind::Table;
    if (thetas.empty() || thetas.size() != values.size())
      throw ConfigError("initial data table: knots/values size mismatch");
    if (thetas.back() != 0.0)
      throw ConfigError("initial data table: last knot must be at theta = 0");
    d.dim_ = values.front().size();
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      if (i > 0 && !(thetas[i] > thetas[i - 1]))
        throw ConfigError("initial data table: knots must be strictly increasing");
      if (values[i].size() != d.dim_)
        throw DimensionMismatch("initial data table: inconsistent value dimension");
    }
    d.support_start_ = thetas.front();
    d.junction_ = values.front();
    d.knots_ = std::move(thetas);
    d.values_ = std::move(values);
    d.tail_ = tail;
    return d;
  }

  /// f defined on [support_start, 0]; the tail rule takes over below, anchored
  /// at f(support_start).
  static InitialData function(std::function<Vec(double)> f, double support_start,
                              TailRule tail = {}) {
    InitialData d;
    d.kind_ = Kind::Function;
    if (!(support_start <= 0.0))
      throw ConfigError("initial data function: support_start must be <= 0");
    d.fn_ = std::move(f);
    d.support_start_ = support_start;
    d.junction_ = d.fn_(support_start);
    d.dim_ = d.junction_.size();
    d.tail_ = tail;
    return d;
  }

  Kind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  double support_start() const { return support_start_; }
  const TailRule& tail() const { return tail_; }
  const Vec& junction_value() const { return junction_; }
  const std::vector<double>& knots() const { return knots_; }

  void value(double theta, Vec& out) const {
    if (theta < support_start_) {
      const double s = std::exp(-tail_.alpha * (theta - support_start_));
      out.resize(dim_);
      for (std::size_t i = 0; i < dim_; ++i) out[i] = junction_[i] * s;
      return;
    }
    switch (kind_) {
      case Kind::Constant:
        out = junction_;
        return;
      case Kind::Function:
        out = fn_(std::min(theta, 0.0));
        if (out.size() != dim_)
          throw DimensionMismatch("initial data function: inconsistent dimension");
        return;
      case Kind::Table: {
        auto it = std::upper_bound(knots_.begin(), knots_.end(), theta);
        if (it == knots_.begin()) {
          out = values_.front();
          return;
        }
        const std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
        if (hi >= knots_.size()) {
          out = values_.back();
          return;
        }
        const double a = knots_[hi - 1], b = knots_[hi];
        const double w = (theta - a) / (b - a);
        lerp_into(values_[hi - 1], values_[hi], w, out);
        return;
      }
    }
  }

  Vec value(double theta) const {
    Vec out;
    value(theta, out);
    return out;
  }

 private:
  Kind kind_ = Kind::Constant;
  std::size_t dim_ = 0;
  double support_start_ = 0.0;
  TailRule tail_;
  Vec junction_;
  std::vector<double> knots_;
  std::vector<Vec> values_;
  std::function<Vec(double)> fn_;
};

namespace detail {

/// Accumulates sup_theta e^{r theta}|v(theta)| over cells with a guaranteed
/// relative error: the result N satisfies N <= true sup <= N * (1 + tol).
/// On an affine cell |v| is convex, hence bounded by the chord through the
/// endpoint magnitudes, and sup e^{r theta} * chord(theta) has a closed form;
/// that rigorous over-estimate drives both bisection termination and pruning
/// against the running maximum.
class WeightedSup {
 public:
  WeightedSup(double r, double tol) : r_(r), tol_(tol) {}

  void reset() { running_ = 0.0; }
  double running() const { return running_; }
  void seed(double w) { running_ = std::max(running_, w); }

  void point(double theta, const Vec& v) {
    seed(std::exp(r_ * theta) * norm2(v));
  }

  /// Affine values: va at theta=a, vb at theta=b.
  void linear_cell(double a, double b, const Vec& va, const Vec& vb) {
    if (!(b > a)) return;
    affine_ = true;
    frames_.clear();
    pool_.clear();
    frames_.push_back(make_frame(a, b, push_vec(va), push_vec(vb)));
    drain([this](double t, std::size_t lo, std::size_t hi, Vec& out) {
      const std::size_t d = dim_;
      out.resize(d);
      const double* pa = pool_.data() + lo;
      const double* pb = pool_.data() + hi;
      (void)t;
      for (std::size_t i = 0; i < d; ++i) out[i] = 0.5 * (pa[i] + pb[i]);
    });
  }

  /// General continuous values; eval(theta, out). Pre-splitting guards
  /// against interior maxima invisible from coarse endpoints (the chord
  /// bound is heuristic here, rigorous only in the affine case).
  template <class F>
  void callable_cell(double a, double b, int presplit, F&& eval) {
    if (!(b > a)) return;
    affine_ = false;
    presplit = std::max(presplit, 1);
    const double w = (b - a) / presplit;
    Vec va, vb;
    eval(a, va);
    dim_ = va.size();
    for (int k = 0; k < presplit; ++k) {
      const double lo = a + k * w;
      const double hi = (k + 1 == presplit) ? b : a + (k + 1) * w;
      eval(hi, vb);
      frames_.clear();
      pool_.clear();
      frames_.push_back(make_frame(lo, hi, push_vec(va), push_vec(vb)));
      drain([&](double t, std::size_t, std::size_t, Vec& out) { eval(t, out); });
      std::swap(va, vb);
    }
  }

 private:
  struct Frame {
    double a, b;
    std::size_t ia, ib;  // offsets into pool_
    double na, nb;       // |v| at the endpoints
    double wa, wb;       // e^{r theta} |v| at the endpoints
  };

  std::size_t push_vec(const Vec& v) {
    dim_ = v.size();
    const std::size_t off = pool_.size();
    pool_.insert(pool_.end(), v.begin(), v.end());
    return off;
  }

  double mag(std::size_t off) const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double x = pool_[off + i];
      s += x * x;
    }
    return std::sqrt(s);
  }

  Frame make_frame(double a, double b, std::size_t ia, std::size_t ib) const {
    const double na = mag(ia), nb = mag(ib);
    return {a, b, ia, ib, na, nb,
            std::exp(r_ * a) * na, std::exp(r_ * b) * nb};
  }

  // sup over [a, b] of e^{r theta} * (affine chord through (a,na), (b,nb))
  double chord_bound(const Frame& f) const {
    double out = std::max(f.wa, f.wb);
    const double q = (f.nb - f.na) / (f.b - f.a);
    if (q != 0.0) {
      const double p = f.na - q * f.a;
      const double tc = -1.0 / r_ - p / q;
      if (tc > f.a && tc < f.b)
        out = std::max(out, std::exp(r_ * tc) * (p + q * tc));
    }
    return out;
  }

  template <class Mid>
  void drain(Mid&& midpoint) {
    Vec scratch;
    long guard = 0;
    while (!frames_.empty()) {
      if (++guard > kMaxPops) {
        // tolerance below attainable resolution; accept evaluated maxima
        for (const Frame& f : frames_) seed(std::max(f.wa, f.wb));
        return;
      }
      Frame f = frames_.back();
      frames_.pop_back();
      const double best = std::max(f.wa, f.wb);
      const double degenerate = 1e-15 * std::max(1.0, std::abs(f.a));
      if (affine_) {
        // the chord bound is rigorous: |v| is convex along the cell
        const double over = chord_bound(f);
        if (over <= running_) continue;
        if (over <= best * (1.0 + tol_) || (f.b - f.a) <= degenerate) {
          seed(best);
          continue;
        }
        seed(best);  // lets sibling cells prune against the frontier
        const double m = 0.5 * (f.a + f.b);
        midpoint(m, f.ia, f.ib, scratch);
        const std::size_t im = push_vec(scratch);
        frames_.push_back(make_frame(f.a, m, f.ia, im));
        frames_.push_back(make_frame(m, f.b, im, f.ib));
        continue;
      }
      // General cells: evaluate the midpoint, then require the half-cell
      // chord bounds to agree with the three evaluated points. Flat or
      // monotone cells terminate immediately; interior bumps keep shrinking
      // until endpoint sampling resolves them quadratically.
      if (best * std::exp(r_ * (f.b - f.a)) <= running_) continue;
      const double m = 0.5 * (f.a + f.b);
      midpoint(m, f.ia, f.ib, scratch);
      const std::size_t im = push_vec(scratch);
      const Frame left = make_frame(f.a, m, f.ia, im);
      const Frame right = make_frame(m, f.b, im, f.ib);
      const double best3 = std::max(best, left.wb);
      // prune only on the conservative factor; the chord bound may hide a
      // bump from three samples and must not discard cells
      if (best3 * std::exp(0.5 * r_ * (f.b - f.a)) <= running_) {
        seed(best3);
        continue;
      }
      double over = std::max(chord_bound(left), chord_bound(right));
      // parabolic vertex of the three weighted samples catches smooth peaks
      // the chords miss
      {
        const double y0 = f.wa, y1 = left.wb, y2 = f.wb;
        const double denom = y0 - 2.0 * y1 + y2;
        if (denom < 0.0)
          over = std::max(over, y1 - (y2 - y0) * (y2 - y0) / (8.0 * denom));
      }
      // tightened stop: the agreement test is an estimate here, not a bound
      if (over <= best3 * (1.0 + tol_ / 16.0) || (f.b - f.a) <= degenerate) {
        seed(best3);
        continue;
      }
      seed(best3);
      frames_.push_back(left);
      frames_.push_back(right);
    }
  }

  static constexpr long kMaxPops = 2000000;
  double r_;
  double tol_;
  double running_ = 0.0;
  bool affine_ = true;
  std::size_t dim_ = 0;
  std::vector<Frame> frames_;
  std::vector<double> pool_;
};

/// sup_{theta <= u_min} e^{r theta} |xi(theta)| for a tail rule, exact:
/// the weighted profile e^{(r - alpha) theta} peaks at the junction.
inline double tail_weighted_sup(const InitialData& init, double r) {
  if (init.tail().alpha > r)
    throw NonFiniteNorm("tail decay rate alpha exceeds r: weighted values unbounded");
  return std::exp(r * init.support_start()) * norm2(init.junction_value());
}

inline int presplit_count(double width, double r) {
  const double target = std::min(1.0 / (4.0 * std::max(r, 1e-12)), width / 256.0);
  const double n = std::ceil(width / std::max(target, 1e-9));
  return static_cast<int>(std::clamp(n, 1.0, 4096.0));
}

/// ||xi||_r of pure initial data, relative error <= tol.
inline double initial_norm(const InitialData& init, double r, double tol) {
  WeightedSup acc(r, tol);
  acc.seed(tail_weighted_sup(init, r));
  switch (init.kind()) {
    case InitialData::Kind::Constant:
      break;  // tail term already covers theta = 0
    case InitialData::Kind::Table: {
      const auto& knots = init.knots();
      Vec va, vb;
      for (std::size_t i = knots.size(); i-- > 1;) {
        init.value(knots[i - 1], va);
        init.value(knots[i], vb);
        acc.linear_cell(knots[i - 1], knots[i], va, vb);
      }
      break;
    }
    case InitialData::Kind::Function: {
      const double lo = init.support_start();
      acc.callable_cell(lo, 0.0, presplit_count(-lo, r),
                        [&](double th, Vec& out) { init.value(th, out); });
      break;
    }
  }
  return acc.running();
}

// integral of e^{2 r u} * linear(u) over [sa, sb], where linear(sa) = va,
// linear(sb) = vb; accumulated into out (componentwise).
inline void exp2r_linear_integral(double r, double sa, double sb, const Vec& va,
                                  const Vec& vb, Vec& out) {
  const double tr = 2.0 * r;
  const double ea = std::exp(tr * sa), eb = std::exp(tr * sb);
  const double A = (eb - ea) / tr;  // int e^{2ru} du
  // int (u - sa)/(sb - sa) e^{2ru} du
  const double iu = eb * (sb / tr - 1.0 / (tr * tr)) - ea * (sa / tr - 1.0 / (tr * tr));
  const double B = (iu - sa * A) / (sb - sa);
  for (std::size_t i = 0; i < va.size(); ++i)
    out[i] += A * va[i] + B * (vb[i] - va[i]);
}

template <class F>
void adaptive_simpson(const F& f, double a, double b, double tol_abs, int depth,
                      const Vec& fa, const Vec& fm, const Vec& fb, Vec& out) {
  const double m = 0.5 * (a + b);
  Vec flm = f(0.5 * (a + m));
  Vec frm = f(0.5 * (m + b));
  const double h = b - a;
  double err = 0.0;
  Vec fine(fa.size());
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const double coarse = h / 6.0 * (fa[i] + 4.0 * fm[i] + fb[i]);
    const double fine_i = h / 12.0 * (fa[i] + 4.0 * flm[i] + 2.0 * fm[i] +
                                      4.0 * frm[i] + fb[i]);
    err += std::abs(fine_i - coarse);
    fine[i] = fine_i;
  }
  if (depth <= 0 || err <= 15.0 * tol_abs) {
    for (std::size_t i = 0; i < fa.size(); ++i) out[i] += fine[i];
    return;
  }
  adaptive_simpson(f, a, m, 0.5 * tol_abs, depth - 1, fa, flm, fm, out);
  adaptive_simpson(f, m, b, 0.5 * tol_abs, depth - 1, fm, frm, fb, out);
}

/// I(xi) = int_{-inf}^0 e^{2 r u} xi(u) du (componentwise), tails closed form.
inline Vec initial_exp2r_moment(const InitialData& init, double r, double tol) {
  const double alpha = init.tail().alpha;
  if (alpha > r)
    throw NonFiniteNorm("tail decay rate alpha exceeds r");
  const std::size_t d = init.dim();
  Vec out(d, 0.0);
  // tail: int_{-inf}^{u_min} e^{2ru} v_j e^{-alpha (u - u_min)} du
  //     = v_j e^{2 r u_min} / (2r - alpha)
  const double u_min = init.support_start();
  const double tail_factor = std::exp(2.0 * r * u_min) / (2.0 * r - alpha);
  for (std::size_t i = 0; i < d; ++i)
    out[i] += init.junction_value()[i] * tail_factor;
  switch (init.kind()) {
    case InitialData::Kind::Constant:
      break;
    case InitialData::Kind::Table: {
      const auto& knots = init.knots();
      Vec va, vb;
      for (std::size_t i = 1; i < knots.size(); ++i) {
        init.value(knots[i - 1], va);
        init.value(knots[i], vb);
        exp2r_linear_integral(r, knots[i - 1], knots[i], va, vb, out);
      }
      break;
    }
    case InitialData::Kind::Function: {
      auto weighted = [&](double u) {
        Vec v = init.value(u);
        const double w = std::exp(2.0 * r * u);
        for (double& x : v) x *= w;
        return v;
      };
      const double scale = std::max(1.0, norm2(init.junction_value()));
      Vec fa = weighted(u_min), fm = weighted(0.5 * u_min), fb = weighted(0.0);
      adaptive_simpson(weighted, u_min, 0.0, tol * scale, 40, fa, fm, fb, out);
      break;
    }
  }
  return out;
}

}  // namespace detail

class SegmentView;

/// Full past trajectory: initial data on (-inf, 0] plus strictly increasing
/// grid samples on [0, frontier], linearly interpolated. Single-writer: the
/// integrator owns it; SegmentViews are read-only.
class HistoryPath {
 public:
  HistoryPath(InitialData init, double r)
      : init_(std::move(init)), r_(r), dim_(init_.dim()) {
    if (!(r > 0.0)) throw ConfigError("history path: decay rate r must be > 0");
    if (init_.tail().alpha > r)
      throw NonFiniteNorm(
          "initial data not in C_r: tail decay rate alpha exceeds r");
    xi_norm_ = detail::initial_norm(init_, r_, kCacheTol);
    xi_exp2r_moment_ = detail::initial_exp2r_moment(init_, r_, kCacheTol);
    times_.push_back(0.0);
    Vec v0 = init_.value(0.0);
    vals_.insert(vals_.end(), v0.begin(), v0.end());
    prefix_.assign(dim_, 0.0);
  }

  double r() const { return r_; }
  std::size_t dim() const { return dim_; }
  double frontier() const { return times_.back(); }
  std::size_t grid_size() const { return times_.size(); }
  double grid_time(std::size_t j) const { return times_[j]; }
  const InitialData& initial() const { return init_; }

  /// ||xi||_r, cached at construction (relative error <= 1e-12).
  double initial_norm() const { return xi_norm_; }
  const Vec& initial_exp2r_moment() const { return xi_exp2r_moment_; }

  void grid_value(std::size_t j, Vec& out) const {
    out.assign(vals_.begin() + j * dim_, vals_.begin() + (j + 1) * dim_);
  }

  void append(double t, const Vec& v) {
    if (!(t > times_.back()))
      throw NonMonotoneTime("append: time must exceed the current frontier");
    if (v.size() != dim_) throw DimensionMismatch("append: wrong dimension");
    const std::size_t k = times_.size();
    times_.push_back(t);
    vals_.insert(vals_.end(), v.begin(), v.end());
    prefix_.resize((k + 1) * dim_);
    std::copy(prefix_.begin() + (k - 1) * dim_, prefix_.begin() + k * dim_,
              prefix_.begin() + k * dim_);
    refresh_last_prefix();
  }

  /// Replace the frontier value (per-step neutral fixed point splice).
  void set_last(const Vec& v) {
    if (times_.size() < 2) throw Error("set_last: no appended sample to replace");
    std::copy(v.begin(), v.end(), vals_.end() - dim_);
    const std::size_t k = times_.size() - 1;
    std::copy(prefix_.begin() + (k - 1) * dim_, prefix_.begin() + k * dim_,
              prefix_.begin() + k * dim_);
    refresh_last_prefix();
  }

  /// Point evaluation: exact initial-data value for t <= 0, linear
  /// interpolation between grid samples for t > 0.
  void value_at(double t, Vec& out) const {
    if (t <= 0.0) {
      init_.value(t, out);
      return;
    }
    if (t > times_.back())
      throw QueryBeyondFrontier("evaluate: time beyond the last grid sample");
    const std::size_t hi = cell_upper(t);
    const double a = times_[hi - 1], b = times_[hi];
    const double w = (t - a) / (b - a);
    out.resize(dim_);
    const double* pa = vals_.data() + (hi - 1) * dim_;
    const double* pb = vals_.data() + hi * dim_;
    for (std::size_t i = 0; i < dim_; ++i) out[i] = pa[i] + w * (pb[i] - pa[i]);
  }

  Vec value_at(double t) const {
    Vec out;
    value_at(t, out);
    return out;
  }

  SegmentView segment(double t) const;
  SegmentView frozen_segment(double t, double cap) const;

  /// int_0^{s_j} e^{2 r u} x(u) du, maintained incrementally on append.
  void prefix_integral(std::size_t j, Vec& out) const {
    out.assign(prefix_.begin() + j * dim_, prefix_.begin() + (j + 1) * dim_);
  }

  /// Index of the first grid time >= t (for 0 < t <= frontier).
  std::size_t cell_upper(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t);
    std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    if (hi == 0) hi = 1;
    return hi;
  }

 private:
  void refresh_last_prefix() {
    const std::size_t k = times_.size() - 1;
    Vec va(vals_.begin() + (k - 1) * dim_, vals_.begin() + k * dim_);
    Vec vb(vals_.begin() + k * dim_, vals_.begin() + (k + 1) * dim_);
    Vec acc(dim_, 0.0);
    detail::exp2r_linear_integral(r_, times_[k - 1], times_[k], va, vb, acc);
    for (std::size_t i = 0; i < dim_; ++i) prefix_[k * dim_ + i] += acc[i];
  }

  static constexpr double kCacheTol = 1e-12;
  InitialData init_;
  double r_;
  std::size_t dim_;
  double xi_norm_ = 0.0;
  Vec xi_exp2r_moment_;
  std::vector<double> times_;
  std::vector<double> vals_;    // flat, grid_size * dim
  std::vector<double> prefix_;  // flat, grid_size * dim
};

/// The functional state x_t: theta |-> x((t + theta) ^ cap), theta <= 0.
/// cap == anchor gives the plain segment; cap < anchor the frozen one.
class SegmentView {
 public:
  SegmentView(const HistoryPath& path, double anchor, double cap)
      : path_(&path), anchor_(anchor), cap_(std::clamp(cap, 0.0, anchor)) {
    if (anchor < 0.0 || anchor > path.frontier() + 1e-12)
      throw QueryBeyondFrontier("segment anchor outside [0, frontier]");
  }

  const HistoryPath& path() const { return *path_; }
  double anchor() const { return anchor_; }
  double cap() const { return cap_; }
  bool frozen() const { return cap_ < anchor_; }
  std::size_t dim() const { return path_->dim(); }
  double r() const { return path_->r(); }

  void eval(double theta, Vec& out) const {
    path_->value_at(std::min(anchor_ + theta, cap_), out);
  }

  Vec operator()(double theta) const {
    Vec out;
    eval(theta, out);
    return out;
  }

 private:
  const HistoryPath* path_;
  double anchor_;
  double cap_;
};

inline SegmentView HistoryPath::segment(double t) const {
  return SegmentView(*this, t, t);
}

inline SegmentView HistoryPath::frozen_segment(double t, double cap) const {
  return SegmentView(*this, t, std::min(cap, t));
}

/// ||seg||_r with guaranteed relative error <= tol (the result never
/// over-estimates: it is a max of evaluated weighted points).
inline double fading_norm(const SegmentView& seg, double tol = 1e-10) {
  if (!(tol > 0.0)) throw ConfigError("fading_norm: tol must be > 0");
  const HistoryPath& p = seg.path();
  const double r = p.r();
  const double t = seg.anchor();
  const double c = std::min(seg.cap(), t);
  detail::WeightedSup acc(r, tol);

  // Plateau theta in [c - t, 0]: constant value x(c); weight peaks at 0.
  Vec va, vb;
  if (c < t) {
    p.value_at(c, va);
    acc.seed(norm2(va));
  }

  // Grid region s in [0, min(c, t)], right to left so pruning bites early.
  const double s_hi = std::min(c, p.frontier());
  if (s_hi > 0.0) {
    std::size_t hi = p.cell_upper(s_hi);
    double b = s_hi;
    p.value_at(b, vb);
    while (true) {
      const double a = p.grid_time(hi - 1);
      p.grid_value(hi - 1, va);
      acc.linear_cell(a - t, b - t, va, vb);
      if (hi == 1) break;
      --hi;
      b = a;
      std::swap(va, vb);
    }
  }

  // Initial region theta <= -t contributes e^{-rt} ||xi||_r exactly.
  const double init_upper = std::exp(-r * t) * p.initial_norm() * (1.0 + 2e-12);
  if (init_upper > acc.running()) {
    const double xi = (tol >= 1e-12) ? p.initial_norm()
                                     : detail::initial_norm(p.initial(), r, tol);
    acc.seed(std::exp(-r * t) * xi);
  }
  return acc.running();
}

namespace detail {

struct TailAt {
  double alpha;
  double theta_junction;  // in segment coordinates
  Vec value;              // value at the junction
};

inline TailAt tail_in_segment_coords(const SegmentView& s) {
  const InitialData& init = s.path().initial();
  return {init.tail().alpha, init.support_start() - s.anchor(),
          init.junction_value()};
}

}  // namespace detail

/// ||a - b||_r of the pointwise difference, same truncation contract as
/// fading_norm. Anchors may differ; dimensions must match.
inline double segment_distance(const SegmentView& a, const SegmentView& b,
                               double tol = 1e-10) {
  if (a.dim() != b.dim())
    throw DimensionMismatch("segment_distance: dimension mismatch");
  if (!(tol > 0.0)) throw ConfigError("segment_distance: tol must be > 0");
  const double r = a.r();
  const auto ta = detail::tail_in_segment_coords(a);
  const auto tb = detail::tail_in_segment_coords(b);
  const double theta_deep = std::min(ta.theta_junction, tb.theta_junction);

  // Breakpoints of the difference on [theta_deep, 0]: grid knots, caps and
  // table knots of both sides, mapped into segment coordinates.
  std::vector<double> bp{theta_deep, 0.0};
  auto add_side = [&](const SegmentView& s) {
    const HistoryPath& p = s.path();
    const double t = s.anchor();
    const double cap = std::min(s.cap(), t);
    bp.push_back(cap - t);
    bp.push_back(-t);
    for (std::size_t j = 0; j < p.grid_size(); ++j) {
      const double th = p.grid_time(j) - t;
      if (th > theta_deep && th < 0.0) bp.push_back(th);
    }
    const InitialData& init = p.initial();
    if (init.kind() == InitialData::Kind::Table) {
      for (double u : init.knots()) {
        const double th = u - t;
        if (th > theta_deep && th < 0.0) bp.push_back(th);
      }
    }
  };
  add_side(a);
  add_side(b);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  while (!bp.empty() && bp.front() < theta_deep) bp.erase(bp.begin());

  detail::WeightedSup acc(r, tol);
  Vec ua, ub, scratch;
  auto eval_diff = [&](double th, Vec& out) {
    a.eval(th, ua);
    b.eval(th, ub);
    out.resize(ua.size());
    for (std::size_t i = 0; i < ua.size(); ++i) out[i] = ua[i] - ub[i];
  };

  // A side is affine on a cell unless the cell lies in a function-descriptor
  // region or a decaying exponential tail.
  auto affine_on = [&](const SegmentView& s, double lo, double hi) {
    const InitialData& init = s.path().initial();
    const double u_lo = lo + s.anchor();  // path time at cell start
    if (u_lo >= 0.0) return true;         // grid/plateau region
    const double ss = init.support_start();
    if (hi + s.anchor() <= ss)  // entirely in tail
      return init.tail().alpha == 0.0;
    if (u_lo < ss) return false;  // straddles the junction
    return init.kind() != InitialData::Kind::Function;
  };

  Vec va, vb;
  for (std::size_t i = bp.size(); i-- > 1;) {
    const double lo = bp[i - 1], hi = bp[i];
    if (!(hi > lo)) continue;
    if (affine_on(a, lo, hi) && affine_on(b, lo, hi)) {
      eval_diff(lo, va);
      eval_diff(hi, vb);
      acc.linear_cell(lo, hi, va, vb);
    } else {
      acc.callable_cell(lo, hi, detail::presplit_count(hi - lo, r), eval_diff);
    }
  }

  // Deep tail theta <= theta_deep: both sides follow their tail rules.
  if (ta.alpha == tb.alpha) {
    // difference is a single exponential; weighted sup peaks at theta_deep
    eval_diff(theta_deep, va);
    acc.seed(std::exp(r * theta_deep) * norm2(va));
  } else {
    auto side_sup_at = [&](const detail::TailAt& s, double th) {
      // sup over (-inf, th] of the weighted tail of one side
      return std::exp((r - s.alpha) * (th - s.theta_junction)) *
             std::exp(r * s.theta_junction) * norm2(s.value);
    };
    double th = theta_deep;
    const double window = 1.0 / r;
    int guard = 0;
    while (side_sup_at(ta, th) + side_sup_at(tb, th) >
           tol * std::max(acc.running(), 1e-300)) {
      if (++guard > 200)
        throw NonFiniteNorm(
            "segment_distance: tail difference does not decay (alpha = r)");
      acc.callable_cell(th - window, th, 32, eval_diff);
      th -= window;
    }
  }
  return acc.running();
}

/// r * int_{-inf}^0 e^{2 r theta} seg(theta) d theta — the exponentially
/// weighted average used by the fading-average neutral term. Exact on grid
/// and table regions (closed-form cells + prefix cache), adaptive quadrature
/// on function-descriptor regions.
inline Vec exp2r_average(const SegmentView& seg, double tol = 1e-10) {
  const HistoryPath& p = seg.path();
  const double r = p.r();
  const double t = seg.anchor();
  const double c = std::min(seg.cap(), t);
  const std::size_t d = p.dim();

  // raw integral int e^{2ru} x(u) du over [0, c], via the prefix cache
  Vec acc(d, 0.0);
  if (c > 0.0) {
    const std::size_t hi = p.cell_upper(c);
    p.prefix_integral(hi - 1, acc);
    if (c > p.grid_time(hi - 1)) {
      Vec va, vc;
      p.grid_value(hi - 1, va);
      p.value_at(c, vc);
      detail::exp2r_linear_integral(r, p.grid_time(hi - 1), c, va, vc, acc);
    }
  }
  // initial part: e^{-2rt} I(xi), cached; function descriptors honor tol
  Vec init_moment = (tol >= 1e-12 ||
                     p.initial().kind() != InitialData::Kind::Function)
                        ? p.initial_exp2r_moment()
                        : detail::initial_exp2r_moment(p.initial(), r, tol);
  Vec out(d, 0.0);
  const double shrink = std::exp(-2.0 * r * t);
  for (std::size_t i = 0; i < d; ++i)
    out[i] = r * (shrink * (init_moment[i] + acc[i]));
  // plateau x(c) over [c, t]: r e^{-2rt} x(c) (e^{2rt} - e^{2rc}) / (2r)
  if (t > c) {
    Vec vc;
    p.value_at(c, vc);
    const double f = 0.5 * (1.0 - std::exp(-2.0 * r * (t - c)));
    for (std::size_t i = 0; i < d; ++i) out[i] += f * vc[i];
  }
  return out;
}

}  // namespace nsfde
