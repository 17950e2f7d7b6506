#pragma once

// Test-side oracles, kept independent of the library's norm/integration
// machinery: dense-grid maximization for the weighted sup, closed-form cell
// suprema via stationary points, a method-of-steps reference integrator for
// scalar neutral delay ODEs, and the Ornstein-Uhlenbeck second moment.

#include <nsfde/common.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracles {

using nsfde::Vec;

/// Brute-force sup of e^{r theta}|f(theta)| by dense sampling of the support
/// [support_start, 0], endpoints included. For admissible tails (alpha <= r)
/// the weighted tail sup is attained at the junction, which the grid hits
/// exactly, so no sampling below the support is needed.
inline double dense_norm(const std::function<Vec(double)>& f,
                         double support_start, double /*tail_alpha*/, double r,
                         std::size_t points = 100000) {
  double best = 0.0;
  for (std::size_t i = 0; i <= points; ++i) {
    const double th =
        support_start * (1.0 - static_cast<double>(i) / points);
    best = std::max(best, std::exp(r * th) * nsfde::norm2(f(th)));
  }
  return best;
}

/// Same brute force over an arbitrary evaluator on [theta_lo, 0].
inline double dense_sup(const std::function<Vec(double)>& eval, double theta_lo,
                        double r, std::size_t points = 100000) {
  double best = 0.0;
  for (std::size_t i = 0; i <= points; ++i) {
    const double th =
        theta_lo + (0.0 - theta_lo) * static_cast<double>(i) / points;
    best = std::max(best, std::exp(r * th) * nsfde::norm2(eval(th)));
  }
  return best;
}

/// Exact sup of e^{r theta} |va + (theta-a)/(b-a) (vb-va)| on [a, b]:
/// the weighted square is e^{2 r theta} q(theta) with q quadratic, whose
/// stationary points solve a quadratic equation.
inline double exact_linear_cell_sup(double r, double a, double b, const Vec& va,
                                    const Vec& vb) {
  const double w = b - a;
  // v(theta) = u + (theta - a) s with s = (vb - va)/w
  double ss = 0.0, us = 0.0, uu = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double s = (vb[i] - va[i]) / w;
    ss += s * s;
    us += va[i] * s;
    uu += va[i] * va[i];
  }
  // q(t) = ss t^2 + 2(us - ss a) t + (uu - 2 us a + ss a^2), t = theta
  const double A = ss;
  const double B = 2.0 * (us - ss * a);
  const double C = uu - 2.0 * us * a + ss * a * a;
  auto weighted = [&](double th) {
    const double q = std::max(0.0, A * th * th + B * th + C);
    return std::exp(r * th) * std::sqrt(q);
  };
  double best = std::max(weighted(a), weighted(b));
  // d/dt [e^{2rt} q] = e^{2rt} (2 r q + q') = 0
  const double qa = 2.0 * r * A;
  const double qb = 2.0 * r * B + 2.0 * A;
  const double qc = 2.0 * r * C + B;
  if (qa != 0.0) {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double root = std::sqrt(disc);
      for (double th : {(-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)})
        if (th > a && th < b) best = std::max(best, weighted(th));
    }
  } else if (qb != 0.0) {
    const double th = -qc / qb;
    if (th > a && th < b) best = std::max(best, weighted(th));
  }
  return best;
}

/// Dense reference for the scalar neutral delay ODE
///     d/dt [x(t) - kappa x(t - tau)] = a x(t) + b x(t - tau),   x == xi0 on
/// (-inf, 0], by the method of steps with classical RK4 at step h_ref.
/// Returns x on the uniform grid {i * h_ref}.
class NeutralDdeReference {
 public:
  NeutralDdeReference(double kappa, double tau, double a, double b, double xi0,
                      double T, double h_ref = 1e-4)
      : kappa_(kappa), tau_(tau), a_(a), b_(b), h_(h_ref) {
    const auto steps = static_cast<std::size_t>(std::llround(T / h_ref));
    const auto lag = static_cast<std::size_t>(std::llround(tau / h_ref));
    x_.resize(steps + 1);
    x_[0] = xi0;
    // x(t - tau) for the first interval comes from the constant history
    auto delayed = [&](std::size_t i) {
      return i < lag ? xi0 : x_[i - lag];
    };
    // y = x - kappa x(. - tau);  y' = a x + b x(. - tau)
    double y = xi0 - kappa_ * xi0;
    for (std::size_t i = 0; i < steps; ++i) {
      // x(t) = y(t) + kappa x(t - tau); the delayed value is frozen data on
      // this step (lag >> h), interpolated at half steps
      const double xd0 = delayed(i);
      const double xd1 = i + 1 < lag ? xi0
                         : (i + 1 - lag < x_.size() ? x_[i + 1 - lag] : xi0);
      const double xdm = 0.5 * (xd0 + xd1);
      auto f = [&](double yv, double xd) {
        return a_ * (yv + kappa_ * xd) + b_ * xd;
      };
      const double k1 = f(y, xd0);
      const double k2 = f(y + 0.5 * h_ * k1, xdm);
      const double k3 = f(y + 0.5 * h_ * k2, xdm);
      const double k4 = f(y + h_ * k3, xd1);
      y += h_ / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      x_[i + 1] = y + kappa_ * delayed(i + 1);
    }
  }

  double at(double t) const {
    const double s = t / h_;
    const auto i = static_cast<std::size_t>(std::floor(s));
    if (i + 1 >= x_.size()) return x_.back();
    const double w = s - static_cast<double>(i);
    return x_[i] + w * (x_[i + 1] - x_[i]);
  }

 private:
  double kappa_, tau_, a_, b_, h_;
  std::vector<double> x_;
};

/// E|x(t)|^2 for dx = -a x dt + c dw, x(0) = x0.
inline double ou_second_moment(double x0, double a, double c, double t) {
  const double decay = std::exp(-2.0 * a * t);
  return x0 * x0 * decay + c * c / (2.0 * a) * (1.0 - decay);
}

/// Least-squares slope of y against x.
inline double regression_slope(const std::vector<double>& x,
                               const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracles
