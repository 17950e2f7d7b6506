#pragma once

// Coefficient triple (D, b, sigma) with declared constants, the built-in
// example models, and sampling-based numerical checkers for the structural
// assumptions: neutral contraction (A3), local weak monotonicity (A1),
// weak coercivity (A2) and the |phi(0) - D(phi)| <= (1+k)||phi||_r bound.
//
// Checkers report estimates, never certificates: a sampled supremum is a
// lower bound on the true constant, and pass/fail against the declared
// value is advisory.

#include <nsfde/common.hpp>
#include <nsfde/history_path.hpp>
#include <nsfde/rng.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>

namespace nsfde {

/// Immutable after construction; coefficient evaluation must be a pure
/// function of the segment, so ModelSpec is safely shareable across paths.
struct ModelSpec {
  std::function<Vec(const SegmentView&)> neutral;    // D: C_r -> R^d (empty = 0)
  std::function<Vec(const SegmentView&)> drift;      // b: C_r -> R^d
  std::function<Mat(const SegmentView&)> diffusion;  // sigma: C_r -> R^{d x m}

  double k = 0.0;  // declared neutral contraction constant, in [0, 1)
  double L = 0.0;  // declared coercivity constant
  double L_R = std::numeric_limits<double>::quiet_NaN();  // optional (A1)
  double r = 1.0;
  std::size_t d = 1;
  std::size_t m = 1;
  std::string name;

  bool has_neutral() const { return static_cast<bool>(neutral); }

  Vec neutral_at(const SegmentView& s) const {
    return has_neutral() ? neutral(s) : Vec(d, 0.0);
  }
};

/// Checks D(0) = 0 and the declared-constant ranges shared by all models.
inline void validate_model(const ModelSpec& model) {
  if (!(model.r > 0.0)) throw ConfigError("model: r must be > 0");
  if (model.k < 0.0 || model.k >= 1.0)
    throw ContractionTooLarge("model: declared k must lie in [0, 1)");
  if (model.d == 0 || model.m == 0) throw ConfigError("model: zero dimension");
  if (model.has_neutral()) {
    HistoryPath zero(InitialData::constant(Vec(model.d, 0.0)), model.r);
    const Vec d0 = model.neutral(zero.segment(0.0));
    if (norm2(d0) > 1e-12)
      throw ConfigError("model: D(0) must vanish (neutral normalization)");
  }
}

// ---------------------------------------------------------------------------
// Built-in models. All share the linear coefficient family
//   b(phi)     = A phi(0) + B phi(-tau)
//   sigma(phi) = Sigma0 + Sigma1 phi(0)          (single noise channel, m = 1)
// and differ in the neutral term.
// ---------------------------------------------------------------------------

namespace detail {

inline ModelSpec linear_family(std::size_t d, const Mat& A, const Mat& B,
                               double tau, const Vec& sigma0, const Mat& sigma1,
                               double r, double L) {
  if (A.rows != d || A.cols != d || B.rows != d || B.cols != d ||
      sigma0.size() != d || sigma1.rows != d || sigma1.cols != d)
    throw DimensionMismatch("builtin model: coefficient dimensions");
  if (!(tau >= 0.0)) throw ConfigError("builtin model: tau must be >= 0");
  ModelSpec msp;
  msp.d = d;
  msp.m = 1;
  msp.r = r;
  msp.L = L;
  const bool b_zero = A.zero() && B.zero();
  msp.drift = [A, B, tau, d, b_zero](const SegmentView& s) {
    if (b_zero) return Vec(d, 0.0);
    Vec v = A.mul(s(0.0));
    const Vec w = B.mul(s(-tau));
    for (std::size_t i = 0; i < d; ++i) v[i] += w[i];
    return v;
  };
  const bool s_zero = sigma1.zero() &&
                      std::all_of(sigma0.begin(), sigma0.end(),
                                  [](double x) { return x == 0.0; });
  msp.diffusion = [sigma0, sigma1, d, s_zero](const SegmentView& s) {
    Mat sig(d, 1);
    if (s_zero) return sig;
    const Vec mult = sigma1.mul(s(0.0));
    for (std::size_t i = 0; i < d; ++i) sig(i, 0) = sigma0[i] + mult[i];
    return sig;
  };
  return msp;
}

}  // namespace detail

/// D(phi) = kappa * phi(-tau). Contraction constant k = kappa e^{r tau},
/// since |phi(-tau)| <= e^{r tau} ||phi||_r with equality on segments
/// concentrated at theta = -tau.
inline ModelSpec point_delay_neutral(std::size_t d, double kappa, double tau,
                                     const Mat& A, const Mat& B, const Vec& sigma0,
                                     const Mat& sigma1, double r, double L) {
  ModelSpec msp = detail::linear_family(d, A, B, tau, sigma0, sigma1, r, L);
  const double k = kappa * std::exp(r * tau);
  if (k >= 1.0)
    throw ContractionTooLarge(
        "point-delay neutral: kappa e^{r tau} must be < 1");
  msp.k = k;
  if (kappa != 0.0) {
    msp.neutral = [kappa, tau](const SegmentView& s) {
      Vec v = s(-tau);
      for (double& x : v) x *= kappa;
      return v;
    };
  }
  msp.name = "point_delay";
  validate_model(msp);
  return msp;
}

/// D(phi) = kappa * r int_{-inf}^0 e^{2 r theta} phi(theta) dtheta.
/// The kernel integrates e^{-r theta} to one against the weighted norm, so
/// the contraction constant is kappa itself.
inline ModelSpec fading_average_neutral(std::size_t d, double kappa, const Mat& A,
                                        const Mat& B, double tau, const Vec& sigma0,
                                        const Mat& sigma1, double r, double L,
                                        double tol = 1e-12) {
  if (kappa >= 1.0)
    throw ContractionTooLarge("fading-average neutral: kappa must be < 1");
  ModelSpec msp = detail::linear_family(d, A, B, tau, sigma0, sigma1, r, L);
  msp.k = kappa;
  if (kappa != 0.0) {
    msp.neutral = [kappa, tol](const SegmentView& s) {
      Vec v = exp2r_average(s, tol);
      for (double& x : v) x *= kappa;
      return v;
    };
  }
  msp.name = "fading_average";
  validate_model(msp);
  return msp;
}

/// D identically zero, same drift/diffusion family.
inline ModelSpec zero_neutral(std::size_t d, const Mat& A, const Mat& B, double tau,
                              const Vec& sigma0, const Mat& sigma1, double r,
                              double L) {
  ModelSpec msp = detail::linear_family(d, A, B, tau, sigma0, sigma1, r, L);
  msp.k = 0.0;
  msp.name = "zero_neutral";
  validate_model(msp);
  return msp;
}

/// Scalar Ornstein-Uhlenbeck: dx = -rate x dt + noise dw. L = noise^2
/// satisfies the coercivity bound (the drift pairing is dissipative).
inline ModelSpec ou_model(double rate, double noise, double r) {
  ModelSpec msp = detail::linear_family(
      1, Mat::scaled_identity(1, -rate), Mat(1, 1), 0.0, Vec{noise}, Mat(1, 1),
      r, std::max(noise * noise, 1e-12));
  msp.name = "ou";
  validate_model(msp);
  return msp;
}

/// Deterministic scalar growth x' = a x; L = 2a covers 2<phi(0), a phi(0)>.
inline ModelSpec deterministic_exponential(double a, double r) {
  ModelSpec msp = detail::linear_family(1, Mat::scaled_identity(1, a), Mat(1, 1),
                                        0.0, Vec{0.0}, Mat(1, 1), r,
                                        std::max(2.0 * a, 1e-12));
  msp.name = "exp";
  validate_model(msp);
  return msp;
}

// ---------------------------------------------------------------------------
// Segment sampling
// ---------------------------------------------------------------------------

/// A sampled segment keeps its backing path alive.
struct SampledSegment {
  std::shared_ptr<const HistoryPath> path;
  SegmentView seg() const { return path->segment(0.0); }
};

/// Random piecewise-linear segments: uniform knots on [-span, 0], Gaussian
/// values rescaled to a target norm <= max_norm, constant tail. Pair draws
/// can be forced to differ only in a narrow tent at a chosen site, which
/// exposes the extremal direction of point-delay neutral terms.
class SegmentSampler {
 public:
  struct Options {
    std::size_t d = 1;
    double r = 1.0;
    std::size_t knots = 17;
    double span = 6.0;
    double max_norm = 2.0;
    std::uint64_t seed = 0;
    // pair draws: every bump_every-th pair differs only near bump_site
    double bump_site = std::numeric_limits<double>::quiet_NaN();
    double bump_width = 0.25;
    int bump_every = 4;
  };

  explicit SegmentSampler(Options opt) : opt_(opt) {
    if (opt_.knots < 2 || !(opt_.span > 0.0))
      throw ConfigError("segment sampler: need >= 2 knots and span > 0");
  }

  const Options& options() const { return opt_; }

  SampledSegment draw(std::uint64_t id) const {
    return make_segment(gaussian_table(id), id, /*rescale_stream=*/1);
  }

  std::pair<SampledSegment, SampledSegment> draw_pair(std::uint64_t id) const {
    const bool bump = !std::isnan(opt_.bump_site) && opt_.bump_every > 0 &&
                      (id % static_cast<std::uint64_t>(opt_.bump_every)) == 0;
    if (!bump) {
      auto a = make_segment(gaussian_table(id * 2 + 0), id * 2 + 0, 1);
      auto b = make_segment(gaussian_table(id * 2 + 1), id * 2 + 1, 1);
      return {std::move(a), std::move(b)};
    }
    // psi = phi + tent at bump_site; with tent half-width below 1/r the
    // weighted sup of the difference sits exactly at the apex.
    auto base = gaussian_table(id * 2 + 0);
    const double site = opt_.bump_site;
    const double w = std::min(opt_.bump_width, 0.9 / opt_.r);
    auto knots = base.first;
    auto add_knot = [&](double th) {
      if (th >= -opt_.span && th <= 0.0) knots.push_back(th);
    };
    add_knot(site - w);
    add_knot(site);
    add_knot(site + w);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    InitialData phi_data = InitialData::table(base.first, base.second);
    const double height =
        opt_.max_norm * (0.1 + 0.9 * uniform_at(opt_.seed, id * 2 + 1, 7));
    std::vector<Vec> vals_a, vals_b;
    Vec tmp;
    for (double th : knots) {
      phi_data.value(th, tmp);
      vals_a.push_back(tmp);
      Vec shifted = tmp;
      double tent = 0.0;
      if (th > site - w && th < site + w)
        tent = height * (1.0 - std::abs(th - site) / w);
      shifted[0] += tent;
      vals_b.push_back(std::move(shifted));
    }
    auto pa = std::make_shared<HistoryPath>(
        InitialData::table(knots, std::move(vals_a)), opt_.r);
    auto pb = std::make_shared<HistoryPath>(
        InitialData::table(knots, std::move(vals_b)), opt_.r);
    return {SampledSegment{std::move(pa)}, SampledSegment{std::move(pb)}};
  }

 private:
  std::pair<std::vector<double>, std::vector<Vec>> gaussian_table(
      std::uint64_t id) const {
    std::vector<double> knots(opt_.knots);
    std::vector<Vec> vals(opt_.knots, Vec(opt_.d, 0.0));
    NormalStream ns(opt_.seed, id);
    for (std::size_t i = 0; i < opt_.knots; ++i) {
      knots[i] = -opt_.span +
                 opt_.span * static_cast<double>(i) / (opt_.knots - 1);
      for (std::size_t c = 0; c < opt_.d; ++c) vals[i][c] = ns.next();
    }
    knots.back() = 0.0;
    return {std::move(knots), std::move(vals)};
  }

  SampledSegment make_segment(
      std::pair<std::vector<double>, std::vector<Vec>> table, std::uint64_t id,
      std::uint64_t rescale_stream) const {
    auto path = std::make_shared<HistoryPath>(
        InitialData::table(table.first, table.second), opt_.r);
    const double n = path->initial_norm();
    const double target =
        opt_.max_norm * (0.05 + 0.95 * uniform_at(opt_.seed ^ rescale_stream,
                                                  id, 3));
    if (n > 0.0) {
      const double scale = target / n;
      for (auto& v : table.second)
        for (double& x : v) x *= scale;
      path = std::make_shared<HistoryPath>(
          InitialData::table(std::move(table.first), std::move(table.second)),
          opt_.r);
    }
    return SampledSegment{std::move(path)};
  }

  Options opt_;
};

// ---------------------------------------------------------------------------
// Checkers
// ---------------------------------------------------------------------------

using PairSampler =
    std::function<std::pair<SampledSegment, SampledSegment>(std::uint64_t)>;
using SingleSampler = std::function<SampledSegment(std::uint64_t)>;

struct CheckReport {
  std::string check;
  std::string model;
  double declared = 0.0;
  double estimate = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t worst_case_sample_id = 0;
  bool pass = false;
  std::string note;
};

namespace detail {

inline constexpr int kDegenerateRetries = 16;
inline constexpr double kNormTol = 1e-12;

template <class Body>
void for_each_pair(const PairSampler& sampler, std::uint64_t trials,
                   const Body& body) {
  for (std::uint64_t t = 0; t < trials; ++t) {
    int attempt = 0;
    for (;;) {
      const std::uint64_t id = t * kDegenerateRetries + attempt;
      auto [sa, sb] = sampler(id);
      const double dist =
          segment_distance(sa.seg(), sb.seg(), kNormTol);
      if (dist > 1e-13) {
        body(t, sa, sb, dist);
        break;
      }
      if (++attempt >= kDegenerateRetries)
        throw DegeneratePair(
            "sampler produced zero-distance pairs beyond the retry cap");
    }
  }
}

}  // namespace detail

/// Samples k_hat = max |D(phi) - D(psi)| / ||phi - psi||_r.
inline CheckReport check_A3(const ModelSpec& model, const PairSampler& sampler,
                            std::uint64_t trials, double slack = 1e-6) {
  if (trials < 1) throw ConfigError("check_A3: trials must be >= 1");
  CheckReport rep{"A3", model.name, model.k, 0.0, trials, 0, false, ""};
  detail::for_each_pair(sampler, trials, [&](std::uint64_t t,
                                             const SampledSegment& sa,
                                             const SampledSegment& sb,
                                             double dist) {
    const Vec da = model.neutral_at(sa.seg());
    const Vec db = model.neutral_at(sb.seg());
    const double ratio = dist2(da, db) / dist;
    if (ratio > rep.estimate) {
      rep.estimate = ratio;
      rep.worst_case_sample_id = t;
    }
  });
  rep.pass = rep.estimate <= model.k * (1.0 + slack) + 1e-15;
  return rep;
}

/// Samples the local weak monotonicity ratio
///   [2 <phi(0)-psi(0) - (D(phi)-D(psi)), b(phi)-b(psi)> + |s(phi)-s(psi)|_F^2]
///   / ||phi - psi||_r^2
/// over pairs with norms <= R. Frobenius norm on the diffusion difference.
inline CheckReport check_A1(const ModelSpec& model, const PairSampler& sampler,
                            double radius, std::uint64_t trials,
                            double slack = 1e-6) {
  CheckReport rep{"A1", model.name, model.L_R, 0.0, trials, 0, false, ""};
  rep.estimate = -std::numeric_limits<double>::infinity();
  detail::for_each_pair(sampler, trials, [&](std::uint64_t t,
                                             const SampledSegment& sa,
                                             const SampledSegment& sb,
                                             double dist) {
    const SegmentView va = sa.seg(), vb = sb.seg();
    const Vec a0 = va(0.0), b0 = vb(0.0);
    const Vec da = model.neutral_at(va), db = model.neutral_at(vb);
    const Vec ba = model.drift(va), bb = model.drift(vb);
    const Mat siga = model.diffusion(va), sigb = model.diffusion(vb);
    double inner = 0.0;
    for (std::size_t i = 0; i < model.d; ++i)
      inner += (a0[i] - b0[i] - (da[i] - db[i])) * (ba[i] - bb[i]);
    const double sdiff = sub(siga, sigb).frobenius();
    const double ratio = (2.0 * inner + sdiff * sdiff) / (dist * dist);
    if (ratio > rep.estimate) {
      rep.estimate = ratio;
      rep.worst_case_sample_id = t;
    }
  });
  if (std::isnan(model.L_R)) {
    rep.pass = true;
    rep.note = "informational: no declared L_R";
  } else {
    rep.pass = rep.estimate <= model.L_R * (1.0 + slack) + 1e-15;
  }
  (void)radius;  // the caller confines the sampler to the radius
  return rep;
}

/// Samples max(2 <phi(0) - D(phi), b(phi)>, |sigma(phi)|_F^2) / (1+||phi||^2).
inline CheckReport check_A2(const ModelSpec& model, const SingleSampler& sampler,
                            std::uint64_t trials, double slack = 1e-6) {
  CheckReport rep{"A2", model.name, model.L, 0.0, trials, 0, false, ""};
  rep.estimate = -std::numeric_limits<double>::infinity();
  for (std::uint64_t t = 0; t < trials; ++t) {
    const SampledSegment s = sampler(t);
    const SegmentView v = s.seg();
    const double nrm = fading_norm(v, detail::kNormTol);
    const Vec p0 = v(0.0);
    const Vec dv = model.neutral_at(v);
    const Vec bv = model.drift(v);
    double inner = 0.0;
    for (std::size_t i = 0; i < model.d; ++i) inner += (p0[i] - dv[i]) * bv[i];
    const double sig = model.diffusion(v).frobenius();
    const double ratio =
        std::max(2.0 * inner, sig * sig) / (1.0 + nrm * nrm);
    if (ratio > rep.estimate) {
      rep.estimate = ratio;
      rep.worst_case_sample_id = t;
    }
  }
  rep.pass = rep.estimate <= model.L * (1.0 + slack) + 1e-15;
  return rep;
}

/// Asserts |phi(0) - D(phi)|^2 <= (1+k)^2 ||phi||_r^2 on every sample;
/// the estimate is the worst ratio against that ceiling.
inline CheckReport check_lemma(const ModelSpec& model, const SingleSampler& sampler,
                               std::uint64_t trials, double slack = 1e-9) {
  if (!(model.k < 1.0))
    throw ContractionTooLarge("check_lemma: declared k must be < 1");
  CheckReport rep{"lemma", model.name, 1.0, 0.0, trials, 0, true, ""};
  const double ceil_factor = (1.0 + model.k) * (1.0 + model.k);
  for (std::uint64_t t = 0; t < trials; ++t) {
    const SampledSegment s = sampler(t);
    const SegmentView v = s.seg();
    const double nrm = fading_norm(v, detail::kNormTol);
    const Vec p0 = v(0.0);
    const Vec dv = model.neutral_at(v);
    const double lhs = dist2(p0, dv);
    if (nrm == 0.0) {
      if (lhs > 0.0) {
        rep.pass = false;
        rep.worst_case_sample_id = t;
        rep.estimate = std::numeric_limits<double>::infinity();
      }
      continue;
    }
    const double ratio = (lhs * lhs) / (ceil_factor * nrm * nrm);
    if (ratio > rep.estimate) {
      rep.estimate = ratio;
      rep.worst_case_sample_id = t;
    }
    if (ratio > 1.0 + slack) rep.pass = false;
  }
  return rep;
}

}  // namespace nsfde
