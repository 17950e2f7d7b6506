#include <nsfde/model.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace nsfde;

namespace {

SegmentSampler make_sampler(std::size_t d, double r, double max_norm,
                            std::uint64_t seed, double bump_site = NAN) {
  SegmentSampler::Options o;
  o.d = d;
  o.r = r;
  o.max_norm = max_norm;
  o.seed = seed;
  o.bump_site = bump_site;
  return SegmentSampler(o);
}

PairSampler pairs_of(const SegmentSampler& s) {
  return [&s](std::uint64_t id) { return s.draw_pair(id); };
}

SingleSampler singles_of(const SegmentSampler& s) {
  return [&s](std::uint64_t id) { return s.draw(id); };
}

ModelSpec scalar_point_delay(double kappa, double tau, double a, double b,
                             double s0, double s1, double r, double L) {
  return point_delay_neutral(1, kappa, tau, Mat::scaled_identity(1, a),
                             Mat::scaled_identity(1, b), Vec{s0},
                             Mat::scaled_identity(1, s1), r, L);
}

}  // namespace

TEST_CASE("builtin constructors enforce the contraction bound") {
  // kappa e^{r tau} >= 1
  CHECK_THROWS_AS(scalar_point_delay(0.5, 1.0, -1.0, 0.0, 0.0, 0.0, 1.0, 1.0),
                  ContractionTooLarge);
  CHECK_THROWS_AS(
      fading_average_neutral(1, 1.0, Mat(1, 1), Mat(1, 1), 0.0, Vec{0.0},
                             Mat(1, 1), 1.0, 1.0),
      ContractionTooLarge);
  const ModelSpec ok = scalar_point_delay(0.1, 1.0, -1.0, 0.0, 0.0, 0.0, 1.0, 1.0);
  CHECK(ok.k == Catch::Approx(0.1 * std::exp(1.0)));
}

TEST_CASE("D(0) = 0 is validated at construction") {
  ModelSpec bad;
  bad.d = 1;
  bad.m = 1;
  bad.r = 1.0;
  bad.k = 0.5;
  bad.drift = [](const SegmentView& s) { return s(0.0); };
  bad.diffusion = [](const SegmentView&) { return Mat(1, 1); };
  bad.neutral = [](const SegmentView&) { return Vec{1.0}; };  // D(0) = 1
  CHECK_THROWS_AS(validate_model(bad), ConfigError);
}

TEST_CASE("check_A3: zero neutral term") {
  const ModelSpec m = zero_neutral(1, Mat::scaled_identity(1, -1.0), Mat(1, 1),
                                   0.0, Vec{0.1}, Mat(1, 1), 1.0, 1.0);
  SegmentSampler s = make_sampler(1, 1.0, 2.0, 42);
  const CheckReport rep = check_A3(m, pairs_of(s), 500);
  CHECK(rep.estimate == 0.0);
  CHECK(rep.pass);
}

TEST_CASE("check_A3: point delay reaches kappa e^{r tau} on bump pairs") {
  const double kappa = 0.1, tau = 1.0, r = 1.0;
  const ModelSpec m = scalar_point_delay(kappa, tau, -1.0, 0.5, 0.2, 0.3, r, 4.0);
  SegmentSampler s = make_sampler(1, r, 2.0, 7, -tau);
  const CheckReport rep = check_A3(m, pairs_of(s), 5000);
  const double k = kappa * std::exp(r * tau);
  CHECK(rep.estimate > 0.9 * k);
  CHECK(rep.estimate <= k + 1e-9);
  CHECK(rep.pass);
}

TEST_CASE("check_A3: fading average stays below kappa") {
  const ModelSpec m =
      fading_average_neutral(1, 0.5, Mat::scaled_identity(1, -1.0), Mat(1, 1),
                             0.0, Vec{0.1}, Mat(1, 1), 1.0, 4.0);
  SegmentSampler s = make_sampler(1, 1.0, 2.0, 11);
  const CheckReport rep = check_A3(m, pairs_of(s), 2000);
  CHECK(rep.estimate <= 0.5 * (1.0 + 1e-6));
  CHECK(rep.estimate > 0.0);
  CHECK(rep.pass);
}

TEST_CASE("check_A1: dissipative drift gives a nonpositive estimate") {
  // b(phi) = -phi(0), sigma = 0, D = 0
  const ModelSpec m = zero_neutral(1, Mat::scaled_identity(1, -1.0), Mat(1, 1),
                                   0.0, Vec{0.0}, Mat(1, 1), 1.0, 1.0);
  SegmentSampler s = make_sampler(1, 1.0, 2.0, 5);
  const CheckReport rep = check_A1(m, pairs_of(s), 2.0, 500);
  CHECK(rep.estimate <= 1e-12);
  CHECK(rep.pass);  // informational without declared L_R
}

TEST_CASE("check_A1: zero coefficients give exactly zero") {
  const ModelSpec m = zero_neutral(1, Mat(1, 1), Mat(1, 1), 0.0, Vec{0.0},
                                   Mat(1, 1), 1.0, 1.0);
  SegmentSampler s = make_sampler(1, 1.0, 2.0, 5);
  const CheckReport rep = check_A1(m, pairs_of(s), 2.0, 200);
  CHECK(rep.estimate == 0.0);
}

TEST_CASE("check_A1: full point-delay model reports a finite estimate") {
  const ModelSpec m = scalar_point_delay(0.1, 1.0, -1.0, 0.5, 0.0, 0.3, 1.0, 4.0);
  SegmentSampler s = make_sampler(1, 1.0, 2.0, 19);
  const CheckReport rep = check_A1(m, pairs_of(s), 2.0, 2000);
  CHECK(std::isfinite(rep.estimate));
}

TEST_CASE("check_A2: zero dynamics") {
  const ModelSpec m = zero_neutral(1, Mat(1, 1), Mat(1, 1), 0.0, Vec{0.0},
                                   Mat(1, 1), 1.0, 1e-12);
  SegmentSampler s = make_sampler(1, 1.0, 2.0, 3);
  const CheckReport rep = check_A2(m, singles_of(s), 300);
  CHECK(rep.estimate == 0.0);
  CHECK(rep.pass);
}

TEST_CASE("check_A2: linear growth approaches 2a from below") {
  const double a = 0.7;
  const ModelSpec m = zero_neutral(1, Mat::scaled_identity(1, a), Mat(1, 1),
                                   0.0, Vec{0.0}, Mat(1, 1), 1.0, 2.0 * a);
  SegmentSampler s = make_sampler(1, 1.0, 3.0, 101);
  const CheckReport rep = check_A2(m, singles_of(s), 5000);
  CHECK(rep.estimate <= 2.0 * a * (1.0 + 1e-6));
  CHECK(rep.estimate > 1.0 * a);  // the extremal direction is well sampled
  CHECK(rep.pass);
}

TEST_CASE("check_A2: constant diffusion floor") {
  const double c = 0.8;
  const ModelSpec m = zero_neutral(1, Mat(1, 1), Mat(1, 1), 0.0, Vec{c},
                                   Mat(1, 1), 1.0, c * c);
  SegmentSampler s = make_sampler(1, 1.0, 2.0, 23);
  const CheckReport rep = check_A2(m, singles_of(s), 3000);
  // |c|^2 / (1 + ||phi||^2) maximized by small segments
  CHECK(rep.estimate > 0.8 * c * c);
  CHECK(rep.estimate <= c * c * (1.0 + 1e-6));
  CHECK(rep.pass);
}

TEST_CASE("check_lemma: trivial and built-in cases") {
  SegmentSampler s = make_sampler(1, 1.0, 2.0, 77);
  SECTION("D = 0") {
    const ModelSpec m = zero_neutral(1, Mat(1, 1), Mat(1, 1), 0.0, Vec{0.0},
                                     Mat(1, 1), 1.0, 1.0);
    const CheckReport rep = check_lemma(m, singles_of(s), 2000);
    CHECK(rep.pass);
    CHECK(rep.estimate <= 1.0);
  }
  SECTION("point delay at k = 0.2718") {
    const ModelSpec m =
        scalar_point_delay(0.1, 1.0, -1.0, 0.5, 0.2, 0.3, 1.0, 4.0);
    const CheckReport rep = check_lemma(m, singles_of(s), 5000);
    CHECK(rep.pass);
  }
  SECTION("zero segment") {
    const ModelSpec m = zero_neutral(1, Mat(1, 1), Mat(1, 1), 0.0, Vec{0.0},
                                     Mat(1, 1), 1.0, 1.0);
    const SingleSampler zero = [](std::uint64_t) {
      auto path = std::make_shared<HistoryPath>(
          InitialData::constant(Vec{0.0}), 1.0);
      return SampledSegment{std::move(path)};
    };
    const CheckReport rep = check_lemma(m, zero, 10);
    CHECK(rep.pass);
  }
}

TEST_CASE("lemma never fails when A3 passes with k < 1") {
  // consequence check across the built-in family
  SegmentSampler s = make_sampler(1, 1.0, 2.0, 314, -1.0);
  for (double k : {0.0, 0.27, 0.5}) {
    const double kappa = k / std::exp(1.0);
    const ModelSpec m = scalar_point_delay(kappa, 1.0, -1.0, 0.5, 0.2, 0.3, 1.0, 4.0);
    const CheckReport a3 = check_A3(m, pairs_of(s), 1000);
    const CheckReport lem = check_lemma(m, singles_of(s), 1000);
    CHECK(a3.pass);
    CHECK(lem.pass);
  }
}

TEST_CASE("degenerate pairs error out after the retry cap") {
  const ModelSpec m = zero_neutral(1, Mat(1, 1), Mat(1, 1), 0.0, Vec{0.0},
                                   Mat(1, 1), 1.0, 1.0);
  const PairSampler stuck = [](std::uint64_t) {
    auto path = std::make_shared<HistoryPath>(InitialData::constant(Vec{1.0}),
                                              1.0);
    return std::pair<SampledSegment, SampledSegment>{SampledSegment{path},
                                                     SampledSegment{path}};
  };
  CHECK_THROWS_AS(check_A3(m, stuck, 5), DegeneratePair);
}

TEST_CASE("checkers are deterministic given the sampler seed") {
  const ModelSpec m = scalar_point_delay(0.1, 1.0, -1.0, 0.5, 0.2, 0.3, 1.0, 4.0);
  SegmentSampler s1 = make_sampler(1, 1.0, 2.0, 2718, -1.0);
  SegmentSampler s2 = make_sampler(1, 1.0, 2.0, 2718, -1.0);
  const CheckReport r1 = check_A3(m, pairs_of(s1), 500);
  const CheckReport r2 = check_A3(m, pairs_of(s2), 500);
  CHECK(r1.estimate == r2.estimate);
  CHECK(r1.worst_case_sample_id == r2.worst_case_sample_id);
}
