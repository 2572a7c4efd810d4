#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "dcsr/datagen.hpp"
#include "dcsr/error.hpp"

using namespace dcsr;

namespace {

Field sine(std::size_t n, double shift = 0.0) {
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = std::sin(2 * M_PI * (static_cast<double>(j) / n - shift));
  return Field(std::move(v));
}

double l2_error(const Field& a, const Field& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.resolution(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s / static_cast<double>(a.resolution()));
}

double mass(const Field& f) {
  double s = 0.0;
  for (double x : f.values()) s += x;
  return s * f.spacing();
}

AdvectionProblem scaled(std::size_t n) {
  AdvectionProblem p;
  p.dx = 1.0 / static_cast<double>(n);
  p.dt = 0.1 * p.dx;
  return p;
}

}  // namespace

TEST_CASE("initial conditions are seed-deterministic with K uniform") {
  Rng a(1), b(1);
  const BoxIC x = sample_ic(a), y = sample_ic(b);
  CHECK(x.intervals == y.intervals);
  Rng rng(2);
  int counts[4] = {0, 0, 0, 0};
  const int draws = 6000;
  for (int i = 0; i < draws; ++i) {
    const BoxIC ic = sample_ic(rng);
    REQUIRE(ic.intervals.size() >= 1);
    REQUIRE(ic.intervals.size() <= 3);
    for (const auto& [lo, hi] : ic.intervals) {
      CHECK(lo <= hi);
      CHECK(lo >= 0.0);
      CHECK(hi <= 1.0);
    }
    ++counts[ic.intervals.size()];
  }
  for (int k = 1; k <= 3; ++k) CHECK(std::abs(counts[k] / static_cast<double>(draws) - 1.0 / 3.0) < 0.02);
}

TEST_CASE("analytic solution examples") {
  AdvectionProblem p;
  const BoxIC ic{{{0.1, 0.3}}};
  p.velocity = 0.0;
  CHECK(analytic_solution(ic, p, 100) == ic.sample(100));

  p.velocity = 0.1;
  p.final_time = 0.25;
  const BoxIC shifted{{{0.125, 0.325}}};
  CHECK(analytic_solution(ic, p, 100) == shifted.sample(100));
  CHECK(analytic_solution(ic, p, 200) == shifted.sample(200));

  p.final_time = 1.0;
  const BoxIC edge{{{0.9, 0.95}}};
  const BoxIC wrapped{{{0.0, 0.05}}};
  const Field got = analytic_solution(edge, p, 100), want = wrapped.sample(100);
  CHECK(got == want);
  CHECK(got[0] == 1.0);
  CHECK(got[5] == 1.0);
  CHECK(got[6] == 0.0);
  CHECK(got[99] == 0.0);
}

TEST_CASE("box indicator and overlap") {
  const BoxIC ic{{{0.1, 0.3}, {0.2, 0.4}}};
  CHECK(ic(0.05) == 0.0);
  CHECK(ic(0.15) == 1.0);
  CHECK(ic(0.25) == 2.0);
  CHECK(ic(0.1) == 1.0);
  CHECK(ic(0.4) == 1.0);
}

TEST_CASE("solvers preserve constants and mass") {
  const AdvectionProblem p;
  const Field c = Field::constant(100, 0.7);
  CHECK(solve_godunov(c, p) == c);
  CHECK(solve_lax_wendroff(c, p) == c);
  Rng rng(3);
  const BoxIC ic = sample_ic(rng);
  const Field u0 = ic.sample(100);
  CHECK(std::abs(mass(solve_godunov(u0, p)) - mass(u0)) < 1e-12);
  CHECK(std::abs(mass(solve_lax_wendroff(u0, p)) - mass(u0)) < 1e-12);
  CHECK(std::abs(mass(solve_spectral(u0, p)) - mass(u0)) < 1e-12);
}

TEST_CASE("solver convergence on a sine") {
  const double shift = 0.1 * 0.25;
  auto ratio = [&](auto solve) {
    const double e1 = l2_error(solve(sine(100), scaled(100)), sine(100, shift));
    const double e2 = l2_error(solve(sine(200), scaled(200)), sine(200, shift));
    return e1 / e2;
  };
  const double g = ratio([](const Field& f, const AdvectionProblem& p) { return solve_godunov(f, p); });
  const double lw = ratio([](const Field& f, const AdvectionProblem& p) { return solve_lax_wendroff(f, p); });
  CHECK(g >= 1.7);
  CHECK(g <= 2.3);
  CHECK(lw >= 3.4);
  CHECK(lw <= 4.6);
}

TEST_CASE("spectral solver is exact on a sine and conserves the norm") {
  const AdvectionProblem p;
  std::vector<double> norms;
  const Field out = solve_spectral(sine(100), p, &norms);
  const Field want = sine(100, p.velocity * p.final_time);
  for (std::size_t j = 0; j < 100; ++j) CHECK(std::abs(out[j] - want[j]) < 1e-10);
  REQUIRE(norms.size() == 250);
  for (double n : norms) CHECK(std::abs(n - norms.front()) < 1e-12 * norms.front());
}

TEST_CASE("spectral solver shows Gibbs overshoot on a box") {
  const BoxIC ic{{{0.2, 0.5}}};
  const Field out = solve_spectral(ic, AdvectionProblem(), 100);
  double peak = 0.0;
  for (double x : out.values()) peak = std::max(peak, x);
  CHECK(peak - 1.0 >= 0.05);
}

TEST_CASE("CFL limit") {
  AdvectionProblem p;
  p.velocity = 20.0;
  const Field c = Field::constant(100, 1.0);
  CHECK_THROWS_AS(solve_godunov(c, p), std::invalid_argument);
  CHECK_THROWS_AS(solve_lax_wendroff(c, p), std::invalid_argument);
}

TEST_CASE("pollute") {
  const BoxIC ic{{{0.2, 0.5}}};
  const Field u = ic.sample(100);
  std::vector<Field> fields(500, u);
  const Dataset clean(fields);
  CHECK(pollute(clean, {NoiseColor::Pink, 0.0}, 1).fields() == clean.fields());

  const Dataset noisy = pollute(clean, {NoiseColor::White, 0.1}, 2);
  double power = 0.0;
  for (const auto& f : noisy) {
    double m = 0.0;
    for (std::size_t j = 0; j < 100; ++j) {
      power += std::pow(f[j] - u[j], 2) / (100.0 * 500.0);
      m += f[j] - u[j];
    }
    CHECK(std::abs(m) < 1e-12);
  }
  CHECK(power == doctest::Approx(0.01).epsilon(0.10));
  CHECK(pollute(clean, {NoiseColor::Brown, 0.1}, 3) == pollute(clean, {NoiseColor::Brown, 0.1}, 3));
}

TEST_CASE("advection suite") {
  SuiteOptions o;
  o.n_train = 20;
  o.n_test = 5;
  o.seed = 4;
  const auto s = build_advection_suite(o);
  CHECK(s.hf_train.size() == 20);
  CHECK(s.hf_test.size() == 5);
  REQUIRE(s.lf_test.size() == 6);
  for (const auto& name : bias_names()) {
    REQUIRE(s.lf_test.count(name) == 1);
    CHECK(s.lf_test.at(name).size() == 5);
    CHECK(s.lf_test.at(name).resolution() == 100);
    CHECK(s.lf_test.at(name).tag().bias_source == name);
  }
  CHECK(s.hf_train.resolution() == 100);

  const auto dir = std::filesystem::temp_directory_path() / "dcsr_test_suite";
  std::filesystem::remove_all(dir);
  write_suite(dir, s);
  const auto back = read_suite(dir);
  CHECK(back.hf_train == s.hf_train);
  CHECK(back.hf_test == s.hf_test);
  CHECK(back.lf_test == s.lf_test);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_suite(dir), ConfigError);

  SuiteOptions again = o;
  CHECK(build_advection_suite(again).lf_test == s.lf_test);
}

TEST_CASE("default suite sizes") {
  SuiteOptions o;
  o.seed = 5;
  o.threads = 4;
  const auto s = build_advection_suite(o);
  CHECK(s.hf_train.size() == 2000);
  CHECK(s.hf_test.size() == 100);
  CHECK(s.lf_test.size() == 6);
  for (const auto& [name, d] : s.lf_test) CHECK(d.size() == 100);
}
