#include <cmath>
#include <numeric>

#include "doctest.h"
#include "dcsr/error.hpp"
#include "dcsr/grid.hpp"
#include "dcsr/noise.hpp"

using namespace dcsr;

namespace {

// Least-squares slope of log E(k) against log k over k in [2, n/4] of the ensemble-mean spectrum.
double spectral_slope(NoiseColor color, std::size_t n, std::size_t draws, std::uint64_t seed) {
  std::vector<double> mean(n / 2 + 1, 0.0);
  for (std::size_t d = 0; d < draws; ++d) {
    Rng rng(derive_seed(seed, {d}));
    const auto e = energy_spectrum(colored_noise(n, {color, 0.1}, rng)).energies;
    for (std::size_t k = 0; k < e.size(); ++k) mean[k] += e[k] / static_cast<double>(draws);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (std::size_t k = 2; k <= n / 4; ++k) {
    const double x = std::log(static_cast<double>(k)), y = std::log(mean[k]);
    sx += x, sy += y, sxx += x * x, sxy += x * y, m += 1;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

TEST_CASE("sigma closed-form values") {
  const NoiseSchedule s(25.0);
  CHECK(s.sigma(0.0) == 0.0);
  CHECK(s.sigma(1.0) == doctest::Approx(9.8453).epsilon(1e-4));
  CHECK(s.sigma(0.5) == doctest::Approx(1.9308).epsilon(1e-4));
  CHECK(s.sigma_sq(0.5) == doctest::Approx(3.728).epsilon(1e-3));
  // Independent evaluation of the formula.
  const double t = 0.37;
  CHECK(s.sigma(t) == doctest::Approx(std::sqrt((std::pow(25.0, 2 * t) - 1) / (2 * std::log(25.0)))).epsilon(1e-13));
}

TEST_CASE("sigma rejects times outside [0, 1]") {
  const NoiseSchedule s;
  CHECK_THROWS_AS(s.sigma(-0.01), std::domain_error);
  CHECK_THROWS_AS(s.sigma(1.01), std::domain_error);
  CHECK_THROWS_AS(NoiseSchedule(1.0), std::invalid_argument);
}

TEST_CASE("sigma is strictly increasing") {
  for (double base : {25.0, 50.0}) {
    const NoiseSchedule s(base);
    double prev = s.sigma(0.0);
    for (int i = 1; i <= 1000; ++i) {
      const double cur = s.sigma(i / 1000.0);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("sigma^2 rate matches a central difference") {
  const NoiseSchedule s(50.0);
  for (double t : {0.05, 0.3, 0.8}) {
    const double h = 1e-6;
    const double fd = (s.sigma_sq(t + h) - s.sigma_sq(t - h)) / (2 * h);
    CHECK(s.sigma_sq_rate(t) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("sigma inverse") {
  const NoiseSchedule s(25.0);
  CHECK(s.inverse(0.0) == 0.0);
  for (double t : {0.1, 0.37, 0.9}) CHECK(std::abs(s.inverse(s.sigma(t)) - t) < 1e-12);
  CHECK(s.inverse(1.9308) == doctest::Approx(0.5).epsilon(1e-4));
  CHECK_THROWS_WITH_AS(s.inverse(s.sigma(1.0) * 1.001), doctest::Contains("level exceeds schedule range"),
                       std::domain_error);
}

TEST_CASE("colored noise with zero magnitude is zero") {
  Rng rng(1);
  const Field f = colored_noise(64, {NoiseColor::Pink, 0.0}, rng);
  for (double v : f.values()) CHECK(v == 0.0);
}

TEST_CASE("colored noise spectral slopes") {
  CHECK(std::abs(spectral_slope(NoiseColor::White, 100, 500, 11) - 0.0) < 0.15);
  CHECK(std::abs(spectral_slope(NoiseColor::Pink, 100, 500, 12) + 1.0) < 0.15);
  CHECK(std::abs(spectral_slope(NoiseColor::Brown, 100, 500, 13) + 2.0) < 0.15);
}

TEST_CASE("colored noise has zero mean") {
  for (auto c : {NoiseColor::White, NoiseColor::Pink, NoiseColor::Brown}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const Field f = colored_noise(100, {c, 0.3}, rng);
      const double mean = std::accumulate(f.values().begin(), f.values().end(), 0.0) / 100.0;
      CHECK(std::abs(mean) < 1e-12);
    }
  }
}

TEST_CASE("colored noise is deterministic per seed and decorrelated across seeds") {
  Rng a(5), b(5);
  CHECK(colored_noise(100, {NoiseColor::White, 0.1}, a) == colored_noise(100, {NoiseColor::White, 0.1}, b));
  // Independent white fields: sample correlation has mean 0 and variance about 1/n.
  const int pairs = 200;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < pairs; ++i) {
    Rng ra(derive_seed(9, {static_cast<std::uint64_t>(i), 0})), rc(derive_seed(9, {static_cast<std::uint64_t>(i), 1}));
    const Field fa = colored_noise(100, {NoiseColor::White, 0.1}, ra);
    const Field fc = colored_noise(100, {NoiseColor::White, 0.1}, rc);
    double sab = 0, saa = 0, scc = 0;
    for (std::size_t j = 0; j < 100; ++j) sab += fa[j] * fc[j], saa += fa[j] * fa[j], scc += fc[j] * fc[j];
    const double r = sab / std::sqrt(saa * scc);
    sum += r;
    sum_sq += r * r;
  }
  CHECK(std::abs(sum / pairs) < 3.0 * 0.1 / std::sqrt(static_cast<double>(pairs)));
  CHECK(sum_sq / pairs < 0.02);
}

TEST_CASE("colored noise rejects tiny grids and negative magnitude") {
  Rng rng(1);
  CHECK_THROWS_AS(colored_noise(3, {}, rng), std::invalid_argument);
  CHECK_THROWS_AS(colored_noise(16, {NoiseColor::White, -1.0}, rng), std::invalid_argument);
}

TEST_CASE("noise spec json form") {
  const nlohmann::json j = NoiseSpec{NoiseColor::Pink, 0.1};
  CHECK(j == nlohmann::json::parse(R"({"color": "pink", "magnitude": 0.1})"));
  CHECK(j.get<NoiseSpec>().color == NoiseColor::Pink);
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"color": "blue"})").get<NoiseSpec>(), ConfigError);
}
