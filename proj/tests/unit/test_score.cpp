#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dcsr/checkpoint.hpp"
#include "dcsr/datagen.hpp"
#include "dcsr/error.hpp"
#include "dcsr/metrics.hpp"
#include "dcsr/score.hpp"
#include "dcsr/sde.hpp"
#include "dcsr/train.hpp"

using namespace dcsr;

namespace {

NetArch small_arch(std::size_t n, std::size_t cond_factor = 0) {
  NetArch a;
  a.resolution = n;
  a.cond_factor = cond_factor;
  a.embed_dim = 4;
  a.channels = 3;
  a.kernel = 3;
  a.dilations = {1, 2};
  a.init_seed = 42;
  return a;
}

std::vector<Field> gaussian_draws(std::size_t count, std::size_t n, Rng& rng) {
  std::vector<Field> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.gaussian();
    out.emplace_back(std::move(v));
  }
  return out;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dcsr_test_" + name);
}

}  // namespace

TEST_CASE("closed-form score examples") {
  const NoiseSchedule sched(25.0);
  const Field one(std::vector<double>{1.0});
  const auto pm = ScoreModel::point_mass(Field::zeros(1), sched);
  CHECK(pm.eval(one, 0.5)[0] == doctest::Approx(-2.0 * std::log(25.0) / 24.0).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(pm.eval(one, 0.0), "score undefined at t=0", std::domain_error);

  // sigma^2(t) = 2, so the total variance is 3.
  const double t = sched.inverse(std::sqrt(2.0));
  const auto g = ScoreModel::gaussian(Field::zeros(1), 1.0, sched);
  CHECK(g.eval(Field(std::vector<double>{2.0}), t)[0] == doctest::Approx(-2.0 / 3.0).epsilon(1e-9));
  const auto g3 = ScoreModel::gaussian(Field::zeros(1), 1.0, sched);
  CHECK(g3.eval(Field(std::vector<double>{1.5}), t)[0] == doctest::Approx(-0.5).epsilon(1e-9));
  // A Gaussian score is finite at t = 0.
  CHECK(g.eval(one, 0.0)[0] == doctest::Approx(-1.0));
}

TEST_CASE("mixture score saturates to the nearby component") {
  const NoiseSchedule sched;
  const double t = sched.inverse(1.0);
  const Field a = Field::constant(4, 0.0), b = Field::constant(4, 50.0);
  const ScoreModel mix(GaussianMixtureScore{{0.5, 0.5}, {a, b}, 0.01}, sched);
  const auto near = ScoreModel::point_mass(a, sched);
  const Field x = Field::constant(4, 0.001);
  const Field s1 = mix.eval(x, t), s2 = near.eval(x, t);
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(s1[j] - s2[j]) < 1e-6);
}

TEST_CASE("mixture weights are validated") {
  const Field a = Field::zeros(2);
  CHECK_THROWS_WITH_AS(ScoreModel(GaussianMixtureScore{{0.5, 0.4}, {a, a}, 1.0}, NoiseSchedule()),
                       "mixture weights must sum to 1", std::invalid_argument);
  CHECK_THROWS_AS(ScoreModel::gaussian(a, 0.0), std::invalid_argument);
}

TEST_CASE("dsm loss of closed-form scores") {
  const std::size_t n = 20, count = 400;
  const double t = 0.5;
  const NoiseSchedule sched;
  Rng rng(3);
  const Field x0 = Field::constant(n, 1.0);
  const Dataset batch(std::vector<Field>(count, x0));
  const auto eps = gaussian_draws(count, n, rng);
  CHECK(dsm_loss(ScoreModel::point_mass(x0, sched), batch, t, eps) < 1e-20);

  const ScoreModel zero(CustomScore{[](const Field& x, double, const Field*) { return Field::zeros(x.resolution()); }},
                        sched);
  CHECK(dsm_loss(zero, batch, t, eps) == doctest::Approx(static_cast<double>(n)).epsilon(0.05));

  // Matched Gaussian data: E = n s^2 / (s^2 + sigma^2).
  const double s = 1.0;
  const Dataset gauss(gaussian_draws(10000, n, rng));
  const auto eps2 = gaussian_draws(10000, n, rng);
  const double var = sched.sigma_sq(t);
  CHECK(dsm_loss(ScoreModel::gaussian(Field::zeros(n), s, sched), gauss, t, eps2) ==
        doctest::Approx(n * s * s / (s * s + var)).epsilon(0.05));
  CHECK_THROWS_AS(dsm_loss(zero, batch, t, std::span<const Field>(eps.data(), 3)), std::invalid_argument);
}

TEST_CASE("network gradient matches finite differences") {
  for (std::size_t factor : {std::size_t{0}, std::size_t{2}}) {
    const std::size_t n = 8;
    ScoreNet net(small_arch(n, factor), NoiseSchedule());
    Rng rng(5);
    Eigen::MatrixXd x(n, 3), eps(n, 3), cond(n, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = rng.gaussian();
      eps.data()[i] = rng.gaussian();
      cond.data()[i] = rng.gaussian();
    }
    const Eigen::MatrixXd* c = factor ? &cond : nullptr;
    const double t = 0.3;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.parameters().size());
    dsm_loss_grad(net, x, eps, c, t, &grad);
    Rng pick(6);
    int checked = 0;
    for (int k = 0; k < 20; ++k) {
      const auto idx = static_cast<Eigen::Index>(pick.uniform() * static_cast<double>(net.parameters().size()));
      const double h = 1e-6, orig = net.parameters()[idx];
      net.parameters()[idx] = orig + h;
      const double lp = dsm_loss_grad(net, x, eps, c, t, nullptr);
      net.parameters()[idx] = orig - h;
      const double lm = dsm_loss_grad(net, x, eps, c, t, nullptr);
      net.parameters()[idx] = orig;
      const double fd = (lp - lm) / (2 * h);
      CHECK(std::abs(fd - grad[idx]) <= 1e-5 * std::max(1.0, std::abs(fd)));
      ++checked;
    }
    CHECK(checked == 20);
  }
}

TEST_CASE("network rejects t = 0") {
  ScoreNet net(small_arch(8), NoiseSchedule());
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(8, 1);
  CHECK_THROWS_AS(net.forward(x, nullptr, 0.0), std::domain_error);
  const auto m = ScoreModel::network(std::make_shared<const ScoreNet>(net));
  CHECK_THROWS_AS(m.eval(Field::zeros(8), 0.0), std::domain_error);
}

TEST_CASE("training on a single sample overfits its point-mass score") {
  const std::size_t n = 16;
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = std::sin(2 * M_PI * static_cast<double>(j) / n);
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.max_iter = 2000;
  cfg.seed = 3;
  NetArch arch = small_arch(n);
  arch.channels = 16;
  arch.embed_dim = 16;
  const auto res = train_uncond(Dataset({Field(v)}), cfg, arch, NoiseSchedule());
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 50; ++i) first += res.log[i].loss / 50.0;
  for (std::size_t i = 1800; i < 2000; ++i) last += res.log[i].loss / 200.0;
  // The zero score has expected loss n; the exact point-mass score has loss 0.
  CHECK(last < 0.2 * static_cast<double>(n));
  CHECK(last < 0.75 * first);
}

namespace {

double median_loss(const TrainResult& res, std::size_t from, std::size_t to) {
  std::vector<double> v;
  for (std::size_t i = from; i < to; ++i) v.push_back(res.log[i].loss);
  std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_CASE("training loss decreases on advection data") {
  AdvectionProblem prob;
  Rng rng(4);
  std::vector<Field> fields;
  for (int i = 0; i < 2000; ++i) fields.push_back(analytic_solution(sample_ic(rng), prob, 100));
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_iter = 600;
  cfg.seed = 1;
  NetArch arch = small_arch(100);
  arch.channels = 16;
  arch.embed_dim = 16;
  const auto res = train_uncond(Dataset(fields), cfg, arch, NoiseSchedule());
  REQUIRE(res.log.size() == 600);
  CHECK(median_loss(res, 500, 600) < median_loss(res, 0, 100));
}

TEST_CASE("training argument checks and determinism") {
  const Dataset d({Field::constant(8, 1.0), Field::constant(8, 2.0)});
  TrainConfig cfg;
  cfg.max_iter = 0;
  CHECK_THROWS_AS(train_uncond(d, cfg, small_arch(8), NoiseSchedule()), ConfigError);
  cfg.max_iter = 5;
  cfg.batch_size = 3;
  CHECK_THROWS_AS(train_uncond(d, cfg, small_arch(8), NoiseSchedule()), ConfigError);
  cfg.batch_size = 2;
  const auto a = train_uncond(d, cfg, small_arch(8), NoiseSchedule());
  const auto b = train_uncond(d, cfg, small_arch(8), NoiseSchedule());
  CHECK(a.net->parameters() == b.net->parameters());
  CHECK_THROWS_AS(train_cond(Dataset({Field::zeros(4)}), d, cfg, small_arch(8), NoiseSchedule()), ConfigError);
  CHECK_THROWS_AS(train_cond(Dataset({Field::zeros(6), Field::zeros(6)}), d, cfg, small_arch(8), NoiseSchedule()),
                  ConfigError);
}

TEST_CASE("parameter averaging leaves the optimization path unchanged") {
  const Dataset d({Field::constant(8, 1.0), Field::constant(8, -1.0), Field::constant(8, 0.5)});
  TrainConfig cfg;
  cfg.max_iter = 50;
  cfg.batch_size = 2;
  cfg.ema_decay = 0.0;
  const auto last = train_uncond(d, cfg, small_arch(8), NoiseSchedule());
  cfg.ema_decay = 0.9;
  const auto avg = train_uncond(d, cfg, small_arch(8), NoiseSchedule());
  REQUIRE(last.log.size() == avg.log.size());
  for (std::size_t i = 0; i < last.log.size(); ++i) CHECK(last.log[i].loss == avg.log[i].loss);
  CHECK(last.net->parameters() != avg.net->parameters());
  // The average lies between the initialization and the last iterate, coordinate-wise
  // in the aggregate sense: it is closer to the last iterate than the initialization is.
  const ScoreNet init(last.net->arch(), NoiseSchedule());
  CHECK((avg.net->parameters() - last.net->parameters()).norm() <
        (init.parameters() - last.net->parameters()).norm());
  cfg.ema_decay = 1.0;
  CHECK_THROWS_AS(train_uncond(d, cfg, small_arch(8), NoiseSchedule()), ConfigError);
}

TEST_CASE("conditional training learns to upsample its condition") {
  Rng rng(12);
  auto make = [&](std::size_t count, std::vector<Field>& lows, std::vector<Field>& highs) {
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<double> v(8);
      const double a = rng.gaussian(), b = rng.gaussian();
      for (std::size_t j = 0; j < 8; ++j)
        v[j] = a * std::sin(2 * M_PI * static_cast<double>(j) / 8) + b * std::cos(2 * M_PI * static_cast<double>(j) / 8);
      lows.emplace_back(v);
      highs.push_back(prolong(lows.back(), 2));
    }
  };
  std::vector<Field> lows, highs, test_lows, test_highs;
  make(300, lows, highs);
  make(20, test_lows, test_highs);
  TrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_iter = 3000;
  cfg.seed = 2;
  NetArch arch = small_arch(16, 2);
  arch.channels = 16;
  arch.embed_dim = 16;
  arch.data_scale = 0.05;
  const auto res = train_cond(Dataset(lows), Dataset(highs), cfg, arch, NoiseSchedule());
  CHECK(res.net->arch().cond_factor == 2);
  CHECK(median_loss(res, 2900, 3000) < median_loss(res, 0, 100));
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < test_lows.size(); ++i) rngs.emplace_back(derive_seed(5, {i}));
  const auto out = em_sample_cond_batch(res.model(), test_lows, 16, 1000, rngs);
  CHECK(rmse(Dataset(out), Dataset(test_highs)) < 0.1);
}

TEST_CASE("checkpoint round trip") {
  const ScoreNet net(small_arch(8, 2), NoiseSchedule(50.0));
  const auto file = temp_file("roundtrip.ckpt");
  save_checkpoint(file, net, {7, 123});
  CheckpointInfo info;
  const auto back = load_checkpoint(file, &info);
  CHECK(back->arch() == net.arch());
  CHECK(back->parameters() == net.parameters());
  CHECK(back->frequencies() == net.frequencies());
  CHECK(back->schedule().base() == 50.0);
  CHECK(info.seed == 7);
  CHECK(info.iteration == 123);

  CHECK_THROWS_AS(load_checkpoint(temp_file("missing.ckpt")), ConfigError);
  {
    std::ofstream bad(temp_file("bad.ckpt"), std::ios::binary);
    bad << "NOTACKPTxxxxxxxx";
  }
  CHECK_THROWS_AS(load_checkpoint(temp_file("bad.ckpt")), ConfigError);
  std::filesystem::resize_file(file, std::filesystem::file_size(file) - 8);
  CHECK_THROWS_AS(load_checkpoint(file), ConfigError);
  std::filesystem::remove(file);
  std::filesystem::remove(temp_file("bad.ckpt"));
}
