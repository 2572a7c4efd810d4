#include "dcsr/sde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dcsr/error.hpp"

namespace dcsr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void to_json(nlohmann::json& j, const OdeTolerances& t) {
  j = nlohmann::json{{"rtol", t.rtol}, {"atol", t.atol}, {"max_steps", t.max_steps}};
}

void from_json(const nlohmann::json& j, OdeTolerances& t) {
  OdeTolerances d;
  t.rtol = j.value("rtol", d.rtol);
  t.atol = j.value("atol", d.atol);
  t.max_steps = j.value("max_steps", d.max_steps);
  if (!(t.rtol > 0.0) || !(t.atol > 0.0)) throw ConfigError("ODE tolerances must be positive");
}

Field perturb(const Field& x, double t, const NoiseSchedule& sched, Rng& rng) {
  const double s = sched.sigma(t);
  std::vector<double> out(x.resolution());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = x[j] + s * rng.gaussian();
  return Field(std::move(out), x.domain_length());
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

class PfVelocity {
 public:
  PfVelocity(const ScoreModel& score, OdeStats& stats) : score_(score), stats_(stats) {}

  VectorXd operator()(double t, const VectorXd& y) const {
    return (-0.5 * score_.schedule().sigma_sq_rate(t)) * score(t, y);
  }

  VectorXd score(double t, const VectorXd& y) const {
    if (!y.allFinite()) throw NumericError("ODE diverged");
    ++stats_.evaluations;
    VectorXd s = score_.eval_batch(y, t);
    if (!s.allFinite()) throw NumericError("ODE diverged");
    return s;
  }

 private:
  const ScoreModel& score_;
  OdeStats& stats_;
};

void integrate(VectorXd& y, double t0, double t1, double h0, const PfVelocity& f, const OdeTolerances& tol,
               OdeStats& stats) {
  constexpr double safety = 0.9, min_fac = 0.2, max_fac = 10.0, beta = 0.04;
  constexpr double alpha = 0.2 - 0.75 * beta;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  double t = t0;
  double h = std::abs(h0) * dir;
  double err_prev = 1e-4;
  bool last_rejected = false;
  VectorXd k1 = f(t, y);
  std::size_t steps = 0;

  while (dir * (t1 - t) > 0.0) {
    if (++steps > tol.max_steps) throw NumericError("ODE step limit");
    // Land exactly on t1; t + (t1 - t) can miss it by an ulp.
    const bool last = dir * (t + h - t1) >= 0.0;
    if (last) h = t1 - t;
    if (std::abs(h) < 1e-15 * std::max(1.0, std::abs(t))) throw NumericError("ODE step size underflow");

    const VectorXd k2 = f(t + c2 * h, y + h * (a21 * k1));
    const VectorXd k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const VectorXd k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const VectorXd k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const double t_new = last ? t1 : t + h;
    const VectorXd k6 = f(t_new, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    VectorXd y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const VectorXd k7 = f(t_new, y_new);
    const VectorXd err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    if (!y_new.allFinite() || !err_vec.allFinite()) throw NumericError("ODE diverged");
    const VectorXd scale = (tol.atol + tol.rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array()).matrix();
    const double err = std::sqrt((err_vec.cwiseQuotient(scale)).squaredNorm() / static_cast<double>(y.size()));

    if (err <= 1.0) {
      ++stats.accepted;
      double fac = err == 0.0 ? max_fac : safety * std::pow(err, -alpha) * std::pow(err_prev, beta);
      fac = std::clamp(fac, min_fac, last_rejected ? 1.0 : max_fac);
      err_prev = std::max(err, 1e-4);
      t = t_new;
      y = std::move(y_new);
      k1 = k7;
      h *= fac;
      last_rejected = false;
    } else {
      ++stats.rejected;
      h *= std::max(min_fac, safety * std::pow(err, -alpha));
      last_rejected = true;
    }
  }
}

}  // namespace

Field ode_solve(const Field& x_init, double t_start, double t_end, const ScoreModel& score,
                const OdeTolerances& tol, OdeStats* stats) {
  if (!(t_start >= 0.0 && t_start <= 1.0 && t_end >= 0.0 && t_end <= 1.0))
    throw std::domain_error("ode_solve: times outside [0,1]");
  if (!(tol.rtol > 0.0 && tol.atol > 0.0)) throw std::invalid_argument("ode_solve: tolerances must be positive");
  if (t_start == t_end) return x_init;
  OdeStats local;
  OdeStats& st = stats ? *stats : local;
  PfVelocity f(score, st);

  VectorXd y = Eigen::Map<const VectorXd>(x_init.data().data(), static_cast<Eigen::Index>(x_init.resolution()));
  const double h0 = (t_end - t_start) / 100.0;

  // Scores that are singular at t_end (point masses, networks) stop at the floor and
  // close the gap with one explicit step in sigma, x + sigma^2 S, the denoising
  // estimate, exact for a point mass.
  bool terminal = false;
  if (t_end < kTerminalTime && t_start > kTerminalTime) {
    try {
      f.score(t_end, y);
    } catch (const std::domain_error&) {
      terminal = true;
    }
  }
  const double stop = terminal ? kTerminalTime : t_end;
  integrate(y, t_start, stop, h0, f, tol, st);
  if (terminal) {
    // dx/dsigma = -sigma S, one step from sigma(stop) to sigma(t_end).
    const double s_stop = score.schedule().sigma(stop);
    y += s_stop * (s_stop - score.schedule().sigma(t_end)) * f.score(stop, y);
    if (!y.allFinite()) throw NumericError("ODE diverged");
  }
  return Field(std::vector<double>(y.data(), y.data() + y.size()), x_init.domain_length());
}

namespace {

std::vector<Field> em_batch(const ScoreModel& score, std::span<const Field> conds, std::size_t n,
                            std::size_t n_steps, std::span<Rng> rngs, bool denoise_final) {
  if (n_steps == 0) throw std::invalid_argument("em_sample: n_steps must be >= 1");
  if (rngs.empty()) return {};
  const auto& sched = score.schedule();
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(rngs.size());
  MatrixXd x(rows, cols);
  const double top = sched.sigma(1.0);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = top * rngs[static_cast<std::size_t>(j)].gaussian();

  const double steps = static_cast<double>(n_steps);
  for (std::size_t i = n_steps; i >= 1; --i) {
    const double t = static_cast<double>(i) / steps;
    const double t_prev = static_cast<double>(i - 1) / steps;
    const double var_t = sched.sigma_sq(t);
    const double var_prev = sched.sigma_sq(t_prev);
    const MatrixXd s = score.eval_batch(x, t, conds);
    x += (var_t - var_prev) * s;
    if (i == 1 && denoise_final) break;
    const double g = std::sqrt(var_t - var_prev);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index r = 0; r < rows; ++r) x(r, j) += g * rngs[static_cast<std::size_t>(j)].gaussian();
    if (!x.allFinite()) throw NumericError("EM sampler diverged at t = " + std::to_string(t));
  }
  std::vector<Field> out;
  out.reserve(rngs.size());
  for (Eigen::Index j = 0; j < cols; ++j)
    out.emplace_back(std::vector<double>(x.col(j).data(), x.col(j).data() + rows));
  return out;
}

}  // namespace

std::vector<Field> em_sample_cond_batch(const ScoreModel& score, std::span<const Field> conds, std::size_t n,
                                        std::size_t n_steps, std::span<Rng> rngs, bool denoise_final) {
  if (!score.conditional()) throw std::invalid_argument("em_sample_cond: model is not conditional");
  if (conds.size() != rngs.size()) throw std::invalid_argument("em_sample_cond: one stream per condition");
  for (const auto& c : conds)
    if (c.resolution() * score.cond_factor() != n)
      throw std::invalid_argument("em_sample_cond: condition resolution mismatch");
  if (const auto* net = score.net(); net && net->arch().resolution != n)
    throw std::invalid_argument("em_sample_cond: output resolution mismatch");
  std::vector<Field> out = em_batch(score, conds, n, n_steps, rngs, denoise_final);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = Field(std::vector<double>(out[j].data()), conds[j].domain_length());
  return out;
}

std::vector<Field> em_sample_uncond_batch(const ScoreModel& score, std::size_t n, std::size_t n_steps,
                                          std::span<Rng> rngs, bool denoise_final) {
  if (score.conditional()) throw std::invalid_argument("em_sample_uncond: model is conditional");
  if (const auto* net = score.net(); net && net->arch().resolution != n)
    throw std::invalid_argument("em_sample_uncond: output resolution mismatch");
  return em_batch(score, {}, n, n_steps, rngs, denoise_final);
}

Field em_sample_uncond(const ScoreModel& score, std::size_t n, std::size_t n_steps, Rng& rng, bool denoise_final) {
  return em_sample_uncond_batch(score, n, n_steps, std::span<Rng>(&rng, 1), denoise_final).front();
}

Field em_sample_cond(const ScoreModel& score, const Field& cond, std::size_t n, std::size_t n_steps, Rng& rng,
                     bool denoise_final) {
  return em_sample_cond_batch(score, std::span<const Field>(&cond, 1), n, n_steps, std::span<Rng>(&rng, 1),
                              denoise_final)
      .front();
}

}  // namespace dcsr
