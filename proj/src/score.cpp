#include "dcsr/score.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dcsr {

using Eigen::MatrixXd;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("score: t outside [0,1]");
}

// Column j of x as a Field.
Field column_field(const MatrixXd& x, Eigen::Index j, double length) {
  std::vector<double> v(static_cast<std::size_t>(x.rows()));
  Eigen::Map<Eigen::VectorXd>(v.data(), x.rows()) = x.col(j);
  return Field(std::move(v), length);
}

}  // namespace

ScoreModel::ScoreModel(Kind kind, NoiseSchedule sched) : kind_(std::move(kind)), sched_(sched) {
  std::visit(Overloaded{
                 [](const PointMassScore& k) {
                   if (k.x0.resolution() == 0) throw std::invalid_argument("point mass: empty field");
                 },
                 [](const GaussianScore& k) {
                   if (!(k.stddev > 0.0)) throw std::invalid_argument("gaussian: stddev must be positive");
                 },
                 [](const GaussianMixtureScore& k) {
                   if (k.means.empty() || k.means.size() != k.weights.size())
                     throw std::invalid_argument("mixture: weights/means mismatch");
                   if (!(k.stddev > 0.0)) throw std::invalid_argument("mixture: stddev must be positive");
                   double total = 0.0;
                   for (double w : k.weights) {
                     if (w < 0.0) throw std::invalid_argument("mixture: negative weight");
                     total += w;
                   }
                   if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");
                   for (const auto& m : k.means)
                     if (m.resolution() != k.means.front().resolution())
                       throw std::invalid_argument("mixture: mixed resolutions");
                 },
                 [](const NetworkScore& k) {
                   if (!k.net) throw std::invalid_argument("network score: null network");
                 },
                 [](const CustomScore& k) {
                   if (!k.fn) throw std::invalid_argument("custom score: empty callable");
                 },
             },
             kind_);
  if (const auto* nk = std::get_if<NetworkScore>(&kind_)) sched_ = nk->net->schedule();
}

ScoreModel ScoreModel::point_mass(Field x0, NoiseSchedule sched) {
  return ScoreModel(PointMassScore{std::move(x0)}, sched);
}

ScoreModel ScoreModel::gaussian(Field mean, double stddev, NoiseSchedule sched) {
  return ScoreModel(GaussianScore{std::move(mean), stddev}, sched);
}

ScoreModel ScoreModel::network(std::shared_ptr<const ScoreNet> net) {
  const auto sched = net ? net->schedule() : NoiseSchedule{};
  return ScoreModel(NetworkScore{std::move(net)}, sched);
}

bool ScoreModel::conditional() const { return cond_factor() > 0; }

std::size_t ScoreModel::cond_factor() const {
  if (const auto* nk = std::get_if<NetworkScore>(&kind_)) return nk->net->arch().cond_factor;
  if (const auto* ck = std::get_if<CustomScore>(&kind_)) return ck->conditional ? std::max<std::size_t>(ck->cond_factor, 1) : 0;
  return 0;
}

std::string ScoreModel::kind_name() const {
  return std::visit(Overloaded{
                        [](const PointMassScore&) { return std::string("point_mass"); },
                        [](const GaussianScore&) { return std::string("gaussian"); },
                        [](const GaussianMixtureScore&) { return std::string("gaussian_mixture"); },
                        [](const NetworkScore& k) {
                          return std::string(k.net->arch().conditional() ? "conditional_network" : "network");
                        },
                        [](const CustomScore&) { return std::string("custom"); },
                    },
                    kind_);
}

const ScoreNet* ScoreModel::net() const {
  if (const auto* nk = std::get_if<NetworkScore>(&kind_)) return nk->net.get();
  return nullptr;
}

Field ScoreModel::eval(const Field& x, double t) const {
  if (conditional()) throw std::invalid_argument("conditional score model evaluated without a condition");
  check_time(t);
  const double len = x.domain_length();
  const std::size_t n = x.resolution();
  return std::visit(
      Overloaded{
          [&](const PointMassScore& k) {
            if (k.x0.resolution() != n) throw std::invalid_argument("point mass: resolution mismatch");
            const double var = sched_.sigma_sq(t);
            if (!(var > 0.0)) throw std::domain_error("score undefined at t=0");
            std::vector<double> out(n);
            for (std::size_t j = 0; j < n; ++j) out[j] = -(x[j] - k.x0[j]) / var;
            return Field(std::move(out), len);
          },
          [&](const GaussianScore& k) {
            if (k.mean.resolution() != n) throw std::invalid_argument("gaussian: resolution mismatch");
            const double var = k.stddev * k.stddev + sched_.sigma_sq(t);
            std::vector<double> out(n);
            for (std::size_t j = 0; j < n; ++j) out[j] = -(x[j] - k.mean[j]) / var;
            return Field(std::move(out), len);
          },
          [&](const GaussianMixtureScore& k) {
            if (k.means.front().resolution() != n) throw std::invalid_argument("mixture: resolution mismatch");
            const double var = k.stddev * k.stddev + sched_.sigma_sq(t);
            // Responsibilities via log-sum-exp.
            std::vector<double> logp(k.means.size());
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < k.means.size(); ++i) {
              double d2 = 0.0;
              for (std::size_t j = 0; j < n; ++j) {
                const double d = x[j] - k.means[i][j];
                d2 += d * d;
              }
              logp[i] = k.weights[i] > 0.0 ? std::log(k.weights[i]) - 0.5 * d2 / var
                                           : -std::numeric_limits<double>::infinity();
              top = std::max(top, logp[i]);
            }
            double z = 0.0;
            for (double& lp : logp) {
              lp = std::exp(lp - top);
              z += lp;
            }
            std::vector<double> out(n, 0.0);
            for (std::size_t i = 0; i < k.means.size(); ++i) {
              const double r = logp[i] / z;
              if (r == 0.0) continue;
              for (std::size_t j = 0; j < n; ++j) out[j] -= r * (x[j] - k.means[i][j]) / var;
            }
            return Field(std::move(out), len);
          },
          [&](const NetworkScore& k) {
            const Eigen::Map<const MatrixXd> xm(x.data().data(), static_cast<Eigen::Index>(n), 1);
            const MatrixXd o = k.net->forward(xm, nullptr, t) / sched_.sigma(t);
            return column_field(o, 0, len);
          },
          [&](const CustomScore& k) { return k.fn(x, t, nullptr); },
      },
      kind_);
}

Field ScoreModel::eval(const Field& x, double t, const Field& cond) const {
  const std::size_t factor = cond_factor();
  if (factor == 0) throw std::invalid_argument("unconditional score model given a condition");
  if (cond.resolution() * factor != x.resolution())
    throw std::invalid_argument("condition resolution does not match the model");
  check_time(t);
  if (const auto* ck = std::get_if<CustomScore>(&kind_)) return ck->fn(x, t, &cond);
  const auto& nk = std::get<NetworkScore>(kind_);
  const Field up = prolong(cond, factor);
  const auto rows = static_cast<Eigen::Index>(x.resolution());
  const Eigen::Map<const MatrixXd> xm(x.data().data(), rows, 1);
  const MatrixXd cm = Eigen::Map<const MatrixXd>(up.data().data(), rows, 1);
  const MatrixXd o = nk.net->forward(xm, &cm, t) / sched_.sigma(t);
  return column_field(o, 0, x.domain_length());
}

MatrixXd ScoreModel::eval_batch(const MatrixXd& x, double t, std::span<const Field> conds) const {
  const bool cond_model = conditional();
  if (cond_model && conds.size() != static_cast<std::size_t>(x.cols()))
    throw std::invalid_argument("eval_batch: one condition per column required");
  if (!cond_model && !conds.empty()) throw std::invalid_argument("eval_batch: unconditional model given conditions");
  check_time(t);
  if (const auto* nk = std::get_if<NetworkScore>(&kind_)) {
    if (!cond_model) return nk->net->forward(x, nullptr, t) / sched_.sigma(t);
    const std::size_t factor = cond_factor();
    MatrixXd up(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const auto& c = conds[static_cast<std::size_t>(j)];
      if (c.resolution() * factor != static_cast<std::size_t>(x.rows()))
        throw std::invalid_argument("condition resolution does not match the model");
      const Field u = prolong(c, factor);
      up.col(j) = Eigen::Map<const Eigen::VectorXd>(u.data().data(), x.rows());
    }
    return nk->net->forward(x, &up, t) / sched_.sigma(t);
  }
  MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const Field xf = column_field(x, j, 1.0);
    const Field s = cond_model ? eval(xf, t, conds[static_cast<std::size_t>(j)]) : eval(xf, t);
    out.col(j) = Eigen::Map<const Eigen::VectorXd>(s.data().data(), x.rows());
  }
  return out;
}

double dsm_loss(const ScoreModel& m, const Dataset& batch, double t, std::span<const Field> eps,
                const Dataset* conds) {
  if (batch.empty()) throw std::invalid_argument("dsm_loss: empty batch");
  if (eps.size() != batch.size()) throw std::invalid_argument("dsm_loss: one noise draw per sample required");
  if (m.conditional() && (!conds || conds->size() != batch.size()))
    throw std::invalid_argument("dsm_loss: conditional model needs one condition per sample");
  const double sigma = m.schedule().sigma(t);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Field& x = batch[i];
    std::vector<double> noisy(x.resolution());
    for (std::size_t j = 0; j < noisy.size(); ++j) noisy[j] = x[j] + sigma * eps[i][j];
    const Field xt(std::move(noisy), x.domain_length());
    const Field s = m.conditional() ? m.eval(xt, t, (*conds)[i]) : m.eval(xt, t);
    double acc = 0.0;
    for (std::size_t j = 0; j < s.resolution(); ++j) {
      const double r = sigma * s[j] + eps[i][j];
      acc += r * r;
    }
    total += acc;
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace dcsr
