#include "dcsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dcsr/rng.hpp"

namespace dcsr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
                     {"max_iter", c.max_iter},     {"beta1", c.beta1},
                     {"beta2", c.beta2},           {"adam_eps", c.adam_eps},
                     {"t_min", c.t_min},           {"seed", c.seed},
                     {"ema_decay", c.ema_decay},
                     {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.max_iter = j.value("max_iter", d.max_iter);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.t_min = j.value("t_min", d.t_min);
  c.seed = j.value("seed", d.seed);
  c.ema_decay = j.value("ema_decay", d.ema_decay);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
}

double dsm_loss_grad(const ScoreNet& net, const MatrixXd& x, const MatrixXd& eps, const MatrixXd* cond_up,
                     double t, VectorXd* grad) {
  const double sigma = net.schedule().sigma(t);
  const MatrixXd noisy = x + sigma * eps;
  ScoreNet::Cache cache;
  const MatrixXd out = net.forward(noisy, cond_up, t, grad ? &cache : nullptr);
  const MatrixXd resid = out + eps;
  const double batch = static_cast<double>(x.cols());
  const double loss = resid.squaredNorm() / batch;
  if (grad) net.backward(cache, (2.0 / batch) * resid, *grad);
  return loss;
}

namespace {

struct Adam {
  VectorXd m, v;
  std::size_t step = 0;

  void apply(VectorXd& params, const VectorXd& grad, const TrainConfig& cfg) {
    if (m.size() != params.size()) {
      m = VectorXd::Zero(params.size());
      v = VectorXd::Zero(params.size());
    }
    ++step;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    const double lr = cfg.learning_rate * std::sqrt(bc2) / bc1;
    params.array() -= lr * m.array() / (v.array().sqrt() + cfg.adam_eps * std::sqrt(bc2));
  }
};

MatrixXd to_matrix(const Dataset& d) {
  MatrixXd m(static_cast<Eigen::Index>(d.resolution()), static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i)
    m.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const VectorXd>(d[i].data().data(), static_cast<Eigen::Index>(d.resolution()));
  return m;
}

TrainResult run_training(const MatrixXd& targets, const MatrixXd* conds_up, const TrainConfig& cfg,
                         const NetArch& arch, const NoiseSchedule& sched, const TrainProgress& progress) {
  if (cfg.max_iter == 0) throw ConfigError("max_iter must be >= 1");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const auto count = static_cast<std::size_t>(targets.cols());
  if (cfg.batch_size > count) throw ConfigError("batch_size exceeds dataset size");
  if (!(cfg.t_min > 0.0 && cfg.t_min < 1.0)) throw ConfigError("t_min must lie in (0, 1)");
  if (!(cfg.ema_decay >= 0.0 && cfg.ema_decay < 1.0)) throw ConfigError("ema_decay must lie in [0, 1)");

  auto net = std::make_shared<ScoreNet>(arch, sched);
  Rng rng(derive_seed(cfg.seed, {0x747261696e}));
  Adam adam;
  TrainResult result;
  result.log.reserve(cfg.max_iter);

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto n = targets.rows();
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);
  MatrixXd x(n, batch), eps(n, batch), cb;
  if (conds_up) cb.resize(n, batch);
  VectorXd grad(net->parameters().size());
  VectorXd snapshot = net->parameters();
  VectorXd ema = net->parameters();

  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    // Batch without replacement: partial Fisher-Yates.
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      std::uniform_int_distribution<std::size_t> pick(b, count - 1);
      std::swap(order[b], order[pick(rng.engine())]);
      x.col(static_cast<Eigen::Index>(b)) = targets.col(static_cast<Eigen::Index>(order[b]));
      if (conds_up) cb.col(static_cast<Eigen::Index>(b)) = conds_up->col(static_cast<Eigen::Index>(order[b]));
    }
    const double t = rng.uniform(cfg.t_min, 1.0);
    rng.fill_gaussian(std::span<double>(eps.data(), static_cast<std::size_t>(eps.size())));

    grad.setZero();
    const double loss = dsm_loss_grad(*net, x, eps, conds_up ? &cb : nullptr, t, &grad);
    if (!std::isfinite(loss) || !grad.allFinite()) throw TrainingDiverged(it, snapshot);
    adam.apply(net->parameters(), grad, cfg);
    // Warm-up: the effective decay grows with the step count.
    const double decay = std::min(cfg.ema_decay, (1.0 + static_cast<double>(it)) / (10.0 + static_cast<double>(it)));
    ema = decay * ema + (1.0 - decay) * net->parameters();
    result.log.push_back({it, t, loss});
    if (progress) progress(it, loss);
    if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) snapshot = net->parameters();
  }
  if (cfg.ema_decay > 0.0) net->parameters() = ema;
  result.net = std::move(net);
  return result;
}

}  // namespace

TrainResult train_uncond(const Dataset& data, const TrainConfig& cfg, NetArch arch, const NoiseSchedule& sched,
                         const TrainProgress& progress) {
  if (data.empty()) throw ConfigError("training dataset is empty");
  arch.resolution = data.resolution();
  arch.cond_factor = 0;
  if (arch.init_seed == 0) arch.init_seed = derive_seed(cfg.seed, {0x696e6974});
  const MatrixXd targets = to_matrix(data);
  return run_training(targets, nullptr, cfg, arch, sched, progress);
}

TrainResult train_cond(const Dataset& low, const Dataset& high, const TrainConfig& cfg, NetArch arch,
                       const NoiseSchedule& sched, const TrainProgress& progress) {
  if (low.empty() || high.empty()) throw ConfigError("conditional training needs a nonempty pair list");
  if (low.size() != high.size()) throw ConfigError("misaligned pair counts");
  if (high.resolution() % low.resolution() != 0 || high.resolution() / low.resolution() < 2)
    throw ConfigError("high resolution must be an integer multiple (>= 2) of the low resolution");
  arch.resolution = high.resolution();
  arch.cond_factor = high.resolution() / low.resolution();
  if (arch.init_seed == 0) arch.init_seed = derive_seed(cfg.seed, {0x696e6974});
  const MatrixXd targets = to_matrix(high);
  const MatrixXd conds = to_matrix(prolong(low, arch.cond_factor));
  return run_training(targets, &conds, cfg, arch, sched, progress);
}

}  // namespace dcsr
