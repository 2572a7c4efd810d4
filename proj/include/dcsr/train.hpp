#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "dcsr/error.hpp"
#include "dcsr/grid.hpp"
#include "dcsr/network.hpp"
#include "dcsr/score.hpp"

namespace dcsr {

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t max_iter = 20000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Lower end of the training-time distribution U[t_min, 1].
  double t_min = 1e-4;
  std::uint64_t seed = 0;
  /// Decay of the exponential moving average of the parameters; the returned
  /// network carries the averaged weights. 0 returns the last iterate.
  double ema_decay = 0.999;
  /// Iterations between the snapshots returned on divergence.
  std::size_t checkpoint_every = 500;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainLogEntry {
  std::size_t iteration = 0;
  double t = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  std::shared_ptr<const ScoreNet> net;
  std::vector<TrainLogEntry> log;

  ScoreModel model() const { return ScoreModel::network(net); }
};

/// Thrown when the loss becomes non-finite; carries the last finite snapshot.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(std::size_t iteration, Eigen::VectorXd last_good)
      : NumericError("training diverged at iteration " + std::to_string(iteration)),
        iteration_(iteration),
        last_good_(std::move(last_good)) {}
  std::size_t iteration() const { return iteration_; }
  const Eigen::VectorXd& last_good() const { return last_good_; }

 private:
  std::size_t iteration_;
  Eigen::VectorXd last_good_;
};

using TrainProgress = std::function<void(std::size_t iteration, double loss)>;

/// Denoising score matching loss of the raw network output for one shared t
/// (the network parametrization sigma * S = net makes the loss mean ||net + eps||^2),
/// with its parameter gradient added into `grad` when non-null.
/// x, eps: n x B; cond_up: upsampled conditions (n x B) or null.
double dsm_loss_grad(const ScoreNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& eps,
                     const Eigen::MatrixXd* cond_up, double t, Eigen::VectorXd* grad);

/// Adam minimization of the DSM loss over `data`; one t ~ U[t_min, 1] per batch.
/// arch.resolution is taken from the data. Throws ConfigError for max_iter == 0 or
/// a batch larger than the dataset, TrainingDiverged on a non-finite loss.
TrainResult train_uncond(const Dataset& data, const TrainConfig& cfg, NetArch arch,
                         const NoiseSchedule& sched, const TrainProgress& progress = {});

/// Conditional variant on index-aligned (low, high) pairs; the upsampled low-resolution
/// field is the conditioning channel. Throws ConfigError for misaligned or empty pairs
/// or a resolution ratio that is not an integer >= 2.
TrainResult train_cond(const Dataset& low, const Dataset& high, const TrainConfig& cfg, NetArch arch,
                       const NoiseSchedule& sched, const TrainProgress& progress = {});

}  // namespace dcsr
