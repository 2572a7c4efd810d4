#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dcsr/grid.hpp"
#include "dcsr/network.hpp"
#include "dcsr/noise.hpp"

namespace dcsr {

/// Data = {x0}. Score -(x - x0) / sigma^2(t); undefined at t = 0.
struct PointMassScore {
  Field x0;
};

/// Data ~ N(mean, stddev^2 I). Score -(x - mean) / (stddev^2 + sigma^2(t)).
struct GaussianScore {
  Field mean;
  double stddev = 1.0;
};

/// Data ~ sum_i w_i N(mean_i, stddev^2 I).
struct GaussianMixtureScore {
  std::vector<double> weights;
  std::vector<Field> means;
  double stddev = 1.0;
};

/// Trained (or freshly initialized) network, conditional or not.
struct NetworkScore {
  std::shared_ptr<const ScoreNet> net;
};

/// Synthetic score supplied as a callable; `cond` is null for unconditional use.
/// Used for oracles that the closed-form kinds do not cover.
struct CustomScore {
  std::function<Field(const Field& x, double t, const Field* cond)> fn;
  bool conditional = false;
  std::size_t cond_factor = 0;
};

/// Evaluatable score S(x, t[, cond]) tied to the noise schedule it was built for.
/// Immutable once built; safe for concurrent evaluation.
class ScoreModel {
 public:
  using Kind = std::variant<PointMassScore, GaussianScore, GaussianMixtureScore, NetworkScore, CustomScore>;

  /// Throws std::invalid_argument on an invalid kind (mixture weights not summing
  /// to 1, non-positive stddev, null network...).
  ScoreModel(Kind kind, NoiseSchedule sched);

  static ScoreModel point_mass(Field x0, NoiseSchedule sched = NoiseSchedule{});
  static ScoreModel gaussian(Field mean, double stddev, NoiseSchedule sched = NoiseSchedule{});
  static ScoreModel network(std::shared_ptr<const ScoreNet> net);

  const Kind& kind() const { return kind_; }
  const NoiseSchedule& schedule() const { return sched_; }
  bool conditional() const;
  /// Resolution of the conditioning field relative to the output (0 if unconditional).
  std::size_t cond_factor() const;
  std::string kind_name() const;
  const ScoreNet* net() const;

  /// Unconditional evaluation. Throws std::domain_error("score undefined at t=0")
  /// where the score is singular at t = 0, std::invalid_argument when the model is conditional.
  Field eval(const Field& x, double t) const;
  /// Conditional evaluation; `cond` is the low-resolution condition.
  /// Throws std::invalid_argument on resolution mismatch.
  Field eval(const Field& x, double t, const Field& cond) const;

  /// Batched evaluation: columns of x are samples, all at time t. `conds` holds one
  /// low-resolution condition per column for conditional models and is empty otherwise.
  Eigen::MatrixXd eval_batch(const Eigen::MatrixXd& x, double t, std::span<const Field> conds = {}) const;

 private:
  Kind kind_;
  NoiseSchedule sched_;
};

/// Mean over the batch of || sigma(t) S(x + sigma(t) eps, t [, cond]) + eps ||^2.
/// `eps` holds one draw per sample; `conds` (low resolution) is required iff the model is conditional.
double dsm_loss(const ScoreModel& m, const Dataset& batch, double t, std::span<const Field> eps,
                const Dataset* conds = nullptr);

}  // namespace dcsr
