#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcsr/grid.hpp"
#include "dcsr/metrics.hpp"
#include "dcsr/noise.hpp"
#include "dcsr/score.hpp"
#include "dcsr/sde.hpp"

namespace dcsr {

struct SearchConfig {
  double t_end = 0.2;  // T_e
  std::size_t n_t1 = 11;
  std::size_t n_t2 = 5;
  double c1 = 1.2;
  double c2 = 3.0;
  Metric metric = Metric::MELRw;
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  /// Throws ConfigError unless 0 < T_e <= 1, 1 < c1 < c2 and repeats >= 1.
  void validate() const;
};

void to_json(nlohmann::json& j, const SearchConfig& c);
void from_json(const nlohmann::json& j, SearchConfig& c);

struct GridCell {
  double t1 = 0.0;
  double t2 = 0.0;
  double value = 0.0;  // +inf when the metric was undefined for this cell
};

struct TimeSearchResult {
  std::string mode;  // "ipd" or "bpd"
  double t1_star = 0.0;
  double t2_star = 0.0;
  double metric_min = 0.0;
  std::vector<GridCell> grid;
  SearchConfig config;

  /// Header "t1,t2,metric", one row per cell in search order.
  std::string grid_csv() const;
  nlohmann::json summary() const;
};

/// Imbalanced search over t1 = p T_e / (N_t1 - 1), t2 = c1 t1 + q (c2 - c1) t1 / (N_t2 - 1)
/// (t2 clamped to 1). Each cell perturbs lf to t1 and hf to t2 and scores
/// metric(lf~, hf~). Throws ConfigError("degenerate t2 grid") when N_t2 < 2.
TimeSearchResult select_t1_t2(const Dataset& hf, const Dataset& lf, const NoiseSchedule& sched,
                              const SearchConfig& cfg);

/// Balanced search over t = p T_e / (N_t1 - 1) with both sets perturbed to t.
/// Throws ConfigError("degenerate t grid") when N_t1 < 2.
TimeSearchResult select_t(const Dataset& hf, const Dataset& lf, const NoiseSchedule& sched, const SearchConfig& cfg);

struct CorrectionResult {
  Dataset corrected;
  /// Indices whose ODE solve failed; those samples are passed through unchanged.
  std::vector<std::size_t> failed;
  std::vector<std::string> failure_messages;
};

/// Per sample i: ode_solve(lf_i + sigma(t1) eps_i, t2, 0) with eps_i drawn from
/// derive_seed(seed, {i}). Throws std::invalid_argument unless 0 <= t1 <= t2 <= 1.
CorrectionResult correct_dataset(const Dataset& lf, const ScoreModel& model, double t1, double t2,
                                 const OdeTolerances& tol, std::uint64_t seed, std::size_t threads = 1);

/// d + 2 sqrt(d log(1/lambda)) + 2 log(1/lambda).
double chi2_tail_constant(std::size_t dim, double lambda);

/// exp(2 L t2) [ ||e||^2 + sigma^2(t2) delta + (sigma^2(t1) + sigma^2(t2)) C_lambda ].
/// Throws std::invalid_argument unless lambda lies in (0, 1).
double theorem1_bound(double e_norm_sq, double delta, double lipschitz, double t1, double t2, double lambda,
                      std::size_t dim, const NoiseSchedule& sched);

/// exp(2 L t2) sigma^2(t2) delta.
double prop1_bound(double delta, double lipschitz, double t2, const NoiseSchedule& sched);

}  // namespace dcsr
