#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcsr/grid.hpp"
#include "dcsr/noise.hpp"
#include "dcsr/rng.hpp"
#include "dcsr/score.hpp"

namespace dcsr {

struct OdeTolerances {
  double rtol = 1e-5;
  double atol = 1e-5;
  std::size_t max_steps = 100000;
};

void to_json(nlohmann::json& j, const OdeTolerances& t);
void from_json(const nlohmann::json& j, OdeTolerances& t);

struct OdeStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

/// For scores that are undefined at t = 0, integration stops this close to 0 and
/// the remaining [0, kTerminalTime] interval is covered by one explicit Euler step
/// in the sigma variable, x(0) = x + sigma^2 S(x, t), which is exact for a
/// point-mass score.
inline constexpr double kTerminalTime = 1e-7;

/// x + sigma(t) eps with fresh eps ~ N(0, I).
Field perturb(const Field& x, double t, const NoiseSchedule& sched, Rng& rng);

/// Adaptive Dormand-Prince 5(4) integration of the probability flow ODE
/// dx/dt = -1/2 d[sigma^2]/dt S(x, t) from t_start to t_end.
/// Throws NumericError("ODE step limit") or NumericError("ODE diverged").
Field ode_solve(const Field& x_init, double t_start, double t_end, const ScoreModel& score,
                const OdeTolerances& tol = {}, OdeStats* stats = nullptr);

/// Euler-Maruyama reverse sampling on the uniform grid t_i = i / n_steps from
/// x(1) ~ N(0, sigma^2(1) I) down to t = 0. Throws std::invalid_argument for
/// n_steps == 0, NumericError on a non-finite state.
///
/// The last step adds noise of scale sigma(1 / n_steps). With `denoise_final` it
/// adds none, so the result is the denoised estimate x + sigma^2(1 / n_steps) S.
Field em_sample_uncond(const ScoreModel& score, std::size_t n, std::size_t n_steps, Rng& rng,
                       bool denoise_final = false);

/// Conditional sampler; `cond` must have resolution n / model.cond_factor().
Field em_sample_cond(const ScoreModel& score, const Field& cond, std::size_t n, std::size_t n_steps, Rng& rng,
                     bool denoise_final = false);

/// Batched conditional sampling: sample j uses conds[j] and its own stream rngs[j];
/// all samples share each network evaluation.
std::vector<Field> em_sample_cond_batch(const ScoreModel& score, std::span<const Field> conds, std::size_t n,
                                        std::size_t n_steps, std::span<Rng> rngs, bool denoise_final = false);

/// Batched unconditional sampling, one stream per sample.
std::vector<Field> em_sample_uncond_batch(const ScoreModel& score, std::size_t n, std::size_t n_steps,
                                          std::span<Rng> rngs, bool denoise_final = false);

}  // namespace dcsr
