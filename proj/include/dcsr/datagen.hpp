#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcsr/grid.hpp"
#include "dcsr/noise.hpp"
#include "dcsr/rng.hpp"

namespace dcsr {

/// u_t + v u_x = 0 on the periodic unit interval.
struct AdvectionProblem {
  double velocity = 0.1;
  double final_time = 0.25;
  double dx = 0.01;
  double dt = 0.001;

  /// Grid size implied by dx (rounded).
  std::size_t resolution() const;
};

void to_json(nlohmann::json& j, const AdvectionProblem& p);
void from_json(const nlohmann::json& j, AdvectionProblem& p);

/// Sum of indicator functions of closed intervals [a_i, b_i] in [0, 1].
struct BoxIC {
  std::vector<std::pair<double, double>> intervals;

  double operator()(double x) const;
  Field sample(std::size_t n) const;
};

/// K ~ U{1, 2, 3}; each interval from two sorted U[0, 1] draws.
BoxIC sample_ic(Rng& rng);

/// u0((x - vT) mod 1) at the n grid nodes.
Field analytic_solution(const BoxIC& ic, const AdvectionProblem& prob, std::size_t n);

/// First-order upwind. Needs v > 0; throws std::invalid_argument when the CFL number exceeds 1.
Field solve_godunov(const Field& ic, const AdvectionProblem& prob);
Field solve_godunov(const BoxIC& ic, const AdvectionProblem& prob, std::size_t n);

/// Lax-Wendroff. Throws std::invalid_argument when the CFL number exceeds 1.
Field solve_lax_wendroff(const Field& ic, const AdvectionProblem& prob);
Field solve_lax_wendroff(const BoxIC& ic, const AdvectionProblem& prob, std::size_t n);

/// Exact Fourier phase shift per time step. `state_norms`, if given, receives the
/// L2 norm of the spectral state after every step.
Field solve_spectral(const Field& ic, const AdvectionProblem& prob, std::vector<double>* state_norms = nullptr);
Field solve_spectral(const BoxIC& ic, const AdvectionProblem& prob, std::size_t n);

/// Adds colored noise to every sample; sample i draws from derive_seed(seed, {i}).
Dataset pollute(const Dataset& clean, const NoiseSpec& spec, std::uint64_t seed);

/// Names of the six biased test sets, in generation order.
const std::vector<std::string>& bias_names();

struct AdvectionSuite {
  Dataset hf_train;
  Dataset hf_test;
  std::map<std::string, Dataset> lf_test;
};

struct SuiteOptions {
  std::size_t n_train = 2000;
  std::size_t n_test = 100;
  AdvectionProblem problem;
  double noise_magnitude = 0.1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

AdvectionSuite build_advection_suite(const SuiteOptions& opts);

/// Layout: <dir>/hf_train, <dir>/hf_test, <dir>/<bias>/ each a dataset container.
void write_suite(const std::filesystem::path& dir, const AdvectionSuite& suite);
/// Throws ConfigError when a member is missing.
AdvectionSuite read_suite(const std::filesystem::path& dir);

}  // namespace dcsr
