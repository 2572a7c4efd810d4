#include "dcsr/datagen.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "dcsr/dataset_io.hpp"
#include "dcsr/error.hpp"
#include "dcsr/fft.hpp"
#include "dcsr/parallel.hpp"

namespace dcsr {

std::size_t AdvectionProblem::resolution() const {
  if (!(dx > 0.0 && dx <= 0.25)) throw ConfigError("advection: dx must lie in (0, 0.25]");
  return static_cast<std::size_t>(std::llround(1.0 / dx));
}

void to_json(nlohmann::json& j, const AdvectionProblem& p) {
  j = nlohmann::json{{"velocity", p.velocity}, {"final_time", p.final_time}, {"dx", p.dx}, {"dt", p.dt}};
}

void from_json(const nlohmann::json& j, AdvectionProblem& p) {
  AdvectionProblem d;
  p.velocity = j.value("velocity", d.velocity);
  p.final_time = j.value("final_time", d.final_time);
  p.dx = j.value("dx", d.dx);
  p.dt = j.value("dt", d.dt);
  if (!(p.dt > 0.0) || !(p.final_time >= 0.0)) throw ConfigError("advection: need dt > 0 and T >= 0");
}

namespace {

constexpr double kEdgeTol = 1e-12;

double wrap01(double x) { return x - std::floor(x); }

// Full steps of dt plus a trailing fractional step when T is not a multiple of dt.
std::vector<double> time_steps(const AdvectionProblem& prob) {
  if (!(prob.dt > 0.0)) throw std::invalid_argument("advection: dt must be positive");
  if (!(prob.final_time >= 0.0)) throw std::invalid_argument("advection: final time must be >= 0");
  const double ratio = prob.final_time / prob.dt;
  auto full = static_cast<std::size_t>(std::floor(ratio + 1e-9));
  std::vector<double> steps(full, prob.dt);
  const double rest = prob.final_time - static_cast<double>(full) * prob.dt;
  if (rest > 1e-12 * std::max(1.0, prob.final_time)) steps.push_back(rest);
  return steps;
}

double cfl(const AdvectionProblem& prob, double dt, std::size_t n, double length) {
  const double c = prob.velocity * dt * static_cast<double>(n) / length;
  if (std::abs(c) > 1.0) throw std::invalid_argument("CFL number " + std::to_string(std::abs(c)) + " exceeds 1");
  return c;
}

}  // namespace

double BoxIC::operator()(double x) const {
  double u = 0.0;
  for (const auto& [a, b] : intervals)
    if (x >= a - kEdgeTol && x <= b + kEdgeTol) u += 1.0;
  return u;
}

Field BoxIC::sample(std::size_t n) const {
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = (*this)(static_cast<double>(j) / static_cast<double>(n));
  return Field(std::move(v));
}

BoxIC sample_ic(Rng& rng) {
  std::uniform_int_distribution<int> count(1, 3);
  BoxIC ic;
  const int k = count(rng.engine());
  for (int i = 0; i < k; ++i) {
    double a = 0.0, b = 0.0;
    do {
      a = rng.uniform();
      b = rng.uniform();
    } while (a == b);
    if (a > b) std::swap(a, b);
    ic.intervals.emplace_back(a, b);
  }
  return ic;
}

Field analytic_solution(const BoxIC& ic, const AdvectionProblem& prob, std::size_t n) {
  const double shift = prob.velocity * prob.final_time;
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = ic(wrap01(static_cast<double>(j) / static_cast<double>(n) - shift));
  return Field(std::move(v));
}

Field solve_godunov(const Field& ic, const AdvectionProblem& prob) {
  if (!(prob.velocity > 0.0)) throw std::invalid_argument("Godunov upwinding needs v > 0");
  const std::size_t n = ic.resolution();
  std::vector<double> u(ic.data()), next(n);
  for (double dt : time_steps(prob)) {
    const double c = cfl(prob, dt, n, ic.domain_length());
    for (std::size_t j = 0; j < n; ++j) next[j] = u[j] - c * (u[j] - u[(j + n - 1) % n]);
    u.swap(next);
  }
  return Field(std::move(u), ic.domain_length());
}

Field solve_godunov(const BoxIC& ic, const AdvectionProblem& prob, std::size_t n) {
  return solve_godunov(ic.sample(n), prob);
}

Field solve_lax_wendroff(const Field& ic, const AdvectionProblem& prob) {
  const std::size_t n = ic.resolution();
  std::vector<double> u(ic.data()), next(n);
  for (double dt : time_steps(prob)) {
    const double c = cfl(prob, dt, n, ic.domain_length());
    for (std::size_t j = 0; j < n; ++j) {
      const double left = u[(j + n - 1) % n], right = u[(j + 1) % n];
      next[j] = u[j] - 0.5 * c * (right - left) + 0.5 * c * c * (right - 2.0 * u[j] + left);
    }
    u.swap(next);
  }
  return Field(std::move(u), ic.domain_length());
}

Field solve_lax_wendroff(const BoxIC& ic, const AdvectionProblem& prob, std::size_t n) {
  return solve_lax_wendroff(ic.sample(n), prob);
}

Field solve_spectral(const Field& ic, const AdvectionProblem& prob, std::vector<double>* state_norms) {
  const std::size_t n = ic.resolution();
  const double length = ic.domain_length();
  auto bins = fft::forward(ic.values());
  constexpr double two_pi = 6.283185307179586476925286766559;
  if (state_norms) state_norms->clear();
  for (double dt : time_steps(prob)) {
    for (std::size_t m = 0; m < bins.size(); ++m) {
      const double phase = -two_pi * static_cast<double>(m) * prob.velocity * dt / length;
      bins[m] *= std::polar(1.0, phase);
    }
    if (state_norms) {
      // Parseval over the full Hermitian spectrum.
      double s = 0.0;
      for (std::size_t m = 0; m < bins.size(); ++m) {
        const bool self_conj = m == 0 || 2 * m == n;
        s += (self_conj ? 1.0 : 2.0) * std::norm(bins[m]);
      }
      state_norms->push_back(std::sqrt(s / static_cast<double>(n)));
    }
  }
  return Field(fft::inverse(bins, n), length);
}

Field solve_spectral(const BoxIC& ic, const AdvectionProblem& prob, std::size_t n) {
  return solve_spectral(ic.sample(n), prob);
}

Dataset pollute(const Dataset& clean, const NoiseSpec& spec, std::uint64_t seed) {
  std::vector<Field> out;
  out.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    Rng rng(derive_seed(seed, {i}));
    const Field e = colored_noise(clean.resolution(), spec, rng, clean.domain_length());
    std::vector<double> v(clean[i].data());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += e[j];
    out.emplace_back(std::move(v), clean.domain_length());
  }
  Provenance tag = clean.tag();
  tag.fidelity = "low";
  tag.bias_source = to_string(spec.color);
  tag.seed = seed;
  tag.extra["noise"] = spec;
  return Dataset(std::move(out), std::move(tag));
}

const std::vector<std::string>& bias_names() {
  static const std::vector<std::string> names{"godunov", "lax_wendroff", "spectral", "white", "pink", "brown"};
  return names;
}

AdvectionSuite build_advection_suite(const SuiteOptions& opts) {
  if (opts.n_train == 0 || opts.n_test == 0) throw ConfigError("suite: dataset sizes must be >= 1");
  const AdvectionProblem& prob = opts.problem;
  const std::size_t n = prob.resolution();

  auto draw_ics = [&](std::size_t count, std::uint64_t stream) {
    std::vector<BoxIC> ics(count);
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng(derive_seed(opts.seed, {stream, i}));
      ics[i] = sample_ic(rng);
    }
    return ics;
  };
  const auto train_ics = draw_ics(opts.n_train, 1);
  const auto test_ics = draw_ics(opts.n_test, 2);

  auto solve_all = [&](const std::vector<BoxIC>& ics, auto&& solver) {
    std::vector<Field> out(ics.size());
    parallel_for(ics.size(), opts.threads, [&](std::size_t i) { out[i] = solver(ics[i]); });
    return out;
  };
  auto analytic = [&](const BoxIC& ic) { return analytic_solution(ic, prob, n); };
  const nlohmann::json problem_json = prob;

  AdvectionSuite s;
  s.hf_train = Dataset(solve_all(train_ics, analytic),
                       Provenance{"high", "none", opts.seed, {{"split", "train"}, {"problem", problem_json}}});
  s.hf_test = Dataset(solve_all(test_ics, analytic),
                      Provenance{"high", "none", opts.seed, {{"split", "test"}, {"problem", problem_json}}});

  auto solver_set = [&](const std::string& name, auto&& solver) {
    s.lf_test[name] = Dataset(solve_all(test_ics, solver),
                              Provenance{"low", name, opts.seed, {{"split", "test"}, {"problem", problem_json}}});
  };
  solver_set("godunov", [&](const BoxIC& ic) { return solve_godunov(ic, prob, n); });
  solver_set("lax_wendroff", [&](const BoxIC& ic) { return solve_lax_wendroff(ic, prob, n); });
  solver_set("spectral", [&](const BoxIC& ic) { return solve_spectral(ic, prob, n); });

  for (NoiseColor color : {NoiseColor::White, NoiseColor::Pink, NoiseColor::Brown}) {
    const NoiseSpec spec{color, opts.noise_magnitude};
    Dataset d = pollute(s.hf_test, spec, derive_seed(opts.seed, {3, static_cast<std::uint64_t>(color)}));
    d.tag().extra["split"] = "test";
    s.lf_test[to_string(color)] = std::move(d);
  }
  return s;
}

void write_suite(const std::filesystem::path& dir, const AdvectionSuite& suite) {
  write_dataset(dir / "hf_train", suite.hf_train);
  write_dataset(dir / "hf_test", suite.hf_test);
  for (const auto& [name, d] : suite.lf_test) write_dataset(dir / name, d);
}

AdvectionSuite read_suite(const std::filesystem::path& dir) {
  AdvectionSuite s;
  s.hf_train = read_dataset(dir / "hf_train");
  s.hf_test = read_dataset(dir / "hf_test");
  for (const auto& name : bias_names()) s.lf_test[name] = read_dataset(dir / name);
  return s;
}

}  // namespace dcsr
