#include "dcsr/correction.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dcsr/error.hpp"
#include "dcsr/parallel.hpp"
#include "dcsr/rng.hpp"

namespace dcsr {

void SearchConfig::validate() const {
  if (!(t_end > 0.0 && t_end <= 1.0)) throw ConfigError("search: T_e must lie in (0, 1]");
  if (!(c1 > 1.0 && c2 > c1)) throw ConfigError("search: need 1 < c1 < c2");
  if (repeats == 0) throw ConfigError("search: repeats must be >= 1");
}

void to_json(nlohmann::json& j, const SearchConfig& c) {
  j = nlohmann::json{{"T_e", c.t_end},   {"N_t1", c.n_t1}, {"N_t2", c.n_t2},
                     {"c1", c.c1},       {"c2", c.c2},     {"metric", to_string(c.metric)},
                     {"repeats", c.repeats}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SearchConfig& c) {
  SearchConfig d;
  c.t_end = j.value("T_e", d.t_end);
  c.n_t1 = j.value("N_t1", d.n_t1);
  c.n_t2 = j.value("N_t2", d.n_t2);
  c.c1 = j.value("c1", d.c1);
  c.c2 = j.value("c2", d.c2);
  c.metric = metric_from_string(j.value("metric", to_string(d.metric)));
  c.repeats = j.value("repeats", d.repeats);
  c.seed = j.value("seed", d.seed);
  c.threads = j.value("threads", d.threads);
}

std::string TimeSearchResult::grid_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "t1,t2,metric\n";
  for (const auto& c : grid) os << c.t1 << ',' << c.t2 << ',' << c.value << '\n';
  return os.str();
}

nlohmann::json TimeSearchResult::summary() const {
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return nlohmann::json{{"mode", mode},
                        {"t1_star", t1_star},
                        {"t2_star", t2_star},
                        {"metric", finite_or_null(metric_min)},
                        {"metric_name", to_string(config.metric)},
                        {"config", config}};
}

namespace {

enum Side : std::uint64_t { kLowSide = 0, kHighSide = 1 };

Dataset perturb_dataset(const Dataset& d, double t, const NoiseSchedule& sched, std::uint64_t seed,
                        std::initializer_list<std::uint64_t> cell, Side side) {
  if (t == 0.0) return d;
  std::vector<Field> out;
  out.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<std::uint64_t> path(cell);
    path.push_back(side);
    path.push_back(i);
    std::uint64_t s = seed;
    for (auto p : path) s = derive_seed(s, {p});
    Rng rng(s);
    out.push_back(perturb(d[i], t, sched, rng));
  }
  return Dataset(std::move(out), d.tag());
}

double score_cell(const Dataset& hf, const Dataset& lf, const NoiseSchedule& sched, const SearchConfig& cfg,
                  double t1, double t2, std::uint64_t p, std::uint64_t q) {
  double total = 0.0;
  try {
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      const Dataset lt = perturb_dataset(lf, t1, sched, cfg.seed, {p, q, r}, kLowSide);
      const Dataset ht = perturb_dataset(hf, t2, sched, cfg.seed, {p, q, r}, kHighSide);
      const double v = compute_metric(cfg.metric, lt, ht);
      if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
      total += v;
    }
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::infinity();
  } catch (const std::domain_error&) {
    return std::numeric_limits<double>::infinity();
  }
  return total / static_cast<double>(cfg.repeats);
}

void check_pair(const Dataset& hf, const Dataset& lf) {
  if (hf.empty() || lf.empty()) throw ConfigError("search: empty dataset");
  if (hf.resolution() != lf.resolution()) throw ConfigError("search: hf and lf resolutions differ");
}

void pick_min(TimeSearchResult& r) {
  r.metric_min = std::numeric_limits<double>::infinity();
  r.t1_star = r.t2_star = 0.0;
  for (const auto& c : r.grid)
    if (c.value < r.metric_min) {
      r.metric_min = c.value;
      r.t1_star = c.t1;
      r.t2_star = c.t2;
    }
  if (!std::isfinite(r.metric_min)) throw NumericError("search: metric undefined on every grid cell");
}

}  // namespace

TimeSearchResult select_t1_t2(const Dataset& hf, const Dataset& lf, const NoiseSchedule& sched,
                              const SearchConfig& cfg) {
  cfg.validate();
  if (cfg.n_t1 < 2) throw ConfigError("degenerate t1 grid");
  if (cfg.n_t2 < 2) throw ConfigError("degenerate t2 grid");
  check_pair(hf, lf);
  TimeSearchResult r;
  r.mode = "ipd";
  r.config = cfg;
  r.grid.resize(cfg.n_t1 * cfg.n_t2);
  for (std::size_t p = 0; p < cfg.n_t1; ++p) {
    const double t1 = static_cast<double>(p) * cfg.t_end / static_cast<double>(cfg.n_t1 - 1);
    for (std::size_t q = 0; q < cfg.n_t2; ++q) {
      const double t2 = cfg.c1 * t1 + static_cast<double>(q) * (cfg.c2 - cfg.c1) / static_cast<double>(cfg.n_t2 - 1) * t1;
      r.grid[p * cfg.n_t2 + q] = {t1, std::min(t2, 1.0), 0.0};
    }
  }
  parallel_for(r.grid.size(), cfg.threads, [&](std::size_t idx) {
    auto& c = r.grid[idx];
    c.value = score_cell(hf, lf, sched, cfg, c.t1, c.t2, idx / cfg.n_t2, idx % cfg.n_t2);
  });
  pick_min(r);
  return r;
}

TimeSearchResult select_t(const Dataset& hf, const Dataset& lf, const NoiseSchedule& sched, const SearchConfig& cfg) {
  if (!(cfg.t_end > 0.0 && cfg.t_end <= 1.0)) throw ConfigError("search: T_e must lie in (0, 1]");
  if (cfg.repeats == 0) throw ConfigError("search: repeats must be >= 1");
  if (cfg.n_t1 < 2) throw ConfigError("degenerate t grid");
  check_pair(hf, lf);
  TimeSearchResult r;
  r.mode = "bpd";
  r.config = cfg;
  r.grid.resize(cfg.n_t1);
  for (std::size_t p = 0; p < cfg.n_t1; ++p) {
    const double t = static_cast<double>(p) * cfg.t_end / static_cast<double>(cfg.n_t1 - 1);
    r.grid[p] = {t, t, 0.0};
  }
  parallel_for(r.grid.size(), cfg.threads, [&](std::size_t p) {
    auto& c = r.grid[p];
    c.value = score_cell(hf, lf, sched, cfg, c.t1, c.t2, p, 0);
  });
  pick_min(r);
  return r;
}

CorrectionResult correct_dataset(const Dataset& lf, const ScoreModel& model, double t1, double t2,
                                 const OdeTolerances& tol, std::uint64_t seed, std::size_t threads) {
  if (!(t1 >= 0.0 && t1 <= t2 && t2 <= 1.0)) throw std::invalid_argument("correct_dataset: need 0 <= t1 <= t2 <= 1");
  if (model.conditional()) throw std::invalid_argument("correct_dataset: correction needs an unconditional model");
  if (lf.empty()) throw std::invalid_argument("correct_dataset: empty dataset");
  if (t1 == 0.0 && t2 == 0.0) return {lf, {}, {}};

  std::vector<Field> out(lf.fields());
  std::vector<std::string> errors(lf.size());
  parallel_for(lf.size(), threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, {i}));
    const Field start = perturb(lf[i], t1, model.schedule(), rng);
    try {
      out[i] = ode_solve(start, t2, 0.0, model, tol);
    } catch (const NumericError& e) {
      errors[i] = e.what();
    }
  });
  CorrectionResult res;
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) {
      res.failed.push_back(i);
      res.failure_messages.push_back(errors[i]);
    }
  Provenance tag = lf.tag();
  tag.extra["correction"] = {{"t1", t1}, {"t2", t2}, {"seed", seed}, {"failed", res.failed}};
  res.corrected = Dataset(std::move(out), std::move(tag));
  return res;
}

double chi2_tail_constant(std::size_t dim, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("confidence parameter lambda must lie in (0, 1)");
  const double d = static_cast<double>(dim);
  const double l = std::log(1.0 / lambda);
  return d + 2.0 * std::sqrt(d * l) + 2.0 * l;
}

double theorem1_bound(double e_norm_sq, double delta, double lipschitz, double t1, double t2, double lambda,
                      std::size_t dim, const NoiseSchedule& sched) {
  const double c = chi2_tail_constant(dim, lambda);
  if (!std::isfinite(e_norm_sq) || !std::isfinite(delta) || !std::isfinite(lipschitz))
    throw std::invalid_argument("theorem1_bound: non-finite input");
  const double v1 = sched.sigma_sq(t1), v2 = sched.sigma_sq(t2);
  return std::exp(2.0 * lipschitz * t2) * (e_norm_sq + v2 * delta + (v1 + v2) * c);
}

double prop1_bound(double delta, double lipschitz, double t2, const NoiseSchedule& sched) {
  if (!std::isfinite(delta) || !std::isfinite(lipschitz)) throw std::invalid_argument("prop1_bound: non-finite input");
  return std::exp(2.0 * lipschitz * t2) * sched.sigma_sq(t2) * delta;
}

}  // namespace dcsr
