#include "dcsr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "dcsr/checkpoint.hpp"
#include "dcsr/dataset_io.hpp"
#include "dcsr/error.hpp"
#include "dcsr/parallel.hpp"
#include "dcsr/rng.hpp"

namespace dcsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: [" + where + "] must be a table");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("config: unknown key '" + k + "' in [" + where + "]");
}

template <class T>
T get_or(const json& j, const char* key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << text;
}

json dataset_artifact(const fs::path& dir, const Dataset& d) {
  write_dataset(dir, d);
  return json{{"path", dir.string()}, {"hash", content_hash(d)}, {"count", d.size()}, {"resolution", d.resolution()}};
}

std::vector<double> quantiles(std::vector<double> v) {
  if (v.empty()) return {};
  std::sort(v.begin(), v.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.0), at(0.25), at(0.5), at(0.75), at(1.0)};
}

}  // namespace

void to_json(json& j, const ModelSource& m) {
  j = json{{"checkpoint", m.checkpoint.string()}, {"train", m.train},        {"reuse", m.reuse},
           {"sigma_base", m.sigma_base},          {"train_cfg", m.train_cfg}, {"arch", m.arch}};
}

ModelSource model_source_from_json(const json& j, const ModelSource& base) {
  ModelSource m = base;
  m.checkpoint = get_or<std::string>(j, "checkpoint", base.checkpoint.string());
  m.train = get_or<bool>(j, "train", base.train);
  m.reuse = get_or<bool>(j, "reuse", base.reuse);
  m.sigma_base = get_or<double>(j, "sigma_base", base.sigma_base);
  if (j.contains("train_cfg") || j.contains("training")) {
    json merged = base.train_cfg;
    merged.update(j.contains("train_cfg") ? j.at("train_cfg") : j.at("training"));
    m.train_cfg = merged.get<TrainConfig>();
  }
  if (j.contains("arch")) {
    json merged = base.arch;
    merged.update(j.at("arch"));
    m.arch = merged.get<NetArch>();
  }
  return m;
}

ExperimentConfig::ExperimentConfig() {
  correction_model.sigma_base = 25.0;
  correction_model.train_cfg.max_iter = 20000;
  ModelSource sr;
  sr.sigma_base = 50.0;
  sr.train_cfg.max_iter = 30000;
  // SR networks model the residual over the interpolated condition, which is small.
  sr.arch.data_scale = 0.1;
  sr_models = {sr, sr};
}

std::size_t ExperimentConfig::total_factor() const {
  std::size_t f = 1;
  for (auto k : sr_factors) f *= k;
  return f;
}

void ExperimentConfig::validate() const {
  if (sr_factors.empty()) throw ConfigError("config: the cascade needs at least one stage");
  for (auto f : sr_factors)
    if (f < 2) throw ConfigError("config: every cascade factor must be >= 2");
  if (sr_models.size() != sr_factors.size()) throw ConfigError("config: one model per cascade stage");
  const std::size_t n = suite_options.problem.resolution();
  if (suite.empty() && (n % total_factor() != 0 || n / total_factor() < 4))
    throw ConfigError("config: cascade factors do not chain down from resolution " + std::to_string(n));
  if (search_mode != "ipd" && search_mode != "bpd") throw ConfigError("config: search mode must be ipd or bpd");
  if (sr_steps == 0) throw ConfigError("config: sr n_steps must be >= 1");
  if (metrics.empty()) throw ConfigError("config: no evaluation metrics");
  if (bias != "none" && std::find(bias_names().begin(), bias_names().end(), bias) == bias_names().end())
    throw ConfigError("config: unknown bias '" + bias + "'");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, {"seed", "output", "threads", "data", "correction", "sr", "evaluation"}, "top level");
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.output = get_or<std::string>(j, "output", c.output.string());
  c.threads = get_or<std::size_t>(j, "threads", c.threads);

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, {"suite", "n_train", "n_test", "bias", "n_eval", "noise_magnitude", "problem"}, "data");
    c.suite = get_or<std::string>(d, "suite", "");
    c.suite_options.n_train = get_or(d, "n_train", c.suite_options.n_train);
    c.suite_options.n_test = get_or(d, "n_test", c.suite_options.n_test);
    c.suite_options.noise_magnitude = get_or(d, "noise_magnitude", c.suite_options.noise_magnitude);
    c.bias = get_or(d, "bias", c.bias);
    c.n_eval = get_or(d, "n_eval", c.n_eval);
    if (d.contains("problem")) c.suite_options.problem = d.at("problem").get<AdvectionProblem>();
  }
  if (j.contains("correction")) {
    const json& d = j.at("correction");
    check_keys(d, {"checkpoint", "train", "reuse", "sigma_base", "training", "arch", "T_e", "N_t1", "N_t2", "c1",
                   "c2", "metric", "repeats", "mode", "ode"},
               "correction");
    c.correction_model = model_source_from_json(d, c.correction_model);
    json s = c.search;
    for (const char* k : {"T_e", "N_t1", "N_t2", "c1", "c2", "metric", "repeats"})
      if (d.contains(k)) s[k] = d.at(k);
    c.search = s.get<SearchConfig>();
    c.search_mode = get_or(d, "mode", c.search_mode);
    if (d.contains("ode")) c.ode = d.at("ode").get<OdeTolerances>();
  }
  if (j.contains("sr")) {
    const json& d = j.at("sr");
    check_keys(d, {"factors", "n_steps", "denoise_final", "checkpoints", "train", "reuse", "sigma_base", "training",
                   "arch"},
               "sr");
    c.sr_factors = get_or(d, "factors", c.sr_factors);
    c.sr_steps = get_or(d, "n_steps", c.sr_steps);
    c.sr_denoise_final = get_or(d, "denoise_final", c.sr_denoise_final);
    const auto ckpts = get_or(d, "checkpoints", std::vector<std::string>{});
    if (!ckpts.empty() && ckpts.size() != c.sr_factors.size())
      throw ConfigError("config: sr.checkpoints needs one entry per cascade stage");
    json shared = d;
    shared.erase("factors");
    shared.erase("n_steps");
    shared.erase("denoise_final");
    shared.erase("checkpoints");
    const ModelSource base = model_source_from_json(shared, c.sr_models.front());
    c.sr_models.assign(c.sr_factors.size(), base);
    for (std::size_t k = 0; k < ckpts.size(); ++k) c.sr_models[k].checkpoint = ckpts[k];
  }
  if (j.contains("evaluation")) {
    const json& d = j.at("evaluation");
    check_keys(d, {"metrics"}, "evaluation");
    c.metrics.clear();
    for (const auto& name : get_or(d, "metrics", std::vector<std::string>{})) c.metrics.push_back(metric_from_string(name));
  }
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  std::vector<std::string> metric_list;
  for (auto m : metrics) metric_list.push_back(dcsr::to_string(m));
  json sr = json::array();
  for (const auto& m : sr_models) sr.push_back(m);
  return json{{"seed", seed},
              {"output", output.string()},
              {"threads", threads},
              {"data",
               {{"suite", suite.string()},
                {"n_train", suite_options.n_train},
                {"n_test", suite_options.n_test},
                {"noise_magnitude", suite_options.noise_magnitude},
                {"problem", suite_options.problem},
                {"bias", bias},
                {"n_eval", n_eval}}},
              {"correction", {{"model", correction_model}, {"search", search}, {"mode", search_mode}, {"ode", ode}}},
              {"sr", {{"factors", sr_factors}, {"n_steps", sr_steps}, {"denoise_final", sr_denoise_final}, {"models", sr}}},
              {"evaluation", {{"metrics", metric_list}}}};
}

json RunReport::to_json() const {
  json stage_list = json::array();
  for (const auto& s : stages) stage_list.push_back({{"name", s.name}, {"seconds", s.seconds}, {"artifacts", s.artifacts}});
  json m = json::object();
  for (const auto& [k, v] : metrics) m[k] = v.to_json();
  json j{{"config", config},
         {"input_hashes", input_hashes},
         {"stages", stage_list},
         {"metrics", m},
         {"correction_failures", correction_failures}};
  if (search) {
    j["search"] = search->summary();
    json grid = json::array();
    for (const auto& c : search->grid)
      grid.push_back({c.t1, c.t2, std::isfinite(c.value) ? json(c.value) : json(nullptr)});
    j["search"]["grid"] = grid;
  }
  if (!failed_stage.empty()) {
    j["failed_stage"] = failed_stage;
    j["error"] = error;
  }
  return j;
}

std::shared_ptr<const ScoreNet> obtain_network(const ModelSource& src, const fs::path& default_path,
                                               const std::function<TrainResult()>& trainer, json* record) {
  const fs::path path = src.checkpoint.empty() ? default_path : src.checkpoint;
  if (!src.train || (src.reuse && fs::exists(path))) {
    if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path.string() + " (training disabled)");
    CheckpointInfo info;
    auto net = load_checkpoint(path, &info);
    if (record) *record = {{"checkpoint", path.string()}, {"source", "loaded"}, {"iteration", info.iteration}};
    return net;
  }
  TrainResult r = trainer();
  save_checkpoint(path, *r.net, {src.train_cfg.seed, r.log.size()});
  if (record) {
    const std::size_t tail = std::min<std::size_t>(100, r.log.size());
    double last = 0.0;
    for (std::size_t i = r.log.size() - tail; i < r.log.size(); ++i) last += r.log[i].loss;
    *record = {{"checkpoint", path.string()},
               {"source", "trained"},
               {"iterations", r.log.size()},
               {"final_loss_mean100", last / static_cast<double>(tail)}};
  }
  return r.net;
}

std::vector<Dataset> cascade_superres(const Dataset& lr, const std::vector<ScoreModel>& stages, std::size_t n_steps,
                                      std::uint64_t seed, std::size_t threads, bool denoise_final) {
  if (stages.empty()) throw std::invalid_argument("cascade_superres: no stages");
  std::vector<Dataset> outputs;
  const Dataset* current = &lr;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const ScoreModel& m = stages[k];
    if (!m.conditional()) throw std::invalid_argument("cascade_superres: stage models must be conditional");
    const std::size_t n_out = current->resolution() * m.cond_factor();
    if (const auto* net = m.net(); net && net->arch().resolution != n_out)
      throw std::invalid_argument("cascade_superres: stage " + std::to_string(k + 1) + " does not chain from resolution " +
                                  std::to_string(current->resolution()));
    const std::size_t count = current->size();
    std::vector<Field> out(count);
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads == 0 ? 1 : threads, count));
    const std::size_t chunk = (count + workers - 1) / workers;
    parallel_for(workers, workers, [&](std::size_t w) {
      const std::size_t begin = w * chunk, end = std::min(count, begin + chunk);
      if (begin >= end) return;
      std::vector<Rng> rngs;
      rngs.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) rngs.emplace_back(derive_seed(seed, {k, i}));
      const std::span<const Field> conds(current->fields().data() + begin, end - begin);
      auto res = em_sample_cond_batch(m, conds, n_out, n_steps, rngs, denoise_final);
      for (std::size_t i = begin; i < end; ++i) out[i] = std::move(res[i - begin]);
    });
    Provenance tag = current->tag();
    tag.extra["superres_stage"] = k + 1;
    outputs.emplace_back(std::move(out), std::move(tag));
    current = &outputs.back();
  }
  return outputs;
}

MetricReport evaluate(const Dataset& pred, const Dataset& ref, const std::vector<Metric>& metrics,
                      const Dataset* lflr) {
  if (pred.resolution() != ref.resolution())
    throw std::invalid_argument("evaluate: prediction resolution " + std::to_string(pred.resolution()) +
                                " differs from reference resolution " + std::to_string(ref.resolution()));
  MetricReport rep;
  auto score = [&](const Dataset& p, const std::string& prefix) {
    for (Metric m : metrics) {
      const std::string name = prefix + to_string(m);
      if (m == Metric::TVD || m == Metric::RMSE) {
        if (p.size() != ref.size()) throw std::invalid_argument("evaluate: paired metrics need equal sizes");
        std::vector<Field> a, b;
        std::vector<std::size_t> skipped;
        for (std::size_t i = 0; i < ref.size(); ++i) {
          double norm = 0.0;
          for (double v : ref[i].values()) norm += std::abs(v);
          if (norm > 0.0) {
            a.push_back(p[i]);
            b.push_back(ref[i]);
          } else {
            skipped.push_back(i);
          }
        }
        if (!skipped.empty()) rep.notes["skipped_zero_reference"] = skipped;
        if (a.empty()) throw std::invalid_argument("evaluate: every reference sample has zero norm");
        std::vector<double> per;
        const Dataset da(std::move(a)), db(std::move(b));
        rep.values[name] = m == Metric::TVD ? tvd(da, db, &per) : rmse(da, db, &per);
        rep.per_sample[name] = std::move(per);
      } else if (m == Metric::MELRu || m == Metric::MELRw) {
        MelrDetail detail;
        rep.values[name] = melr(p, ref, m == Metric::MELRw, &detail);
        if (!detail.excluded.empty()) rep.notes[name + ".excluded_bins"] = detail.excluded;
      } else {
        rep.values[name] = compute_metric(m, p, ref);
      }
    }
  };
  score(pred, "");
  if (lflr) {
    if (ref.resolution() % lflr->resolution() != 0)
      throw std::invalid_argument("evaluate: LFLR resolution does not divide the reference resolution");
    const std::size_t f = ref.resolution() / lflr->resolution();
    score(f == 1 ? *lflr : prolong(*lflr, f), "lflr_interp.");
  }
  return rep;
}

RunReport run_dcsr(const ExperimentConfig& cfg, const LogFn& log) {
  cfg.validate();
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  RunReport rep;
  rep.config = cfg.to_json();
  const fs::path out = cfg.output;
  fs::create_directories(out);
  const fs::path report_file = out / "report.json";

  auto run_stage = [&](const std::string& name, auto&& body) {
    say("[" + name + "]");
    StageRecord rec;
    rec.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    auto fail = [&](StageFailure::Cause cause, const std::string& what) {
      rep.failed_stage = name;
      rep.error = what;
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rep.stages.push_back(rec);
      write_text(report_file, rep.to_json().dump(2));
      throw StageFailure(name, cause, what, rep);
    };
    try {
      body(rec.artifacts);
    } catch (const ConfigError& e) {
      fail(StageFailure::Cause::Config, e.what());
    } catch (const NumericError& e) {
      fail(StageFailure::Cause::Numeric, e.what());
    } catch (const std::exception& e) {
      fail(StageFailure::Cause::Other, e.what());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.stages.push_back(std::move(rec));
  };

  const std::size_t F = cfg.total_factor();
  AdvectionSuite suite;
  Dataset hf_test, lf, hflr_train, hflr_test, lflr;
  run_stage("data", [&](json& art) {
    if (cfg.suite.empty()) {
      SuiteOptions opts = cfg.suite_options;
      opts.seed = derive_seed(cfg.seed, {kSuiteStream});
      opts.threads = cfg.threads;
      suite = build_advection_suite(opts);
      write_suite(out / "suite", suite);
      art["suite"] = (out / "suite").string();
    } else {
      suite = read_suite(cfg.suite);
      art["suite"] = cfg.suite.string();
    }
    const std::size_t n = suite.hf_test.resolution();
    if (n % F != 0 || n / F < 4)
      throw ConfigError("cascade factors do not chain down from resolution " + std::to_string(n));
    const std::size_t count = cfg.n_eval == 0 ? suite.hf_test.size() : cfg.n_eval;
    hf_test = suite.hf_test.head(count);
    lf = cfg.bias == "none" ? hf_test : suite.lf_test.at(cfg.bias).head(count);
    hflr_train = restrict(suite.hf_train, F);
    hflr_test = restrict(hf_test, F);
    lflr = restrict(lf, F);
    rep.input_hashes = {{"hf_train", content_hash(suite.hf_train)}, {"hf_test", content_hash(hf_test)},
                        {"lf", content_hash(lf)}};
    art["lflr"] = dataset_artifact(out / "lflr", lflr);
  });

  std::shared_ptr<const ScoreNet> corr_net;
  std::vector<ScoreModel> sr_models;
  run_stage("train", [&](json& art) {
    ModelSource src = cfg.correction_model;
    if (src.train_cfg.seed == 0) src.train_cfg.seed = derive_seed(cfg.seed, {kCorrectionTrainStream});
    json rec;
    corr_net = obtain_network(
        src, out / "models" / "correction.ckpt",
        [&] {
          say("  training correction model at resolution " + std::to_string(hflr_train.resolution()));
          return train_uncond(hflr_train, src.train_cfg, src.arch, NoiseSchedule(src.sigma_base));
        },
        &rec);
    if (corr_net->arch().conditional() || corr_net->arch().resolution != hflr_train.resolution())
      throw ConfigError("correction checkpoint does not match resolution " + std::to_string(hflr_train.resolution()));
    art["correction"] = rec;

    const std::size_t n_hf = suite.hf_train.resolution();
    std::size_t low_factor = F;  // HF -> stage input
    for (std::size_t k = 0; k < cfg.sr_factors.size(); ++k) {
      const std::size_t high_factor = low_factor / cfg.sr_factors[k];
      ModelSource s = cfg.sr_models[k];
      if (s.train_cfg.seed == 0) s.train_cfg.seed = derive_seed(cfg.seed, {kSrTrainStream, k});
      json srec;
      auto net = obtain_network(
          s, out / "models" / ("sr_stage" + std::to_string(k + 1) + ".ckpt"),
          [&] {
            const Dataset low = restrict(suite.hf_train, low_factor);
            const Dataset high = high_factor == 1 ? suite.hf_train : restrict(suite.hf_train, high_factor);
            say("  training SR stage " + std::to_string(k + 1) + ": " + std::to_string(low.resolution()) + " -> " +
                std::to_string(high.resolution()));
            return train_cond(low, high, s.train_cfg, s.arch, NoiseSchedule(s.sigma_base));
          },
          &srec);
      if (net->arch().resolution != n_hf / high_factor || net->arch().cond_factor != cfg.sr_factors[k])
        throw ConfigError("SR stage " + std::to_string(k + 1) + " checkpoint does not chain");
      sr_models.push_back(ScoreModel::network(net));
      art["sr_stage" + std::to_string(k + 1)] = srec;
      low_factor = high_factor;
    }
  });

  const ScoreModel corr_model = ScoreModel::network(corr_net);
  run_stage("search", [&](json& art) {
    SearchConfig sc = cfg.search;
    sc.seed = derive_seed(cfg.seed, {kSearchStream});
    sc.threads = cfg.threads;
    rep.search = cfg.search_mode == "ipd" ? select_t1_t2(hflr_train, lflr, corr_model.schedule(), sc)
                                          : select_t(hflr_train, lflr, corr_model.schedule(), sc);
    write_text(out / "search_grid.csv", rep.search->grid_csv());
    write_text(out / "search.json", rep.search->summary().dump(2));
    art["grid_csv"] = (out / "search_grid.csv").string();
    art["summary"] = (out / "search.json").string();
    say("  t1* = " + std::to_string(rep.search->t1_star) + ", t2* = " + std::to_string(rep.search->t2_star));
  });

  Dataset corrected;
  run_stage("correct", [&](json& art) {
    auto res = correct_dataset(lflr, corr_model, rep.search->t1_star, rep.search->t2_star, cfg.ode,
                               derive_seed(cfg.seed, {kCorrectStream}), cfg.threads);
    rep.correction_failures = res.failed;
    corrected = std::move(res.corrected);
    art["corrected"] = dataset_artifact(out / "corrected", corrected);
    art["failures"] = rep.correction_failures;
  });

  std::vector<Dataset> dcsr_out, sr_only;
  Dataset interp;
  run_stage("superres", [&](json& art) {
    const std::uint64_t s = derive_seed(cfg.seed, {kSrSampleStream});
    dcsr_out = cascade_superres(corrected, sr_models, cfg.sr_steps, s, cfg.threads, cfg.sr_denoise_final);
    sr_only = cascade_superres(lflr, sr_models, cfg.sr_steps, s, cfg.threads, cfg.sr_denoise_final);
    for (std::size_t k = 0; k < dcsr_out.size(); ++k) {
      const std::string tag = "stage" + std::to_string(k + 1);
      art["dcsr_" + tag] = dataset_artifact(out / "sr" / "dcsr" / tag, dcsr_out[k]);
      art["lflr_sr_" + tag] = dataset_artifact(out / "sr" / "lflr_sr" / tag, sr_only[k]);
    }
    interp = prolong(lflr, F);
    art["lflr_interp"] = dataset_artifact(out / "lflr_interp", interp);
  });

  run_stage("evaluate", [&](json& art) {
    rep.metrics["lr/lflr"] = evaluate(lflr, hflr_test, cfg.metrics);
    rep.metrics["lr/corrected"] = evaluate(corrected, hflr_test, cfg.metrics);
    std::size_t f = F;
    for (std::size_t k = 0; k + 1 < dcsr_out.size(); ++k) {
      f /= cfg.sr_factors[k];
      rep.metrics["stage" + std::to_string(k + 1) + "/dcsr"] = evaluate(dcsr_out[k], restrict(hf_test, f), cfg.metrics);
    }
    rep.metrics["final/lflr_interp"] = evaluate(interp, hf_test, cfg.metrics);
    rep.metrics["final/lflr_sr"] = evaluate(sr_only.back(), hf_test, cfg.metrics);
    rep.metrics["final/dcsr"] = evaluate(dcsr_out.back(), hf_test, cfg.metrics);
    rep.metrics["final/reference"] = evaluate(hf_test, hf_test, cfg.metrics);

    for (const auto& [block, m] : rep.metrics) {
      std::string file = block;
      std::replace(file.begin(), file.end(), '/', '_');
      write_text(out / "metrics" / (file + ".csv"), m.to_csv());
    }
    art["metrics_dir"] = (out / "metrics").string();

    // Plot series: mean spectra and per-sample TVD quantiles of the final outputs.
    const std::vector<std::pair<std::string, const Dataset*>> finals{
        {"reference", &hf_test}, {"lflr_interp", &interp}, {"lflr_sr", &sr_only.back()}, {"dcsr", &dcsr_out.back()}};
    std::ostringstream spec;
    spec.precision(12);
    spec << "k";
    std::vector<Spectrum> spectra;
    for (const auto& [name, d] : finals) {
      spec << ',' << name;
      spectra.push_back(mean_spectrum(*d));
    }
    spec << '\n';
    for (std::size_t k = 0; k < spectra.front().energies.size(); ++k) {
      spec << k;
      for (const auto& s : spectra) spec << ',' << s.energies[k];
      spec << '\n';
    }
    write_text(out / "spectra.csv", spec.str());
    if (std::find(cfg.metrics.begin(), cfg.metrics.end(), Metric::TVD) != cfg.metrics.end()) {
      std::ostringstream box;
      box.precision(12);
      box << "method,min,q1,median,q3,max\n";
      for (const char* block : {"final/lflr_interp", "final/lflr_sr", "final/dcsr"}) {
        const auto q = quantiles(rep.metrics.at(block).per_sample.at("tvd"));
        box << std::string(block).substr(6);
        for (double v : q) box << ',' << v;
        box << '\n';
      }
      write_text(out / "tvd_quantiles.csv", box.str());
    }
    art["spectra"] = (out / "spectra.csv").string();
  });

  write_text(report_file, rep.to_json().dump(2));
  return rep;
}

}  // namespace dcsr
