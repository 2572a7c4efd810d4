// Command line front end: datagen, train, search, correct, superres, pipeline, evaluate.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcsr/checkpoint.hpp"
#include "dcsr/config.hpp"
#include "dcsr/dataset_io.hpp"
#include "dcsr/error.hpp"
#include "dcsr/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dcsr;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "TOML or JSON experiment config");
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--out", c.out, "output directory (overrides the config)");
  app->add_option("--threads", c.threads, "worker threads");
}

ExperimentConfig load(const Common& c) {
  json j = c.config.empty() ? json::object() : load_config_file(c.config);
  if (c.seed) j["seed"] = *c.seed;
  if (!c.out.empty()) j["output"] = c.out;
  if (c.threads) j["threads"] = *c.threads;
  return ExperimentConfig::from_json(j);
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << text;
}

AdvectionSuite obtain_suite(const ExperimentConfig& cfg) {
  if (!cfg.suite.empty()) return read_suite(cfg.suite);
  SuiteOptions opts = cfg.suite_options;
  opts.seed = derive_seed(cfg.seed, {kSuiteStream});
  opts.threads = cfg.threads;
  return build_advection_suite(opts);
}

const Dataset& biased(const AdvectionSuite& s, const std::string& bias) {
  return bias == "none" ? s.hf_test : s.lf_test.at(bias);
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

void progress_every(std::size_t every, std::size_t it, double loss) {
  if ((it + 1) % every == 0) std::cerr << "  iter " << it + 1 << "  loss " << loss << '\n';
}

int cmd_datagen(const Common& c) {
  const auto cfg = load(c);
  const auto suite = obtain_suite(cfg);
  write_suite(cfg.output, suite);
  std::cout << "wrote suite to " << cfg.output.string() << " (" << suite.hf_train.size() << " train, "
            << suite.hf_test.size() << " test)\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& kind, std::size_t stage) {
  const auto cfg = load(c);
  const auto suite = obtain_suite(cfg);
  const std::size_t F = cfg.total_factor();
  auto progress = [](std::size_t it, double loss) { progress_every(1000, it, loss); };
  fs::create_directories(cfg.output);
  if (kind == "uncond") {
    ModelSource src = cfg.correction_model;
    if (src.train_cfg.seed == 0) src.train_cfg.seed = derive_seed(cfg.seed, {kCorrectionTrainStream});
    const Dataset data = restrict(suite.hf_train, F);
    log_line("training correction model at resolution " + std::to_string(data.resolution()));
    const auto res = train_uncond(data, src.train_cfg, src.arch, NoiseSchedule(src.sigma_base), progress);
    const fs::path file = cfg.output / "correction.ckpt";
    save_checkpoint(file, *res.net, {src.train_cfg.seed, src.train_cfg.max_iter});
    std::cout << "wrote " << file.string() << '\n';
    return 0;
  }
  std::size_t low_factor = F;
  for (std::size_t k = 0; k < cfg.sr_factors.size(); ++k) {
    const std::size_t high_factor = low_factor / cfg.sr_factors[k];
    if (stage == 0 || stage == k + 1) {
      ModelSource s = cfg.sr_models[k];
      if (s.train_cfg.seed == 0) s.train_cfg.seed = derive_seed(cfg.seed, {kSrTrainStream, k});
      const Dataset low = restrict(suite.hf_train, low_factor);
      const Dataset high = high_factor == 1 ? suite.hf_train : restrict(suite.hf_train, high_factor);
      log_line("training SR stage " + std::to_string(k + 1) + ": " + std::to_string(low.resolution()) + " -> " +
               std::to_string(high.resolution()));
      const auto res = train_cond(low, high, s.train_cfg, s.arch, NoiseSchedule(s.sigma_base), progress);
      const fs::path file = cfg.output / ("sr_stage" + std::to_string(k + 1) + ".ckpt");
      save_checkpoint(file, *res.net, {s.train_cfg.seed, s.train_cfg.max_iter});
      std::cout << "wrote " << file.string() << '\n';
    }
    low_factor = high_factor;
  }
  if (stage > cfg.sr_factors.size()) throw ConfigError("no cascade stage " + std::to_string(stage));
  return 0;
}

int cmd_search(const Common& c, std::string mode) {
  const auto cfg = load(c);
  if (mode.empty()) mode = cfg.search_mode;
  const auto suite = obtain_suite(cfg);
  const std::size_t F = cfg.total_factor();
  const Dataset hflr = restrict(suite.hf_train, F);
  Dataset lf = biased(suite, cfg.bias);
  if (cfg.n_eval > 0) lf = lf.head(cfg.n_eval);
  const Dataset lflr = restrict(lf, F);
  SearchConfig sc = cfg.search;
  sc.seed = derive_seed(cfg.seed, {kSearchStream});
  sc.threads = cfg.threads;
  const NoiseSchedule sched(cfg.correction_model.sigma_base);
  const auto res = mode == "ipd" ? select_t1_t2(hflr, lflr, sched, sc) : select_t(hflr, lflr, sched, sc);
  write_text(cfg.output / "search_grid.csv", res.grid_csv());
  write_text(cfg.output / "search.json", res.summary().dump(2));
  std::cout << "t1* = " << res.t1_star << "  t2* = " << res.t2_star << "  " << to_string(sc.metric) << " = "
            << res.metric_min << '\n';
  return 0;
}

int cmd_correct(const Common& c, const std::string& input, const std::string& ckpt, std::optional<double> t1,
                std::optional<double> t2, const std::string& search) {
  const auto cfg = load(c);
  if (!search.empty()) {
    std::ifstream in(search);
    if (!in) throw ConfigError("cannot read " + search);
    json s;
    try {
      s = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("bad search summary: " + std::string(e.what()));
    }
    if (!t1) t1 = s.at("t1_star").get<double>();
    if (!t2) t2 = s.at("t2_star").get<double>();
  }
  if (!t1 || !t2) throw ConfigError("correct needs --t1 and --t2 or --search");
  const Dataset lf = read_dataset(input);
  const auto model = ScoreModel::network(load_checkpoint(ckpt));
  const auto res = correct_dataset(lf, model, *t1, *t2, cfg.ode, derive_seed(cfg.seed, {kCorrectStream}), cfg.threads);
  write_dataset(cfg.output, res.corrected);
  for (std::size_t k = 0; k < res.failed.size(); ++k)
    std::cerr << "sample " << res.failed[k] << " passed through: " << res.failure_messages[k] << '\n';
  std::cout << "wrote " << res.corrected.size() << " corrected samples to " << cfg.output.string() << '\n';
  return res.failed.empty() ? 0 : 3;
}

int cmd_superres(const Common& c, const std::string& input, const std::vector<std::string>& ckpts,
                 std::optional<std::size_t> steps) {
  const auto cfg = load(c);
  if (ckpts.empty()) throw ConfigError("superres needs at least one --checkpoint");
  std::vector<ScoreModel> stages;
  for (const auto& f : ckpts) stages.push_back(ScoreModel::network(load_checkpoint(f)));
  const Dataset lr = read_dataset(input);
  const auto outs = cascade_superres(lr, stages, steps.value_or(cfg.sr_steps),
                                     derive_seed(cfg.seed, {kSrSampleStream}), cfg.threads, cfg.sr_denoise_final);
  for (std::size_t k = 0; k < outs.size(); ++k)
    write_dataset(cfg.output / ("stage" + std::to_string(k + 1)), outs[k]);
  std::cout << "wrote " << outs.size() << " stages, final resolution " << outs.back().resolution() << '\n';
  return 0;
}

int cmd_pipeline(const Common& c) {
  const auto cfg = load(c);
  const auto rep = run_dcsr(cfg, log_line);
  for (const char* block : {"final/lflr_interp", "final/lflr_sr", "final/dcsr"}) {
    const auto it = rep.metrics.find(block);
    if (it == rep.metrics.end()) continue;
    std::cout << block;
    for (const auto& [name, v] : it->second.values)
      if (name.find('.') == std::string::npos) std::cout << "  " << name << '=' << v;
    std::cout << '\n';
  }
  std::cout << "report: " << (cfg.output / "report.json").string() << '\n';
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& pred, const std::string& ref, const std::string& lflr) {
  const auto cfg = load(c);
  const Dataset p = read_dataset(pred), r = read_dataset(ref);
  std::optional<Dataset> l;
  if (!lflr.empty()) l = read_dataset(lflr);
  const auto rep = evaluate(p, r, cfg.metrics, l ? &*l : nullptr);
  write_text(cfg.output / "metrics.csv", rep.to_csv());
  write_text(cfg.output / "metrics.json", rep.to_json().dump(2));
  std::cout << rep.to_csv();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-based correction and super-resolution of 1D fields"};
  app.require_subcommand(1);
  Common common;

  auto* datagen = app.add_subcommand("datagen", "build the advection data suite");
  add_common(datagen, common);

  auto* train = app.add_subcommand("train", "train the correction model or the cascade models");
  add_common(train, common);
  std::string kind;
  std::size_t stage = 0;
  train->add_option("--kind", kind, "uncond (correction) or cond (cascade)")
      ->required()
      ->check(CLI::IsMember({"uncond", "cond"}));
  train->add_option("--stage", stage, "train only this cascade stage (1-based)");

  auto* search = app.add_subcommand("search", "select the perturbation and denoising times");
  add_common(search, common);
  std::string mode;
  search->add_option("--mode", mode, "ipd or bpd")->check(CLI::IsMember({"ipd", "bpd"}));

  auto* correct = app.add_subcommand("correct", "correct a low-fidelity dataset");
  add_common(correct, common);
  std::string input, ckpt, search_file;
  std::optional<double> t1, t2;
  correct->add_option("--input", input, "dataset directory")->required();
  correct->add_option("--checkpoint", ckpt, "unconditional checkpoint")->required();
  correct->add_option("--t1", t1, "perturbation time");
  correct->add_option("--t2", t2, "denoising time");
  correct->add_option("--search", search_file, "search.json written by the search subcommand");

  auto* superres = app.add_subcommand("superres", "run the conditional cascade");
  add_common(superres, common);
  std::string sr_input;
  std::vector<std::string> sr_ckpts;
  std::optional<std::size_t> steps;
  superres->add_option("--input", sr_input, "low-resolution dataset directory")->required();
  superres->add_option("--checkpoint", sr_ckpts, "stage checkpoints, coarse to fine")->required();
  superres->add_option("--steps", steps, "Euler-Maruyama steps per stage");

  auto* pipeline = app.add_subcommand("pipeline", "full correction and super-resolution run");
  add_common(pipeline, common);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "score a dataset against a reference");
  add_common(evaluate_cmd, common);
  std::string pred, ref, lflr;
  evaluate_cmd->add_option("--pred", pred, "predicted dataset directory")->required();
  evaluate_cmd->add_option("--ref", ref, "reference dataset directory")->required();
  evaluate_cmd->add_option("--lflr", lflr, "raw low-resolution data for the interpolation baseline");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (datagen->parsed()) return cmd_datagen(common);
    if (train->parsed()) return cmd_train(common, kind, stage);
    if (search->parsed()) return cmd_search(common, mode);
    if (correct->parsed()) return cmd_correct(common, input, ckpt, t1, t2, search_file);
    if (superres->parsed()) return cmd_superres(common, sr_input, sr_ckpts, steps);
    if (pipeline->parsed()) return cmd_pipeline(common);
    if (evaluate_cmd->parsed()) return cmd_evaluate(common, pred, ref, lflr);
  } catch (const StageFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.cause() == StageFailure::Cause::Config ? 2 : e.cause() == StageFailure::Cause::Numeric ? 3 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
