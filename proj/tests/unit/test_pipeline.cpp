#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dcsr/config.hpp"
#include "dcsr/dataset_io.hpp"
#include "dcsr/error.hpp"
#include "dcsr/pipeline.hpp"

using namespace dcsr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tiny_config(const fs::path& out) {
  const json arch{{"channels", 4}, {"embed_dim", 4}, {"kernel", 3}, {"dilations", {1}}};
  const json training{{"max_iter", 20}, {"batch_size", 8}};
  return json{{"seed", 17},
              {"output", out.string()},
              {"data", {{"n_train", 40}, {"n_test", 6}, {"bias", "white"}}},
              {"correction", {{"arch", arch}, {"training", training}, {"N_t1", 3}, {"N_t2", 2}, {"ode", {{"rtol", 1e-3}, {"atol", 1e-3}}}}},
              {"sr", {{"arch", arch}, {"training", training}, {"n_steps", 20}}}};
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("dcsr_test_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("toml subset") {
  const json j = parse_toml(R"(
seed = 7   # master seed
name = "run \"a\""
[data]
n_train = 2000
ratio = 1.5e-1
flag = true
list = [1, 2, 3]
[sr.arch]
dilations = [1, 2]
names = ["x", "y"]
)");
  CHECK(j["seed"] == 7);
  CHECK(j["name"] == "run \"a\"");
  CHECK(j["data"]["n_train"] == 2000);
  CHECK(j["data"]["ratio"].get<double>() == doctest::Approx(0.15));
  CHECK(j["data"]["flag"] == true);
  CHECK(j["data"]["list"] == json::array({1, 2, 3}));
  CHECK(j["sr"]["arch"]["dilations"] == json::array({1, 2}));
  CHECK(j["sr"]["arch"]["names"] == json::array({"x", "y"}));

  CHECK_THROWS_WITH_AS(parse_toml("a = 1\na = 2\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_toml("a = 1\n[broken\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_AS(parse_toml("a = \"open\n"), ConfigError);
  CHECK_THROWS_AS(parse_toml("novalue\n"), ConfigError);
}

TEST_CASE("config file loading") {
  const auto dir = temp_dir("cfg");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "a.toml") << "seed = 3\n[evaluation]\nmetrics = [\"tvd\"]\n";
    std::ofstream(dir / "b.json") << R"({"seed": 3, "evaluation": {"metrics": ["tvd"]}})";
  }
  CHECK(load_config_file(dir / "a.toml") == load_config_file(dir / "b.json"));
  CHECK_THROWS_AS(load_config_file(dir / "missing.toml"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("experiment config defaults and parsing") {
  const ExperimentConfig d;
  CHECK(d.sr_factors == std::vector<std::size_t>{2, 2});
  CHECK(d.total_factor() == 4);
  CHECK(d.correction_model.sigma_base == 25.0);
  REQUIRE(d.sr_models.size() == 2);
  CHECK(d.sr_models[0].sigma_base == 50.0);
  CHECK(d.search.t_end == 0.2);
  CHECK(d.metrics.size() == 6);

  const auto c = ExperimentConfig::from_json(tiny_config("x"));
  CHECK(c.seed == 17);
  CHECK(c.search.n_t1 == 3);
  CHECK(c.correction_model.arch.channels == 4);
  CHECK(c.correction_model.train_cfg.max_iter == 20);
  CHECK(c.sr_models[1].arch.channels == 4);
  CHECK(c.ode.rtol == 1e-3);
  const auto back = ExperimentConfig::from_json(json{{"seed", 17}});
  CHECK(back.seed == 17);

  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"data", {{"n_tran", 1}}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"evaluation", {{"metrics", {"kl"}}}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"correction", {{"mode", "sideways"}}}}), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"data", {{"bias", "purple"}}}}), ConfigError);
}

TEST_CASE("evaluate") {
  const Dataset a({Field(std::vector<double>{1, 2, 3, 4}), Field(std::vector<double>{0, 1, 0, 1})});
  const auto r = evaluate(a, a, {Metric::TVD, Metric::RMSE, Metric::MMD, Metric::W2, Metric::MELRu, Metric::MELRw});
  for (const auto& [name, v] : r.values) CHECK_MESSAGE(v == doctest::Approx(0.0).epsilon(1e-12), name);
  CHECK(r.values.size() == 6);
  CHECK(r.per_sample.at("tvd").size() == 2);

  const Dataset z({Field(std::vector<double>{1, 2, 3, 4}), Field::zeros(4)});
  const auto skipped = evaluate(a, z, {Metric::TVD});
  CHECK(skipped.notes["skipped_zero_reference"] == json::array({1}));

  const Dataset low({Field(std::vector<double>{1, 2}), Field(std::vector<double>{0, 1})});
  CHECK_THROWS_AS(evaluate(low, a, {Metric::TVD}), std::invalid_argument);
  const auto with_base = evaluate(a, a, {Metric::TVD}, &low);
  CHECK(with_base.values.count("lflr_interp.tvd") == 1);
}

TEST_CASE("cascade super-resolution seeds are shared across inputs") {
  const ScoreModel m(CustomScore{[](const Field& x, double t, const Field* cond) {
                       const Field target = prolong(*cond, 2);
                       const double var = NoiseSchedule().sigma_sq(t);
                       std::vector<double> v(x.resolution());
                       for (std::size_t j = 0; j < v.size(); ++j) v[j] = -(x[j] - target[j]) / var;
                       return Field(std::move(v));
                     },
                     true, 2},
                     NoiseSchedule());
  const Dataset lr({Field::constant(4, 1.0), Field::constant(4, 2.0), Field::constant(4, 3.0)});
  const auto one = cascade_superres(lr, {m, m}, 50, 9, 1);
  const auto many = cascade_superres(lr, {m, m}, 50, 9, 3);
  REQUIRE(one.size() == 2);
  CHECK(one[0].resolution() == 8);
  CHECK(one[1].resolution() == 16);
  CHECK(one[1] == many[1]);
}

TEST_CASE("tiny end-to-end run") {
  const auto out = temp_dir("run");
  const auto cfg = ExperimentConfig::from_json(tiny_config(out));
  const RunReport r = run_dcsr(cfg);
  CHECK(r.failed_stage.empty());
  CHECK(r.stages.size() == 6);
  CHECK(r.metrics.size() == 7);
  for (const char* block : {"lr/lflr", "lr/corrected", "stage1/dcsr", "final/lflr_interp", "final/lflr_sr",
                            "final/dcsr", "final/reference"})
    CHECK_MESSAGE(r.metrics.count(block) == 1, block);
  CHECK(r.metrics.at("final/reference").values.at("tvd") == 0.0);
  REQUIRE(r.search.has_value());
  CHECK(r.search->grid.size() == 3 * 2);

  for (const auto& stage : r.stages)
    for (const auto& [key, art] : stage.artifacts.items())
      if (art.is_object() && art.contains("hash")) {
        const Dataset d = read_dataset(art["path"].get<std::string>());
        CHECK_MESSAGE(content_hash(d) == art["hash"].get<std::string>(), key);
      }
  for (const char* f : {"report.json", "search_grid.csv", "search.json", "spectra.csv", "tvd_quantiles.csv",
                        "models/correction.ckpt", "models/sr_stage1.ckpt", "models/sr_stage2.ckpt"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  const json report = json::parse(std::ifstream(out / "report.json"));
  CHECK(report["metrics"].size() == 7);

  const auto out2 = temp_dir("run2");
  const RunReport again = run_dcsr(ExperimentConfig::from_json(tiny_config(out2)));
  for (const auto& [block, m] : r.metrics) CHECK(again.metrics.at(block).values == m.values);

  fs::remove_all(out);
  fs::remove_all(out2);
}

TEST_CASE("parallel run matches the serial run closely") {
  const auto a = temp_dir("par_a"), b = temp_dir("par_b");
  json ja = tiny_config(a), jb = tiny_config(b);
  jb["threads"] = 3;
  const auto ra = run_dcsr(ExperimentConfig::from_json(ja));
  const auto rb = run_dcsr(ExperimentConfig::from_json(jb));
  for (const auto& [block, m] : ra.metrics)
    for (const auto& [name, v] : m.values) CHECK(std::abs(rb.metrics.at(block).values.at(name) - v) <= 1e-12);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("missing checkpoint with training disabled names the file") {
  const auto out = temp_dir("missing");
  json j = tiny_config(out);
  j["correction"]["train"] = false;
  j["correction"]["checkpoint"] = (out / "nowhere.ckpt").string();
  try {
    run_dcsr(ExperimentConfig::from_json(j));
    FAIL("expected a stage failure");
  } catch (const StageFailure& e) {
    CHECK(e.stage() == "train");
    CHECK(e.cause() == StageFailure::Cause::Config);
    CHECK(std::string(e.what()).find("nowhere.ckpt") != std::string::npos);
    CHECK(e.partial().failed_stage == "train");
  }
  CHECK(fs::exists(out / "report.json"));
  fs::remove_all(out);
}

TEST_CASE("uncorrupted input needs no correction") {
  const auto out = temp_dir("clean");
  json j = tiny_config(out);
  j["data"]["bias"] = "none";
  const auto r = run_dcsr(ExperimentConfig::from_json(j));
  CHECK(r.search->t1_star == 0.0);
  CHECK(r.search->t2_star == 0.0);
  CHECK(r.metrics.at("lr/corrected").values.at("tvd") == 0.0);
  fs::remove_all(out);
}
