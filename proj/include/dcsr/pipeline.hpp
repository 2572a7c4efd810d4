#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcsr/correction.hpp"
#include "dcsr/datagen.hpp"
#include "dcsr/metrics.hpp"
#include "dcsr/network.hpp"
#include "dcsr/score.hpp"
#include "dcsr/sde.hpp"
#include "dcsr/train.hpp"

namespace dcsr {

/// Streams derived from the master seed; the CLI subcommands use the same ones so
/// that running them one by one reproduces a pipeline run.
enum SeedStream : std::uint64_t {
  kSuiteStream = 1,
  kCorrectionTrainStream = 2,
  kSrTrainStream = 3,
  kSearchStream = 4,
  kCorrectStream = 5,
  kSrSampleStream = 6,
};

/// Where a model comes from: a checkpoint on disk, or training (optionally
/// reusing a checkpoint that already exists at the target path).
struct ModelSource {
  std::filesystem::path checkpoint;
  bool train = true;
  bool reuse = false;
  double sigma_base = 25.0;
  TrainConfig train_cfg;
  NetArch arch;
};

void to_json(nlohmann::json& j, const ModelSource& m);
/// `base` supplies the defaults for keys the section omits.
ModelSource model_source_from_json(const nlohmann::json& j, const ModelSource& base);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output = "dcsr_run";
  std::size_t threads = 1;

  // data
  std::filesystem::path suite;  // existing suite directory; generated when empty
  SuiteOptions suite_options;
  std::string bias = "white";   // "none" corrects the HF test set itself
  std::size_t n_eval = 0;       // 0 = every test sample

  // correction
  ModelSource correction_model;
  SearchConfig search;
  std::string search_mode = "ipd";
  OdeTolerances ode;

  // super-resolution cascade, coarse to fine
  std::vector<std::size_t> sr_factors{2, 2};
  std::vector<ModelSource> sr_models;
  std::size_t sr_steps = 1000;
  // The last sampler step returns the denoised estimate instead of adding noise.
  bool sr_denoise_final = true;

  // evaluation
  std::vector<Metric> metrics{Metric::TVD, Metric::RMSE, Metric::MMD, Metric::W2, Metric::MELRu, Metric::MELRw};

  ExperimentConfig();

  /// Throws ConfigError on unknown sections/values or a cascade that does not chain.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  /// Total restriction factor between the HF and LR levels.
  std::size_t total_factor() const;
};

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  nlohmann::json artifacts = nlohmann::json::object();
};

struct RunReport {
  nlohmann::json config;
  nlohmann::json input_hashes = nlohmann::json::object();
  std::vector<StageRecord> stages;
  std::optional<TimeSearchResult> search;
  std::map<std::string, MetricReport> metrics;
  std::vector<std::size_t> correction_failures;
  std::string failed_stage;
  std::string error;

  nlohmann::json to_json() const;
};

/// A pipeline stage failed; carries the stage name, the partial report and whether
/// the root cause was a configuration or numeric problem.
class StageFailure : public std::runtime_error {
 public:
  enum class Cause { Config, Numeric, Other };
  StageFailure(std::string stage, Cause cause, const std::string& message, RunReport partial)
      : std::runtime_error("stage '" + stage + "' failed: " + message),
        stage_(std::move(stage)),
        cause_(cause),
        partial_(std::move(partial)) {}
  const std::string& stage() const { return stage_; }
  Cause cause() const { return cause_; }
  const RunReport& partial() const { return partial_; }

 private:
  std::string stage_;
  Cause cause_;
  RunReport partial_;
};

using LogFn = std::function<void(const std::string&)>;

/// Loads the model named by `src` or trains it with `trainer` and saves it to
/// `default_path` (or src.checkpoint when set). Throws ConfigError naming the
/// checkpoint when loading is required and the file is missing.
std::shared_ptr<const ScoreNet> obtain_network(const ModelSource& src, const std::filesystem::path& default_path,
                                               const std::function<TrainResult()>& trainer,
                                               nlohmann::json* record = nullptr);

/// Runs the conditional samplers stage by stage starting from `lr`. Sample i at
/// stage k draws from derive_seed(seed, {k, i}). Returns the output of every stage.
std::vector<Dataset> cascade_superres(const Dataset& lr, const std::vector<ScoreModel>& stages, std::size_t n_steps,
                                      std::uint64_t seed, std::size_t threads = 1, bool denoise_final = false);

/// Computes the requested metrics of pred against ref; with `lflr` the
/// interpolation baseline prolong(lflr) is scored as well under "lflr_interp.<metric>".
/// Paired metrics skip reference samples with zero norm (listed in notes).
/// Throws std::invalid_argument on a resolution mismatch.
MetricReport evaluate(const Dataset& pred, const Dataset& ref, const std::vector<Metric>& metrics,
                      const Dataset* lflr = nullptr);

/// The full correction + super-resolution run; writes every artifact and
/// <output>/report.json. Throws StageFailure naming the failed stage.
RunReport run_dcsr(const ExperimentConfig& cfg, const LogFn& log = {});

}  // namespace dcsr
