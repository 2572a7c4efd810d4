#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcsr/grid.hpp"

namespace dcsr {

enum class Metric { TVD, RMSE, MMD, W2, MELRu, MELRw };

std::string to_string(Metric m);
/// Throws ConfigError listing the valid names.
Metric metric_from_string(std::string_view name);
const std::vector<std::string>& metric_names();

/// Paired mean of ||u_i - v_i||_1 / ||v_i||_1. Throws std::invalid_argument on a size
/// mismatch or a zero-norm reference sample (the message names its index).
double tvd(const Dataset& u, const Dataset& v, std::vector<double>* per_sample = nullptr);

/// Paired mean of ||u_i - v_i||_2 / ||v_i||_2.
double rmse(const Dataset& u, const Dataset& v, std::vector<double>* per_sample = nullptr);

/// Biased (V-statistic) MMD with Gaussian kernel exp(-||a - b||^2 / (2 l^2)).
/// Off-diagonal kernel values saturate to 0 on O(1) fields at the default l.
double mmd(const Dataset& u, const Dataset& v, double bandwidth = 0.01);

inline constexpr std::size_t kMaxW2Size = 2000;

/// Exact W2 between the empirical measures. Throws std::invalid_argument when either
/// side exceeds kMaxW2Size samples.
double w2(const Dataset& u, const Dataset& v);

struct MelrDetail {
  std::vector<std::size_t> included;
  std::vector<std::size_t> excluded;
};

/// Mean energy log ratio of the dataset-average spectra; v is the reference and
/// supplies the weights when `weighted`. Bins where either average spectrum is zero
/// (below 1e-14 of the largest energy) are skipped and listed in `detail`.
/// Throws std::invalid_argument when the reference spectrum is identically zero.
double melr(const Dataset& u, const Dataset& v, bool weighted, MelrDetail* detail = nullptr);

/// Dispatch by identifier; v is the reference.
double compute_metric(Metric m, const Dataset& u, const Dataset& v);

struct MetricReport {
  std::map<std::string, double> values;
  std::map<std::string, std::vector<double>> per_sample;
  nlohmann::json notes = nlohmann::json::object();

  nlohmann::json to_json() const;
  /// One row per metric: "metric,value".
  std::string to_csv() const;
};

}  // namespace dcsr
