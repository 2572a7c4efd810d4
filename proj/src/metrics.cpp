#include "dcsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "dcsr/error.hpp"
#include "dcsr/transport.hpp"

namespace dcsr {

namespace {

const std::vector<std::pair<Metric, std::string>>& table() {
  static const std::vector<std::pair<Metric, std::string>> t{
      {Metric::TVD, "tvd"}, {Metric::RMSE, "rmse"},   {Metric::MMD, "mmd"},
      {Metric::W2, "w2"},   {Metric::MELRu, "melru"}, {Metric::MELRw, "melrw"}};
  return t;
}

void check_paired(const Dataset& u, const Dataset& v, const char* what) {
  if (u.empty() || v.empty()) throw std::invalid_argument(std::string(what) + ": empty dataset");
  if (u.size() != v.size()) throw std::invalid_argument(std::string(what) + ": paired datasets differ in size");
  if (u.resolution() != v.resolution()) throw std::invalid_argument(std::string(what) + ": resolution mismatch");
}

template <class Norm>
double paired_relative(const Dataset& u, const Dataset& v, const char* what, Norm norm, std::vector<double>* out) {
  check_paired(u, v, what);
  const std::size_t n = u.resolution();
  std::vector<double> diff(n);
  double total = 0.0;
  if (out) out->assign(u.size(), 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double ref = norm(v[i].data());
    if (!(ref > 0.0))
      throw std::invalid_argument(std::string(what) + ": reference sample " + std::to_string(i) + " has zero norm");
    for (std::size_t k = 0; k < n; ++k) diff[k] = u[i][k] - v[i][k];
    const double r = norm(diff) / ref;
    if (out) (*out)[i] = r;
    total += r;
  }
  return total / static_cast<double>(u.size());
}

double l1(const std::vector<double>& x) {
  double s = 0.0;
  for (double a : x) s += std::abs(a);
  return s;
}

double l2(const std::vector<double>& x) {
  double s = 0.0;
  for (double a : x) s += a * a;
  return std::sqrt(s);
}

Eigen::MatrixXd as_matrix(const Dataset& d) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(d.resolution()), static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t k = 0; k < d.resolution(); ++k)
      m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = d[i][k];
  return m;
}

// Squared distances between columns; exact per-entry sums rather than the
// Gram-matrix expansion so identical samples give exactly 0.
Eigen::MatrixXd sq_dists(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index i = 0; i < a.cols(); ++i) d(i, j) = (a.col(i) - b.col(j)).squaredNorm();
  return d;
}

}  // namespace

std::string to_string(Metric m) {
  for (const auto& [k, name] : table())
    if (k == m) return name;
  return "unknown";
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& e : table()) n.push_back(e.second);
    return n;
  }();
  return names;
}

Metric metric_from_string(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  for (const auto& [k, n] : table())
    if (n == lower) return k;
  std::string valid;
  for (const auto& n : metric_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown metric '" + std::string(name) + "' (valid: " + valid + ")");
}

double tvd(const Dataset& u, const Dataset& v, std::vector<double>* per_sample) {
  return paired_relative(u, v, "tvd", l1, per_sample);
}

double rmse(const Dataset& u, const Dataset& v, std::vector<double>* per_sample) {
  return paired_relative(u, v, "rmse", l2, per_sample);
}

double mmd(const Dataset& u, const Dataset& v, double bandwidth) {
  if (u.empty() || v.empty()) throw std::invalid_argument("mmd: empty dataset");
  if (u.resolution() != v.resolution()) throw std::invalid_argument("mmd: resolution mismatch");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd: bandwidth must be positive");
  const Eigen::MatrixXd a = as_matrix(u), b = as_matrix(v);
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  auto mean_kernel = [scale](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return (sq_dists(x, y).array() * scale).exp().mean();
  };
  const double val = mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b);
  return std::max(0.0, val);
}

double w2(const Dataset& u, const Dataset& v) {
  if (u.empty() || v.empty()) throw std::invalid_argument("w2: empty dataset");
  if (u.resolution() != v.resolution()) throw std::invalid_argument("w2: resolution mismatch");
  if (u.size() > kMaxW2Size || v.size() > kMaxW2Size)
    throw std::invalid_argument("w2: exact solver limited to " + std::to_string(kMaxW2Size) +
                                " samples per side; subsample the datasets");
  const double cost = uniform_transport_cost(sq_dists(as_matrix(u), as_matrix(v)));
  return std::sqrt(std::max(0.0, cost));
}

double melr(const Dataset& u, const Dataset& v, bool weighted, MelrDetail* detail) {
  if (u.empty() || v.empty()) throw std::invalid_argument("melr: empty dataset");
  if (u.resolution() != v.resolution()) throw std::invalid_argument("melr: resolution mismatch");
  const Spectrum eu = mean_spectrum(u), ev = mean_spectrum(v);
  const double peak_v = *std::max_element(ev.energies.begin(), ev.energies.end());
  if (!(peak_v > 0.0)) throw std::invalid_argument("melr: reference spectrum is identically zero");
  const double peak = std::max(peak_v, *std::max_element(eu.energies.begin(), eu.energies.end()));
  const double floor = 1e-14 * peak;

  MelrDetail local;
  MelrDetail& d = detail ? *detail : local;
  d.included.clear();
  d.excluded.clear();
  double weight_total = 0.0;
  for (std::size_t k = 0; k < ev.energies.size(); ++k) {
    if (eu.energies[k] > floor && ev.energies[k] > floor) {
      d.included.push_back(k);
      weight_total += ev.energies[k];
    } else {
      d.excluded.push_back(k);
    }
  }
  if (d.included.empty()) throw std::invalid_argument("melr: no bin with positive energy in both spectra");
  double total = 0.0;
  for (std::size_t k : d.included) {
    const double w = weighted ? ev.energies[k] / weight_total : 1.0;
    total += w * std::abs(std::log(eu.energies[k] / ev.energies[k]));
  }
  return total;
}

double compute_metric(Metric m, const Dataset& u, const Dataset& v) {
  switch (m) {
    case Metric::TVD: return tvd(u, v);
    case Metric::RMSE: return rmse(u, v);
    case Metric::MMD: return mmd(u, v);
    case Metric::W2: return w2(u, v);
    case Metric::MELRu: return melr(u, v, false);
    case Metric::MELRw: return melr(u, v, true);
  }
  throw std::invalid_argument("compute_metric: unknown metric");
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j{{"values", values}, {"per_sample", per_sample}};
  if (!notes.empty()) j["notes"] = notes;
  return j;
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "metric,value\n";
  for (const auto& [k, v] : values) os << k << ',' << v << '\n';
  return os.str();
}

}  // namespace dcsr
