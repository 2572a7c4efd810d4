#include "dcsr/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "dcsr/error.hpp"
#include "dcsr/fft.hpp"

namespace dcsr {

NoiseSchedule::NoiseSchedule(double sigma_max_base) : base_(sigma_max_base), log_base_(0.0) {
  if (!(base_ > 1.0) || !std::isfinite(base_))
    throw std::invalid_argument("NoiseSchedule: base must be > 1");
  log_base_ = std::log(base_);
}

double NoiseSchedule::sigma(double t) const { return std::sqrt(sigma_sq(t)); }

double NoiseSchedule::sigma_sq(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("sigma: t outside [0,1]");
  // expm1 keeps full relative precision for small t.
  return std::expm1(2.0 * t * log_base_) / (2.0 * log_base_);
}

double NoiseSchedule::sigma_sq_rate(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("sigma: t outside [0,1]");
  return std::exp(2.0 * t * log_base_);
}

double NoiseSchedule::inverse(double level) const {
  if (!(level >= 0.0)) throw std::domain_error("sigma_inv: negative level");
  const double top = sigma(1.0);
  if (level > top * (1.0 + 1e-12)) throw std::domain_error("level exceeds schedule range");
  const double t = std::log1p(2.0 * level * level * log_base_) / (2.0 * log_base_);
  return std::min(t, 1.0);
}

std::string to_string(NoiseColor c) {
  switch (c) {
    case NoiseColor::White: return "white";
    case NoiseColor::Pink: return "pink";
    case NoiseColor::Brown: return "brown";
  }
  return "white";
}

NoiseColor noise_color_from_string(const std::string& s) {
  if (s == "white") return NoiseColor::White;
  if (s == "pink") return NoiseColor::Pink;
  if (s == "brown") return NoiseColor::Brown;
  throw ConfigError("unknown noise color '" + s + "' (expected white, pink or brown)");
}

void to_json(nlohmann::json& j, const NoiseSpec& s) {
  j = nlohmann::json{{"color", to_string(s.color)}, {"magnitude", s.magnitude}};
}

void from_json(const nlohmann::json& j, NoiseSpec& s) {
  s.color = noise_color_from_string(j.value("color", "white"));
  s.magnitude = j.value("magnitude", 0.1);
  if (s.magnitude < 0.0) throw ConfigError("noise magnitude must be >= 0");
}

Field colored_noise(std::size_t n, const NoiseSpec& spec, Rng& rng, double domain_length) {
  if (n < 4) throw std::invalid_argument("colored_noise: n must be >= 4");
  if (spec.magnitude < 0.0) throw std::invalid_argument("colored_noise: negative magnitude");
  std::vector<double> eps(n);
  rng.fill_gaussian(eps);
  auto bins = fft::forward(eps);
  const double half_r = 0.5 * spec.exponent();
  bins[0] = 0.0;
  for (std::size_t m = 1; m < bins.size(); ++m)
    bins[m] /= std::pow(static_cast<double>(fft::wavenumber(m, n)), half_r);
  auto out = fft::inverse(bins, n);
  double mean = 0.0;
  for (double& v : out) {
    v *= spec.magnitude;
    mean += v;
  }
  // Remove the rounding residue of the zeroed DC bin.
  mean /= static_cast<double>(n);
  for (double& v : out) v -= mean;
  return Field(std::move(out), domain_length);
}

}  // namespace dcsr
