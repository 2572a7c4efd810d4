#pragma once

#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

#include "dcsr/grid.hpp"
#include "dcsr/rng.hpp"

namespace dcsr {

/// Variance-exploding schedule sigma(t) = sqrt((b^{2t} - 1) / (2 ln b)), t in [0, 1].
///
/// sigma(0) = 0 and sigma^2 has the closed-form rate d sigma^2/dt = b^{2t}, so the
/// PF ODE and Euler-Maruyama updates never need finite differences.
class NoiseSchedule {
 public:
  /// Throws std::invalid_argument unless base > 1.
  explicit NoiseSchedule(double sigma_max_base = 25.0);

  double base() const { return base_; }

  /// Throws std::domain_error for t outside [0, 1].
  double sigma(double t) const;
  double sigma_sq(double t) const;
  /// d sigma^2 / dt.
  double sigma_sq_rate(double t) const;
  /// t with sigma(t) = level. Throws std::domain_error("level exceeds schedule range")
  /// when level > sigma(1) and for negative levels.
  double inverse(double level) const;

  bool operator==(const NoiseSchedule&) const = default;

 private:
  double base_;
  double log_base_;
};

enum class NoiseColor { White = 0, Pink = 1, Brown = 2 };

std::string to_string(NoiseColor c);
/// Accepts "white", "pink", "brown". Throws ConfigError otherwise.
NoiseColor noise_color_from_string(const std::string& s);

/// Colored noise recipe: spectral exponent r = 0/1/2 and magnitude C_r.
struct NoiseSpec {
  NoiseColor color = NoiseColor::White;
  double magnitude = 0.1;

  int exponent() const { return static_cast<int>(color); }
};

void to_json(nlohmann::json& j, const NoiseSpec& s);
void from_json(const nlohmann::json& j, NoiseSpec& s);

/// C_r * Re F^{-1}( F(eps) / |k|^{r/2} ) with eps ~ N(0, I_n) and the DC bin zeroed.
/// Throws std::invalid_argument for n < 4 or a negative magnitude.
Field colored_noise(std::size_t n, const NoiseSpec& spec, Rng& rng, double domain_length = 1.0);

}  // namespace dcsr
