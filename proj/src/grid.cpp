#include "dcsr/grid.hpp"

#include <cmath>
#include <stdexcept>

#include "dcsr/fft.hpp"

namespace dcsr {

Field::Field(std::vector<double> values, double domain_length)
    : values_(std::move(values)), domain_length_(domain_length), shape_{values_.size(), 1} {
  if (!(domain_length_ > 0.0) || !std::isfinite(domain_length_))
    throw std::invalid_argument("Field: domain length must be positive and finite");
  if (!all_finite()) throw std::invalid_argument("Field: non-finite value");
}

Field Field::zeros(std::size_t n, double domain_length) {
  return Field(std::vector<double>(n, 0.0), domain_length);
}

Field Field::constant(std::size_t n, double value, double domain_length) {
  return Field(std::vector<double>(n, value), domain_length);
}

bool Field::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

void to_json(nlohmann::json& j, const Provenance& p) {
  j = nlohmann::json{{"fidelity", p.fidelity}, {"bias_source", p.bias_source}, {"seed", p.seed}};
  if (!p.extra.empty()) j["extra"] = p.extra;
}

void from_json(const nlohmann::json& j, Provenance& p) {
  p.fidelity = j.value("fidelity", "");
  p.bias_source = j.value("bias_source", "");
  p.seed = j.value("seed", std::uint64_t{0});
  p.extra = j.value("extra", nlohmann::json::object());
}

Dataset::Dataset(std::vector<Field> fields, Provenance tag)
    : fields_(std::move(fields)), tag_(std::move(tag)) {
  if (fields_.empty()) throw std::invalid_argument("Dataset: empty");
  const std::size_t n = fields_.front().resolution();
  for (const auto& f : fields_)
    if (f.resolution() != n) throw std::invalid_argument("Dataset: mixed resolutions");
}

Dataset Dataset::head(std::size_t count) const {
  if (count >= fields_.size()) return *this;
  return Dataset(std::vector<Field>(fields_.begin(), fields_.begin() + static_cast<long>(count)),
                 tag_);
}

namespace {

double keys_weight(double s) {
  constexpr double a = -0.5;
  s = std::abs(s);
  if (s <= 1.0) return ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0;
  if (s < 2.0) return ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a;
  return 0.0;
}

std::size_t wrap(long i, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

}  // namespace

double cubic_sample(std::span<const double> values, double pos) {
  const std::size_t n = values.size();
  const double base = std::floor(pos);
  const double frac = pos - base;
  const long i0 = static_cast<long>(base);
  if (frac == 0.0) return values[wrap(i0, n)];
  double acc = 0.0;
  for (long j = -1; j <= 2; ++j) acc += values[wrap(i0 + j, n)] * keys_weight(frac - static_cast<double>(j));
  return acc;
}

Field restrict(const Field& f, std::size_t factor) {
  const std::size_t n = f.resolution();
  if (factor == 0 || n % factor != 0) throw std::invalid_argument("incompatible factor");
  const std::size_t m = n / factor;
  if (m < 4) throw std::invalid_argument("incompatible factor: restricted resolution below 4");
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j)
    out[j] = cubic_sample(f.values(), static_cast<double>(j * factor));
  return Field(std::move(out), f.domain_length());
}

Field prolong(const Field& f, std::size_t factor) {
  if (factor < 2) throw std::invalid_argument("prolong: factor must be at least 2");
  const std::size_t m = f.resolution() * factor;
  std::vector<double> out(m);
  const double inv = 1.0 / static_cast<double>(factor);
  for (std::size_t j = 0; j < m; ++j) {
    // Exact integer division keeps coarse nodes bit-exact.
    if (j % factor == 0)
      out[j] = f[j / factor];
    else
      out[j] = cubic_sample(f.values(), static_cast<double>(j) * inv);
  }
  return Field(std::move(out), f.domain_length());
}

Dataset restrict(const Dataset& d, std::size_t factor) {
  std::vector<Field> out;
  out.reserve(d.size());
  for (const auto& f : d) out.push_back(restrict(f, factor));
  return Dataset(std::move(out), d.tag());
}

Dataset prolong(const Dataset& d, std::size_t factor) {
  std::vector<Field> out;
  out.reserve(d.size());
  for (const auto& f : d) out.push_back(prolong(f, factor));
  return Dataset(std::move(out), d.tag());
}

Spectrum energy_spectrum(const Field& f) {
  const std::size_t n = f.resolution();
  Spectrum s;
  if (n == 0) return s;
  const auto bins = fft::forward(f.values());
  s.energies.assign(n / 2 + 1, 0.0);
  for (std::size_t m = 0; m < bins.size(); ++m) {
    const double e = std::norm(bins[m]);
    // Bins 1..ceil(n/2)-1 have a conjugate partner at n - m with the same magnitude.
    const bool paired = m != 0 && 2 * m != n;
    s.energies[m] = paired ? 2.0 * e : e;
  }
  return s;
}

Spectrum mean_spectrum(const Dataset& d) {
  Spectrum acc;
  if (d.empty()) return acc;
  acc.energies.assign(d.resolution() / 2 + 1, 0.0);
  for (const auto& f : d) {
    const auto s = energy_spectrum(f);
    for (std::size_t k = 0; k < s.energies.size(); ++k) acc.energies[k] += s.energies[k];
  }
  const double inv = 1.0 / static_cast<double>(d.size());
  for (double& e : acc.energies) e *= inv;
  return acc;
}

}  // namespace dcsr
