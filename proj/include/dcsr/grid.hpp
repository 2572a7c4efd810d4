#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dcsr {

/// Extent of a field along each axis. Only 1D grids are used for now;
/// `ny` stays 1 so a 2D extension only needs to add a second axis.
struct Shape {
  std::size_t nx = 0;
  std::size_t ny = 1;
  std::size_t size() const { return nx * ny; }
  bool operator==(const Shape&) const = default;
};

/// Sampled function on a periodic uniform grid, node j sitting at x_j = j * L / n.
class Field {
 public:
  Field() = default;
  /// Throws std::invalid_argument when any value is not finite or the domain length is not positive.
  explicit Field(std::vector<double> values, double domain_length = 1.0);

  static Field zeros(std::size_t n, double domain_length = 1.0);
  static Field constant(std::size_t n, double value, double domain_length = 1.0);

  std::size_t resolution() const { return values_.size(); }
  const Shape& shape() const { return shape_; }
  double domain_length() const { return domain_length_; }
  double spacing() const { return domain_length_ / static_cast<double>(values_.size()); }
  double node(std::size_t j) const { return static_cast<double>(j) * spacing(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& data() const { return values_; }
  double operator[](std::size_t j) const { return values_[j]; }
  double& operator[](std::size_t j) { return values_[j]; }

  bool all_finite() const;

  bool operator==(const Field&) const = default;

 private:
  std::vector<double> values_;
  double domain_length_ = 1.0;
  Shape shape_{};
};

/// Provenance record attached to a dataset.
struct Provenance {
  std::string fidelity;     // "high", "low", ...
  std::string bias_source;  // "none", "godunov", "white", ...
  std::uint64_t seed = 0;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const Provenance&) const = default;
};

void to_json(nlohmann::json& j, const Provenance& p);
void from_json(const nlohmann::json& j, Provenance& p);

/// Ordered, nonempty collection of fields sharing one resolution.
class Dataset {
 public:
  Dataset() = default;
  /// Throws std::invalid_argument when empty or resolutions differ.
  explicit Dataset(std::vector<Field> fields, Provenance tag = {});

  std::size_t size() const { return fields_.size(); }
  bool empty() const { return fields_.empty(); }
  std::size_t resolution() const { return fields_.empty() ? 0 : fields_.front().resolution(); }
  double domain_length() const { return fields_.empty() ? 1.0 : fields_.front().domain_length(); }

  const Field& operator[](std::size_t i) const { return fields_[i]; }
  const std::vector<Field>& fields() const { return fields_; }
  const Provenance& tag() const { return tag_; }
  Provenance& tag() { return tag_; }

  auto begin() const { return fields_.begin(); }
  auto end() const { return fields_.end(); }

  /// First `count` samples (or all if fewer), same tag.
  Dataset head(std::size_t count) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<Field> fields_;
  Provenance tag_;
};

/// Energy per wavenumber magnitude k = 0 .. floor(n/2).
struct Spectrum {
  std::vector<double> energies;
};

/// Samples f at the coarse nodes with periodic cubic convolution (Keys, a = -1/2).
/// Throws std::invalid_argument("incompatible factor") when factor does not divide n,
/// or when the result would have fewer than 4 nodes.
Field restrict(const Field& f, std::size_t factor);

/// Periodic cubic-convolution upsampling to n * factor nodes; node-interpolating,
/// so restrict(prolong(f, k), k) == f. Throws std::invalid_argument if factor < 2.
Field prolong(const Field& f, std::size_t factor);

Dataset restrict(const Dataset& d, std::size_t factor);
Dataset prolong(const Dataset& d, std::size_t factor);

/// Evaluates the periodic cubic-convolution interpolant of `values` at the
/// fractional node position `pos` (in units of grid spacing).
double cubic_sample(std::span<const double> values, double pos);

/// E(k) = sum over |k'| = k of |sum_j f_j exp(-i 2 pi k' x_j / L)|^2.
/// The Nyquist bin of an even-length grid is counted once.
Spectrum energy_spectrum(const Field& f);

/// Per-bin mean of the spectra of every field in the dataset.
Spectrum mean_spectrum(const Dataset& d);

}  // namespace dcsr
