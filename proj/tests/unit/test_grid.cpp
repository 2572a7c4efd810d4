#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "dcsr/dataset_io.hpp"
#include "dcsr/error.hpp"
#include "dcsr/fft.hpp"
#include "dcsr/grid.hpp"
#include "dcsr/rng.hpp"

using namespace dcsr;

namespace {

Field sine(std::size_t n, double freq = 1.0) {
  std::vector<double> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(j) / static_cast<double>(n));
  return Field(std::move(v));
}

Field random_field(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.gaussian();
  return Field(std::move(v));
}

double max_abs_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.resolution(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

}  // namespace

TEST_CASE("field rejects non-finite values and bad domain length") {
  CHECK_THROWS_AS(Field(std::vector<double>{1.0, NAN}), std::invalid_argument);
  CHECK_THROWS_AS(Field(std::vector<double>{1.0}, 0.0), std::invalid_argument);
  const Field f(std::vector<double>(8, 1.0), 2.0);
  CHECK(f.spacing() == doctest::Approx(0.25));
  CHECK(f.node(3) == doctest::Approx(0.75));
  CHECK(f.shape().nx == 8);
}

TEST_CASE("dataset must be nonempty and homogeneous") {
  CHECK_THROWS_AS(Dataset(std::vector<Field>{}), std::invalid_argument);
  CHECK_THROWS_AS(Dataset({Field::zeros(4), Field::zeros(8)}), std::invalid_argument);
  const Dataset d({Field::zeros(4), Field::constant(4, 1.0), Field::constant(4, 2.0)});
  CHECK(d.head(2).size() == 2);
  CHECK(d.head(10).size() == 3);
}

TEST_CASE("restrict of a constant is constant") {
  for (std::size_t factor : {1, 2, 4, 5}) {
    const Field r = restrict(Field::constant(100, 3.5), factor);
    CHECK(r.resolution() == 100 / factor);
    for (double v : r.values()) CHECK(v == doctest::Approx(3.5).epsilon(1e-14));
  }
}

TEST_CASE("restrict of a sampled sine matches the analytic sine at the coarse nodes") {
  const Field r = restrict(sine(100), 4);
  REQUIRE(r.resolution() == 25);
  CHECK(max_abs_diff(r, sine(25)) < 1e-3);
}

TEST_CASE("restrict rejects incompatible factors") {
  CHECK_THROWS_WITH_AS(restrict(sine(100), 3), doctest::Contains("incompatible factor"), std::invalid_argument);
  CHECK_THROWS_AS(restrict(sine(100), 100), std::invalid_argument);
  CHECK_THROWS_AS(restrict(sine(100), 50), std::invalid_argument);  // 2 nodes left
  CHECK_THROWS_AS(restrict(sine(100), 0), std::invalid_argument);
}

TEST_CASE("prolong of a constant is constant") {
  const Field p = prolong(Field::constant(10, -2.0), 3);
  REQUIRE(p.resolution() == 30);
  for (double v : p.values()) CHECK(v == doctest::Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("prolong then restrict returns the original nodes") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Field f = random_field(25, seed);
    for (std::size_t k : {2, 4}) CHECK(max_abs_diff(restrict(prolong(f, k), k), f) < 1e-12);
  }
}

TEST_CASE("prolong of a coarse sine matches the analytic sine") {
  CHECK(max_abs_diff(prolong(sine(25), 4), sine(100)) < 2e-3);
}

TEST_CASE("prolong rejects factor < 2") {
  CHECK_THROWS_AS(prolong(sine(25), 1), std::invalid_argument);
  CHECK_THROWS_AS(prolong(sine(25), 0), std::invalid_argument);
}

TEST_CASE("restrict and prolong are linear") {
  const Field f = random_field(40, 7), g = random_field(40, 8);
  const double a = 1.7, b = -0.3;
  std::vector<double> comb(40);
  for (std::size_t j = 0; j < 40; ++j) comb[j] = a * f[j] + b * g[j];
  const Field h(comb);
  auto check = [&](const Field& oh, const Field& of, const Field& og) {
    for (std::size_t j = 0; j < oh.resolution(); ++j) CHECK(std::abs(oh[j] - (a * of[j] + b * og[j])) < 1e-12);
  };
  check(restrict(h, 4), restrict(f, 4), restrict(g, 4));
  check(prolong(h, 2), prolong(f, 2), prolong(g, 2));
  check(prolong(h, 3), prolong(f, 3), prolong(g, 3));
}

TEST_CASE("cubic sampling wraps periodically") {
  const Field f = random_field(12, 4);
  CHECK(cubic_sample(f.values(), 12.0) == f[0]);
  CHECK(cubic_sample(f.values(), -1.0) == f[11]);
  CHECK(cubic_sample(f.values(), 11.5) == doctest::Approx(cubic_sample(f.values(), -0.5)).epsilon(1e-14));
}

TEST_CASE("energy spectrum of a constant has only the DC bin") {
  const Spectrum s = energy_spectrum(Field::constant(16, 2.0));
  REQUIRE(s.energies.size() == 9);
  CHECK(s.energies[0] == doctest::Approx(32.0 * 32.0));
  for (std::size_t k = 1; k < s.energies.size(); ++k) CHECK(s.energies[k] < 1e-20);
}

TEST_CASE("energy spectrum of a sampled sine") {
  const Spectrum s = energy_spectrum(sine(100));
  REQUIRE(s.energies.size() == 51);
  CHECK(s.energies[1] == doctest::Approx(5000.0).epsilon(1e-12));
  for (std::size_t k = 0; k < s.energies.size(); ++k)
    if (k != 1) CHECK(s.energies[k] < 1e-8);
}

TEST_CASE("energy spectrum counts the Nyquist bin once") {
  // Alternating +-1: all energy in the Nyquist bin, |X| = n.
  std::vector<double> v(8);
  for (std::size_t j = 0; j < 8; ++j) v[j] = j % 2 ? -1.0 : 1.0;
  const Spectrum s = energy_spectrum(Field(v));
  CHECK(s.energies[4] == doctest::Approx(64.0));
}

TEST_CASE("energy spectrum satisfies Parseval") {
  for (std::size_t n : {7, 16, 25, 100}) {
    const Field f = random_field(n, n);
    double sum_e = 0.0, sum_sq = 0.0;
    for (double e : energy_spectrum(f).energies) sum_e += e;
    for (double x : f.values()) sum_sq += x * x;
    CHECK(sum_e == doctest::Approx(static_cast<double>(n) * sum_sq).epsilon(1e-9));
  }
}

TEST_CASE("energy spectrum is invariant under circular shifts") {
  const Field f = random_field(50, 9);
  std::vector<double> shifted(50);
  for (std::size_t j = 0; j < 50; ++j) shifted[(j + 13) % 50] = f[j];
  const auto a = energy_spectrum(f).energies, b = energy_spectrum(Field(shifted)).energies;
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-9));
}

TEST_CASE("fft inverse undoes forward") {
  const Field f = random_field(30, 2);
  const auto back = fft::inverse(fft::forward(f.values()), 30);
  for (std::size_t j = 0; j < 30; ++j) CHECK(back[j] == doctest::Approx(f[j]).epsilon(1e-12));
}

TEST_CASE("mean spectrum averages per bin") {
  const Dataset d({sine(16), Field::zeros(16)});
  CHECK(mean_spectrum(d).energies[1] == doctest::Approx(0.5 * energy_spectrum(sine(16)).energies[1]));
}

TEST_CASE("dataset container round trip preserves values, provenance and hash") {
  const auto dir = std::filesystem::temp_directory_path() / "dcsr_grid_io";
  std::filesystem::remove_all(dir);
  Provenance tag{"low", "pink", 42, {{"note", "x"}}};
  const Dataset d({random_field(10, 1), random_field(10, 2)}, tag);
  write_dataset(dir, d);
  const Dataset back = read_dataset(dir);
  CHECK(back == d);
  CHECK(back.tag() == tag);
  CHECK(content_hash(back) == content_hash(d));
  CHECK(file_content_hash(dir / "data.bin") == content_hash(d));
  CHECK(std::filesystem::file_size(dir / "data.bin") == 2 * 10 * sizeof(double));
  std::ifstream manifest(dir / "manifest.json");
  const auto j = nlohmann::json::parse(manifest);
  CHECK(j.at("dtype") == "f64le");
  CHECK(j.at("count") == 2);
  CHECK(j.at("resolution") == 10);
  std::filesystem::remove_all(dir);
}

TEST_CASE("content hash is the git blob hash of the payload") {
  // git hash-object of an empty file.
  const auto dir = std::filesystem::temp_directory_path() / "dcsr_hash_file";
  std::filesystem::create_directories(dir);
  { std::ofstream(dir / "empty"); }
  CHECK(file_content_hash(dir / "empty") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  std::filesystem::remove_all(dir);
}

TEST_CASE("reading a missing or truncated dataset is a config error") {
  const auto dir = std::filesystem::temp_directory_path() / "dcsr_grid_bad";
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_dataset(dir), ConfigError);
  write_dataset(dir, Dataset({Field::zeros(4)}));
  std::filesystem::resize_file(dir / "data.bin", 8);
  CHECK_THROWS_AS(read_dataset(dir), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("csv export writes a header and one row per sample") {
  const auto file = std::filesystem::temp_directory_path() / "dcsr_export.csv";
  export_csv(file, Dataset({Field(std::vector<double>{1, 2, 3, 4}), Field::zeros(4)}));
  std::ifstream in(file);
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  CHECK(header == "x0,x1,x2,x3");
  CHECK(row1 == "1,2,3,4");
  CHECK(row2 == "0,0,0,0");
  std::filesystem::remove(file);
}
