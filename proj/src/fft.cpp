#include "dcsr/fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace dcsr::fft {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  ~PlanPair() {
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
  }
};

std::mutex plan_mutex;
std::map<std::size_t, std::unique_ptr<PlanPair>> plan_cache;

const PlanPair& plans_for(std::size_t n) {
  std::lock_guard lock(plan_mutex);
  auto& slot = plan_cache[n];
  if (!slot) {
    auto p = std::make_unique<PlanPair>();
    std::vector<double> real(n);
    std::vector<std::complex<double>> cplx(n / 2 + 1);
    auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
    const int ni = static_cast<int>(n);
    p->r2c = fftw_plan_dft_r2c_1d(ni, real.data(), c, FFTW_ESTIMATE | FFTW_UNALIGNED);
    p->c2r = fftw_plan_dft_c2r_1d(ni, c, real.data(),
                                  FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
    if (!p->r2c || !p->c2r) throw std::runtime_error("fftw planning failed");
    slot = std::move(p);
  }
  return *slot;
}

}  // namespace

std::vector<std::complex<double>> forward(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const auto& p = plans_for(n);
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_execute_dft_r2c(p.r2c, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

std::vector<double> inverse(std::span<const std::complex<double>> bins, std::size_t n) {
  if (bins.size() != n / 2 + 1) throw std::invalid_argument("fft::inverse: bin count mismatch");
  if (n == 0) return {};
  const auto& p = plans_for(n);
  std::vector<std::complex<double>> in(bins.begin(), bins.end());
  std::vector<double> out(n);
  fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(in.data()), out.data());
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

}  // namespace dcsr::fft
