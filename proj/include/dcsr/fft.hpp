#pragma once

#include <complex>
#include <span>
#include <vector>

namespace dcsr::fft {

/// Unnormalized forward DFT of a real sequence, X_m = sum_j x_j exp(-2 pi i m j / n).
/// Returns the n/2 + 1 non-negative frequency bins.
std::vector<std::complex<double>> forward(std::span<const double> x);

/// Inverse of forward() including the 1/n factor. `bins` must hold n/2 + 1 entries;
/// the imaginary parts of the self-conjugate bins are ignored (real projection).
std::vector<double> inverse(std::span<const std::complex<double>> bins, std::size_t n);

/// Integer wavenumber magnitude of DFT bin m for length n: min(m, n - m).
inline std::size_t wavenumber(std::size_t m, std::size_t n) { return m <= n - m ? m : n - m; }

}  // namespace dcsr::fft
