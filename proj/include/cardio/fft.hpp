#pragma once

#include <complex>
#include <vector>

namespace cardio::fft {

// Real-to-complex DFT, unnormalized. Output has n/2 + 1 bins.
std::vector<std::complex<double>> rfft(const std::vector<double>& x);

// Inverse of rfft with 1/n_out normalization. `spectrum` may describe a
// different original length; only bins up to n_out/2 are consumed.
std::vector<double> irfft(const std::vector<std::complex<double>>& spectrum,
                          std::size_t n_out);

}  // namespace cardio::fft
