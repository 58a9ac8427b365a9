#pragma once

#include <complex>
#include <vector>

namespace nft::fft {

/// In-place unnormalized DFT, X[k] = sum x[n] exp(-2 pi j k n / N).
void forward(std::vector<std::complex<double>>& x);
/// In-place unnormalized inverse DFT, x[n] = sum X[k] exp(+2 pi j k n / N).
void backward(std::vector<std::complex<double>>& x);

}  // namespace nft::fft
