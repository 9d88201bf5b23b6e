#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace recon {

/// Linear convolution with a fixed kernel through FFTW. The kernel spectrum
/// is computed once; apply() may be called concurrently.
class Convolver {
 public:
  Convolver(std::vector<double> kernel, std::size_t signal_length);

  /// Full linear convolution, length signal_length + kernel_length - 1.
  std::vector<double> apply(std::span<const double> signal) const;

  std::size_t signal_length() const { return signal_length_; }
  std::size_t kernel_length() const { return kernel_length_; }

 private:
  std::size_t signal_length_ = 0, kernel_length_ = 0, fft_length_ = 0;
  std::vector<std::complex<double>> kernel_spectrum_;
};

}  // namespace recon
