#include "recon/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include "recon/error.hpp"

namespace recon {

namespace {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

// FFTW planning is not thread safe; execution with the new-array interface is.
std::mutex plan_mutex;

const PlanPair& plans_for(std::size_t n) {
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  PlanPair p;
  p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  p.backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  require(p.forward && p.backward, ErrorKind::numeric, "FFTW planning failed");
  return cache.emplace(n, p).first->second;
}

struct Buffers {
  double* real;
  fftw_complex* spec;
  explicit Buffers(std::size_t n) : real(fftw_alloc_real(n)), spec(fftw_alloc_complex(n / 2 + 1)) {}
  ~Buffers() {
    fftw_free(real);
    fftw_free(spec);
  }
  Buffers(const Buffers&) = delete;
  Buffers& operator=(const Buffers&) = delete;
};

}  // namespace

Convolver::Convolver(std::vector<double> kernel, std::size_t signal_length)
    : signal_length_(signal_length), kernel_length_(kernel.size()) {
  require(!kernel.empty() && signal_length > 0, ErrorKind::argument, "empty convolution operand");
  fft_length_ = 1;
  while (fft_length_ < signal_length_ + kernel_length_ - 1) fft_length_ <<= 1;
  const PlanPair& p = plans_for(fft_length_);
  Buffers buf(fft_length_);
  std::memset(buf.real, 0, sizeof(double) * fft_length_);
  std::memcpy(buf.real, kernel.data(), sizeof(double) * kernel_length_);
  fftw_execute_dft_r2c(p.forward, buf.real, buf.spec);
  kernel_spectrum_.resize(fft_length_ / 2 + 1);
  for (std::size_t i = 0; i < kernel_spectrum_.size(); ++i) kernel_spectrum_[i] = {buf.spec[i][0], buf.spec[i][1]};
}

std::vector<double> Convolver::apply(std::span<const double> signal) const {
  require(signal.size() == signal_length_, ErrorKind::argument, "signal length differs from plan");
  const PlanPair& p = plans_for(fft_length_);
  Buffers buf(fft_length_);
  std::memset(buf.real, 0, sizeof(double) * fft_length_);
  std::memcpy(buf.real, signal.data(), sizeof(double) * signal_length_);
  fftw_execute_dft_r2c(p.forward, buf.real, buf.spec);
  for (std::size_t i = 0; i < kernel_spectrum_.size(); ++i) {
    const std::complex<double> v = std::complex<double>(buf.spec[i][0], buf.spec[i][1]) * kernel_spectrum_[i];
    buf.spec[i][0] = v.real();
    buf.spec[i][1] = v.imag();
  }
  fftw_execute_dft_c2r(p.backward, buf.spec, buf.real);
  const std::size_t n = signal_length_ + kernel_length_ - 1;
  std::vector<double> out(n);
  const double scale = 1.0 / static_cast<double>(fft_length_);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf.real[i] * scale;
  return out;
}

}  // namespace recon
