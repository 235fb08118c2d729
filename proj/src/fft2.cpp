#include "fft2.hpp"

#include <fftw3.h>

#include <cstring>

#include "cscvideo/errors.hpp"

namespace cscvideo {

Fft2::Fft2(int height, int width) : height_(height), width_(width) {
  if (height < 1 || width < 1) throw ParamError("FFT dimensions must be positive");
  real_buf_ = fftw_alloc_real(static_cast<std::size_t>(height) * width);
  auto* spec = fftw_alloc_complex(static_cast<std::size_t>(spectrum_size()));
  cplx_buf_ = spec;
  if (!real_buf_ || !spec) throw IoError("FFT buffer allocation failed");
  // FFTW_ESTIMATE keeps plan selection independent of runtime timing, so
  // results are reproducible across runs and machines.
  plan_fwd_ = fftw_plan_dft_r2c_2d(height, width, real_buf_, spec, FFTW_ESTIMATE);
  plan_inv_ = fftw_plan_dft_c2r_2d(height, width, spec, real_buf_, FFTW_ESTIMATE);
  if (!plan_fwd_ || !plan_inv_) throw IoError("FFT planning failed");
}

Fft2::~Fft2() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
  fftw_free(real_buf_);
  fftw_free(cplx_buf_);
}

void Fft2::forward(const double* src, std::complex<double>* dst) {
  std::memcpy(real_buf_, src, sizeof(double) * height_ * width_);
  fftw_execute(static_cast<fftw_plan>(plan_fwd_));
  std::memcpy(dst, cplx_buf_, sizeof(std::complex<double>) * spectrum_size());
}

void Fft2::inverse(const std::complex<double>* src, double* dst) {
  // c2r destroys its input, so the spectrum goes through the owned buffer.
  std::memcpy(cplx_buf_, src, sizeof(std::complex<double>) * spectrum_size());
  fftw_execute(static_cast<fftw_plan>(plan_inv_));
  const double scale = 1.0 / (static_cast<double>(height_) * width_);
  const std::size_t n = static_cast<std::size_t>(height_) * width_;
  for (std::size_t i = 0; i < n; ++i) dst[i] = real_buf_[i] * scale;
}

}  // namespace cscvideo
