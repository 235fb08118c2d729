#pragma once

#include <complex>

namespace cscvideo {

// Real 2D FFT pair for fixed-size H×W row-major arrays, wrapping FFTW's
// r2c/c2r transforms. The forward spectrum is the packed half-plane,
// H × (W/2+1) row-major, unnormalized; inverse applies the 1/(H·W) factor.
// Each instance owns aligned scratch buffers, so concurrent calls on one
// instance are not allowed; distinct instances are independent.
class Fft2 {
 public:
  Fft2(int height, int width);
  ~Fft2();
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  int height() const { return height_; }
  int width() const { return width_; }
  int spectrum_cols() const { return width_ / 2 + 1; }
  int spectrum_size() const { return height_ * spectrum_cols(); }

  void forward(const double* src, std::complex<double>* dst);
  void inverse(const std::complex<double>* src, double* dst);

  // Number of real-domain coefficients each packed bin represents (1 for the
  // self-conjugate columns, 2 for the rest); used for Parseval-style sums.
  double bin_weight(int index) const {
    const int x = index % spectrum_cols();
    return (x == 0 || 2 * x == width_) ? 1.0 : 2.0;
  }

 private:
  int height_;
  int width_;
  double* real_buf_;
  void* cplx_buf_;
  void* plan_fwd_;
  void* plan_inv_;
};

}  // namespace cscvideo
