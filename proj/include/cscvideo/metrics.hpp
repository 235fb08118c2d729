#pragma once

#include <filesystem>
#include <vector>

#include "cscvideo/tensor.hpp"

namespace cscvideo {

struct PsnrResult {
  double db = 0.0;
  bool infinite = false;
};

// 10·log10(1/MSE) with peak 1.0; identical inputs report the infinite flag.
PsnrResult psnr(const double* a, const double* b, int width, int height);

// Multi-scale structural similarity on [0,1] images. Scale count adapts to
// min(5, largest n with min(W,H)/2^(n−1) ≥ 16); per-scale exponents are the
// reference weights renormalized to their standard 5-scale total. Requires
// min(W,H) ≥ 32.
double ms_ssim(const double* a, const double* b, int width, int height);

int ms_ssim_scales(int width, int height);

struct QualityReport {
  std::vector<PsnrResult> frame_psnr;
  std::vector<double> frame_ms_ssim;
  PsnrResult mean_psnr;  // mean over finite frames; infinite only if all are
  double mean_ms_ssim = 0.0;
  int scales_used = 0;
};

QualityReport report(const FrameSequence& a, const FrameSequence& b);

// CSV rows: frame_index, psnr_db (or "inf"), ms_ssim; final row "mean".
void write_report_csv(const QualityReport& rep, const std::filesystem::path& path);

}  // namespace cscvideo
