#include "cscvideo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

#include "cscvideo/errors.hpp"

namespace cscvideo {

PsnrResult psnr(const double* a, const double* b, int width, int height) {
  if (width < 1 || height < 1) throw ParamError("psnr: empty image");
  const std::size_t n = static_cast<std::size_t>(width) * height;
  double mse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(n);
  PsnrResult r;
  if (mse == 0.0) {
    r.infinite = true;
    r.db = std::numeric_limits<double>::infinity();
  } else {
    r.db = 10.0 * std::log10(1.0 / mse);
  }
  return r;
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;
// Reference 5-scale exponents; shorter pyramids reuse a renormalized prefix.
constexpr double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

struct Image {
  int w = 0, h = 0;
  std::vector<double> v;
  Image() = default;
  Image(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_) {}
};

std::vector<double> gaussian_window() {
  std::vector<double> g(kWindow);
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - (kWindow - 1) / 2;
    g[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    sum += g[i];
  }
  for (auto& x : g) x /= sum;
  return g;
}

// Separable valid-region filtering: output is (w−10)×(h−10).
Image filter_valid(const Image& in, const std::vector<double>& g) {
  const int ow = in.w - kWindow + 1;
  const int oh = in.h - kWindow + 1;
  Image rows(ow, in.h);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += g[i] * in.v[static_cast<std::size_t>(y) * in.w + x + i];
      rows.v[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  Image out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += g[i] * rows.v[static_cast<std::size_t>(y + i) * ow + x];
      out.v[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

Image downsample2(const Image& in) {
  Image out(in.w / 2, in.h / 2);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      const std::size_t base = static_cast<std::size_t>(2 * y) * in.w + 2 * x;
      out.v[static_cast<std::size_t>(y) * out.w + x] =
          0.25 * (in.v[base] + in.v[base + 1] + in.v[base + in.w] + in.v[base + in.w + 1]);
    }
  }
  return out;
}

Image elementwise_product(const Image& a, const Image& b) {
  Image out(a.w, a.h);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

// Mean luminance and contrast-structure SSIM terms over all valid windows.
void ssim_terms(const Image& a, const Image& b, const std::vector<double>& g, double* luminance,
                double* contrast_structure) {
  const Image mu_a = filter_valid(a, g);
  const Image mu_b = filter_valid(b, g);
  const Image e_aa = filter_valid(elementwise_product(a, a), g);
  const Image e_bb = filter_valid(elementwise_product(b, b), g);
  const Image e_ab = filter_valid(elementwise_product(a, b), g);
  double lum = 0.0, cs = 0.0;
  const std::size_t n = mu_a.v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ma = mu_a.v[i], mb = mu_b.v[i];
    const double va = e_aa.v[i] - ma * ma;
    const double vb = e_bb.v[i] - mb * mb;
    const double cov = e_ab.v[i] - ma * mb;
    lum += (2.0 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
    cs += (2.0 * cov + kC2) / (va + vb + kC2);
  }
  *luminance = lum / static_cast<double>(n);
  *contrast_structure = cs / static_cast<double>(n);
}

}  // namespace

int ms_ssim_scales(int width, int height) {
  const int m = std::min(width, height);
  int scales = 0;
  while (scales < 5 && (m >> scales) >= 16) ++scales;
  return scales;
}

double ms_ssim(const double* a, const double* b, int width, int height) {
  if (std::min(width, height) < 32) {
    throw ParamError("ms_ssim requires min(W,H) >= 32, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
  const int scales = ms_ssim_scales(width, height);
  double weight_total = 0.0, standard_total = 0.0;
  for (int j = 0; j < scales; ++j) weight_total += kWeights[j];
  for (double w : kWeights) standard_total += w;
  const double renorm = standard_total / weight_total;

  const std::vector<double> g = gaussian_window();
  Image ia(width, height), ib(width, height);
  std::copy(a, a + ia.v.size(), ia.v.begin());
  std::copy(b, b + ib.v.size(), ib.v.begin());

  double score = 1.0;
  for (int j = 0; j < scales; ++j) {
    double lum = 0.0, cs = 0.0;
    ssim_terms(ia, ib, g, &lum, &cs);
    // Negative means would make fractional powers undefined; clamp at zero.
    const double term = (j + 1 == scales) ? std::max(lum * cs, 0.0) : std::max(cs, 0.0);
    score *= std::pow(term, kWeights[j] * renorm);
    if (j + 1 < scales) {
      ia = downsample2(ia);
      ib = downsample2(ib);
    }
  }
  return score;
}

QualityReport report(const FrameSequence& a, const FrameSequence& b) {
  if (a.width != b.width || a.height != b.height || a.frames != b.frames) {
    throw ParamError("report: frame sequences have different shapes");
  }
  QualityReport rep;
  rep.scales_used = ms_ssim_scales(a.width, a.height);
  double psnr_sum = 0.0;
  int psnr_finite = 0;
  double ssim_sum = 0.0;
  for (int t = 0; t < a.frames; ++t) {
    const PsnrResult p = psnr(a.frame(t), b.frame(t), a.width, a.height);
    rep.frame_psnr.push_back(p);
    if (!p.infinite) {
      psnr_sum += p.db;
      ++psnr_finite;
    }
    const double s = ms_ssim(a.frame(t), b.frame(t), a.width, a.height);
    rep.frame_ms_ssim.push_back(s);
    ssim_sum += s;
  }
  if (psnr_finite == 0) {
    rep.mean_psnr.infinite = true;
    rep.mean_psnr.db = std::numeric_limits<double>::infinity();
  } else {
    rep.mean_psnr.db = psnr_sum / psnr_finite;
  }
  rep.mean_ms_ssim = ssim_sum / a.frames;
  return rep;
}

namespace {

std::string psnr_field(const PsnrResult& p) {
  if (p.infinite) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", p.db);
  return buf;
}

}  // namespace

void write_report_csv(const QualityReport& rep, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "frame_index,psnr_db,ms_ssim\n";
  char buf[32];
  for (std::size_t t = 0; t < rep.frame_psnr.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.6f", rep.frame_ms_ssim[t]);
    out << t << "," << psnr_field(rep.frame_psnr[t]) << "," << buf << "\n";
  }
  std::snprintf(buf, sizeof(buf), "%.6f", rep.mean_ms_ssim);
  out << "mean," << psnr_field(rep.mean_psnr) << "," << buf << "\n";
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace cscvideo
