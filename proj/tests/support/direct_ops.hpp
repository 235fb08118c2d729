#pragma once

#include <cmath>
#include <vector>

#include "cscvideo/tensor.hpp"

// Straightforward loop implementations of every operator the solver uses,
// written independently of the library's FFT machinery so they can serve as
// oracles.
namespace testsupport {

inline std::vector<double> circ_conv2d(const double* kernel, int s, const double* img, int w,
                                       int h) {
  std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
  const int c = s / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < s; ++ky) {
        for (int kx = 0; kx < s; ++kx) {
          int sy = (y - (ky - c)) % h;
          if (sy < 0) sy += h;
          int sx = (x - (kx - c)) % w;
          if (sx < 0) sx += w;
          acc += kernel[ky * s + kx] * img[static_cast<std::size_t>(sy) * w + sx];
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

inline std::vector<double> circ_corr2d(const double* kernel, int s, const double* img, int w,
                                       int h) {
  std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
  const int c = s / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < s; ++ky) {
        for (int kx = 0; kx < s; ++kx) {
          int sy = (y + (ky - c)) % h;
          if (sy < 0) sy += h;
          int sx = (x + (kx - c)) % w;
          if (sx < 0) sx += w;
          acc += kernel[ky * s + kx] * img[static_cast<std::size_t>(sy) * w + sx];
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

inline cscvideo::FrameSequence direct_synthesize(const cscvideo::FilterBank& bank,
                                                 const cscvideo::FeatureMaps& maps) {
  cscvideo::FrameSequence out;
  out.width = maps.width;
  out.height = maps.height;
  out.frames = maps.frames;
  out.data.assign(static_cast<std::size_t>(maps.width) * maps.height * maps.frames, 0.0);
  for (int t = 0; t < maps.frames; ++t) {
    for (int k = 0; k < maps.count; ++k) {
      const auto conv = circ_conv2d(bank.filter(k), bank.size, maps.map(k, t), maps.width,
                                    maps.height);
      double* f = out.data.data() + static_cast<std::size_t>(t) * out.frame_size();
      for (std::size_t i = 0; i < conv.size(); ++i) f[i] += conv[i];
    }
  }
  return out;
}

inline cscvideo::FeatureMaps direct_conv_adjoint(const cscvideo::FilterBank& bank,
                                                 const cscvideo::FrameSequence& vol) {
  cscvideo::FeatureMaps out;
  out.count = bank.count;
  out.width = vol.width;
  out.height = vol.height;
  out.frames = vol.frames;
  out.data.assign(static_cast<std::size_t>(bank.count) * vol.frames * vol.height * vol.width, 0.0);
  for (int t = 0; t < vol.frames; ++t) {
    for (int k = 0; k < bank.count; ++k) {
      const auto corr = circ_corr2d(bank.filter(k), bank.size, vol.frame(t), vol.width,
                                    vol.height);
      double* m = out.map(k, t);
      for (std::size_t i = 0; i < corr.size(); ++i) m[i] = corr[i];
    }
  }
  return out;
}

inline std::vector<double> direct_measure(const std::vector<double>& volume,
                                          const cscvideo::ShutterFunction& s) {
  const std::size_t plane = static_cast<std::size_t>(s.width) * s.height;
  std::vector<double> out(plane, 0.0);
  for (int t = 0; t < s.frames; ++t) {
    for (std::size_t p = 0; p < plane; ++p) {
      if (s.mask[static_cast<std::size_t>(t) * plane + p]) {
        out[p] += volume[static_cast<std::size_t>(t) * plane + p];
      }
    }
  }
  return out;
}

inline std::vector<double> direct_measure_adjoint(const std::vector<double>& image,
                                                  const cscvideo::ShutterFunction& s) {
  const std::size_t plane = static_cast<std::size_t>(s.width) * s.height;
  std::vector<double> out(plane * s.frames, 0.0);
  for (int t = 0; t < s.frames; ++t) {
    for (std::size_t p = 0; p < plane; ++p) {
      if (s.mask[static_cast<std::size_t>(t) * plane + p]) {
        out[static_cast<std::size_t>(t) * plane + p] = image[p];
      }
    }
  }
  return out;
}

inline std::vector<double> direct_temporal_diff(const cscvideo::FeatureMaps& maps) {
  if (maps.frames < 2) return {};
  const std::size_t plane = maps.map_size();
  std::vector<double> out(static_cast<std::size_t>(maps.count) * (maps.frames - 1) * plane);
  std::size_t idx = 0;
  for (int k = 0; k < maps.count; ++k) {
    for (int t = 0; t + 1 < maps.frames; ++t) {
      const double* a = maps.map(k, t);
      const double* b = maps.map(k, t + 1);
      for (std::size_t i = 0; i < plane; ++i) out[idx++] = b[i] - a[i];
    }
  }
  return out;
}

inline cscvideo::FeatureMaps direct_temporal_diff_adjoint(const std::vector<double>& diffs,
                                                          int count, int width, int height,
                                                          int frames) {
  cscvideo::FeatureMaps out;
  out.count = count;
  out.width = width;
  out.height = height;
  out.frames = frames;
  out.data.assign(static_cast<std::size_t>(count) * frames * height * width, 0.0);
  if (frames < 2) return out;
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  for (int k = 0; k < count; ++k) {
    for (int t = 0; t + 1 < frames; ++t) {
      const double* g = diffs.data() + (static_cast<std::size_t>(k) * (frames - 1) + t) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        out.map(k, t)[i] -= g[i];
        out.map(k, t + 1)[i] += g[i];
      }
    }
  }
  return out;
}

inline double direct_objective(const cscvideo::FeatureMaps& maps, const cscvideo::FilterBank& bank,
                               const cscvideo::CodedImage& coded,
                               const cscvideo::ShutterFunction& shutter, double beta_d,
                               double beta_1, double beta_2) {
  const auto synth = direct_synthesize(bank, maps);
  const auto measured = direct_measure(synth.data, shutter);
  double data = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double r = coded.data[i] - measured[i];
    data += r * r;
  }
  double l1 = 0.0;
  for (double v : maps.data) l1 += std::abs(v);
  double tv = 0.0;
  for (double v : direct_temporal_diff(maps)) tv += std::abs(v);
  return 0.5 * beta_d * data + beta_1 * l1 + beta_2 * tv;
}

// DᵀD + I + ∇ᵀ∇ through the direct operators above.
inline cscvideo::FeatureMaps direct_quadratic_operator(const cscvideo::FeatureMaps& maps,
                                                       const cscvideo::FilterBank& bank) {
  const auto dtd = direct_conv_adjoint(bank, direct_synthesize(bank, maps));
  const auto lap = direct_temporal_diff_adjoint(direct_temporal_diff(maps), maps.count, maps.width,
                                                maps.height, maps.frames);
  cscvideo::FeatureMaps out = maps;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += dtd.data[i] + lap.data[i];
  return out;
}

}  // namespace testsupport
