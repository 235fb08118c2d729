#include "cscvideo/csc_training.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <random>
#include <utility>

#include "cscvideo/csc_solver.hpp"
#include "cscvideo/errors.hpp"
#include "fft2.hpp"

namespace cscvideo {
namespace {

using Cplx = std::complex<double>;

void embed_kernel(const double* kernel, int size, int width, int height, double* plane) {
  std::fill(plane, plane + static_cast<std::size_t>(width) * height, 0.0);
  const int c = size / 2;
  for (int ky = 0; ky < size; ++ky) {
    for (int kx = 0; kx < size; ++kx) {
      int y = (ky - c) % height;
      if (y < 0) y += height;
      int x = (kx - c) % width;
      if (x < 0) x += width;
      plane[static_cast<std::size_t>(y) * width + x] += kernel[ky * size + kx];
    }
  }
}

void crop_kernel(const double* plane, int width, int height, int size, double* kernel) {
  const int c = size / 2;
  for (int ky = 0; ky < size; ++ky) {
    for (int kx = 0; kx < size; ++kx) {
      int y = (ky - c) % height;
      if (y < 0) y += height;
      int x = (kx - c) % width;
      if (x < 0) x += width;
      kernel[ky * size + kx] = plane[static_cast<std::size_t>(y) * width + x];
    }
  }
}

struct TrainImage {
  int group = 0;
  std::vector<double> pixels;
  std::vector<Cplx> pixels_hat;
  std::vector<Cplx> codes_hat;  // K slices of the group's spectrum size
  FeatureMaps codes;            // accepted codes, warm start for the next pass
  std::vector<double> filter_l1;
  double codes_l1 = 0.0;
  double data_term = 0.0;
};

struct SizeGroup {
  int width = 0;
  int height = 0;
  std::unique_ptr<Fft2> fft;
  std::vector<int> members;
  std::vector<double> plane;      // scratch, width*height
  std::vector<Cplx> filters_hat;  // K slices
  std::vector<Cplx> accum_hat;    // K slices
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// FFT of every kernel embedded at the group's size.
void fill_filter_spectra(SizeGroup& g, const std::vector<double>& coeffs, int count, int size) {
  const std::size_t kernel_n = static_cast<std::size_t>(size) * size;
  const std::size_t spec_n = g.fft->spectrum_size();
  g.filters_hat.resize(static_cast<std::size_t>(count) * spec_n);
  for (int k = 0; k < count; ++k) {
    embed_kernel(coeffs.data() + k * kernel_n, size, g.width, g.height, g.plane.data());
    g.fft->forward(g.plane.data(), g.filters_hat.data() + k * spec_n);
  }
}

// Least-squares filter update: conjugate gradients on the normal equations of
// coeffs -> sum_k d_k * z_ik over all images, restricted to the s×s supports.
class FilterLsq {
 public:
  FilterLsq(std::vector<SizeGroup>& groups, std::vector<TrainImage>& images, int count, int size)
      : groups_(groups), images_(images), count_(count), size_(size) {}

  // out = Gᵀ(G coeffs), with G evaluated against the current code spectra.
  void normal_apply(const std::vector<double>& coeffs, std::vector<double>& out) {
    const std::size_t kernel_n = static_cast<std::size_t>(size_) * size_;
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> kernel(kernel_n);
    for (auto& g : groups_) {
      if (g.members.empty()) continue;
      const std::size_t spec_n = g.fft->spectrum_size();
      fill_filter_spectra(g, coeffs, count_, size_);
      std::fill(g.accum_hat.begin(), g.accum_hat.end(), Cplx(0.0, 0.0));
      std::vector<Cplx> y_hat(spec_n);
      for (int idx : g.members) {
        const TrainImage& im = images_[idx];
        std::fill(y_hat.begin(), y_hat.end(), Cplx(0.0, 0.0));
        for (int k = 0; k < count_; ++k) {
          const Cplx* dk = g.filters_hat.data() + k * spec_n;
          const Cplx* zk = im.codes_hat.data() + k * spec_n;
          for (std::size_t f = 0; f < spec_n; ++f) y_hat[f] += dk[f] * zk[f];
        }
        for (int k = 0; k < count_; ++k) {
          Cplx* acc = g.accum_hat.data() + k * spec_n;
          const Cplx* zk = im.codes_hat.data() + k * spec_n;
          for (std::size_t f = 0; f < spec_n; ++f) acc[f] += std::conj(zk[f]) * y_hat[f];
        }
      }
      for (int k = 0; k < count_; ++k) {
        g.fft->inverse(g.accum_hat.data() + k * spec_n, g.plane.data());
        crop_kernel(g.plane.data(), g.width, g.height, size_, kernel.data());
        double* dst = out.data() + k * kernel_n;
        for (std::size_t i = 0; i < kernel_n; ++i) dst[i] += kernel[i];
      }
    }
  }

  // out = Gᵀ x over all images.
  void normal_rhs(std::vector<double>& out) {
    const std::size_t kernel_n = static_cast<std::size_t>(size_) * size_;
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> kernel(kernel_n);
    for (auto& g : groups_) {
      if (g.members.empty()) continue;
      const std::size_t spec_n = g.fft->spectrum_size();
      std::fill(g.accum_hat.begin(), g.accum_hat.end(), Cplx(0.0, 0.0));
      for (int idx : g.members) {
        const TrainImage& im = images_[idx];
        for (int k = 0; k < count_; ++k) {
          Cplx* acc = g.accum_hat.data() + k * spec_n;
          const Cplx* zk = im.codes_hat.data() + k * spec_n;
          for (std::size_t f = 0; f < spec_n; ++f) acc[f] += std::conj(zk[f]) * im.pixels_hat[f];
        }
      }
      for (int k = 0; k < count_; ++k) {
        g.fft->inverse(g.accum_hat.data() + k * spec_n, g.plane.data());
        crop_kernel(g.plane.data(), g.width, g.height, size_, kernel.data());
        double* dst = out.data() + k * kernel_n;
        for (std::size_t i = 0; i < kernel_n; ++i) dst[i] += kernel[i];
      }
    }
  }

  std::vector<double> solve(std::vector<double> start, int max_iters) {
    std::vector<double> x = std::move(start);
    std::vector<double> b(x.size());
    normal_rhs(b);
    std::vector<double> r(x.size());
    normal_apply(x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    std::vector<double> p = r;
    std::vector<double> ap(x.size());
    double rs = dot(r, r);
    const double target = 1e-16 * std::max(dot(b, b), 1e-300);
    for (int it = 0; it < max_iters && rs > target; ++it) {
      normal_apply(p, ap);
      const double denom = dot(p, ap);
      if (denom <= 0.0) break;
      const double alpha = rs / denom;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += alpha * p[i];
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= alpha * ap[i];
      const double rs_next = dot(r, r);
      const double beta = rs_next / rs;
      rs = rs_next;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    }
    return x;
  }

 private:
  std::vector<SizeGroup>& groups_;
  std::vector<TrainImage>& images_;
  int count_;
  int size_;
};

// ½‖x − Σ_k d_k ∗ z_k‖² for one image, from spectra already in g.filters_hat.
double data_term_from_spectra(SizeGroup& g, const TrainImage& im, int count) {
  const std::size_t spec_n = g.fft->spectrum_size();
  std::vector<Cplx> y_hat(spec_n, Cplx(0.0, 0.0));
  for (int k = 0; k < count; ++k) {
    const Cplx* dk = g.filters_hat.data() + k * spec_n;
    const Cplx* zk = im.codes_hat.data() + k * spec_n;
    for (std::size_t f = 0; f < spec_n; ++f) y_hat[f] += dk[f] * zk[f];
  }
  g.fft->inverse(y_hat.data(), g.plane.data());
  double s = 0.0;
  for (std::size_t i = 0; i < im.pixels.size(); ++i) {
    const double r = im.pixels[i] - g.plane[i];
    s += r * r;
  }
  return 0.5 * s;
}

}  // namespace

std::vector<double> project_filter(std::vector<double> kernel) {
  double sq = 0.0;
  for (double v : kernel) sq += v * v;
  if (sq > 1.0) {
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : kernel) v *= inv;
  }
  return kernel;
}

FilterBank random_filter_bank(int count, int size, std::uint64_t seed) {
  if (count < 1) throw ParamError("random_filter_bank: count must be positive");
  if (size < 1 || size % 2 == 0) {
    throw ParamError("random_filter_bank: size must be odd and positive");
  }
  FilterBank bank(count, size);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t kernel_n = static_cast<std::size_t>(size) * size;
  for (int k = 0; k < count; ++k) {
    double* f = bank.filter(k);
    double sq = 0.0;
    for (std::size_t i = 0; i < kernel_n; ++i) {
      f[i] = gauss(rng);
      sq += f[i] * f[i];
    }
    if (sq <= 0.0) {
      f[0] = 1.0;
      continue;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t i = 0; i < kernel_n; ++i) f[i] *= inv;
  }
  return bank;
}

GrayImage contrast_normalize(const GrayImage& image) {
  constexpr int kRadius = 6;
  constexpr double kSigma = 2.0;
  constexpr double kFloor = 0.1;
  double taps[2 * kRadius + 1];
  double tap_sum = 0.0;
  for (int i = -kRadius; i <= kRadius; ++i) {
    taps[i + kRadius] = std::exp(-0.5 * (i * i) / (kSigma * kSigma));
    tap_sum += taps[i + kRadius];
  }
  for (double& t : taps) t /= tap_sum;

  const int w = image.width;
  const int h = image.height;
  auto blur = [&](const std::vector<double>& src) {
    std::vector<double> tmp(src.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = -kRadius; i <= kRadius; ++i) {
          const int xi = std::clamp(x + i, 0, w - 1);
          s += taps[i + kRadius] * src[static_cast<std::size_t>(y) * w + xi];
        }
        tmp[static_cast<std::size_t>(y) * w + x] = s;
      }
    }
    std::vector<double> out(src.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        for (int i = -kRadius; i <= kRadius; ++i) {
          const int yi = std::clamp(y + i, 0, h - 1);
          s += taps[i + kRadius] * tmp[static_cast<std::size_t>(yi) * w + x];
        }
        out[static_cast<std::size_t>(y) * w + x] = s;
      }
    }
    return out;
  };

  std::vector<double> mean = blur(image.pixels);
  std::vector<double> sq(image.pixels.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = image.pixels[i] * image.pixels[i];
  std::vector<double> mean_sq = blur(sq);

  GrayImage out(w, h);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double var = std::max(mean_sq[i] - mean[i] * mean[i], 0.0);
    out.pixels[i] = (image.pixels[i] - mean[i]) / (std::sqrt(var) + kFloor);
  }
  return out;
}

CscTrainResult train_filters(const std::vector<GrayImage>& images, const CscTrainConfig& cfg) {
  if (images.empty()) throw ParamError("train_filters: need at least one image");
  if (cfg.count < 1) throw ParamError("train_filters: count must be positive");
  if (cfg.size < 1 || cfg.size % 2 == 0) {
    throw ParamError("train_filters: size must be odd and positive");
  }
  if (cfg.alternations < 1) throw ParamError("train_filters: alternations must be positive");
  if (cfg.inner_iters < 1) throw ParamError("train_filters: inner_iters must be positive");
  if (!(cfg.sparsity_weight >= 0.0)) {
    throw ParamError("train_filters: sparsity_weight must be non-negative");
  }
  for (const auto& im : images) {
    if (im.width < cfg.size || im.height < cfg.size) {
      throw ParamError("train_filters: every image must be at least size x size");
    }
  }

  const int count = cfg.count;
  const int size = cfg.size;
  const double w = cfg.sparsity_weight;

  std::vector<SizeGroup> groups;
  std::vector<TrainImage> data(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    int gi = -1;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].width == images[i].width && groups[g].height == images[i].height) {
        gi = static_cast<int>(g);
        break;
      }
    }
    if (gi < 0) {
      SizeGroup g;
      g.width = images[i].width;
      g.height = images[i].height;
      g.fft = std::make_unique<Fft2>(g.height, g.width);
      g.plane.resize(static_cast<std::size_t>(g.width) * g.height);
      g.accum_hat.resize(static_cast<std::size_t>(count) * g.fft->spectrum_size());
      gi = static_cast<int>(groups.size());
      groups.push_back(std::move(g));
    }
    groups[gi].members.push_back(static_cast<int>(i));
    TrainImage& im = data[i];
    im.group = gi;
    im.pixels = images[i].pixels;
    im.pixels_hat.resize(groups[gi].fft->spectrum_size());
    groups[gi].fft->forward(im.pixels.data(), im.pixels_hat.data());
    im.codes_hat.assign(static_cast<std::size_t>(count) * groups[gi].fft->spectrum_size(),
                        Cplx(0.0, 0.0));
    im.filter_l1.assign(count, 0.0);
    im.codes_l1 = 0.0;
    double sq = 0.0;
    for (double v : im.pixels) sq += v * v;
    im.data_term = 0.5 * sq;
  }

  FilterBank bank = random_filter_bank(count, size, cfg.seed);

  CscParams code_params;
  code_params.beta_d = 1.0;
  code_params.beta_1 = w;
  code_params.beta_2 = 0.0;
  // Keep the per-iteration shrink w/rho at 0.1 on the unit-contrast inputs so
  // the splitting converges in the few dozen inner iterations it is given.
  code_params.rho = 10.0 * w;
  code_params.outer_iters = cfg.inner_iters;
  code_params.subtract_mean = false;
  code_params.warm_start = false;

  CscTrainResult result;
  double total = 0.0;
  for (const auto& im : data) total += im.data_term + w * im.codes_l1;

  FilterLsq lsq(groups, data, count, size);
  const std::size_t kernel_n = static_cast<std::size_t>(size) * size;
  std::mt19937_64 revival_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> revival_gauss(0.0, 1.0);

  for (int alt = 0; alt < cfg.alternations; ++alt) {
    // Sparse coding half step; kept per image only if it improves that
    // image's share of the objective.
    for (std::size_t i = 0; i < data.size(); ++i) {
      TrainImage& im = data[i];
      SizeGroup& g = groups[im.group];
      ShutterFunction shutter;
      shutter.width = g.width;
      shutter.height = g.height;
      shutter.frames = 1;
      shutter.bump_length = 1;
      shutter.seed = 0;
      shutter.mask.assign(im.pixels.size(), 1);
      CodedImage coded(g.width, g.height);
      coded.data = im.pixels;
      // Resume from the codes kept last pass so alternations keep refining
      // the same iterate instead of re-solving from scratch under the same
      // iteration cap.
      CscResult solved = im.codes.data.empty()
                             ? reconstruct_csc(coded, shutter, bank, code_params)
                             : reconstruct_csc(coded, shutter, bank, code_params, im.codes);
      std::vector<double> per_filter(count, 0.0);
      const std::size_t plane_n = im.pixels.size();
      for (int k = 0; k < count; ++k) {
        const double* zk = solved.maps.map(k, 0);
        for (std::size_t p = 0; p < plane_n; ++p) per_filter[k] += std::abs(zk[p]);
      }
      double l1 = 0.0;
      for (double v : per_filter) l1 += v;
      // Score the sparse codes that would actually be kept, not the solver's
      // primal iterate, so the objective matches the stored spectra.
      const FrameSequence approx = synthesize(bank, solved.maps);
      double sq = 0.0;
      for (std::size_t p = 0; p < plane_n; ++p) {
        const double r = im.pixels[p] - approx.data[p];
        sq += r * r;
      }
      if (0.5 * sq + w * l1 <= im.data_term + w * im.codes_l1) {
        im.data_term = 0.5 * sq;
        im.codes_l1 = l1;
        im.filter_l1 = std::move(per_filter);
        const std::size_t spec_n = g.fft->spectrum_size();
        for (int k = 0; k < count; ++k) {
          g.fft->forward(solved.maps.map(k, 0), im.codes_hat.data() + k * spec_n);
        }
        im.codes = std::move(solved.maps);
      }
    }
    total = 0.0;
    for (const auto& im : data) total += im.data_term + w * im.codes_l1;

    // A kernel no image uses contributes nothing; redraw it so later
    // alternations can put it to work. Leaves the objective untouched.
    for (int k = 0; k < count; ++k) {
      double activity = 0.0;
      for (const auto& im : data) activity += im.filter_l1[k];
      if (activity == 0.0) {
        double* f = bank.filter(k);
        double sq = 0.0;
        for (std::size_t i = 0; i < kernel_n; ++i) {
          f[i] = revival_gauss(revival_rng);
          sq += f[i] * f[i];
        }
        const double inv = sq > 0.0 ? 1.0 / std::sqrt(sq) : 0.0;
        for (std::size_t i = 0; i < kernel_n; ++i) f[i] *= inv;
        if (sq <= 0.0) f[0] = 1.0;
      }
    }

    // Dictionary half step, rolled back if the projection hurt. The normal
    // equations are small (count x s x s unknowns), so give CG a budget
    // independent of the coding iteration count.
    std::vector<double> coeffs = lsq.solve(bank.data, std::max(cfg.inner_iters, 200));
    for (int k = 0; k < count; ++k) {
      std::vector<double> kern(coeffs.begin() + k * kernel_n, coeffs.begin() + (k + 1) * kernel_n);
      kern = project_filter(std::move(kern));
      std::copy(kern.begin(), kern.end(), coeffs.begin() + k * kernel_n);
    }

    double cand_total = 0.0;
    std::vector<double> cand_data(data.size());
    for (auto& g : groups) {
      if (g.members.empty()) continue;
      fill_filter_spectra(g, coeffs, count, size);
      for (int idx : g.members) {
        cand_data[idx] = data_term_from_spectra(g, data[idx], count);
        cand_total += cand_data[idx] + w * data[idx].codes_l1;
      }
    }
    if (cand_total <= total) {
      bank.data = std::move(coeffs);
      for (std::size_t i = 0; i < data.size(); ++i) data[i].data_term = cand_data[i];
      total = cand_total;
    }
    result.objective.push_back(total);
  }

  result.bank = std::move(bank);
  return result;
}

GrayImage filter_mosaic(const FilterBank& bank) {
  if (bank.count < 1) throw ParamError("filter_mosaic: empty bank");
  const int s = bank.size;
  int grid = 1;
  while (grid * grid < bank.count) ++grid;
  GrayImage out(grid * (s + 1) + 1, grid * (s + 1) + 1);
  std::fill(out.pixels.begin(), out.pixels.end(), 0.5);
  const std::size_t kernel_n = static_cast<std::size_t>(s) * s;
  for (int k = 0; k < bank.count; ++k) {
    const double* f = bank.filter(k);
    double lo = f[0];
    double hi = f[0];
    for (std::size_t i = 0; i < kernel_n; ++i) {
      lo = std::min(lo, f[i]);
      hi = std::max(hi, f[i]);
    }
    const double span = hi - lo;
    const int gy = k / grid;
    const int gx = k % grid;
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        const double v = span > 1e-12 ? (f[y * s + x] - lo) / span : 0.5;
        out.at(gx * (s + 1) + 1 + x, gy * (s + 1) + 1 + y) = v;
      }
    }
  }
  return out;
}

}  // namespace cscvideo
