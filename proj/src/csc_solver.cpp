#include "cscvideo/csc_solver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <string>

#include "cscvideo/coded_exposure.hpp"
#include "cscvideo/errors.hpp"
#include "fft2.hpp"

namespace cscvideo {

namespace {

using cplx = std::complex<double>;

void check_bank(const FilterBank& bank) {
  if (bank.count < 1 || bank.size < 1) throw ParamError("empty filter bank");
  if (bank.size % 2 == 0) throw ParamError("filter size must be odd");
  for (int k = 0; k < bank.count; ++k) {
    double norm2 = 0.0;
    const double* f = bank.filter(k);
    for (int i = 0; i < bank.size * bank.size; ++i) norm2 += f[i] * f[i];
    if (norm2 > 1.0 + 3e-9) {
      throw ParamError("filter " + std::to_string(k) + " exceeds unit norm");
    }
  }
}

void check_maps(const FeatureMaps& maps, const FilterBank& bank) {
  if (maps.count != bank.count) throw ParamError("filter count does not match feature maps");
  if (maps.width < 1 || maps.height < 1 || maps.frames < 1) {
    throw ParamError("empty feature maps");
  }
}

// Filters are embedded into the H×W plane with the kernel center at the
// origin, so a centered unit impulse becomes the identity in frequency space.
void embed_filter(const double* f, int size, int width, int height, double* padded) {
  std::fill(padded, padded + static_cast<std::size_t>(width) * height, 0.0);
  const int c = size / 2;
  for (int ky = 0; ky < size; ++ky) {
    for (int kx = 0; kx < size; ++kx) {
      const int yy = ((ky - c) % height + height) % height;
      const int xx = ((kx - c) % width + width) % width;
      padded[static_cast<std::size_t>(yy) * width + xx] += f[ky * size + kx];
    }
  }
}

// Frequency-domain machinery shared by the public operator applications, the
// one-shot quadratic solve, and the full reconstruction loop. Spectra are kept
// slice-major: index (k·T + t)·F + bin.
class QuadContext {
 public:
  QuadContext(const FilterBank& bank, int width, int height, int frames)
      : width_(width),
        height_(height),
        frames_(frames),
        count_(bank.count),
        fft_(height, width),
        bins_(fft_.spectrum_size()) {
    d_hat_.resize(static_cast<std::size_t>(count_) * bins_);
    std::vector<double> padded(static_cast<std::size_t>(width) * height);
    for (int k = 0; k < count_; ++k) {
      embed_filter(bank.filter(k), bank.size, width, height, padded.data());
      fft_.forward(padded.data(), d_hat_.data() + static_cast<std::size_t>(k) * bins_);
    }
    u_hat_.resize(static_cast<std::size_t>(count_) * frames_ * bins_);
    rhs_hat_.resize(u_hat_.size());
  }

  int bins() const { return bins_; }

  cplx* u_hat(int k, int t) {
    return u_hat_.data() + (static_cast<std::size_t>(k) * frames_ + t) * bins_;
  }
  cplx* rhs_hat(int k, int t) {
    return rhs_hat_.data() + (static_cast<std::size_t>(k) * frames_ + t) * bins_;
  }
  const cplx* d_hat(int k) const { return d_hat_.data() + static_cast<std::size_t>(k) * bins_; }

  void load_u(const FeatureMaps& maps) {
    for (int k = 0; k < count_; ++k) {
      for (int t = 0; t < frames_; ++t) fft_.forward(maps.map(k, t), u_hat(k, t));
    }
  }

  void extract_u(FeatureMaps& maps) {
    for (int k = 0; k < count_; ++k) {
      for (int t = 0; t < frames_; ++t) fft_.inverse(u_hat(k, t), maps.map(k, t));
    }
  }

  // Fills u_hat with the minimum-norm preimage of one image under D, copied
  // across all frames: per bin the constraint is the rank-one system
  // Σ_k d̂_k û_k = x̂, whose least-norm solution is û_k = conj(d̂_k)·x̂ / Σ_j|d̂_j|².
  // Bins the bank cannot reach (zero-mean filters at DC) are left at zero.
  void seed_constant_volume(const double* image) {
    std::vector<cplx> x_hat(bins_);
    fft_.forward(image, x_hat.data());
    std::vector<double> den(bins_, 0.0);
    for (int k = 0; k < count_; ++k) {
      const cplx* d = d_hat(k);
      for (int f = 0; f < bins_; ++f) den[f] += std::norm(d[f]);
    }
    double den_max = 0.0;
    for (double v : den) den_max = std::max(den_max, v);
    const double floor = 1e-12 * den_max;
    for (int k = 0; k < count_; ++k) {
      const cplx* d = d_hat(k);
      cplx* u0 = u_hat(k, 0);
      for (int f = 0; f < bins_; ++f) {
        u0[f] = den[f] > floor ? std::conj(d[f]) * x_hat[f] / den[f] : cplx(0.0);
      }
      for (int t = 1; t < frames_; ++t) std::copy(u0, u0 + bins_, u_hat(k, t));
    }
  }

  // D u from the current spectrum.
  void synthesize_frames(FrameSequence& out) {
    out.width = width_;
    out.height = height_;
    out.frames = frames_;
    out.data.resize(static_cast<std::size_t>(width_) * height_ * frames_);
    std::vector<cplx> acc(bins_);
    for (int t = 0; t < frames_; ++t) {
      std::fill(acc.begin(), acc.end(), cplx(0.0));
      for (int k = 0; k < count_; ++k) {
        const cplx* d = d_hat(k);
        const cplx* z = u_hat(k, t);
        for (int f = 0; f < bins_; ++f) acc[f] += d[f] * z[f];
      }
      fft_.inverse(acc.data(), out.data.data() + static_cast<std::size_t>(t) * out.frame_size());
    }
  }

  // rhs = Dᵀ g1 + (g2 + ∇ᵀ g3), with g1 a frame-major volume and the map-space
  // part supplied per (k,t) slice by the caller.
  template <typename SliceFn>
  void assemble_rhs(const std::vector<double>& g1, SliceFn&& map_slice) {
    std::vector<double> scratch(static_cast<std::size_t>(width_) * height_);
    for (int k = 0; k < count_; ++k) {
      for (int t = 0; t < frames_; ++t) {
        map_slice(k, t, scratch.data());
        fft_.forward(scratch.data(), rhs_hat(k, t));
      }
    }
    std::vector<cplx> g1_hat(bins_);
    const std::size_t plane = static_cast<std::size_t>(width_) * height_;
    for (int t = 0; t < frames_; ++t) {
      fft_.forward(g1.data() + plane * t, g1_hat.data());
      for (int k = 0; k < count_; ++k) {
        const cplx* d = d_hat(k);
        cplx* r = rhs_hat(k, t);
        for (int f = 0; f < bins_; ++f) r[f] += std::conj(d[f]) * g1_hat[f];
      }
    }
  }

  // Per-bin direct solve of (Tri_T ⊗ I_K + I_T ⊗ c c^H) z = rhs, where Tri is
  // the shared temporal tridiagonal I + ∇ᵀ∇. Every channel perpendicular to c
  // satisfies Tri w = rhs componentwise; the c-parallel channel sees the shift
  // Tri + ‖c‖²I. Rounding is polished by iterative refinement; returns how many
  // bins stayed above tol·‖rhs‖ after max_iters rounds.
  int solve(double tol, int max_iters) {
    const int n = count_ * frames_;
    std::vector<cplx> c(count_), chat(count_), b(n), z(n), mz(n), res(n), delta(n);
    std::vector<cplx> par(frames_), proj(frames_);
    std::vector<double> diag(frames_), inv_m(frames_), mp(frames_);
    for (int t = 0; t < frames_; ++t) {
      double deg = 0.0;
      if (frames_ > 1) deg = (t == 0 || t == frames_ - 1) ? 1.0 : 2.0;
      diag[t] = 1.0 + deg;
    }
    // Thomas factors of Tri, shared by every bin and channel.
    inv_m[0] = 1.0 / diag[0];
    for (int t = 1; t < frames_; ++t) inv_m[t] = 1.0 / (diag[t] - inv_m[t - 1]);
    const std::size_t stride = static_cast<std::size_t>(frames_) * bins_;

    double nc = 0.0;
    auto matvec = [&](const std::vector<cplx>& v, std::vector<cplx>& out) {
      for (int t = 0; t < frames_; ++t) {
        const cplx* vt = v.data() + static_cast<std::size_t>(t) * count_;
        cplx* ot = out.data() + static_cast<std::size_t>(t) * count_;
        cplx inner(0.0);
        for (int k = 0; k < count_; ++k) inner += std::conj(c[k]) * vt[k];
        for (int k = 0; k < count_; ++k) ot[k] = diag[t] * vt[k] + c[k] * inner;
      }
      if (frames_ > 1) {
        for (int t = 0; t < frames_; ++t) {
          cplx* ot = out.data() + static_cast<std::size_t>(t) * count_;
          if (t > 0) {
            const cplx* vp = v.data() + static_cast<std::size_t>(t - 1) * count_;
            for (int k = 0; k < count_; ++k) ot[k] -= vp[k];
          }
          if (t + 1 < frames_) {
            const cplx* vn = v.data() + static_cast<std::size_t>(t + 1) * count_;
            for (int k = 0; k < count_; ++k) ot[k] -= vn[k];
          }
        }
      }
    };

    auto direct = [&](const std::vector<cplx>& rhs, std::vector<cplx>& out) {
      out = rhs;
      for (int k = 0; k < count_; ++k) {
        cplx* v = out.data() + k;
        v[0] *= inv_m[0];
        for (int t = 1; t < frames_; ++t) {
          v[static_cast<std::size_t>(t) * count_] =
              (v[static_cast<std::size_t>(t) * count_] +
               v[static_cast<std::size_t>(t - 1) * count_]) *
              inv_m[t];
        }
        for (int t = frames_ - 2; t >= 0; --t) {
          v[static_cast<std::size_t>(t) * count_] +=
              v[static_cast<std::size_t>(t + 1) * count_] * inv_m[t];
        }
      }
      if (nc == 0.0) return;
      for (int t = 0; t < frames_; ++t) {
        cplx pr(0.0), pw(0.0);
        const cplx* rt = rhs.data() + static_cast<std::size_t>(t) * count_;
        const cplx* wt = out.data() + static_cast<std::size_t>(t) * count_;
        for (int k = 0; k < count_; ++k) {
          pr += std::conj(chat[k]) * rt[k];
          pw += std::conj(chat[k]) * wt[k];
        }
        par[t] = pr;
        proj[t] = pw;
      }
      mp[0] = diag[0] + nc;
      par[0] /= mp[0];
      for (int t = 1; t < frames_; ++t) {
        mp[t] = diag[t] + nc - 1.0 / mp[t - 1];
        par[t] = (par[t] + par[t - 1]) / mp[t];
      }
      for (int t = frames_ - 2; t >= 0; --t) par[t] += par[t + 1] / mp[t];
      for (int t = 0; t < frames_; ++t) {
        const cplx coef = par[t] - proj[t];
        cplx* zt = out.data() + static_cast<std::size_t>(t) * count_;
        for (int k = 0; k < count_; ++k) zt[k] += coef * chat[k];
      }
    };

    int failed = 0;
    for (int bin = 0; bin < bins_; ++bin) {
      double b_norm2 = 0.0;
      for (int t = 0; t < frames_; ++t) {
        for (int k = 0; k < count_; ++k) {
          const cplx v = rhs_hat_[static_cast<std::size_t>(k) * stride +
                                  static_cast<std::size_t>(t) * bins_ + bin];
          b[static_cast<std::size_t>(t) * count_ + k] = v;
          b_norm2 += std::norm(v);
        }
      }
      if (b_norm2 == 0.0) {
        for (int t = 0; t < frames_; ++t) {
          for (int k = 0; k < count_; ++k) {
            u_hat_[static_cast<std::size_t>(k) * stride + static_cast<std::size_t>(t) * bins_ +
                   bin] = cplx(0.0);
          }
        }
        continue;
      }
      nc = 0.0;
      for (int k = 0; k < count_; ++k) {
        c[k] = std::conj(d_hat_[static_cast<std::size_t>(k) * bins_ + bin]);
        nc += std::norm(c[k]);
      }
      if (nc > 0.0) {
        const double inv = 1.0 / std::sqrt(nc);
        for (int k = 0; k < count_; ++k) chat[k] = c[k] * inv;
      }

      direct(b, z);
      const double target2 = tol * tol * b_norm2;
      matvec(z, mz);
      double rr = 0.0;
      for (int i = 0; i < n; ++i) {
        res[i] = b[i] - mz[i];
        rr += std::norm(res[i]);
      }
      for (int round = 0; round < max_iters && rr > target2; ++round) {
        direct(res, delta);
        for (int i = 0; i < n; ++i) z[i] += delta[i];
        matvec(z, mz);
        rr = 0.0;
        for (int i = 0; i < n; ++i) {
          res[i] = b[i] - mz[i];
          rr += std::norm(res[i]);
        }
      }
      if (rr > target2) ++failed;
      for (int t = 0; t < frames_; ++t) {
        for (int k = 0; k < count_; ++k) {
          u_hat_[static_cast<std::size_t>(k) * stride + static_cast<std::size_t>(t) * bins_ +
                 bin] = z[static_cast<std::size_t>(t) * count_ + k];
        }
      }
    }
    return failed;
  }

  Fft2& fft() { return fft_; }

 private:
  int width_, height_, frames_, count_;
  Fft2 fft_;
  int bins_;
  std::vector<cplx> d_hat_;
  std::vector<cplx> u_hat_;
  std::vector<cplx> rhs_hat_;
};

FeatureMaps make_maps(int count, int width, int height, int frames) {
  FeatureMaps maps;
  maps.count = count;
  maps.width = width;
  maps.height = height;
  maps.frames = frames;
  maps.data.assign(static_cast<std::size_t>(count) * frames * height * width, 0.0);
  return maps;
}

double l1_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

void check_params(const CscParams& p) {
  if (p.beta_d < 0 || p.beta_1 < 0 || p.beta_2 < 0) throw ParamError("weights must be >= 0");
  if (!(p.rho > 0)) throw ParamError("rho must be positive");
  if (p.outer_iters < 1) throw ParamError("outer_iters must be >= 1");
  if (p.quad_max_iters < 1) throw ParamError("quad_max_iters must be >= 1");
  if (p.quad_tol <= 0 || p.stop_tol < 0) throw ParamError("tolerances must be positive");
}

}  // namespace

FrameSequence synthesize(const FilterBank& bank, const FeatureMaps& maps) {
  check_bank(bank);
  check_maps(maps, bank);
  QuadContext ctx(bank, maps.width, maps.height, maps.frames);
  ctx.load_u(maps);
  FrameSequence out;
  ctx.synthesize_frames(out);
  return out;
}

FeatureMaps conv_adjoint_volume(const FilterBank& bank, const FrameSequence& volume) {
  check_bank(bank);
  QuadContext ctx(bank, volume.width, volume.height, volume.frames);
  FeatureMaps out = make_maps(bank.count, volume.width, volume.height, volume.frames);
  Fft2& fft = ctx.fft();
  std::vector<cplx> v_hat(ctx.bins()), prod(ctx.bins());
  for (int t = 0; t < volume.frames; ++t) {
    fft.forward(volume.frame(t), v_hat.data());
    for (int k = 0; k < bank.count; ++k) {
      const cplx* d = ctx.d_hat(k);
      for (int f = 0; f < ctx.bins(); ++f) prod[f] = std::conj(d[f]) * v_hat[f];
      fft.inverse(prod.data(), out.map(k, t));
    }
  }
  return out;
}

std::vector<double> temporal_diff(const FeatureMaps& maps) {
  if (maps.frames < 2) return {};
  const std::size_t plane = maps.map_size();
  std::vector<double> out(static_cast<std::size_t>(maps.count) * (maps.frames - 1) * plane);
  for (int k = 0; k < maps.count; ++k) {
    for (int t = 0; t + 1 < maps.frames; ++t) {
      const double* a = maps.map(k, t);
      const double* b = maps.map(k, t + 1);
      double* o = out.data() + (static_cast<std::size_t>(k) * (maps.frames - 1) + t) * plane;
      for (std::size_t i = 0; i < plane; ++i) o[i] = b[i] - a[i];
    }
  }
  return out;
}

FeatureMaps temporal_diff_adjoint(const std::vector<double>& diffs, int count, int width,
                                  int height, int frames) {
  FeatureMaps out = make_maps(count, width, height, frames);
  if (frames < 2) {
    if (!diffs.empty()) throw ParamError("temporal_diff_adjoint: unexpected input for T < 2");
    return out;
  }
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  if (diffs.size() != static_cast<std::size_t>(count) * (frames - 1) * plane) {
    throw ParamError("temporal_diff_adjoint: size mismatch");
  }
  for (int k = 0; k < count; ++k) {
    for (int t = 0; t + 1 < frames; ++t) {
      const double* g = diffs.data() + (static_cast<std::size_t>(k) * (frames - 1) + t) * plane;
      double* lo = out.map(k, t);
      double* hi = out.map(k, t + 1);
      for (std::size_t i = 0; i < plane; ++i) {
        lo[i] -= g[i];
        hi[i] += g[i];
      }
    }
  }
  return out;
}

double objective_value(const FeatureMaps& maps, const FilterBank& bank, const CodedImage& coded,
                       const ShutterFunction& shutter, const CscParams& params) {
  const FrameSequence synth = synthesize(bank, maps);
  if (coded.width != shutter.width || coded.height != shutter.height) {
    throw ParamError("objective_value: coded image does not match shutter");
  }
  const std::vector<double> measured = apply_measurement(synth.data, shutter);
  double data = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double r = coded.data[i] - measured[i];
    data += r * r;
  }
  const double l1 = l1_norm(maps.data);
  const double tv = l1_norm(temporal_diff(maps));
  return 0.5 * params.beta_d * data + params.beta_1 * l1 + params.beta_2 * tv;
}

std::vector<double> prox_l1(std::vector<double> v, double tau) {
  if (tau < 0) throw ParamError("prox_l1: negative threshold");
  for (auto& x : v) {
    if (x > tau) {
      x -= tau;
    } else if (x < -tau) {
      x += tau;
    } else {
      x = 0.0;
    }
  }
  return v;
}

std::vector<double> prox_data(const std::vector<double>& v, const CodedImage& coded,
                              const ShutterFunction& shutter, double beta_d, double rho) {
  if (!(rho > 0)) throw ParamError("prox_data: rho must be positive");
  const std::size_t plane = static_cast<std::size_t>(shutter.width) * shutter.height;
  if (coded.data.size() != plane || v.size() != plane * shutter.frames) {
    throw ParamError("prox_data: size mismatch");
  }
  std::vector<double> out = v;
  // ξ_p = v_p + β_d (b_p − s_pᵀ v_p) / (ρ + β_d‖s_p‖²) · s_p, per pixel.
  for (std::size_t p = 0; p < plane; ++p) {
    double dot = 0.0;
    int active = 0;
    for (int t = 0; t < shutter.frames; ++t) {
      if (shutter.mask[static_cast<std::size_t>(t) * plane + p]) {
        dot += v[static_cast<std::size_t>(t) * plane + p];
        ++active;
      }
    }
    const double gain = beta_d * (coded.data[p] - dot) / (rho + beta_d * active);
    if (gain != 0.0) {
      for (int t = 0; t < shutter.frames; ++t) {
        if (shutter.mask[static_cast<std::size_t>(t) * plane + p]) {
          out[static_cast<std::size_t>(t) * plane + p] += gain;
        }
      }
    }
  }
  return out;
}

FeatureMaps apply_quadratic_operator(const FeatureMaps& maps, const FilterBank& bank) {
  check_bank(bank);
  check_maps(maps, bank);
  QuadContext ctx(bank, maps.width, maps.height, maps.frames);
  ctx.load_u(maps);
  FrameSequence synth;
  ctx.synthesize_frames(synth);
  const FeatureMaps dtd = conv_adjoint_volume(bank, synth);
  const FeatureMaps lap =
      temporal_diff_adjoint(temporal_diff(maps), maps.count, maps.width, maps.height, maps.frames);
  FeatureMaps out = maps;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += dtd.data[i] + lap.data[i];
  return out;
}

namespace {

void check_state(const AdmmState& state, const FilterBank& bank) {
  const FeatureMaps& u = state.u;
  check_bank(bank);
  check_maps(u, bank);
  const std::size_t vol = static_cast<std::size_t>(u.width) * u.height * u.frames;
  const std::size_t diffs =
      u.frames < 2 ? 0
                   : static_cast<std::size_t>(u.count) * (u.frames - 1) * u.map_size();
  if (state.w1.size() != vol || state.lambda1.size() != vol) {
    throw ParamError("ADMM state: w1/lambda1 must match the coded volume");
  }
  if (state.w2.data.size() != u.data.size() || state.lambda2.data.size() != u.data.size()) {
    throw ParamError("ADMM state: w2/lambda2 must match the feature maps");
  }
  if (state.w3.size() != diffs || state.lambda3.size() != diffs) {
    throw ParamError("ADMM state: w3/lambda3 must match the temporal differences");
  }
}

// Shared by the public solve_quadratic and the reconstruction loop: assembles
// the right-hand side from (w_j − λ_j) and runs the per-bin solve.
void quadratic_step(QuadContext& ctx, AdmmState& state, double quad_tol, int quad_max_iters) {
  const FeatureMaps& u = state.u;
  const std::size_t plane = u.map_size();
  const int last = u.frames - 1;
  std::vector<double> g1(state.w1.size());
  for (std::size_t i = 0; i < g1.size(); ++i) g1[i] = state.w1[i] - state.lambda1[i];
  ctx.assemble_rhs(g1, [&](int k, int t, double* slice) {
    const double* w2 = state.w2.map(k, t);
    const double* l2 = state.lambda2.map(k, t);
    for (std::size_t i = 0; i < plane; ++i) slice[i] = w2[i] - l2[i];
    if (u.frames >= 2) {
      // ∇ᵀg contributes g_{t−1} − g_t (difference slices at t−1 and t).
      if (t > 0) {
        const double* w3 = state.w3.data() + (static_cast<std::size_t>(k) * last + t - 1) * plane;
        const double* l3 =
            state.lambda3.data() + (static_cast<std::size_t>(k) * last + t - 1) * plane;
        for (std::size_t i = 0; i < plane; ++i) slice[i] += w3[i] - l3[i];
      }
      if (t < last) {
        const double* w3 = state.w3.data() + (static_cast<std::size_t>(k) * last + t) * plane;
        const double* l3 = state.lambda3.data() + (static_cast<std::size_t>(k) * last + t) * plane;
        for (std::size_t i = 0; i < plane; ++i) slice[i] -= w3[i] - l3[i];
      }
    }
  });
  const int failed = ctx.solve(quad_tol, quad_max_iters);
  if (failed > 0) {
    state.warnings.push_back("quadratic solve: " + std::to_string(failed) + " of " +
                             std::to_string(ctx.bins()) +
                             " frequency blocks stayed above the residual tolerance");
  }
}

}  // namespace

FeatureMaps solve_quadratic(AdmmState& state, const FilterBank& bank, double quad_tol,
                            int quad_max_iters) {
  check_state(state, bank);
  QuadContext ctx(bank, state.u.width, state.u.height, state.u.frames);
  ctx.load_u(state.u);
  quadratic_step(ctx, state, quad_tol, quad_max_iters);
  FeatureMaps out = make_maps(state.u.count, state.u.width, state.u.height, state.u.frames);
  ctx.extract_u(out);
  return out;
}

namespace {

CscResult reconstruct_csc_impl(const CodedImage& coded, const ShutterFunction& shutter,
                               const FilterBank& bank, const CscParams& params,
                               const FeatureMaps* init_maps) {
  check_params(params);
  check_bank(bank);
  if (coded.width != shutter.width || coded.height != shutter.height) {
    throw ParamError("reconstruct_csc: coded image does not match shutter");
  }
  const int W = shutter.width, H = shutter.height, T = shutter.frames;
  const std::size_t plane = static_cast<std::size_t>(W) * H;

  CodedImage b = coded;
  double dc = 0.0;
  if (params.subtract_mean) {
    double mean = 0.0;
    for (double v : b.data) mean += v;
    mean /= static_cast<double>(b.data.size());
    dc = mean / shutter.bump_length;
    const double offset = dc * shutter.bump_length;
    for (auto& v : b.data) v -= offset;
  }

  QuadContext ctx(bank, W, H, T);
  AdmmState state;

  // Warm start from the least-norm preimage of the temporally constant volume
  // b/L, which codes back to b exactly wherever the bank has frequency
  // coverage; w_j = K_j u, λ_j = 0.
  if (init_maps != nullptr) {
    if (init_maps->count != bank.count || init_maps->width != W || init_maps->height != H ||
        init_maps->frames != T) {
      throw ParamError("reconstruct_csc: init maps do not match the problem");
    }
    state.u = *init_maps;
  } else if (params.warm_start) {
    std::vector<double> rep(plane);
    for (std::size_t p = 0; p < plane; ++p) rep[p] = b.data[p] / shutter.bump_length;
    ctx.seed_constant_volume(rep.data());
    state.u = make_maps(bank.count, W, H, T);
    ctx.extract_u(state.u);
  } else {
    state.u = make_maps(bank.count, W, H, T);
  }
  ctx.load_u(state.u);
  FrameSequence du;
  ctx.synthesize_frames(du);
  state.w1 = du.data;
  state.lambda1.assign(du.data.size(), 0.0);
  state.w2 = state.u;
  state.lambda2 = state.u;
  std::fill(state.lambda2.data.begin(), state.lambda2.data.end(), 0.0);
  state.w3 = temporal_diff(state.u);
  state.lambda3.assign(state.w3.size(), 0.0);

  FeatureMaps u_prev = state.u;
  const double tau1 = params.beta_1 / params.rho;
  const double tau2 = params.beta_2 / params.rho;

  for (int iter = 0; iter < params.outer_iters; ++iter) {
    state.iteration = iter + 1;
    quadratic_step(ctx, state, params.quad_tol, params.quad_max_iters);
    ctx.extract_u(state.u);
    ctx.synthesize_frames(du);

    // Proximal updates of the three split variables.
    {
      std::vector<double> arg(du.data.size());
      for (std::size_t i = 0; i < arg.size(); ++i) arg[i] = du.data[i] + state.lambda1[i];
      state.w1 = prox_data(arg, b, shutter, params.beta_d, params.rho);
      for (std::size_t i = 0; i < arg.size(); ++i) state.lambda1[i] = arg[i] - state.w1[i];
    }
    {
      std::vector<double> arg(state.u.data.size());
      for (std::size_t i = 0; i < arg.size(); ++i) arg[i] = state.u.data[i] + state.lambda2.data[i];
      state.w2.data = prox_l1(arg, tau1);
      for (std::size_t i = 0; i < arg.size(); ++i) state.lambda2.data[i] = arg[i] - state.w2.data[i];
    }
    if (T >= 2) {
      const std::vector<double> grad = temporal_diff(state.u);
      std::vector<double> arg(grad.size());
      for (std::size_t i = 0; i < arg.size(); ++i) arg[i] = grad[i] + state.lambda3[i];
      state.w3 = prox_l1(arg, tau2);
      for (std::size_t i = 0; i < arg.size(); ++i) state.lambda3[i] = arg[i] - state.w3[i];
    }

    // Eq. 8 terms for the problem being optimized (DC-removed when enabled).
    ObjectiveRow row;
    row.iteration = iter + 1;
    double data = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
      double acc = 0.0;
      for (int t = 0; t < T; ++t) {
        if (shutter.mask[static_cast<std::size_t>(t) * plane + p]) {
          acc += du.data[static_cast<std::size_t>(t) * plane + p];
        }
      }
      const double r = b.data[p] - acc;
      data += r * r;
    }
    row.data_term = 0.5 * params.beta_d * data;
    row.l1_term = params.beta_1 * l1_norm(state.u.data);
    row.temporal_term = params.beta_2 * l1_norm(temporal_diff(state.u));
    row.total = row.data_term + row.l1_term + row.temporal_term;
    state.objective.push_back(row);

    double diff2 = 0.0, prev2 = 0.0;
    for (std::size_t i = 0; i < state.u.data.size(); ++i) {
      const double d = state.u.data[i] - u_prev.data[i];
      diff2 += d * d;
      prev2 += u_prev.data[i] * u_prev.data[i];
    }
    u_prev = state.u;
    if (iter > 0 && prev2 > 0.0 && std::sqrt(diff2) < params.stop_tol * std::sqrt(prev2)) break;
  }

  // Frames come from the primal iterate; the returned maps are the sparsity
  // split variable, exactly sparse and equal to the primal at convergence.
  CscResult result;
  ctx.load_u(state.u);
  ctx.synthesize_frames(result.frames);
  if (params.subtract_mean) {
    for (auto& v : result.frames.data) v += dc;
  }
  result.maps = std::move(state.w2);
  result.objective = std::move(state.objective);
  result.warnings = std::move(state.warnings);
  result.iterations_run = state.iteration;
  return result;
}

}  // namespace

CscResult reconstruct_csc(const CodedImage& coded, const ShutterFunction& shutter,
                          const FilterBank& bank, const CscParams& params) {
  return reconstruct_csc_impl(coded, shutter, bank, params, nullptr);
}

CscResult reconstruct_csc(const CodedImage& coded, const ShutterFunction& shutter,
                          const FilterBank& bank, const CscParams& params,
                          const FeatureMaps& init_maps) {
  return reconstruct_csc_impl(coded, shutter, bank, params, &init_maps);
}

void write_objective_csv(const std::vector<ObjectiveRow>& rows,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "iteration,data_term,l1_term,temporal_term,total\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g\n", r.iteration, r.data_term,
                  r.l1_term, r.temporal_term, r.total);
    out << buf;
  }
  if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace cscvideo
