#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cscvideo/tensor.hpp"

namespace cscvideo {

struct CscParams {
  double beta_d = 100.0;  // data term weight
  double beta_1 = 10.0;   // sparsity weight
  double beta_2 = 1.0;    // temporal smoothness weight
  double rho = 1.0;       // ADMM penalty, constant across iterations
  int outer_iters = 30;
  double stop_tol = 1e-4;  // early stop on relative change of the primal
  double quad_tol = 1e-6;  // relative residual target of the quadratic step
  int quad_max_iters = 50;
  // Zero-mean filters cannot represent DC, so the coded image's global DC
  // (mean(b)/L) is removed before solving and added back per frame. Disable
  // for inputs that are already zero-mean (e.g. training residuals).
  bool subtract_mean = true;
  // Seed the primal from the temporally constant volume b/L pushed through
  // the analysis operator. Disable to start from zero, which suits sparse
  // coding subproblems where most coefficients should stay off.
  bool warm_start = true;
};

struct ObjectiveRow {
  int iteration = 0;
  double data_term = 0.0;
  double l1_term = 0.0;
  double temporal_term = 0.0;
  double total = 0.0;
};

// Splitting state: primal u plus one (w, λ) pair per objective piece. w1/λ1
// live on the coded volume (W·H·T, frame-major), w2/λ2 on the feature maps,
// w3/λ3 on temporal differences (K·(T−1)·H·W, maps layout minus one frame).
struct AdmmState {
  FeatureMaps u;
  std::vector<double> w1, lambda1;
  FeatureMaps w2, lambda2;
  std::vector<double> w3, lambda3;
  int iteration = 0;
  std::vector<ObjectiveRow> objective;
  std::vector<std::string> warnings;
};

struct CscResult {
  FrameSequence frames;
  // The sparsity split variable: exactly sparse after soft thresholding and
  // equal to the primal at convergence. frames = synthesize(bank, primal)
  // plus the restored DC, so frames and maps agree only once converged.
  FeatureMaps maps;
  // One row per iteration actually run, evaluated on the primal iterate and
  // on the problem the solver optimizes (i.e. after DC removal when
  // subtract_mean is set).
  std::vector<ObjectiveRow> objective;
  std::vector<std::string> warnings;
  int iterations_run = 0;
};

// Frame t = Σ_k d_k ⊛ z_k^t with circular spatial boundary; the kernel center
// (s/2, s/2) is the convolution origin. Output is not clamped.
FrameSequence synthesize(const FilterBank& bank, const FeatureMaps& maps);

// Adjoint of the synthesis operator applied to a volume: out_k^t = d_k ⊛* v^t.
FeatureMaps conv_adjoint_volume(const FilterBank& bank, const FrameSequence& volume);

// Backward temporal differences: slice t (of T−1) = z^{t+1} − z^t per filter.
// T < 2 yields an empty tensor.
std::vector<double> temporal_diff(const FeatureMaps& maps);
FeatureMaps temporal_diff_adjoint(const std::vector<double>& diffs, int count, int width,
                                  int height, int frames);

// ½β_d‖b − Φ·synthesize(d,z)‖² + β_1 Σ‖z‖₁ + β_2 Σ‖∇_t z‖₁.
double objective_value(const FeatureMaps& maps, const FilterBank& bank, const CodedImage& coded,
                       const ShutterFunction& shutter, const CscParams& params);

// Elementwise soft threshold sign(v)·max(|v|−tau, 0).
std::vector<double> prox_l1(std::vector<double> v, double tau);

// argmin_ξ ½β_d‖b − Φξ‖² + (ρ/2)‖ξ − v‖², closed form per pixel through the
// rank-1 structure of ΦᵀΦ. v is a frame-major W·H·T volume.
std::vector<double> prox_data(const std::vector<double>& v, const CodedImage& coded,
                              const ShutterFunction& shutter, double beta_d, double rho);

// The quadratic-step operator DᵀD + I + ∇ᵀ∇ on feature maps.
FeatureMaps apply_quadratic_operator(const FeatureMaps& maps, const FilterBank& bank);

// Solves (DᵀD + I + ∇ᵀ∇) u = Dᵀ(w1−λ1) + (w2−λ2) + ∇ᵀ(w3−λ3) to relative
// residual ≤ quad_tol. The system block-diagonalizes over spatial frequencies;
// each block is the shared temporal tridiagonal acting per filter channel plus
// a rank-one spectral term, so it is solved directly (Thomas recurrences on the
// perpendicular channels, a diagonal-shifted Thomas solve on the parallel one)
// with iterative refinement up to quad_max_iters rounds. Blocks still above the
// tolerance after refinement add one aggregate warning to state.
FeatureMaps solve_quadratic(AdmmState& state, const FilterBank& bank, double quad_tol = 1e-6,
                            int quad_max_iters = 50);

// Full reconstruction: alternates the quadratic step, the three proximal
// updates (data / sparsity / temporal), and the dual ascent, for at most
// params.outer_iters iterations with early stop on the primal change.
CscResult reconstruct_csc(const CodedImage& coded, const ShutterFunction& shutter,
                          const FilterBank& bank, const CscParams& params);

// Same, but the primal starts from the given maps instead of the seed chosen
// by params.warm_start. Used to resume refinement from earlier codes.
CscResult reconstruct_csc(const CodedImage& coded, const ShutterFunction& shutter,
                          const FilterBank& bank, const CscParams& params,
                          const FeatureMaps& init_maps);

void write_objective_csv(const std::vector<ObjectiveRow>& rows,
                         const std::filesystem::path& path);

}  // namespace cscvideo
