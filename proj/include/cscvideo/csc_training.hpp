#pragma once

#include <cstdint>
#include <vector>

#include "cscvideo/tensor.hpp"
#include "cscvideo/tensor_io.hpp"

namespace cscvideo {

struct CscTrainConfig {
  int count = 100;  // filters
  int size = 11;    // odd kernel side
  double sparsity_weight = 1.0;
  int alternations = 15;
  int inner_iters = 30;  // iterations of each subproblem solve
  std::uint64_t seed = 0;
};

// If ‖kernel‖₂ > 1, rescale to unit norm; otherwise unchanged.
std::vector<double> project_filter(std::vector<double> kernel);

// Unit-norm Gaussian-noise kernels; the training initializer.
FilterBank random_filter_bank(int count, int size, std::uint64_t seed);

// Local contrast normalization: subtract a Gaussian-weighted local mean and
// divide by the local standard deviation (plus a 0.1 floor). 13×13 window,
// σ = 2, replicated edges.
GrayImage contrast_normalize(const GrayImage& image);

struct CscTrainResult {
  FilterBank bank;
  // Total training objective (reconstruction + weighted sparsity over all
  // images) recorded after every alternation; guarded to be non-increasing.
  std::vector<double> objective;
};

// Alternates sparse coding of every image against the current bank with a
// least-squares filter update (conjugate gradients on the normal equations
// over the s×s supports) followed by per-filter ball projection. Either half
// step is rolled back if it fails to improve the total objective, so the
// recorded history never increases. Images are used as given; apply
// contrast_normalize first for natural images.
CscTrainResult train_filters(const std::vector<GrayImage>& images, const CscTrainConfig& cfg);

// Inspection sheet: filters tiled on a grid, each stretched to [0,1].
GrayImage filter_mosaic(const FilterBank& bank);

}  // namespace cscvideo
