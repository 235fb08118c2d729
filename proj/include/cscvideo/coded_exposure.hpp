#pragma once

#include <cstdint>
#include <vector>

#include "cscvideo/tensor.hpp"

namespace cscvideo {

// Per-pixel exposure schedule: one contiguous run of bump_length ones in each
// pixel's temporal column, start drawn uniformly from {0,…,T−L}. Each pixel
// uses its own counter-derived RNG stream, so the result depends only on
// (W,H,T,L,seed), not on evaluation order.
ShutterFunction generate_shutter(int width, int height, int frames, int bump_length,
                                 std::uint64_t seed);

// I(x,y) = Σ_t S(x,y,t)·X(x,y,t), exact sum, no normalization.
CodedImage code_exposure(const FrameSequence& seq, const ShutterFunction& shutter);

// The same linear map and its adjoint on raw volumes (frame-major W·H·T).
std::vector<double> apply_measurement(const std::vector<double>& volume,
                                      const ShutterFunction& shutter);
std::vector<double> apply_measurement_adjoint(const std::vector<double>& image,
                                              const ShutterFunction& shutter);

struct SamplingStats {
  std::vector<double> per_frame;
  double overall = 0.0;
};

SamplingStats sampling_stats(const ShutterFunction& shutter);

}  // namespace cscvideo
