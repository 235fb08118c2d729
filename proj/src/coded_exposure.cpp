#include "cscvideo/coded_exposure.hpp"

#include <string>

#include "cscvideo/errors.hpp"

namespace cscvideo {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// splitmix64 stream; pixel streams start at counter offsets of a mixed seed.
struct SplitMix {
  std::uint64_t state;
  std::uint64_t next() {
    state += kGamma;
    return mix64(state);
  }
  // Uniform draw from {0,…,range−1} by rejection, bias-free for any range.
  std::uint64_t bounded(std::uint64_t range) {
    const std::uint64_t threshold = (0 - range) % range;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % range;
    }
  }
};

void check_shutter_dims(int width, int height, int frames, const ShutterFunction& s,
                        const char* what) {
  if (s.width != width || s.height != height || s.frames != frames) {
    throw ParamError(std::string(what) + ": shutter is " + std::to_string(s.width) + "x" +
                     std::to_string(s.height) + "x" + std::to_string(s.frames) + ", input is " +
                     std::to_string(width) + "x" + std::to_string(height) + "x" +
                     std::to_string(frames));
  }
}

}  // namespace

ShutterFunction generate_shutter(int width, int height, int frames, int bump_length,
                                 std::uint64_t seed) {
  if (width < 1 || height < 1 || frames < 1) throw ParamError("shutter dimensions must be positive");
  if (bump_length < 1 || bump_length > frames) {
    throw ParamError("bump length must satisfy 1 <= L <= T (got L=" +
                     std::to_string(bump_length) + ", T=" + std::to_string(frames) + ")");
  }
  ShutterFunction s;
  s.width = width;
  s.height = height;
  s.frames = frames;
  s.bump_length = bump_length;
  s.seed = seed;
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  s.mask.assign(plane * frames, 0);
  const std::uint64_t base = mix64(seed + kGamma);
  const std::uint64_t starts_range = static_cast<std::uint64_t>(frames - bump_length) + 1;
  for (std::size_t p = 0; p < plane; ++p) {
    SplitMix rng{base + static_cast<std::uint64_t>(p) * kGamma};
    const int start = static_cast<int>(rng.bounded(starts_range));
    for (int t = start; t < start + bump_length; ++t) {
      s.mask[static_cast<std::size_t>(t) * plane + p] = 1;
    }
  }
  return s;
}

CodedImage code_exposure(const FrameSequence& seq, const ShutterFunction& shutter) {
  check_shutter_dims(seq.width, seq.height, seq.frames, shutter, "code_exposure");
  CodedImage image;
  image.width = seq.width;
  image.height = seq.height;
  image.shutter_id = shutter.id();
  image.data = apply_measurement(seq.data, shutter);
  return image;
}

std::vector<double> apply_measurement(const std::vector<double>& volume,
                                      const ShutterFunction& shutter) {
  const std::size_t plane = static_cast<std::size_t>(shutter.width) * shutter.height;
  if (volume.size() != plane * shutter.frames) {
    throw ParamError("apply_measurement: volume size does not match shutter");
  }
  std::vector<double> out(plane, 0.0);
  for (int t = 0; t < shutter.frames; ++t) {
    const double* v = volume.data() + static_cast<std::size_t>(t) * plane;
    const std::uint8_t* m = shutter.mask.data() + static_cast<std::size_t>(t) * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      if (m[p]) out[p] += v[p];
    }
  }
  return out;
}

std::vector<double> apply_measurement_adjoint(const std::vector<double>& image,
                                              const ShutterFunction& shutter) {
  const std::size_t plane = static_cast<std::size_t>(shutter.width) * shutter.height;
  if (image.size() != plane) {
    throw ParamError("apply_measurement_adjoint: image size does not match shutter");
  }
  std::vector<double> out(plane * shutter.frames, 0.0);
  for (int t = 0; t < shutter.frames; ++t) {
    double* v = out.data() + static_cast<std::size_t>(t) * plane;
    const std::uint8_t* m = shutter.mask.data() + static_cast<std::size_t>(t) * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      if (m[p]) v[p] = image[p];
    }
  }
  return out;
}

SamplingStats sampling_stats(const ShutterFunction& shutter) {
  const std::size_t plane = static_cast<std::size_t>(shutter.width) * shutter.height;
  SamplingStats stats;
  stats.per_frame.resize(shutter.frames);
  std::uint64_t total = 0;
  for (int t = 0; t < shutter.frames; ++t) {
    const std::uint8_t* m = shutter.mask.data() + static_cast<std::size_t>(t) * plane;
    std::uint64_t active = 0;
    for (std::size_t p = 0; p < plane; ++p) active += m[p];
    stats.per_frame[t] = static_cast<double>(active) / static_cast<double>(plane);
    total += active;
  }
  stats.overall = static_cast<double>(total) /
                  (static_cast<double>(plane) * static_cast<double>(shutter.frames));
  return stats;
}

}  // namespace cscvideo
