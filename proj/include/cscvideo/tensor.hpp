#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cscvideo {

// Grayscale video volume. Storage is frame-major: index = (t*height + y)*width + x,
// so each frame is a contiguous row-major image. Intensities are nominally in [0,1]
// after ingestion; intermediate solver outputs may exceed that range.
struct FrameSequence {
  int width = 0;
  int height = 0;
  int frames = 0;
  std::vector<double> data;

  FrameSequence() = default;
  FrameSequence(int w, int h, int t)
      : width(w), height(h), frames(t),
        data(static_cast<std::size_t>(w) * h * t, 0.0) {}

  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(t) * height + y) * width + x;
  }
  double& at(int x, int y, int t) { return data[index(x, y, t)]; }
  double at(int x, int y, int t) const { return data[index(x, y, t)]; }

  double* frame(int t) { return data.data() + static_cast<std::size_t>(t) * height * width; }
  const double* frame(int t) const {
    return data.data() + static_cast<std::size_t>(t) * height * width;
  }
  std::size_t frame_size() const { return static_cast<std::size_t>(width) * height; }
};

// Binary per-pixel exposure schedule. Each pixel holds exactly one contiguous run
// of ones of length bump_length along t. Same frame-major layout as FrameSequence.
struct ShutterFunction {
  int width = 0;
  int height = 0;
  int frames = 0;
  int bump_length = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> mask;

  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(t) * height + y) * width + x;
  }
  std::uint8_t at(int x, int y, int t) const { return mask[index(x, y, t)]; }
  std::string id() const {
    return std::to_string(width) + "x" + std::to_string(height) + "x" +
           std::to_string(frames) + "-L" + std::to_string(bump_length) + "-seed" +
           std::to_string(seed);
  }
};

// Temporal integral of the masked video: one row-major W×H image, values in [0, L]
// for unit-range input frames.
struct CodedImage {
  int width = 0;
  int height = 0;
  std::vector<double> data;
  std::string shutter_id;

  CodedImage() = default;
  CodedImage(int w, int h)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0) {}
  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// Convolutional dictionary: count kernels of odd size s, each stored row-major,
// L2 norm at most 1.
struct FilterBank {
  int count = 0;
  int size = 0;
  std::vector<double> data;

  FilterBank() = default;
  FilterBank(int k, int s)
      : count(k), size(s), data(static_cast<std::size_t>(k) * s * s, 0.0) {}
  double* filter(int k) { return data.data() + static_cast<std::size_t>(k) * size * size; }
  const double* filter(int k) const {
    return data.data() + static_cast<std::size_t>(k) * size * size;
  }
};

// Per-filter, per-frame sparse coefficient images. Storage puts each 2D map
// contiguous: index = ((k*frames + t)*height + y)*width + x.
struct FeatureMaps {
  int count = 0;
  int width = 0;
  int height = 0;
  int frames = 0;
  std::vector<double> data;

  FeatureMaps() = default;
  FeatureMaps(int k, int w, int h, int t)
      : count(k), width(w), height(h), frames(t),
        data(static_cast<std::size_t>(k) * w * h * t, 0.0) {}

  std::size_t index(int k, int x, int y, int t) const {
    return ((static_cast<std::size_t>(k) * frames + t) * height + y) * width + x;
  }
  double& at(int k, int x, int y, int t) { return data[index(k, x, y, t)]; }
  double at(int k, int x, int y, int t) const { return data[index(k, x, y, t)]; }

  double* map(int k, int t) {
    return data.data() + (static_cast<std::size_t>(k) * frames + t) * height * width;
  }
  const double* map(int k, int t) const {
    return data.data() + (static_cast<std::size_t>(k) * frames + t) * height * width;
  }
  std::size_t map_size() const { return static_cast<std::size_t>(width) * height; }
};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cscvideo
