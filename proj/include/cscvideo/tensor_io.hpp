#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cscvideo/tensor.hpp"

namespace cscvideo {

// CVT tensor container. On-disk layout, little-endian throughout:
//   bytes 0..3   magic "CVT1"
//   bytes 4..7   uint32 dtype (0 = float32, 1 = float64, 2 = uint8)
//   bytes 8..11  uint32 ndim
//   then ndim × uint64 dims
//   then row-major payload, product(dims) × element size bytes
enum class Dtype : std::uint32_t { f32 = 0, f64 = 1, u8 = 2 };

struct Tensor {
  Dtype dtype = Dtype::f64;
  std::vector<std::uint64_t> dims;
  std::vector<unsigned char> payload;

  std::uint64_t element_count() const;
  std::size_t element_size() const;

  // Typed views. to_f64 also widens float32 payloads.
  std::vector<double> to_f64() const;
  std::vector<std::uint8_t> to_u8() const;
};

Tensor make_tensor(std::vector<std::uint64_t> dims, const std::vector<double>& values);
Tensor make_tensor(std::vector<std::uint64_t> dims, const std::vector<std::uint8_t>& values);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);

// Domain object <-> tensor conversions. File dims orders:
//   frames (T,H,W) f64, shutter (T,H,W) u8, coded image (H,W) f64,
//   filter bank (K,s,s) f64, feature maps (K,T,H,W) f64.
Tensor frames_to_tensor(const FrameSequence& seq);
FrameSequence frames_from_tensor(const Tensor& t);
Tensor shutter_to_tensor(const ShutterFunction& shutter);
// Validates the single-bump structure and infers bump_length; seed is not
// stored in the file and comes back as 0.
ShutterFunction shutter_from_tensor(const Tensor& t);
Tensor coded_to_tensor(const CodedImage& image);
CodedImage coded_from_tensor(const Tensor& t);
Tensor bank_to_tensor(const FilterBank& bank);
FilterBank bank_from_tensor(const Tensor& t);
Tensor maps_to_tensor(const FeatureMaps& maps);
FeatureMaps maps_from_tensor(const Tensor& t);

// Single grayscale image, row-major, values in [0,1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0.0) {}
  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Netpbm I/O. Readers accept P5 (grayscale) and P6 (color, converted by
// Rec. 709 luminance), 8- or 16-bit. Writers emit P5 with the given depth;
// values are clamped to [0,1] and quantized by round-half-up.
GrayImage read_image(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const double* values, int width, int height,
               int bit_depth);

// Frame directories: lossless files named frame_0000.pgm, frame_0001.pgm, ...
// load_frames sorts by index, normalizes to [0,1] by the file's max code value,
// and (when expected_count >= 0) fails if fewer frames are present.
FrameSequence load_frames(const std::filesystem::path& dir, int expected_count = -1);
void save_frames(const FrameSequence& seq, const std::filesystem::path& dir, int bit_depth = 16);

}  // namespace cscvideo
