#include "cscvideo/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>

#include "cscvideo/errors.hpp"

namespace cscvideo {

namespace {

constexpr char kMagic[4] = {'C', 'V', 'T', '1'};

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(p[i]) << (8 * i);
  }
  return value;
}

std::size_t dtype_size(Dtype dtype) {
  switch (dtype) {
    case Dtype::f32:
      return 4;
    case Dtype::f64:
      return 8;
    case Dtype::u8:
      return 1;
  }
  throw FormatError("unknown dtype code " + std::to_string(static_cast<std::uint32_t>(dtype)));
}

std::uint64_t checked_product(const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) {
    if (d == 0) return 0;
    if (n > std::numeric_limits<std::uint64_t>::max() / d) {
      throw FormatError("tensor dims overflow");
    }
    n *= d;
  }
  return n;
}

int checked_dim(std::uint64_t d, const char* what) {
  if (d == 0 || d > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
    throw FormatError(std::string(what) + " dimension out of range");
  }
  return static_cast<int>(d);
}

void expect_ndim(const Tensor& t, std::size_t ndim, const char* what) {
  if (t.dims.size() != ndim) {
    throw FormatError(std::string(what) + ": expected " + std::to_string(ndim) +
                      " dims, found " + std::to_string(t.dims.size()));
  }
}

void expect_dtype(const Tensor& t, Dtype dtype, const char* what) {
  if (t.dtype != dtype) {
    throw FormatError(std::string(what) + ": unexpected element type");
  }
}

}  // namespace

std::uint64_t Tensor::element_count() const { return checked_product(dims); }

std::size_t Tensor::element_size() const { return dtype_size(dtype); }

std::vector<double> Tensor::to_f64() const {
  const std::uint64_t n = element_count();
  std::vector<double> out(n);
  const unsigned char* p = payload.data();
  if (dtype == Dtype::f64) {
    for (std::uint64_t i = 0; i < n; ++i) {
      out[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + 8 * i));
    }
  } else if (dtype == Dtype::f32) {
    for (std::uint64_t i = 0; i < n; ++i) {
      out[i] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i)));
    }
  } else {
    throw FormatError("tensor holds integer data where real values were expected");
  }
  return out;
}

std::vector<std::uint8_t> Tensor::to_u8() const {
  if (dtype != Dtype::u8) {
    throw FormatError("tensor holds real data where uint8 values were expected");
  }
  return std::vector<std::uint8_t>(payload.begin(), payload.end());
}

Tensor make_tensor(std::vector<std::uint64_t> dims, const std::vector<double>& values) {
  Tensor t;
  t.dtype = Dtype::f64;
  t.dims = std::move(dims);
  if (checked_product(t.dims) != values.size()) {
    throw FormatError("tensor dims do not match value count");
  }
  t.payload.reserve(values.size() * 8);
  for (double v : values) put_le(t.payload, std::bit_cast<std::uint64_t>(v));
  return t;
}

Tensor make_tensor(std::vector<std::uint64_t> dims, const std::vector<std::uint8_t>& values) {
  Tensor t;
  t.dtype = Dtype::u8;
  t.dims = std::move(dims);
  if (checked_product(t.dims) != values.size()) {
    throw FormatError("tensor dims do not match value count");
  }
  t.payload.assign(values.begin(), values.end());
  return t;
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path.string());
  if (raw.size() < 12 || std::memcmp(raw.data(), kMagic, 4) != 0) {
    throw FormatError(path.string() + ": not a CVT1 tensor file");
  }
  Tensor t;
  const std::uint32_t dtype_code = get_le<std::uint32_t>(raw.data() + 4);
  if (dtype_code > 2) {
    throw FormatError(path.string() + ": unknown dtype code " + std::to_string(dtype_code));
  }
  t.dtype = static_cast<Dtype>(dtype_code);
  const std::uint32_t ndim = get_le<std::uint32_t>(raw.data() + 8);
  if (ndim > 8) throw FormatError(path.string() + ": implausible ndim " + std::to_string(ndim));
  const std::size_t header = 12 + std::size_t{ndim} * 8;
  if (raw.size() < header) throw FormatError(path.string() + ": truncated header");
  t.dims.resize(ndim);
  for (std::uint32_t i = 0; i < ndim; ++i) {
    t.dims[i] = get_le<std::uint64_t>(raw.data() + 12 + 8 * std::size_t{i});
  }
  const std::uint64_t expected = checked_product(t.dims) * t.element_size();
  if (raw.size() - header != expected) {
    throw FormatError(path.string() + ": payload length " + std::to_string(raw.size() - header) +
                      " does not match dims (expected " + std::to_string(expected) + ")");
  }
  t.payload.assign(raw.begin() + static_cast<std::ptrdiff_t>(header), raw.end());
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  if (tensor.payload.size() != tensor.element_count() * tensor.element_size()) {
    throw FormatError("tensor payload length does not match dims");
  }
  std::vector<unsigned char> header;
  header.insert(header.end(), kMagic, kMagic + 4);
  put_le(header, static_cast<std::uint32_t>(tensor.dtype));
  put_le(header, static_cast<std::uint32_t>(tensor.dims.size()));
  for (std::uint64_t d : tensor.dims) put_le(header, d);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(header.data()),
            static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(tensor.payload.data()),
            static_cast<std::streamsize>(tensor.payload.size()));
  if (!out) throw IoError("write failed on " + path.string());
}

Tensor frames_to_tensor(const FrameSequence& seq) {
  return make_tensor({static_cast<std::uint64_t>(seq.frames), static_cast<std::uint64_t>(seq.height),
                      static_cast<std::uint64_t>(seq.width)},
                     seq.data);
}

FrameSequence frames_from_tensor(const Tensor& t) {
  expect_ndim(t, 3, "frame sequence");
  FrameSequence seq;
  seq.frames = checked_dim(t.dims[0], "frame");
  seq.height = checked_dim(t.dims[1], "frame");
  seq.width = checked_dim(t.dims[2], "frame");
  seq.data = t.to_f64();
  return seq;
}

Tensor shutter_to_tensor(const ShutterFunction& shutter) {
  return make_tensor(
      {static_cast<std::uint64_t>(shutter.frames), static_cast<std::uint64_t>(shutter.height),
       static_cast<std::uint64_t>(shutter.width)},
      shutter.mask);
}

ShutterFunction shutter_from_tensor(const Tensor& t) {
  expect_ndim(t, 3, "shutter");
  expect_dtype(t, Dtype::u8, "shutter");
  ShutterFunction s;
  s.frames = checked_dim(t.dims[0], "shutter");
  s.height = checked_dim(t.dims[1], "shutter");
  s.width = checked_dim(t.dims[2], "shutter");
  s.seed = 0;
  s.mask = t.to_u8();
  const std::size_t plane = static_cast<std::size_t>(s.width) * s.height;
  int bump = -1;
  for (std::size_t p = 0; p < plane; ++p) {
    int run_start = -1, run_len = 0, runs = 0;
    for (int t_i = 0; t_i < s.frames; ++t_i) {
      const std::uint8_t v = s.mask[static_cast<std::size_t>(t_i) * plane + p];
      if (v > 1) throw FormatError("shutter mask must be binary");
      if (v == 1) {
        if (run_start < 0 || s.mask[static_cast<std::size_t>(t_i - 1) * plane + p] == 0) {
          ++runs;
          run_start = t_i;
        }
        ++run_len;
      }
    }
    if (runs != 1) throw FormatError("shutter pixel lacks a single contiguous exposure bump");
    if (bump < 0) bump = run_len;
    if (run_len != bump) throw FormatError("shutter bump length varies between pixels");
  }
  s.bump_length = bump;
  return s;
}

Tensor coded_to_tensor(const CodedImage& image) {
  return make_tensor(
      {static_cast<std::uint64_t>(image.height), static_cast<std::uint64_t>(image.width)},
      image.data);
}

CodedImage coded_from_tensor(const Tensor& t) {
  expect_ndim(t, 2, "coded image");
  CodedImage image;
  image.height = checked_dim(t.dims[0], "coded image");
  image.width = checked_dim(t.dims[1], "coded image");
  image.data = t.to_f64();
  return image;
}

Tensor bank_to_tensor(const FilterBank& bank) {
  return make_tensor({static_cast<std::uint64_t>(bank.count), static_cast<std::uint64_t>(bank.size),
                      static_cast<std::uint64_t>(bank.size)},
                     bank.data);
}

FilterBank bank_from_tensor(const Tensor& t) {
  expect_ndim(t, 3, "filter bank");
  if (t.dims[1] != t.dims[2]) throw FormatError("filter bank: filters must be square");
  FilterBank bank;
  bank.count = checked_dim(t.dims[0], "filter bank");
  bank.size = checked_dim(t.dims[1], "filter bank");
  bank.data = t.to_f64();
  return bank;
}

Tensor maps_to_tensor(const FeatureMaps& maps) {
  return make_tensor({static_cast<std::uint64_t>(maps.count), static_cast<std::uint64_t>(maps.frames),
                      static_cast<std::uint64_t>(maps.height), static_cast<std::uint64_t>(maps.width)},
                     maps.data);
}

FeatureMaps maps_from_tensor(const Tensor& t) {
  expect_ndim(t, 4, "feature maps");
  FeatureMaps maps;
  maps.count = checked_dim(t.dims[0], "feature maps");
  maps.frames = checked_dim(t.dims[1], "feature maps");
  maps.height = checked_dim(t.dims[2], "feature maps");
  maps.width = checked_dim(t.dims[3], "feature maps");
  maps.data = t.to_f64();
  return maps;
}

namespace {

int pnm_token(std::istream& in, const char* what) {
  // Whitespace-separated ASCII integer; '#' starts a comment to end of line.
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c)) throw FormatError(std::string("malformed PNM header: ") + what);
  long value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    if (value > std::numeric_limits<int>::max()) throw FormatError("PNM header value overflow");
    c = in.get();
  }
  if (c != EOF) in.unget();
  return static_cast<int>(value);
}

std::vector<std::uint16_t> read_pnm_samples(std::istream& in, std::size_t count, int maxval,
                                            const std::filesystem::path& path) {
  const bool wide = maxval > 255;
  std::vector<unsigned char> raw(count * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  std::vector<std::uint16_t> samples(count);
  if (wide) {
    // 16-bit PNM samples are big-endian.
    for (std::size_t i = 0; i < count; ++i) {
      samples[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) samples[i] = raw[i];
  }
  for (std::uint16_t s : samples) {
    if (s > maxval) throw FormatError(path.string() + ": sample exceeds declared maxval");
  }
  return samples;
}

}  // namespace

GrayImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) {
    throw FormatError(path.string() + ": expected a binary PGM (P5) or PPM (P6) file");
  }
  const bool color = (m1 == '6');
  const int width = pnm_token(in, "width");
  const int height = pnm_token(in, "height");
  const int maxval = pnm_token(in, "maxval");
  if (width < 1 || height < 1) throw FormatError(path.string() + ": bad image dimensions");
  if (maxval < 1 || maxval > 65535) throw FormatError(path.string() + ": bad maxval");
  in.get();  // single whitespace byte after maxval
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  const auto samples = read_pnm_samples(in, pixels * (color ? 3 : 1), maxval, path);
  GrayImage image(width, height);
  const double inv = 1.0 / maxval;
  if (color) {
    for (std::size_t i = 0; i < pixels; ++i) {
      const double r = samples[3 * i] * inv;
      const double g = samples[3 * i + 1] * inv;
      const double b = samples[3 * i + 2] * inv;
      image.pixels[i] = 0.2126 * r + 0.7152 * g + 0.0722 * b;
    }
  } else {
    for (std::size_t i = 0; i < pixels; ++i) image.pixels[i] = samples[i] * inv;
  }
  return image;
}

void write_pgm(const std::filesystem::path& path, const double* values, int width, int height,
               int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ParamError("bit depth must be 8 or 16");
  const int maxval = (bit_depth == 8) ? 255 : 65535;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
  const std::size_t pixels = static_cast<std::size_t>(width) * height;
  std::vector<unsigned char> raw(pixels * (bit_depth == 16 ? 2 : 1));
  for (std::size_t i = 0; i < pixels; ++i) {
    double v = values[i];
    if (!std::isfinite(v)) throw ParamError("non-finite pixel value");
    v = std::clamp(v, 0.0, 1.0);
    const auto code = static_cast<std::uint32_t>(std::floor(v * maxval + 0.5));
    if (bit_depth == 16) {
      raw[2 * i] = static_cast<unsigned char>(code >> 8);
      raw[2 * i + 1] = static_cast<unsigned char>(code & 0xff);
    } else {
      raw[i] = static_cast<unsigned char>(code);
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed on " + path.string());
}

namespace {

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.pgm", index);
  return buf;
}

}  // namespace

FrameSequence load_frames(const std::filesystem::path& dir, int expected_count) {
  if (!std::filesystem::is_directory(dir)) {
    throw IngestError(dir.string() + " is not a directory");
  }
  std::vector<std::pair<int, std::filesystem::path>> entries;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() < 7 || name.compare(0, 6, "frame_") != 0) continue;
    const std::size_t dot = name.find_last_of('.');
    if (dot == std::string::npos || dot <= 6) continue;
    const std::string digits = name.substr(6, dot - 6);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(),
                                       [](unsigned char c) { return std::isdigit(c); })) {
      continue;
    }
    entries.emplace_back(std::stoi(digits), entry.path());
  }
  std::sort(entries.begin(), entries.end());
  if (entries.empty()) throw IngestError("no frame_* images found in " + dir.string());
  if (expected_count >= 0 && static_cast<int>(entries.size()) < expected_count) {
    throw IngestError("found " + std::to_string(entries.size()) + " frames in " + dir.string() +
                      ", expected " + std::to_string(expected_count));
  }
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    if (entries[i].first == entries[i + 1].first) {
      throw IngestError("duplicate frame index " + std::to_string(entries[i].first));
    }
  }
  FrameSequence seq;
  seq.frames = static_cast<int>(entries.size());
  for (int t = 0; t < seq.frames; ++t) {
    const GrayImage image = read_image(entries[static_cast<std::size_t>(t)].second);
    if (t == 0) {
      seq.width = image.width;
      seq.height = image.height;
      seq.data.resize(static_cast<std::size_t>(seq.frames) * image.pixels.size());
    } else if (image.width != seq.width || image.height != seq.height) {
      throw IngestError("frame dimensions differ within " + dir.string());
    }
    std::copy(image.pixels.begin(), image.pixels.end(),
              seq.data.begin() + static_cast<std::ptrdiff_t>(seq.frame_size()) * t);
  }
  return seq;
}

void save_frames(const FrameSequence& seq, const std::filesystem::path& dir, int bit_depth) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (int t = 0; t < seq.frames; ++t) {
    write_pgm(dir / frame_name(t), seq.frame(t), seq.width, seq.height, bit_depth);
  }
}

}  // namespace cscvideo
