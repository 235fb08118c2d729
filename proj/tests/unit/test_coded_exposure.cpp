#include "cscvideo/coded_exposure.hpp"

#include <cmath>
#include <random>

#include "cscvideo/errors.hpp"
#include "doctest.h"

using namespace cscvideo;

namespace {

FrameSequence random_video(int w, int h, int t, unsigned seed) {
  FrameSequence seq;
  seq.width = w;
  seq.height = h;
  seq.frames = t;
  seq.data.resize(static_cast<std::size_t>(w) * h * t);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& v : seq.data) v = uni(rng);
  return seq;
}

}  // namespace

TEST_CASE("shutter invariants hold for every pixel") {
  const ShutterFunction s = generate_shutter(4, 4, 20, 3, 7);
  const std::size_t plane = 16;
  for (std::size_t p = 0; p < plane; ++p) {
    int sum = 0, transitions = 0, prev = 0;
    for (int t = 0; t < 20; ++t) {
      const int v = s.mask[t * plane + p];
      sum += v;
      if (v != prev) ++transitions;
      prev = v;
    }
    CHECK(sum == 3);
    CHECK(transitions <= 2);  // one rise, at most one fall: a single run
  }
}

TEST_CASE("degenerate shutter T=1 L=1 is all ones") {
  const ShutterFunction s = generate_shutter(5, 3, 1, 1, 123);
  for (const auto v : s.mask) CHECK(v == 1);
}

TEST_CASE("shutter rejects invalid bump length") {
  CHECK_THROWS_AS(generate_shutter(4, 4, 5, 6, 0), ParamError);
  CHECK_THROWS_AS(generate_shutter(4, 4, 5, 0, 0), ParamError);
}

TEST_CASE("shutter regeneration is bit identical and seed sensitive") {
  const ShutterFunction a = generate_shutter(16, 16, 20, 3, 99);
  const ShutterFunction b = generate_shutter(16, 16, 20, 3, 99);
  CHECK(a.mask == b.mask);
  const ShutterFunction c = generate_shutter(16, 16, 20, 3, 100);
  CHECK(a.mask != c.mask);
}

TEST_CASE("per-frame sampling averages L/T over many pixels") {
  // 400x400 = 1.6e5 pixels; empirical per-frame mean within loose noise bounds.
  const ShutterFunction s = generate_shutter(400, 400, 20, 3, 5);
  const SamplingStats stats = sampling_stats(s);
  CHECK(stats.overall == 0.15);  // exact: total active = plane*L
  double interior_mean = 0.0;
  int interior = 0;
  for (int t = 0; t < 20; ++t) {
    if (t >= 2 && t <= 17) {
      interior_mean += stats.per_frame[t];
      ++interior;
    }
  }
  interior_mean /= interior;
  // Interior frames are covered by 3 of the 18 admissible starts: 3/18.
  CHECK(interior_mean == doctest::Approx(3.0 / 18.0).epsilon(0.02));
  // Edge frames only by 1 (first) and 2 (second) starts.
  CHECK(stats.per_frame[0] == doctest::Approx(1.0 / 18.0).epsilon(0.1));
  CHECK(stats.per_frame[0] < interior_mean);
  CHECK(stats.per_frame[19] < interior_mean);
}

TEST_CASE("sampling ratios are exact counts") {
  const ShutterFunction s = generate_shutter(64, 64, 20, 2, 11);
  CHECK(sampling_stats(s).overall == 0.10);
}

TEST_CASE("coded image matches brute-force triple loop") {
  const FrameSequence seq = random_video(8, 8, 5, 21);
  const ShutterFunction s = generate_shutter(8, 8, 5, 2, 3);
  const CodedImage img = code_exposure(seq, s);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      double want = 0.0;
      for (int t = 0; t < 5; ++t) {
        want += s.mask[(t * 8 + y) * 8 + x] * seq.at(x, y, t);
      }
      CHECK(img.data[y * 8 + x] == doctest::Approx(want).epsilon(1e-12));
    }
  }
  CHECK(img.shutter_id == s.id());
}

TEST_CASE("all-ones shutter sums frames; static scene scales by L") {
  FrameSequence seq = random_video(6, 4, 5, 2);
  const ShutterFunction full = generate_shutter(6, 4, 5, 5, 1);
  const CodedImage img = code_exposure(seq, full);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 6; ++x) {
      double want = 0.0;
      for (int t = 0; t < 5; ++t) want += seq.at(x, y, t);
      CHECK(img.data[y * 6 + x] == doctest::Approx(want).epsilon(1e-13));
    }
  }

  FrameSequence flat = seq;
  for (int t = 0; t < 5; ++t) {
    for (std::size_t i = 0; i < flat.frame_size(); ++i) {
      flat.data[t * flat.frame_size() + i] = flat.data[i];
    }
  }
  const ShutterFunction s3 = generate_shutter(6, 4, 5, 3, 8);
  const CodedImage coded3 = code_exposure(flat, s3);
  for (std::size_t i = 0; i < coded3.data.size(); ++i) {
    CHECK(coded3.data[i] == doctest::Approx(3.0 * flat.data[i]).epsilon(1e-13));
  }
}

TEST_CASE("measurement operator is linear") {
  const ShutterFunction s = generate_shutter(8, 8, 5, 2, 13);
  const FrameSequence f = random_video(8, 8, 5, 31);
  const FrameSequence g = random_video(8, 8, 5, 32);
  std::vector<double> combo(f.data.size());
  for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = 2.5 * f.data[i] - 0.75 * g.data[i];
  const auto lhs = apply_measurement(combo, s);
  const auto af = apply_measurement(f.data, s);
  const auto ag = apply_measurement(g.data, s);
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    CHECK(lhs[i] == doctest::Approx(2.5 * af[i] - 0.75 * ag[i]).epsilon(1e-12));
  }
}

TEST_CASE("measurement adjoint identity") {
  const ShutterFunction s = generate_shutter(7, 5, 6, 3, 17);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(7 * 5 * 6), w(7 * 5);
  for (auto& x : v) x = gauss(rng);
  for (auto& x : w) x = gauss(rng);
  const auto fv = apply_measurement(v, s);
  const auto aw = apply_measurement_adjoint(w, s);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < fv.size(); ++i) lhs += fv[i] * w[i];
  for (std::size_t i = 0; i < v.size(); ++i) rhs += v[i] * aw[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));

  SUBCASE("adjoint of zero image is zero volume") {
    const auto zero = apply_measurement_adjoint(std::vector<double>(35, 0.0), s);
    for (double x : zero) CHECK(x == 0.0);
  }

  SUBCASE("forward of adjoint scales pixels by L") {
    const auto roundtrip = apply_measurement(aw, s);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(roundtrip[i] == doctest::Approx(3.0 * w[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("dimension mismatches raise ParamError") {
  const ShutterFunction s = generate_shutter(4, 4, 3, 2, 1);
  const FrameSequence seq = random_video(4, 4, 2, 1);
  CHECK_THROWS_AS(code_exposure(seq, s), ParamError);
  CHECK_THROWS_AS(apply_measurement(std::vector<double>(10, 0.0), s), ParamError);
  CHECK_THROWS_AS(apply_measurement_adjoint(std::vector<double>(10, 0.0), s), ParamError);
}
