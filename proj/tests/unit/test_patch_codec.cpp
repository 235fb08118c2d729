#include "cscvideo/patch_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "cscvideo/coded_exposure.hpp"
#include "cscvideo/errors.hpp"
#include "cscvideo/tensor_io.hpp"
#include "doctest.h"
#include "support/random_instances.hpp"
#include "support/reference_lasso.hpp"
#include "support/temp_dir.hpp"

using cscvideo::BlockSelectionConfig;
using cscvideo::BlockSet;
using cscvideo::BlockSparseCode;
using cscvideo::CodedImage;
using cscvideo::FrameSequence;
using cscvideo::PatchConfig;
using cscvideo::PatchDictionary;
using cscvideo::SelectionStrategy;
using cscvideo::ShutterFunction;

namespace {

PatchConfig small_config(int px, int py, int pt, int stride) {
  PatchConfig cfg;
  cfg.p_x = px;
  cfg.p_y = py;
  cfg.p_t = pt;
  cfg.stride = stride;
  return cfg;
}

Eigen::MatrixXd random_matrix(int rows, int cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = gauss(rng);
  }
  return m;
}

double kkt_violation(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double lambda,
                     const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd g = a.transpose() * (b - a * alpha);
  double worst = 0.0;
  for (int j = 0; j < alpha.size(); ++j) {
    if (alpha(j) == 0.0) {
      worst = std::max(worst, std::abs(g(j)) - lambda);
    } else {
      worst = std::max(worst, std::abs(g(j) - (alpha(j) > 0.0 ? lambda : -lambda)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("extract_blocks covers the volume on clamped grids") {
  SUBCASE("single block equals the vectorized volume") {
    FrameSequence seq = testsupport::random_frames(7, 7, 4, 11);
    const PatchConfig cfg = small_config(7, 7, 4, 1);
    const BlockSet set = cscvideo::extract_blocks(seq, cfg);
    REQUIRE(set.positions.size() == 1);
    CHECK(set.block_length == 7 * 7 * 4);
    for (int t = 0; t < 4; ++t) {
      for (int y = 0; y < 7; ++y) {
        for (int x = 0; x < 7; ++x) {
          CHECK(set.blocks((t * 7 + y) * 7 + x, 0) == seq.at(x, y, t));
        }
      }
    }
  }

  SUBCASE("grid counts with stride one") {
    FrameSequence seq = testsupport::random_frames(8, 8, 4, 12);
    const BlockSet set = cscvideo::extract_blocks(seq, small_config(7, 7, 4, 1));
    CHECK(set.positions.size() == 4);
  }

  SUBCASE("last position clamps to the border") {
    FrameSequence seq = testsupport::random_frames(10, 7, 4, 13);
    const BlockSet set = cscvideo::extract_blocks(seq, small_config(7, 7, 4, 2));
    REQUIRE(set.positions.size() == 3);
    CHECK(set.positions[0].x == 0);
    CHECK(set.positions[1].x == 2);
    CHECK(set.positions[2].x == 3);
  }

  SUBCASE("temporal grid steps by the block depth") {
    FrameSequence seq = testsupport::random_frames(7, 7, 8, 14);
    const BlockSet set = cscvideo::extract_blocks(seq, small_config(7, 7, 4, 1));
    REQUIRE(set.positions.size() == 2);
    CHECK(set.positions[0].t == 0);
    CHECK(set.positions[1].t == 4);
  }

  SUBCASE("too small a volume is rejected") {
    FrameSequence seq = testsupport::random_frames(6, 7, 4, 15);
    CHECK_THROWS_AS(cscvideo::extract_blocks(seq, small_config(7, 7, 4, 1)), cscvideo::ParamError);
  }
}

TEST_CASE("merge_blocks inverts extract_blocks") {
  SUBCASE("overlapping grid") {
    FrameSequence seq = testsupport::random_frames(12, 10, 8, 21);
    const PatchConfig cfg = small_config(7, 5, 4, 2);
    const BlockSet set = cscvideo::extract_blocks(seq, cfg);
    const FrameSequence back = cscvideo::merge_blocks(set, 12, 10, 8, cfg);
    REQUIRE(back.data.size() == seq.data.size());
    for (std::size_t i = 0; i < seq.data.size(); ++i) {
      CHECK(back.data[i] == doctest::Approx(seq.data[i]).epsilon(1e-12));
    }
  }

  SUBCASE("exact tiling") {
    FrameSequence seq = testsupport::random_frames(14, 14, 4, 22);
    const PatchConfig cfg = small_config(7, 7, 4, 7);
    const BlockSet set = cscvideo::extract_blocks(seq, cfg);
    REQUIRE(set.positions.size() == 4);
    const FrameSequence back = cscvideo::merge_blocks(set, 14, 14, 4, cfg);
    for (std::size_t i = 0; i < seq.data.size(); ++i) {
      CHECK(back.data[i] == doctest::Approx(seq.data[i]).epsilon(1e-12));
    }
  }

  SUBCASE("mismatched block length is rejected") {
    BlockSet set;
    set.block_length = 10;
    set.blocks.resize(10, 1);
    set.positions.push_back({0, 0, 0});
    CHECK_THROWS_AS(cscvideo::merge_blocks(set, 7, 7, 4, small_config(7, 7, 4, 1)),
                    cscvideo::ParamError);
  }
}

TEST_CASE("selection strategies are deterministic and in range") {
  const int n = 60;
  Eigen::MatrixXd blocks(5, n);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int j = 0; j < n; ++j) {
    const double scale = 0.1 + 0.05 * j;
    for (int i = 0; i < 5; ++i) blocks(i, j) = scale * gauss(rng);
  }

  for (auto strategy : {SelectionStrategy::kRandom, SelectionStrategy::kVarianceBins,
                        SelectionStrategy::kStratifiedGamma, SelectionStrategy::kGamma}) {
    BlockSelectionConfig cfg;
    cfg.strategy = strategy;
    cfg.count = 12;
    cfg.seed = 99;
    const std::vector<int> first = cscvideo::select_training_blocks(blocks, cfg);
    const std::vector<int> second = cscvideo::select_training_blocks(blocks, cfg);
    CHECK(first == second);
    CHECK(first.size() == 12);
    std::set<int> unique(first.begin(), first.end());
    CHECK(unique.size() == 12);
    for (int idx : first) {
      CHECK(idx >= 0);
      CHECK(idx < n);
    }
  }
}

TEST_CASE("selection validation") {
  Eigen::MatrixXd blocks = random_matrix(4, 10, 5);
  BlockSelectionConfig cfg;
  cfg.count = 11;
  CHECK_THROWS_AS(cscvideo::select_training_blocks(blocks, cfg), cscvideo::SelectionError);
  cfg.count = 0;
  CHECK_THROWS_AS(cscvideo::select_training_blocks(blocks, cfg), cscvideo::ParamError);
  cfg.count = 2;
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cscvideo::select_training_blocks(blocks, cfg), cscvideo::ParamError);
  cfg.gamma = 1.5;
  CHECK_THROWS_AS(cscvideo::select_training_blocks(blocks, cfg), cscvideo::ParamError);
  CHECK_THROWS_AS(cscvideo::parse_strategy("bogus"), cscvideo::ParamError);
  CHECK(cscvideo::parse_strategy("variance-bins") == SelectionStrategy::kVarianceBins);
  CHECK(cscvideo::strategy_name(SelectionStrategy::kGamma) == "gamma");
}

TEST_CASE("variance-bins draws equally from the three variance bins") {
  const int n = 30;
  Eigen::MatrixXd blocks(4, n);
  blocks.setZero();
  // Column j has variance growing with j, so the sorted order is the identity.
  for (int j = 0; j < n; ++j) {
    blocks(0, j) = static_cast<double>(j + 1);
    blocks(1, j) = -static_cast<double>(j + 1);
  }
  BlockSelectionConfig cfg;
  cfg.strategy = SelectionStrategy::kVarianceBins;
  cfg.count = 9;
  cfg.seed = 7;
  const std::vector<int> picked = cscvideo::select_training_blocks(blocks, cfg);
  int lo = 0, mid = 0, hi = 0;
  for (int idx : picked) {
    if (idx < 10) {
      ++lo;
    } else if (idx < 20) {
      ++mid;
    } else {
      ++hi;
    }
  }
  CHECK(lo == 3);
  CHECK(mid == 3);
  CHECK(hi == 3);

  cfg.count = 10;
  const std::vector<int> more = cscvideo::select_training_blocks(blocks, cfg);
  lo = mid = hi = 0;
  for (int idx : more) {
    if (idx < 10) {
      ++lo;
    } else if (idx < 20) {
      ++mid;
    } else {
      ++hi;
    }
  }
  CHECK(lo == 3);
  CHECK(mid == 3);
  CHECK(hi == 4);

  // Taking the whole corpus still respects the bins (sizes 1, 1, 2 here).
  Eigen::MatrixXd few = random_matrix(4, 4, 17);
  cfg.count = 4;
  const std::vector<int> all = cscvideo::select_training_blocks(few, cfg);
  std::set<int> unique(all.begin(), all.end());
  CHECK(unique.size() == 4);
}

TEST_CASE("gamma bias favors high-variance blocks as gamma shrinks") {
  const int n = 200;
  Eigen::MatrixXd blocks(3, n);
  blocks.setZero();
  for (int j = 0; j < n; ++j) {
    blocks(0, j) = static_cast<double>(j);
    blocks(1, j) = -static_cast<double>(j);
  }
  auto mean_rank = [&](double gamma) {
    double total = 0.0;
    int draws = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      BlockSelectionConfig cfg;
      cfg.strategy = SelectionStrategy::kGamma;
      cfg.gamma = gamma;
      cfg.count = 10;
      cfg.seed = seed;
      for (int idx : cscvideo::select_training_blocks(blocks, cfg)) {
        total += idx;
        ++draws;
      }
    }
    return total / draws;
  };
  CHECK(mean_rank(0.3) > mean_rank(0.9) + 10.0);
}

TEST_CASE("stratified-gamma touches every stratum once per round") {
  const int n = 50;
  Eigen::MatrixXd blocks(3, n);
  blocks.setZero();
  for (int j = 0; j < n; ++j) blocks(0, j) = static_cast<double>(j);
  BlockSelectionConfig cfg;
  cfg.strategy = SelectionStrategy::kStratifiedGamma;
  cfg.count = 5;
  cfg.gamma = 0.5;
  cfg.seed = 31;
  const std::vector<int> picked = cscvideo::select_training_blocks(blocks, cfg);
  REQUIRE(picked.size() == 5);
  // Boundaries round(50*(i/5)^0.5): 0, 22, 32, 39, 45, 50. Draws run
  // from the top stratum down, and picks index the variance-sorted order,
  // which is the identity here.
  const int bounds[6] = {0, 22, 32, 39, 45, 50};
  for (int i = 0; i < 5; ++i) {
    CHECK(picked[i] >= bounds[4 - i]);
    CHECK(picked[i] < bounds[5 - i]);
  }
}

TEST_CASE("lasso_solve matches its optimality conditions") {
  SUBCASE("orthonormal design with zero penalty gives the projection") {
    Eigen::MatrixXd raw = random_matrix(12, 12, 41);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();
    const Eigen::VectorXd b = random_matrix(12, 1, 42);
    const BlockSparseCode code = cscvideo::lasso_solve(q, b, 0.0);
    const Eigen::VectorXd expected = q.transpose() * b;
    CHECK((code.alpha - expected).lpNorm<Eigen::Infinity>() < 1e-8);
  }

  SUBCASE("large penalty zeroes the code") {
    const Eigen::MatrixXd a = random_matrix(10, 18, 43);
    const Eigen::VectorXd b = random_matrix(10, 1, 44);
    const double lambda = (a.transpose() * b).lpNorm<Eigen::Infinity>() * 1.01;
    const BlockSparseCode code = cscvideo::lasso_solve(a, b, lambda);
    CHECK(code.support == 0);
    CHECK(code.alpha.lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("KKT residual within tolerance on overcomplete designs") {
    const Eigen::MatrixXd a = random_matrix(20, 50, 45);
    const Eigen::VectorXd b = random_matrix(20, 1, 46);
    const BlockSparseCode code = cscvideo::lasso_solve(a, b, 0.5);
    CHECK(kkt_violation(a, b, 0.5, code.alpha) <= 2e-6);
    int nnz = 0;
    for (int j = 0; j < code.alpha.size(); ++j) {
      if (code.alpha(j) != 0.0) ++nnz;
    }
    CHECK(code.support == nnz);
  }

  SUBCASE("objective matches an accelerated proximal reference") {
    const Eigen::MatrixXd a = random_matrix(10, 25, 47);
    const Eigen::VectorXd b = random_matrix(10, 1, 48);
    const double lambda = 0.3;
    const BlockSparseCode code = cscvideo::lasso_solve(a, b, lambda);
    const Eigen::VectorXd ref = testsupport::reference_lasso(a, b, lambda);
    const double ours = testsupport::lasso_objective(a, b, lambda, code.alpha);
    const double theirs = testsupport::lasso_objective(a, b, lambda, ref);
    CHECK(ours <= theirs + 1e-8 * std::max(1.0, theirs));
    CHECK((code.alpha - ref).lpNorm<Eigen::Infinity>() < 1e-4);
  }

  SUBCASE("planted sparse code is recovered") {
    Eigen::MatrixXd a = random_matrix(30, 60, 49);
    for (int j = 0; j < 60; ++j) a.col(j).normalize();
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(60);
    truth(5) = 1.0;
    truth(21) = -0.8;
    truth(44) = 1.2;
    const Eigen::VectorXd b = a * truth;
    const BlockSparseCode code = cscvideo::lasso_solve(a, b, 1e-4);
    CHECK((code.alpha - truth).norm() / truth.norm() < 0.05);
  }

  SUBCASE("doubling data and penalty doubles the solution") {
    const Eigen::MatrixXd a = random_matrix(15, 30, 50);
    const Eigen::VectorXd b = random_matrix(15, 1, 51);
    const BlockSparseCode one = cscvideo::lasso_solve(a, b, 0.2);
    const BlockSparseCode two = cscvideo::lasso_solve(a, 2.0 * b, 0.4);
    // Exact for the true minimizers; the absolute KKT exit leaves each run at
    // slightly different precision.
    CHECK((two.alpha - 2.0 * one.alpha).lpNorm<Eigen::Infinity>() < 1e-5);
  }

  SUBCASE("zero columns stay inactive") {
    Eigen::MatrixXd a = random_matrix(8, 12, 52);
    a.col(3).setZero();
    const Eigen::VectorXd b = random_matrix(8, 1, 53);
    const BlockSparseCode code = cscvideo::lasso_solve(a, b, 0.1);
    CHECK(code.alpha(3) == 0.0);
    CHECK(code.alpha.allFinite());
  }
}

TEST_CASE("train_ksvd validation and invariants") {
  const Eigen::MatrixXd blocks = random_matrix(12, 80, 61);
  CHECK_THROWS_AS(cscvideo::train_ksvd(blocks, 12, 2, 3, 0), cscvideo::ParamError);
  CHECK_THROWS_AS(cscvideo::train_ksvd(blocks, 10, 2, 3, 0), cscvideo::ParamError);
  CHECK_THROWS_AS(cscvideo::train_ksvd(blocks, 20, 0, 3, 0), cscvideo::ParamError);
  CHECK_THROWS_AS(cscvideo::train_ksvd(blocks, 20, 2, 0, 0), cscvideo::ParamError);

  const cscvideo::KsvdResult result = cscvideo::train_ksvd(blocks, 20, 3, 6, 5);
  REQUIRE(result.error.size() == 6);
  for (std::size_t i = 1; i < result.error.size(); ++i) {
    CHECK(result.error[i] <= result.error[i - 1] * (1.0 + 1e-12) + 1e-12);
  }
  REQUIRE(result.dictionary.atoms.cols() == 20);
  for (int j = 0; j < 20; ++j) {
    CHECK(result.dictionary.atoms.col(j).norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("train_ksvd recovers a planted dictionary") {
  const int m = 16;
  const int q = 24;
  const int samples = 600;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd truth(m, q);
  for (int j = 0; j < q; ++j) {
    for (int i = 0; i < m; ++i) truth(i, j) = gauss(rng);
    truth.col(j).normalize();
  }
  Eigen::MatrixXd data(m, samples);
  std::uniform_int_distribution<int> pick(0, q - 1);
  for (int i = 0; i < samples; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    std::set<int> used;
    while (static_cast<int>(used.size()) < 2) used.insert(pick(rng));
    for (int j : used) x += gauss(rng) * truth.col(j);
    data.col(i) = x;
  }
  const cscvideo::KsvdResult result = cscvideo::train_ksvd(data, q, 2, 25, 9);
  int recovered = 0;
  for (int j = 0; j < q; ++j) {
    double best = 0.0;
    for (int k = 0; k < q; ++k) {
      best = std::max(best, std::abs(truth.col(j).dot(result.dictionary.atoms.col(k))));
    }
    if (best > 0.9) ++recovered;
  }
  CHECK(recovered >= q * 7 / 10);
  CHECK(result.error.back() < 0.05 * data.squaredNorm());
}

TEST_CASE("reconstruct_patch recovers what the dictionary can express") {
  // One frame, identity shutter: the block operator reduces to the dictionary
  // itself, so a dictionary containing the pixel basis reproduces the image.
  const int w = 9, h = 9;
  PatchConfig cfg = small_config(7, 7, 1, 2);
  cfg.lambda_lasso = 1e-8;

  PatchDictionary dict;
  dict.atom_length = 49;
  dict.atom_count = 60;
  dict.atoms.resize(49, 60);
  dict.atoms.leftCols(49) = Eigen::MatrixXd::Identity(49, 49);
  Eigen::MatrixXd extra = random_matrix(49, 11, 71);
  for (int j = 0; j < 11; ++j) extra.col(j).normalize();
  dict.atoms.rightCols(11) = extra;

  ShutterFunction shutter;
  shutter.width = w;
  shutter.height = h;
  shutter.frames = 1;
  shutter.bump_length = 1;
  shutter.mask.assign(static_cast<std::size_t>(w) * h, 1);

  CodedImage coded(w, h);
  std::mt19937_64 rng(72);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& v : coded.data) v = uni(rng);

  const FrameSequence recon = cscvideo::reconstruct_patch(coded, shutter, dict, cfg);
  REQUIRE(recon.frames == 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      CHECK(recon.at(x, y, 0) == doctest::Approx(coded.at(x, y)).epsilon(1e-4));
    }
  }
}

TEST_CASE("reconstruct_patch validates its inputs") {
  PatchConfig cfg = small_config(7, 7, 4, 2);
  PatchDictionary dict;
  dict.atom_length = cfg.block_length();
  dict.atom_count = 4;
  dict.atoms = random_matrix(dict.atom_length, 4, 81);
  ShutterFunction shutter = cscvideo::generate_shutter(9, 9, 4, 2, 5);
  CodedImage coded(9, 9);

  SUBCASE("frame count mismatch") {
    ShutterFunction bad = cscvideo::generate_shutter(9, 9, 5, 2, 5);
    CHECK_THROWS_AS(cscvideo::reconstruct_patch(coded, bad, dict, cfg), cscvideo::ParamError);
  }
  SUBCASE("dictionary length mismatch") {
    PatchDictionary bad = dict;
    bad.atom_length = 10;
    bad.atoms = random_matrix(10, 4, 82);
    CHECK_THROWS_AS(cscvideo::reconstruct_patch(coded, shutter, bad, cfg), cscvideo::ParamError);
  }
  SUBCASE("image smaller than a block") {
    CodedImage tiny(5, 9);
    ShutterFunction small_shutter = cscvideo::generate_shutter(5, 9, 4, 2, 5);
    CHECK_THROWS_AS(cscvideo::reconstruct_patch(tiny, small_shutter, dict, cfg),
                    cscvideo::ParamError);
  }
  SUBCASE("shutter and image sizes must agree") {
    CodedImage other(10, 9);
    CHECK_THROWS_AS(cscvideo::reconstruct_patch(other, shutter, dict, cfg), cscvideo::ParamError);
  }
}

TEST_CASE("dictionary tensors round-trip bit-exactly") {
  PatchDictionary dict;
  dict.atom_length = 6;
  dict.atom_count = 9;
  dict.atoms = random_matrix(6, 9, 91);

  const cscvideo::Tensor t = cscvideo::dictionary_to_tensor(dict);
  testsupport::TempDir dir("dict_io");
  const auto path = dir.path() / "dict.cvt";
  cscvideo::write_tensor(path, t);
  const cscvideo::Tensor back = cscvideo::read_tensor(path);
  const PatchDictionary restored = cscvideo::dictionary_from_tensor(back);
  REQUIRE(restored.atom_length == dict.atom_length);
  REQUIRE(restored.atom_count == dict.atom_count);
  CHECK(std::memcmp(restored.atoms.data(), dict.atoms.data(),
                    sizeof(double) * 6 * 9) == 0);

  cscvideo::Tensor bad = t;
  bad.dims = {54};
  CHECK_THROWS_AS(cscvideo::dictionary_from_tensor(bad), cscvideo::FormatError);
}
