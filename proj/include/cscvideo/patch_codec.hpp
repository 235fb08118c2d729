#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cscvideo/tensor.hpp"
#include "cscvideo/tensor_io.hpp"

namespace cscvideo {

struct PatchConfig {
  int p_x = 7;
  int p_y = 7;
  int p_t = 20;
  int stride = 2;            // spatial step between reconstructed blocks
  int atoms = 1960;          // dictionary size q, must exceed block_length()
  int train_sparsity = 10;   // atoms per block in the K-SVD coding step
  double lambda_lasso = 0.1; // penalized-form lasso weight
  int block_length() const { return p_x * p_y * p_t; }
};

// Column-major atoms, every column unit L2 norm.
struct PatchDictionary {
  int atom_length = 0;
  int atom_count = 0;
  Eigen::MatrixXd atoms;
};

struct BlockPosition {
  int x = 0;
  int y = 0;
  int t = 0;
};

// Vectorized blocks as columns; inside a block x runs fastest, then y, then t.
struct BlockSet {
  int block_length = 0;
  std::vector<BlockPosition> positions;
  Eigen::MatrixXd blocks;
};

// Block positions step by `stride` and the final position is clamped so the
// last block ends exactly at the border; every voxel is covered. The temporal
// grid uses step p_t (no temporal overlap). Grid order: t, then y, then x.
BlockSet extract_blocks(const FrameSequence& seq, const PatchConfig& cfg);

// Average of all block estimates covering each voxel. Voxels no block covers
// stay zero.
FrameSequence merge_blocks(const BlockSet& set, int width, int height, int frames,
                           const PatchConfig& cfg);

enum class SelectionStrategy { kRandom, kVarianceBins, kStratifiedGamma, kGamma };

SelectionStrategy parse_strategy(const std::string& name);
std::string strategy_name(SelectionStrategy strategy);

struct BlockSelectionConfig {
  SelectionStrategy strategy = SelectionStrategy::kVarianceBins;
  double gamma = 0.3;  // exponent for the gamma strategies, in (0, 1]
  int count = 1;
  std::uint64_t seed = 0;
};

// Returns distinct column indices into `blocks`, deterministic per seed.
// random: uniform. variance-bins: three equal-count bins split at the 1/3 and
// 2/3 variance quantiles, equal draws per bin (remainder to the higher bins).
// stratified-gamma: strata over the variance-sorted order with boundaries
// (i/M)^gamma, one uniform draw per stratum from the highest down, repeated.
// gamma: j = round(N·u^gamma) into the variance-sorted order, redrawn while
// taken. Requests a bin or the corpus cannot satisfy throw SelectionError.
std::vector<int> select_training_blocks(const Eigen::MatrixXd& blocks,
                                        const BlockSelectionConfig& cfg);

struct KsvdResult {
  PatchDictionary dictionary;
  // Σ‖blocks − Ψα‖² after every iteration; non-increasing.
  std::vector<double> error;
};

// Standard K-SVD: orthogonal matching pursuit codes (at most `sparsity` atoms
// per block, kept only when they lower that block's residual), sequential
// rank-one atom updates via power iteration on the restricted residual, unused
// atoms replaced by the worst-represented blocks. Atoms stay unit norm.
KsvdResult train_ksvd(const Eigen::MatrixXd& blocks, int atom_count, int sparsity, int iterations,
                      std::uint64_t seed);

struct BlockSparseCode {
  Eigen::VectorXd alpha;
  int support = 0;
};

// minimize ½‖b − Aα‖² + λ‖α‖₁ by cyclic coordinate descent with a cached
// residual, to KKT tolerance 1e-6. Each cycle re-screens the gradient and
// sweeps the active-or-violating coordinates.
BlockSparseCode lasso_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double lambda);

// Per block position: the local measurement operator (p_x·p_y rows) collapses
// the shutter's active instants of each pixel, the lasso runs against that
// operator times the dictionary, and the decoded blocks Ψα merge by averaging.
FrameSequence reconstruct_patch(const CodedImage& coded, const ShutterFunction& shutter,
                                const PatchDictionary& dict, const PatchConfig& cfg);

Tensor dictionary_to_tensor(const PatchDictionary& dict);
PatchDictionary dictionary_from_tensor(const Tensor& t);

}  // namespace cscvideo
