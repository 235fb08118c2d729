#include "cscvideo/patch_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <utility>

#include "cscvideo/errors.hpp"

namespace cscvideo {
namespace {

std::vector<int> grid_positions(int extent, int patch, int step) {
  std::vector<int> pos;
  for (int p = 0; p + patch <= extent; p += step) pos.push_back(p);
  if (pos.empty() || pos.back() != extent - patch) pos.push_back(extent - patch);
  return pos;
}

void check_patch_config(const PatchConfig& cfg) {
  if (cfg.p_x < 1 || cfg.p_y < 1 || cfg.p_t < 1) throw ParamError("patch sizes must be positive");
  if (cfg.stride < 1) throw ParamError("stride must be >= 1");
  if (!(cfg.lambda_lasso >= 0.0)) throw ParamError("lambda_lasso must be non-negative");
}

std::vector<double> column_variances(const Eigen::MatrixXd& blocks) {
  std::vector<double> var(blocks.cols());
  const double n = static_cast<double>(blocks.rows());
  for (Eigen::Index j = 0; j < blocks.cols(); ++j) {
    const double mean = blocks.col(j).mean();
    var[j] = blocks.col(j).squaredNorm() / n - mean * mean;
  }
  return var;
}

// Indices ordered by increasing variance, ties by index.
std::vector<int> variance_order(const std::vector<double>& var) {
  std::vector<int> order(var.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return var[a] < var[b]; });
  return order;
}

// First `take` elements of a uniform shuffle.
std::vector<int> draw_without_replacement(std::vector<int> pool, int take, std::mt19937_64& rng) {
  for (int i = 0; i < take; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(take);
  return pool;
}

}  // namespace

BlockSet extract_blocks(const FrameSequence& seq, const PatchConfig& cfg) {
  check_patch_config(cfg);
  if (seq.width < cfg.p_x || seq.height < cfg.p_y || seq.frames < cfg.p_t) {
    throw ParamError("extract_blocks: sequence smaller than one block");
  }
  const std::vector<int> xs = grid_positions(seq.width, cfg.p_x, cfg.stride);
  const std::vector<int> ys = grid_positions(seq.height, cfg.p_y, cfg.stride);
  const std::vector<int> ts = grid_positions(seq.frames, cfg.p_t, cfg.p_t);

  BlockSet set;
  set.block_length = cfg.block_length();
  set.positions.reserve(xs.size() * ys.size() * ts.size());
  set.blocks.resize(set.block_length, static_cast<Eigen::Index>(xs.size() * ys.size() * ts.size()));
  Eigen::Index col = 0;
  for (int bt : ts) {
    for (int by : ys) {
      for (int bx : xs) {
        set.positions.push_back({bx, by, bt});
        double* dst = set.blocks.col(col).data();
        for (int t = 0; t < cfg.p_t; ++t) {
          for (int y = 0; y < cfg.p_y; ++y) {
            for (int x = 0; x < cfg.p_x; ++x) {
              dst[(t * cfg.p_y + y) * cfg.p_x + x] = seq.at(bx + x, by + y, bt + t);
            }
          }
        }
        ++col;
      }
    }
  }
  return set;
}

FrameSequence merge_blocks(const BlockSet& set, int width, int height, int frames,
                           const PatchConfig& cfg) {
  check_patch_config(cfg);
  if (set.block_length != cfg.block_length()) throw ParamError("merge_blocks: length mismatch");
  if (set.blocks.rows() != set.block_length ||
      set.blocks.cols() != static_cast<Eigen::Index>(set.positions.size())) {
    throw ParamError("merge_blocks: block matrix does not match positions");
  }
  FrameSequence out(width, height, frames);
  std::vector<double> weight(out.data.size(), 0.0);
  for (std::size_t i = 0; i < set.positions.size(); ++i) {
    const BlockPosition& p = set.positions[i];
    if (p.x < 0 || p.y < 0 || p.t < 0 || p.x + cfg.p_x > width || p.y + cfg.p_y > height ||
        p.t + cfg.p_t > frames) {
      throw ParamError("merge_blocks: block outside the volume");
    }
    const double* src = set.blocks.col(static_cast<Eigen::Index>(i)).data();
    for (int t = 0; t < cfg.p_t; ++t) {
      for (int y = 0; y < cfg.p_y; ++y) {
        for (int x = 0; x < cfg.p_x; ++x) {
          const std::size_t idx = out.index(p.x + x, p.y + y, p.t + t);
          out.data[idx] += src[(t * cfg.p_y + y) * cfg.p_x + x];
          weight[idx] += 1.0;
        }
      }
    }
  }
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (weight[i] > 0.0) out.data[i] /= weight[i];
  }
  return out;
}

SelectionStrategy parse_strategy(const std::string& name) {
  if (name == "random") return SelectionStrategy::kRandom;
  if (name == "variance-bins") return SelectionStrategy::kVarianceBins;
  if (name == "stratified-gamma") return SelectionStrategy::kStratifiedGamma;
  if (name == "gamma") return SelectionStrategy::kGamma;
  throw ParamError("unknown selection strategy: " + name);
}

std::string strategy_name(SelectionStrategy strategy) {
  switch (strategy) {
    case SelectionStrategy::kRandom: return "random";
    case SelectionStrategy::kVarianceBins: return "variance-bins";
    case SelectionStrategy::kStratifiedGamma: return "stratified-gamma";
    case SelectionStrategy::kGamma: return "gamma";
  }
  throw ParamError("unknown selection strategy");
}

std::vector<int> select_training_blocks(const Eigen::MatrixXd& blocks,
                                        const BlockSelectionConfig& cfg) {
  const int n = static_cast<int>(blocks.cols());
  if (cfg.count < 1) throw ParamError("selection count must be >= 1");
  if (!(cfg.gamma > 0.0) || cfg.gamma > 1.0) throw ParamError("gamma must lie in (0, 1]");
  if (cfg.count > n) throw SelectionError("requested more blocks than available");
  std::mt19937_64 rng(cfg.seed);

  if (cfg.strategy == SelectionStrategy::kRandom) {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    return draw_without_replacement(std::move(pool), cfg.count, rng);
  }

  const std::vector<double> var = column_variances(blocks);
  const std::vector<int> order = variance_order(var);

  if (cfg.strategy == SelectionStrategy::kVarianceBins) {
    const int b1 = n / 3;
    const int b2 = (2 * n) / 3;
    const std::vector<int> bins_lo(order.begin(), order.begin() + b1);
    const std::vector<int> bins_mid(order.begin() + b1, order.begin() + b2);
    const std::vector<int> bins_hi(order.begin() + b2, order.end());
    const int base = cfg.count / 3;
    const int rem = cfg.count % 3;
    const int take_hi = base + (rem >= 1 ? 1 : 0);
    const int take_mid = base + (rem >= 2 ? 1 : 0);
    const int take_lo = base;
    if (take_lo > static_cast<int>(bins_lo.size()) || take_mid > static_cast<int>(bins_mid.size()) ||
        take_hi > static_cast<int>(bins_hi.size())) {
      throw SelectionError("variance bin too small for the requested count");
    }
    std::vector<int> out = draw_without_replacement(bins_lo, take_lo, rng);
    std::vector<int> mid = draw_without_replacement(bins_mid, take_mid, rng);
    std::vector<int> hi = draw_without_replacement(bins_hi, take_hi, rng);
    out.insert(out.end(), mid.begin(), mid.end());
    out.insert(out.end(), hi.begin(), hi.end());
    return out;
  }

  if (cfg.strategy == SelectionStrategy::kStratifiedGamma) {
    const int strata = std::min(10, cfg.count);
    std::vector<int> bounds(strata + 1);
    bounds[0] = 0;
    bounds[strata] = n;
    for (int i = 1; i < strata; ++i) {
      bounds[i] = std::clamp(
          static_cast<int>(std::llround(n * std::pow(static_cast<double>(i) / strata, cfg.gamma))),
          bounds[i - 1], n);
    }
    std::vector<std::vector<int>> pools(strata);
    for (int i = 0; i < strata; ++i) {
      pools[i].assign(order.begin() + bounds[i], order.begin() + bounds[i + 1]);
    }
    std::vector<int> out;
    out.reserve(cfg.count);
    while (static_cast<int>(out.size()) < cfg.count) {
      bool progressed = false;
      for (int i = strata - 1; i >= 0 && static_cast<int>(out.size()) < cfg.count; --i) {
        auto& pool = pools[i];
        if (pool.empty()) continue;
        std::uniform_int_distribution<int> pick(0, static_cast<int>(pool.size()) - 1);
        const int at = pick(rng);
        out.push_back(pool[at]);
        pool[at] = pool.back();
        pool.pop_back();
        progressed = true;
      }
      if (!progressed) throw SelectionError("strata exhausted before reaching the count");
    }
    return out;
  }

  // gamma: biased index draw over the variance-sorted order.
  std::vector<char> taken(n, 0);
  std::vector<int> out;
  out.reserve(cfg.count);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(out.size()) < cfg.count) {
    const double u = unit(rng);
    int j = static_cast<int>(std::llround(n * std::pow(u, cfg.gamma)));
    j = std::clamp(j, 0, n - 1);
    if (taken[j]) {
      int probe = j;
      do {
        probe = (probe + 1) % n;
      } while (taken[probe]);
      j = probe;
    }
    taken[j] = 1;
    out.push_back(order[j]);
  }
  return out;
}

namespace {

Eigen::VectorXd random_unit_atom(int length, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(length);
  for (int i = 0; i < length; ++i) v(i) = gauss(rng);
  const double norm = v.norm();
  if (norm <= 0.0) {
    v.setZero();
    v(0) = 1.0;
    return v;
  }
  return v / norm;
}

// Exact orthogonal matching pursuit through the precomputed Gram matrix.
// Fills `support`/`coeffs`; returns the support size.
int omp_code(const Eigen::MatrixXd& gram, const Eigen::VectorXd& corr, int sparsity,
             std::vector<int>& support, Eigen::VectorXd& coeffs) {
  const int q = static_cast<int>(gram.rows());
  support.clear();
  Eigen::VectorXd score = corr;
  for (int step = 0; step < sparsity; ++step) {
    int best = -1;
    double best_abs = 1e-12;
    for (int j = 0; j < q; ++j) {
      const double a = std::abs(score(j));
      if (a > best_abs) {
        bool used = false;
        for (int s : support) {
          if (s == j) {
            used = true;
            break;
          }
        }
        if (!used) {
          best = j;
          best_abs = a;
        }
      }
    }
    if (best < 0) break;
    support.push_back(best);
    const int m = static_cast<int>(support.size());
    Eigen::MatrixXd gs(m, m);
    Eigen::VectorXd hs(m);
    for (int a = 0; a < m; ++a) {
      hs(a) = corr(support[a]);
      for (int b = 0; b < m; ++b) gs(a, b) = gram(support[a], support[b]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gs);
    if (ldlt.info() != Eigen::Success) {
      support.pop_back();
      break;
    }
    coeffs = ldlt.solve(hs);
    score = corr;
    for (int a = 0; a < m; ++a) score -= gram.col(support[a]) * coeffs(a);
  }
  return static_cast<int>(support.size());
}

}  // namespace

KsvdResult train_ksvd(const Eigen::MatrixXd& blocks, int atom_count, int sparsity, int iterations,
                      std::uint64_t seed) {
  const int m_b = static_cast<int>(blocks.rows());
  const int n = static_cast<int>(blocks.cols());
  if (m_b < 1 || n < 1) throw ParamError("train_ksvd: empty block matrix");
  if (atom_count <= m_b) throw ParamError("train_ksvd: dictionary must be overcomplete (q > m_b)");
  if (sparsity < 1) throw ParamError("train_ksvd: sparsity must be >= 1");
  if (iterations < 1) throw ParamError("train_ksvd: iterations must be >= 1");

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd psi(m_b, atom_count);
  {
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    const int from_data = std::min(atom_count, n);
    const std::vector<int> init = draw_without_replacement(std::move(pool), from_data, rng);
    for (int j = 0; j < from_data; ++j) {
      Eigen::VectorXd col = blocks.col(init[j]);
      const double norm = col.norm();
      psi.col(j) = norm > 1e-300 ? Eigen::VectorXd(col / norm) : random_unit_atom(m_b, rng);
    }
    for (int j = from_data; j < atom_count; ++j) psi.col(j) = random_unit_atom(m_b, rng);
  }

  Eigen::MatrixXd codes = Eigen::MatrixXd::Zero(atom_count, n);
  Eigen::MatrixXd resid = blocks;

  KsvdResult result;
  std::vector<int> support;
  Eigen::VectorXd coeffs;
  for (int iter = 0; iter < iterations; ++iter) {
    const Eigen::MatrixXd gram = psi.transpose() * psi;
    const Eigen::MatrixXd corr = psi.transpose() * blocks;
    for (int i = 0; i < n; ++i) {
      const int m = omp_code(gram, corr.col(i), sparsity, support, coeffs);
      if (m == 0) continue;
      Eigen::VectorXd estimate = Eigen::VectorXd::Zero(m_b);
      for (int a = 0; a < m; ++a) estimate += psi.col(support[a]) * coeffs(a);
      const Eigen::VectorXd r_new = blocks.col(i) - estimate;
      if (r_new.squaredNorm() <= resid.col(i).squaredNorm()) {
        codes.col(i).setZero();
        for (int a = 0; a < m; ++a) codes(support[a], i) = coeffs(a);
        resid.col(i) = r_new;
      }
    }

    std::vector<int> unused;
    std::vector<int> users;
    for (int j = 0; j < atom_count; ++j) {
      users.clear();
      for (int i = 0; i < n; ++i) {
        if (codes(j, i) != 0.0) users.push_back(i);
      }
      if (users.empty()) {
        unused.push_back(j);
        continue;
      }
      const int m = static_cast<int>(users.size());
      Eigen::MatrixXd e(m_b, m);
      Eigen::VectorXd row_old(m);
      for (int a = 0; a < m; ++a) {
        row_old(a) = codes(j, users[a]);
        e.col(a) = resid.col(users[a]) + psi.col(j) * row_old(a);
      }
      Eigen::VectorXd v = row_old / row_old.norm();
      Eigen::VectorXd w(m_b);
      bool degenerate = false;
      for (int round = 0; round < 25; ++round) {
        w = e * v;
        const double wn = w.norm();
        if (wn <= 1e-300) {
          degenerate = true;
          break;
        }
        v = e.transpose() * (w / wn);
        const double vn = v.norm();
        if (vn <= 1e-300) {
          degenerate = true;
          break;
        }
        v /= vn;
      }
      if (degenerate) {
        unused.push_back(j);
        for (int a = 0; a < m; ++a) {
          codes(j, users[a]) = 0.0;
          resid.col(users[a]) = e.col(a);
        }
        continue;
      }
      w = e * v;
      const Eigen::VectorXd atom = w / w.norm();
      const Eigen::VectorXd row_new = e.transpose() * atom;
      const double err_old = (e - psi.col(j) * row_old.transpose()).squaredNorm();
      const double err_new = e.squaredNorm() - row_new.squaredNorm();
      if (err_new <= err_old) {
        psi.col(j) = atom;
        for (int a = 0; a < m; ++a) {
          codes(j, users[a]) = row_new(a);
          resid.col(users[a]) = e.col(a) - atom * row_new(a);
        }
      }
    }

    if (!unused.empty()) {
      std::vector<char> claimed(n, 0);
      for (int j : unused) {
        int worst = -1;
        double worst_err = -1.0;
        for (int i = 0; i < n; ++i) {
          if (claimed[i]) continue;
          const double err = resid.col(i).squaredNorm();
          if (err > worst_err) {
            worst_err = err;
            worst = i;
          }
        }
        if (worst < 0) {
          psi.col(j) = random_unit_atom(m_b, rng);
          continue;
        }
        claimed[worst] = 1;
        const double norm = blocks.col(worst).norm();
        psi.col(j) =
            norm > 1e-300 ? Eigen::VectorXd(blocks.col(worst) / norm) : random_unit_atom(m_b, rng);
      }
    }

    result.error.push_back(resid.squaredNorm());
  }

  result.dictionary.atom_length = m_b;
  result.dictionary.atom_count = atom_count;
  result.dictionary.atoms = std::move(psi);
  return result;
}

BlockSparseCode lasso_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double lambda) {
  if (a.rows() != b.size()) throw ParamError("lasso_solve: dimension mismatch");
  if (!(lambda >= 0.0)) throw ParamError("lasso_solve: lambda must be non-negative");
  const int q = static_cast<int>(a.cols());
  Eigen::VectorXd colsq(q);
  for (int j = 0; j < q; ++j) colsq(j) = a.col(j).squaredNorm();

  BlockSparseCode code;
  code.alpha = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd r = b;
  constexpr double kKktTol = 1e-6;
  constexpr int kMaxRounds = 200000;

  // Working-set coordinate descent. A full-gradient screen gathers the active
  // and violating coordinates and owns the convergence decision; between
  // screens only that set is swept, until it is optimal on its own.
  constexpr int kSweepsPerScreen = 64;
  std::vector<int> work;
  work.reserve(q);
  for (int round = 0; round < kMaxRounds; ++round) {
    const Eigen::VectorXd g = a.transpose() * r;
    work.clear();
    double worst = 0.0;
    for (int j = 0; j < q; ++j) {
      if (colsq(j) <= 0.0) continue;
      const double aj = code.alpha(j);
      const double viol =
          aj == 0.0 ? std::abs(g(j)) - lambda : std::abs(g(j) - (aj > 0.0 ? lambda : -lambda));
      worst = std::max(worst, viol);
      if (aj != 0.0 || viol > 0.5 * kKktTol) work.push_back(j);
    }
    if (worst <= kKktTol) break;
    for (int sweep = 0; sweep < kSweepsPerScreen; ++sweep) {
      double local = 0.0;
      for (int j : work) {
        const double old = code.alpha(j);
        const double ar = a.col(j).dot(r);
        const double viol =
            old == 0.0 ? std::abs(ar) - lambda : std::abs(ar - (old > 0.0 ? lambda : -lambda));
        local = std::max(local, viol);
        const double gj = ar + colsq(j) * old;
        double next = 0.0;
        if (gj > lambda) {
          next = (gj - lambda) / colsq(j);
        } else if (gj < -lambda) {
          next = (gj + lambda) / colsq(j);
        }
        if (next != old) {
          r -= a.col(j) * (next - old);
          code.alpha(j) = next;
        }
      }
      if (local <= kKktTol) break;
    }
  }

  code.support = 0;
  for (int j = 0; j < q; ++j) {
    if (code.alpha(j) != 0.0) ++code.support;
  }
  return code;
}

FrameSequence reconstruct_patch(const CodedImage& coded, const ShutterFunction& shutter,
                                const PatchDictionary& dict, const PatchConfig& cfg) {
  check_patch_config(cfg);
  if (coded.width != shutter.width || coded.height != shutter.height) {
    throw ParamError("reconstruct_patch: coded image does not match shutter");
  }
  if (shutter.frames != cfg.p_t) {
    throw ParamError("reconstruct_patch: shutter frame count must equal p_t");
  }
  if (dict.atom_length != cfg.block_length() || dict.atoms.rows() != dict.atom_length ||
      dict.atoms.cols() != dict.atom_count || dict.atom_count < 1) {
    throw ParamError("reconstruct_patch: dictionary does not match the block size");
  }
  if (coded.width < cfg.p_x || coded.height < cfg.p_y) {
    throw ParamError("reconstruct_patch: image smaller than one block");
  }

  const int W = coded.width, H = coded.height, T = cfg.p_t;
  const std::vector<int> xs = grid_positions(W, cfg.p_x, cfg.stride);
  const std::vector<int> ys = grid_positions(H, cfg.p_y, cfg.stride);
  const int rows = cfg.p_x * cfg.p_y;
  const std::size_t plane = static_cast<std::size_t>(W) * H;

  FrameSequence out(W, H, T);
  std::vector<double> weight(out.data.size(), 0.0);
  Eigen::MatrixXd a_eff(rows, dict.atom_count);
  Eigen::VectorXd b_local(rows);

  for (int by : ys) {
    for (int bx : xs) {
      for (int ly = 0; ly < cfg.p_y; ++ly) {
        for (int lx = 0; lx < cfg.p_x; ++lx) {
          b_local(ly * cfg.p_x + lx) = coded.at(bx + lx, by + ly);
        }
      }
      for (int j = 0; j < dict.atom_count; ++j) {
        const double* atom = dict.atoms.col(j).data();
        for (int ly = 0; ly < cfg.p_y; ++ly) {
          for (int lx = 0; lx < cfg.p_x; ++lx) {
            const std::size_t pixel =
                static_cast<std::size_t>(by + ly) * W + (bx + lx);
            double acc = 0.0;
            for (int t = 0; t < T; ++t) {
              if (shutter.mask[static_cast<std::size_t>(t) * plane + pixel]) {
                acc += atom[(t * cfg.p_y + ly) * cfg.p_x + lx];
              }
            }
            a_eff(ly * cfg.p_x + lx, j) = acc;
          }
        }
      }
      const BlockSparseCode code = lasso_solve(a_eff, b_local, cfg.lambda_lasso);
      Eigen::VectorXd block = Eigen::VectorXd::Zero(dict.atom_length);
      for (int j = 0; j < dict.atom_count; ++j) {
        if (code.alpha(j) != 0.0) block += dict.atoms.col(j) * code.alpha(j);
      }
      for (int t = 0; t < T; ++t) {
        for (int ly = 0; ly < cfg.p_y; ++ly) {
          for (int lx = 0; lx < cfg.p_x; ++lx) {
            const std::size_t idx = out.index(bx + lx, by + ly, t);
            out.data[idx] += block((t * cfg.p_y + ly) * cfg.p_x + lx);
            weight[idx] += 1.0;
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (weight[i] > 0.0) out.data[i] /= weight[i];
  }
  return out;
}

Tensor dictionary_to_tensor(const PatchDictionary& dict) {
  if (dict.atom_length < 1 || dict.atom_count < 1 || dict.atoms.rows() != dict.atom_length ||
      dict.atoms.cols() != dict.atom_count) {
    throw ParamError("dictionary_to_tensor: malformed dictionary");
  }
  std::vector<double> payload(static_cast<std::size_t>(dict.atom_length) * dict.atom_count);
  for (int r = 0; r < dict.atom_length; ++r) {
    for (int j = 0; j < dict.atom_count; ++j) {
      payload[static_cast<std::size_t>(r) * dict.atom_count + j] = dict.atoms(r, j);
    }
  }
  return make_tensor({static_cast<std::uint64_t>(dict.atom_length),
                      static_cast<std::uint64_t>(dict.atom_count)},
                     payload);
}

PatchDictionary dictionary_from_tensor(const Tensor& t) {
  if (t.dims.size() != 2) throw FormatError("dictionary tensor must be 2-D");
  const std::vector<double> values = t.to_f64();
  PatchDictionary dict;
  dict.atom_length = static_cast<int>(t.dims[0]);
  dict.atom_count = static_cast<int>(t.dims[1]);
  if (dict.atom_length < 1 || dict.atom_count < 1) throw FormatError("empty dictionary tensor");
  dict.atoms.resize(dict.atom_length, dict.atom_count);
  for (int r = 0; r < dict.atom_length; ++r) {
    for (int j = 0; j < dict.atom_count; ++j) {
      dict.atoms(r, j) = values[static_cast<std::size_t>(r) * dict.atom_count + j];
    }
  }
  return dict;
}

}  // namespace cscvideo
