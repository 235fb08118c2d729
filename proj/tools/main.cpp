#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "cscvideo/coded_exposure.hpp"
#include "cscvideo/csc_solver.hpp"
#include "cscvideo/csc_training.hpp"
#include "cscvideo/errors.hpp"
#include "cscvideo/metrics.hpp"
#include "cscvideo/patch_codec.hpp"
#include "cscvideo/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace cscvideo;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

// Run metadata: enough to repeat the command exactly.
class Meta {
 public:
  explicit Meta(std::string command) { add("command", std::move(command)); add("version", kVersion); }
  void add(const std::string& key, std::string value) { rows_.emplace_back(key, std::move(value)); }
  void write(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& [k, v] : rows_) out << k << "=" << v << "\n";
    if (!out.flush()) throw IoError("failed writing " + path.string());
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

struct CommonOpts {
  std::string out;
  std::string config;
  int threads = 1;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--out", c.out, "run directory (created if missing)");
  cmd->add_option("--threads", c.threads, "worker cap; this build runs single-threaded")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_flag("--deterministic", c.deterministic,
                "fixed reduction order (always the case in this build; recorded)");
  cmd->add_option("--config", c.config, "flat key=value file; flags override its entries");
}

void add_common_meta(Meta& meta, const CommonOpts& c) {
  meta.add("out", c.out);
  meta.add("config", c.config);
  meta.add("threads", fmt(c.threads));
  meta.add("deterministic", fmt(c.deterministic));
}

std::string trimmed(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Settings from a flat key=value file, applied only where no flag was given.
// Keys are the long option names without the leading dashes.
void apply_config(CLI::App* cmd, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::vector<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string entry = trimmed(line);
    if (entry.empty() || entry[0] == '#' || entry[0] == ';') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw ParamError(where + ": expected key=value");
    const std::string key = trimmed(entry.substr(0, eq));
    std::string value = trimmed(entry.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw ParamError(where + ": empty key");
    if (key == "config") throw ParamError(where + ": config files cannot nest");
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      throw ParamError(where + ": duplicate key '" + key + "'");
    }
    seen.push_back(key);
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw ParamError(where + ": unknown key '" + key + "' for " + cmd->get_name());
    }
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void require_value(const std::string& value, const char* flag) {
  if (value.empty()) throw ParamError(std::string(flag) + " is required");
}

fs::path prepare_out(const CommonOpts& c) {
  require_value(c.out, "--out");
  fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

FrameSequence load_video(const fs::path& dir, int frames_wanted, std::vector<std::string>& notes) {
  FrameSequence seq = load_frames(dir);
  if (seq.frames > frames_wanted) {
    notes.push_back("input has " + std::to_string(seq.frames) + " frames; using the first " +
                    std::to_string(frames_wanted));
    FrameSequence cut(seq.width, seq.height, frames_wanted);
    std::copy(seq.data.begin(), seq.data.begin() + cut.data.size(), cut.data.begin());
    return cut;
  }
  if (seq.frames < frames_wanted) {
    throw ParamError(dir.string() + ": " + std::to_string(seq.frames) + " frames, need " +
                     std::to_string(frames_wanted));
  }
  return seq;
}

bool is_frame_dir(const fs::path& dir) {
  return fs::exists(dir / "frame_0000.pgm");
}

// A video root is either one frame directory or a directory of them.
std::vector<fs::path> list_videos(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  if (is_frame_dir(root)) return {root};
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && is_frame_dir(entry.path())) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw ParamError("no frame directories under " + root.string());
  return dirs;
}

std::vector<fs::path> list_images(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ParamError("no .pgm/.ppm images under " + root.string());
  return files;
}

void emit_notes(const std::vector<std::string>& notes, Meta& meta) {
  for (std::size_t i = 0; i < notes.size(); ++i) {
    std::cerr << "warning: " << notes[i] << "\n";
    meta.add("warning_" + std::to_string(i), notes[i]);
  }
}

void write_history_csv(const std::vector<double>& values, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,objective\n";
  for (std::size_t i = 0; i < values.size(); ++i) out << i << "," << fmt(values[i]) << "\n";
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  CommonOpts common;
  std::string frames_dir;
  int frames = 20;
  int bump = 3;
  std::uint64_t seed = 0;
};

void run_simulate(const SimulateOpts& o) {
  require_value(o.frames_dir, "--frames");
  const fs::path out = prepare_out(o.common);
  Meta meta("simulate");
  std::vector<std::string> notes;
  const FrameSequence video = load_video(o.frames_dir, o.frames, notes);

  const ShutterFunction shutter =
      generate_shutter(video.width, video.height, o.frames, o.bump, o.seed);
  const CodedImage coded = code_exposure(video, shutter);

  write_tensor(out / "coded.cvt", coded_to_tensor(coded));
  write_tensor(out / "shutter.cvt", shutter_to_tensor(shutter));
  std::vector<double> display(coded.data);
  for (auto& v : display) v /= o.bump;
  write_pgm(out / "coded.pgm", display.data(), coded.width, coded.height, 16);

  meta.add("frames_dir", o.frames_dir);
  meta.add("frames", fmt(o.frames));
  meta.add("bump_length", fmt(o.bump));
  meta.add("seed", fmt(o.seed));
  meta.add("width", fmt(video.width));
  meta.add("height", fmt(video.height));
  meta.add("shutter_id", shutter.id());
  add_common_meta(meta, o.common);
  emit_notes(notes, meta);
  meta.write(out / "meta.txt");
}

// ------------------------------------------------------------ reconstruct

struct CscReconOpts {
  CommonOpts common;
  std::string coded_path;
  std::string shutter_path;
  std::string bank_path;
  std::string truth_dir;
  CscParams params;
};

void add_csc_params(CLI::App* cmd, CscParams& p) {
  cmd->add_option("--beta-d", p.beta_d, "data term weight")->capture_default_str();
  cmd->add_option("--beta-1", p.beta_1, "sparsity weight")->capture_default_str();
  cmd->add_option("--beta-2", p.beta_2, "temporal smoothness weight")->capture_default_str();
  cmd->add_option("--rho", p.rho, "splitting penalty")->capture_default_str();
  cmd->add_option("--outer-iters", p.outer_iters, "outer iterations")->capture_default_str();
  cmd->add_option("--stop-tol", p.stop_tol, "early stop on relative primal change")
      ->capture_default_str();
  cmd->add_option("--quad-tol", p.quad_tol, "quadratic step residual target")
      ->capture_default_str();
  cmd->add_option("--quad-max-iters", p.quad_max_iters, "quadratic step refinement cap")
      ->capture_default_str();
  cmd->add_option("--subtract-mean", p.subtract_mean, "remove the global DC before solving")
      ->capture_default_str();
}

void add_csc_params_meta(Meta& meta, const CscParams& p) {
  meta.add("beta_d", fmt(p.beta_d));
  meta.add("beta_1", fmt(p.beta_1));
  meta.add("beta_2", fmt(p.beta_2));
  meta.add("rho", fmt(p.rho));
  meta.add("outer_iters", fmt(p.outer_iters));
  meta.add("stop_tol", fmt(p.stop_tol));
  meta.add("quad_tol", fmt(p.quad_tol));
  meta.add("quad_max_iters", fmt(p.quad_max_iters));
  meta.add("subtract_mean", fmt(p.subtract_mean));
}

void maybe_report(const std::string& truth_dir, const FrameSequence& frames, const fs::path& out,
                  Meta& meta) {
  if (truth_dir.empty()) return;
  const FrameSequence truth = load_frames(truth_dir, frames.frames);
  if (truth.width != frames.width || truth.height != frames.height ||
      truth.frames < frames.frames) {
    throw ParamError("ground truth does not match the reconstruction size");
  }
  FrameSequence ref = truth;
  if (truth.frames > frames.frames) {
    ref = FrameSequence(truth.width, truth.height, frames.frames);
    std::copy(truth.data.begin(), truth.data.begin() + ref.data.size(), ref.data.begin());
  }
  const QualityReport rep = report(frames, ref);
  write_report_csv(rep, out / "report.csv");
  meta.add("truth_dir", truth_dir);
  meta.add("mean_psnr_db", rep.mean_psnr.infinite ? "inf" : fmt(rep.mean_psnr.db));
  meta.add("mean_ms_ssim", fmt(rep.mean_ms_ssim));
}

void run_reconstruct_csc(const CscReconOpts& o) {
  require_value(o.coded_path, "--coded");
  require_value(o.shutter_path, "--shutter");
  require_value(o.bank_path, "--bank");
  const fs::path out = prepare_out(o.common);
  Meta meta("reconstruct-csc");
  const CodedImage coded = coded_from_tensor(read_tensor(o.coded_path));
  const ShutterFunction shutter = shutter_from_tensor(read_tensor(o.shutter_path));
  const FilterBank bank = bank_from_tensor(read_tensor(o.bank_path));

  const auto t0 = std::chrono::steady_clock::now();
  const CscResult result = reconstruct_csc(coded, shutter, bank, o.params);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_frames(result.frames, out / "frames");
  write_objective_csv(result.objective, out / "objective.csv");

  meta.add("coded", o.coded_path);
  meta.add("shutter", o.shutter_path);
  meta.add("bank", o.bank_path);
  add_csc_params_meta(meta, o.params);
  meta.add("iterations_run", fmt(result.iterations_run));
  meta.add("wall_seconds", fmt(wall));
  add_common_meta(meta, o.common);
  emit_notes(result.warnings, meta);
  maybe_report(o.truth_dir, result.frames, out, meta);
  meta.write(out / "meta.txt");
}

struct PatchReconOpts {
  CommonOpts common;
  std::string coded_path;
  std::string shutter_path;
  std::string dict_path;
  std::string truth_dir;
  PatchConfig cfg;
};

void add_patch_geometry(CLI::App* cmd, PatchConfig& cfg) {
  cmd->add_option("--px", cfg.p_x, "block width")->capture_default_str();
  cmd->add_option("--py", cfg.p_y, "block height")->capture_default_str();
  cmd->add_option("--pt", cfg.p_t, "block depth (frames)")->capture_default_str();
  cmd->add_option("--stride", cfg.stride, "spatial step between blocks")->capture_default_str();
}

void add_patch_geometry_meta(Meta& meta, const PatchConfig& cfg) {
  meta.add("p_x", fmt(cfg.p_x));
  meta.add("p_y", fmt(cfg.p_y));
  meta.add("p_t", fmt(cfg.p_t));
  meta.add("stride", fmt(cfg.stride));
}

void run_reconstruct_patch(const PatchReconOpts& o) {
  require_value(o.coded_path, "--coded");
  require_value(o.shutter_path, "--shutter");
  require_value(o.dict_path, "--dict");
  const fs::path out = prepare_out(o.common);
  Meta meta("reconstruct-patch");
  const CodedImage coded = coded_from_tensor(read_tensor(o.coded_path));
  const ShutterFunction shutter = shutter_from_tensor(read_tensor(o.shutter_path));
  const PatchDictionary dict = dictionary_from_tensor(read_tensor(o.dict_path));

  const auto t0 = std::chrono::steady_clock::now();
  const FrameSequence frames = reconstruct_patch(coded, shutter, dict, o.cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  save_frames(frames, out / "frames");

  meta.add("coded", o.coded_path);
  meta.add("shutter", o.shutter_path);
  meta.add("dict", o.dict_path);
  add_patch_geometry_meta(meta, o.cfg);
  meta.add("lambda_lasso", fmt(o.cfg.lambda_lasso));
  meta.add("wall_seconds", fmt(wall));
  add_common_meta(meta, o.common);
  maybe_report(o.truth_dir, frames, out, meta);
  meta.write(out / "meta.txt");
}

// ----------------------------------------------------------------- training

struct TrainCscOpts {
  CommonOpts common;
  std::string images_dir;
  CscTrainConfig cfg;
  bool normalize = true;
};

void run_train_csc(const TrainCscOpts& o) {
  require_value(o.images_dir, "--images");
  const fs::path out = prepare_out(o.common);
  Meta meta("train-csc");
  std::vector<GrayImage> images;
  for (const fs::path& file : list_images(o.images_dir)) {
    GrayImage img = read_image(file);
    images.push_back(o.normalize ? contrast_normalize(img) : img);
  }

  const auto t0 = std::chrono::steady_clock::now();
  const CscTrainResult result = train_filters(images, o.cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_tensor(out / "bank.cvt", bank_to_tensor(result.bank));
  const GrayImage mosaic = filter_mosaic(result.bank);
  write_pgm(out / "mosaic.pgm", mosaic.pixels.data(), mosaic.width, mosaic.height, 16);
  write_history_csv(result.objective, out / "objective.csv");

  meta.add("images_dir", o.images_dir);
  meta.add("images_used", fmt(static_cast<int>(images.size())));
  meta.add("filters", fmt(o.cfg.count));
  meta.add("size", fmt(o.cfg.size));
  meta.add("sparsity_weight", fmt(o.cfg.sparsity_weight));
  meta.add("alternations", fmt(o.cfg.alternations));
  meta.add("inner_iters", fmt(o.cfg.inner_iters));
  meta.add("seed", fmt(o.cfg.seed));
  meta.add("contrast_normalize", fmt(o.normalize));
  meta.add("wall_seconds", fmt(wall));
  add_common_meta(meta, o.common);
  meta.write(out / "meta.txt");
}

struct TrainPatchOpts {
  CommonOpts common;
  std::string videos_dir;
  PatchConfig cfg;
  BlockSelectionConfig sel;
  std::string strategy = "variance-bins";
  int iterations = 30;
  std::uint64_t seed = 0;
  bool subtract_block_mean = false;
};

void run_train_patch(const TrainPatchOpts& o) {
  require_value(o.videos_dir, "--videos");
  const fs::path out = prepare_out(o.common);
  Meta meta("train-patch");
  std::vector<std::string> notes;

  BlockSelectionConfig sel = o.sel;
  sel.strategy = parse_strategy(o.strategy);

  Eigen::MatrixXd all_blocks;
  int total = 0;
  for (const fs::path& dir : list_videos(o.videos_dir)) {
    const FrameSequence video = load_video(dir, o.cfg.p_t, notes);
    const BlockSet set = extract_blocks(video, o.cfg);
    if (all_blocks.rows() == 0) {
      all_blocks = set.blocks;
    } else {
      const Eigen::Index old = all_blocks.cols();
      all_blocks.conservativeResize(Eigen::NoChange, old + set.blocks.cols());
      all_blocks.rightCols(set.blocks.cols()) = set.blocks;
    }
    total += static_cast<int>(set.blocks.cols());
  }
  meta.add("blocks_available", fmt(total));

  const std::vector<int> picked = select_training_blocks(all_blocks, sel);
  Eigen::MatrixXd sample(all_blocks.rows(), static_cast<Eigen::Index>(picked.size()));
  for (std::size_t i = 0; i < picked.size(); ++i) {
    sample.col(static_cast<Eigen::Index>(i)) = all_blocks.col(picked[i]);
  }
  if (o.subtract_block_mean) {
    sample.rowwise() -= sample.colwise().mean();
  }

  const auto t0 = std::chrono::steady_clock::now();
  const KsvdResult result = train_ksvd(sample, o.cfg.atoms, o.cfg.train_sparsity, o.iterations,
                                       o.seed);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_tensor(out / "dict.cvt", dictionary_to_tensor(result.dictionary));
  write_history_csv(result.error, out / "objective.csv");

  meta.add("videos_dir", o.videos_dir);
  add_patch_geometry_meta(meta, o.cfg);
  meta.add("atoms", fmt(o.cfg.atoms));
  meta.add("train_sparsity", fmt(o.cfg.train_sparsity));
  meta.add("iterations", fmt(o.iterations));
  meta.add("strategy", strategy_name(sel.strategy));
  meta.add("gamma", fmt(sel.gamma));
  meta.add("count", fmt(sel.count));
  meta.add("selection_seed", fmt(sel.seed));
  meta.add("ksvd_seed", fmt(o.seed));
  meta.add("subtract_block_mean", fmt(o.subtract_block_mean));
  meta.add("wall_seconds", fmt(wall));
  add_common_meta(meta, o.common);
  emit_notes(notes, meta);
  meta.write(out / "meta.txt");
}

// ----------------------------------------------------------------- evaluate

struct EvaluateOpts {
  CommonOpts common;
  std::string recon_dir;
  std::string truth_dir;
};

void run_evaluate(const EvaluateOpts& o) {
  require_value(o.recon_dir, "--recon");
  require_value(o.truth_dir, "--truth");
  const fs::path out = prepare_out(o.common);
  Meta meta("evaluate");
  const FrameSequence recon = load_frames(o.recon_dir);
  const FrameSequence truth = load_frames(o.truth_dir);
  if (recon.width != truth.width || recon.height != truth.height ||
      recon.frames != truth.frames) {
    throw ParamError("reconstruction and ground truth differ in size");
  }
  const QualityReport rep = report(recon, truth);
  write_report_csv(rep, out / "report.csv");

  meta.add("recon_dir", o.recon_dir);
  meta.add("truth_dir", o.truth_dir);
  meta.add("frames", fmt(recon.frames));
  meta.add("mean_psnr_db", rep.mean_psnr.infinite ? "inf" : fmt(rep.mean_psnr.db));
  meta.add("mean_ms_ssim", fmt(rep.mean_ms_ssim));
  meta.add("ms_ssim_scales", fmt(rep.scales_used));
  add_common_meta(meta, o.common);
  meta.write(out / "meta.txt");
}

// -------------------------------------------------------------------- sweep

struct SweepOpts {
  CommonOpts common;
  std::string videos_dir;
  std::string bank_path;
  int frames = 20;
  int bump = 3;
  std::uint64_t seed = 0;
  CscParams params;
};

void run_sweep(const SweepOpts& o) {
  require_value(o.videos_dir, "--videos");
  require_value(o.bank_path, "--bank");
  const fs::path out = prepare_out(o.common);
  Meta meta("sweep");
  std::vector<std::string> notes;
  const FilterBank bank = bank_from_tensor(read_tensor(o.bank_path));

  std::vector<FrameSequence> videos;
  std::vector<CodedImage> coded;
  std::vector<ShutterFunction> shutters;
  for (const fs::path& dir : list_videos(o.videos_dir)) {
    FrameSequence video = load_video(dir, o.frames, notes);
    ShutterFunction shutter =
        generate_shutter(video.width, video.height, o.frames, o.bump, o.seed);
    coded.push_back(code_exposure(video, shutter));
    shutters.push_back(std::move(shutter));
    videos.push_back(std::move(video));
  }

  const double grid_beta_d[4] = {1.0, 10.0, 100.0, 1000.0};
  const double grid_beta_2[4] = {0.0, 0.1, 1.0, 10.0};

  std::ofstream csv(out / "report.csv");
  if (!csv) throw IoError("cannot write the sweep grid");
  csv << "beta_d,beta_2,mean_ms_ssim\n";
  double best = -2.0;
  double best_d = 0.0, best_2 = 0.0;
  for (double bd : grid_beta_d) {
    for (double b2 : grid_beta_2) {
      CscParams params = o.params;
      params.beta_d = bd;
      params.beta_1 = 10.0;
      params.beta_2 = b2;
      double total = 0.0;
      for (std::size_t v = 0; v < videos.size(); ++v) {
        const CscResult result = reconstruct_csc(coded[v], shutters[v], bank, params);
        for (const auto& w : result.warnings) {
          notes.push_back("beta_d=" + fmt(bd) + " beta_2=" + fmt(b2) + ": " + w);
        }
        total += report(result.frames, videos[v]).mean_ms_ssim;
      }
      const double mean = total / static_cast<double>(videos.size());
      csv << fmt(bd) << "," << fmt(b2) << "," << fmt(mean) << "\n";
      csv.flush();
      std::cerr << "sweep beta_d=" << bd << " beta_2=" << b2 << " mean_ms_ssim=" << mean << "\n";
      if (mean > best) {
        best = mean;
        best_d = bd;
        best_2 = b2;
      }
    }
  }
  if (!csv.flush()) throw IoError("failed writing the sweep grid");

  std::cout << "best cell: beta_d=" << best_d << " beta_2=" << best_2 << " mean_ms_ssim=" << best
            << "\n";
  meta.add("videos_dir", o.videos_dir);
  meta.add("bank", o.bank_path);
  meta.add("frames", fmt(o.frames));
  meta.add("bump_length", fmt(o.bump));
  meta.add("seed", fmt(o.seed));
  meta.add("beta_1", fmt(10.0));
  meta.add("outer_iters", fmt(o.params.outer_iters));
  meta.add("best_beta_d", fmt(best_d));
  meta.add("best_beta_2", fmt(best_2));
  meta.add("best_mean_ms_ssim", fmt(best));
  add_common_meta(meta, o.common);
  emit_notes(notes, meta);
  meta.write(out / "meta.txt");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coded-exposure video capture and reconstruction toolkit"};
  app.require_subcommand(1);

  SimulateOpts sim;
  CLI::App* c_sim = app.add_subcommand("simulate", "code a video into one exposure image");
  c_sim->add_option("--frames", sim.frames_dir, "input frame directory");
  c_sim->add_option("--T", sim.frames, "coded frame count")->capture_default_str();
  c_sim->add_option("--L", sim.bump, "exposure bump length")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "shutter seed")->capture_default_str();
  add_common(c_sim, sim.common);

  CscReconOpts rcsc;
  CLI::App* c_rcsc = app.add_subcommand("reconstruct-csc",
                                        "convolutional sparse coding reconstruction");
  c_rcsc->add_option("--coded", rcsc.coded_path, "coded image tensor");
  c_rcsc->add_option("--shutter", rcsc.shutter_path, "shutter tensor");
  c_rcsc->add_option("--bank", rcsc.bank_path, "filter bank tensor");
  c_rcsc->add_option("--truth", rcsc.truth_dir, "ground-truth frames for report.csv");
  add_csc_params(c_rcsc, rcsc.params);
  add_common(c_rcsc, rcsc.common);

  PatchReconOpts rpatch;
  CLI::App* c_rpatch = app.add_subcommand("reconstruct-patch",
                                          "patch dictionary baseline reconstruction");
  c_rpatch->add_option("--coded", rpatch.coded_path, "coded image tensor");
  c_rpatch->add_option("--shutter", rpatch.shutter_path, "shutter tensor");
  c_rpatch->add_option("--dict", rpatch.dict_path, "patch dictionary tensor");
  c_rpatch->add_option("--truth", rpatch.truth_dir, "ground-truth frames for report.csv");
  add_patch_geometry(c_rpatch, rpatch.cfg);
  c_rpatch->add_option("--lambda", rpatch.cfg.lambda_lasso, "lasso penalty")
      ->capture_default_str();
  add_common(c_rpatch, rpatch.common);

  TrainCscOpts tcsc;
  CLI::App* c_tcsc = app.add_subcommand("train-csc", "learn a convolutional filter bank");
  c_tcsc->add_option("--images", tcsc.images_dir, "training image directory");
  c_tcsc->add_option("--filters", tcsc.cfg.count, "filter count")->capture_default_str();
  c_tcsc->add_option("--size", tcsc.cfg.size, "filter size (odd)")->capture_default_str();
  c_tcsc->add_option("--sparsity-weight", tcsc.cfg.sparsity_weight, "map sparsity weight")
      ->capture_default_str();
  c_tcsc->add_option("--alternations", tcsc.cfg.alternations, "z/d alternations")
      ->capture_default_str();
  c_tcsc->add_option("--inner-iters", tcsc.cfg.inner_iters, "iterations per half step")
      ->capture_default_str();
  c_tcsc->add_option("--seed", tcsc.cfg.seed, "filter init seed")->capture_default_str();
  c_tcsc->add_option("--normalize", tcsc.normalize, "local contrast normalization")
      ->capture_default_str();
  add_common(c_tcsc, tcsc.common);

  TrainPatchOpts tpatch;
  CLI::App* c_tpatch = app.add_subcommand("train-patch", "learn a block dictionary with K-SVD");
  c_tpatch->add_option("--videos", tpatch.videos_dir, "video directory (frame dirs inside)");
  add_patch_geometry(c_tpatch, tpatch.cfg);
  c_tpatch->add_option("--atoms", tpatch.cfg.atoms, "dictionary size")->capture_default_str();
  c_tpatch->add_option("--train-sparsity", tpatch.cfg.train_sparsity, "atoms per block")
      ->capture_default_str();
  c_tpatch->add_option("--iterations", tpatch.iterations, "training iterations")
      ->capture_default_str();
  c_tpatch->add_option("--strategy", tpatch.strategy,
                       "random | variance-bins | stratified-gamma | gamma")
      ->capture_default_str();
  c_tpatch->add_option("--gamma", tpatch.sel.gamma, "selection exponent in (0,1]")
      ->capture_default_str();
  c_tpatch->add_option("--count", tpatch.sel.count, "training blocks to select")
      ->capture_default_str();
  c_tpatch->add_option("--selection-seed", tpatch.sel.seed, "selection seed")
      ->capture_default_str();
  c_tpatch->add_option("--seed", tpatch.seed, "dictionary init seed")->capture_default_str();
  c_tpatch->add_option("--subtract-block-mean", tpatch.subtract_block_mean,
                       "remove each training block's mean before K-SVD")
      ->capture_default_str();
  add_common(c_tpatch, tpatch.common);

  EvaluateOpts eval;
  CLI::App* c_eval = app.add_subcommand("evaluate", "PSNR and MS-SSIM report");
  c_eval->add_option("--recon", eval.recon_dir, "reconstructed frame directory");
  c_eval->add_option("--truth", eval.truth_dir, "ground-truth frame directory");
  add_common(c_eval, eval.common);

  SweepOpts sweep;
  CLI::App* c_sweep = app.add_subcommand("sweep",
                                         "grid over beta_d and beta_2 with beta_1 fixed at 10");
  c_sweep->add_option("--videos", sweep.videos_dir, "ground-truth video directory");
  c_sweep->add_option("--bank", sweep.bank_path, "filter bank tensor");
  c_sweep->add_option("--T", sweep.frames, "coded frame count")->capture_default_str();
  c_sweep->add_option("--L", sweep.bump, "exposure bump length")->capture_default_str();
  c_sweep->add_option("--seed", sweep.seed, "shutter seed")->capture_default_str();
  c_sweep->add_option("--outer-iters", sweep.params.outer_iters, "outer iterations per cell")
      ->capture_default_str();
  add_common(c_sweep, sweep.common);

  try {
    app.parse(argc, argv);
    if (*c_sim) {
      apply_config(c_sim, sim.common.config);
      run_simulate(sim);
    } else if (*c_rcsc) {
      apply_config(c_rcsc, rcsc.common.config);
      run_reconstruct_csc(rcsc);
    } else if (*c_rpatch) {
      apply_config(c_rpatch, rpatch.common.config);
      run_reconstruct_patch(rpatch);
    } else if (*c_tcsc) {
      apply_config(c_tcsc, tcsc.common.config);
      run_train_csc(tcsc);
    } else if (*c_tpatch) {
      apply_config(c_tpatch, tpatch.common.config);
      run_train_patch(tpatch);
    } else if (*c_eval) {
      apply_config(c_eval, eval.common.config);
      run_evaluate(eval);
    } else if (*c_sweep) {
      apply_config(c_sweep, sweep.common.config);
      run_sweep(sweep);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
