#pragma once

#include "dictionary.hpp"
#include "epg.hpp"
#include "keyvalue.hpp"
#include "metrics.hpp"
#include "phantom.hpp"
#include "recon.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace pnp {

enum class Algorithm
{
  SvdMrf,
  Lrtv,
  Pnp
};

std::string to_string(Algorithm a);
Algorithm parse_algorithm(std::string const &s);

/*
 * One run of the staged pipeline. Text form is "key = value" with the keys
 * below; unknown keys are rejected with the offending line.
 *
 *   width, height            image grid                     (224, 224)
 *   repetitions              sequence length T              (200)
 *   flips                    optional flip schedule file
 *   tr, te, ti               sequence timings in seconds    (0.010, 0.0018, 0.018)
 *   mask                     spiral | epi | full            (spiral)
 *   samples_per_frame        k-space budget per frame       (771)
 *   snr_db                   measurement SNR, inf disables  (30)
 *   phantom                  "default" or a phantom spec file
 *   jitter                   default-phantom perturbation   (0)
 *   on_grid                  snap tissue to dictionary atoms (false)
 *   dict_t1, dict_t2         dictionary grid points          (100, 80)
 *   rank                     subspace dimension t           (10)
 *   seed                     phantom jitter and noise seed  (0)
 *   algorithm                svdmrf | lrtv | pnp            (pnp)
 *   iterations, gamma, cg_tol, cg_max_iter                  (100, 0.05, 1e-4, 50)
 *   denoiser                 identity | gaussian | tv | cnn (tv)
 *   sigma, blur_sigma, tv_weight, tv_iters, weights
 *   lrtv_lambda, lrtv_iterations                            (4e-5, 200)
 */
struct RunConfig
{
  Grid grid{224, 224};
  Index repetitions = 200;
  std::filesystem::path flips;
  double tr_s = 0.010, te_s = 0.0018, ti_s = 0.018;
  std::string mask = "spiral";
  Index samples_per_frame = 771;
  double snr_db = 30.0;
  std::string phantom = "default";
  double jitter = 0.0;
  bool on_grid = false;
  Index dict_t1 = 100, dict_t2 = 80;
  Index rank = 10;
  std::uint64_t seed = 0;

  Algorithm algorithm = Algorithm::Pnp;
  PnPConfig pnp;
  double lrtv_lambda = 4e-5;
  Index lrtv_iterations = 200;

  void validate() const; // ConfigError
  SequenceParams sequence() const;

  // Hash of everything that defines the reconstruction algorithm. Acquisition
  // settings (mask, budget, SNR, phantom, seed) are deliberately excluded, so
  // one configuration run on different masks reports the same hash.
  std::string reconstruction_hash() const;

  std::string str() const;
};

RunConfig parse_run_config(KeyValueFile const &kv);
RunConfig load_run_config(std::filesystem::path const &path);

/*
 * Artifact layout under the output directory:
 *   dict/                          dictionary, basis and manifest
 *   <mask>/                        gt_{t1,t2,pd,mask}.qmrt, gt_tsmi.qmrt, mask/, y.qmrt
 *   <mask>/<algorithm>/            tsmi.qmrt, trace.csv, run.txt, {t1,t2,pd,mask}.qmrt, report.csv
 */
struct RunPaths
{
  std::filesystem::path root;
  std::filesystem::path dict() const { return root / "dict"; }
  std::filesystem::path acquisition(std::string const &mask) const { return root / mask; }
  std::filesystem::path result(std::string const &mask, Algorithm a) const { return root / mask / to_string(a); }
};

// Builds (or reuses, when the stored sequence hash matches) the dictionary.
LoadedDictionary stage_dict(RunConfig const &cfg, RunPaths const &paths, bool force = false);

struct Acquisition
{
  TissueMaps gt_maps;
  Tsmi gt_tsmi;
  KSpaceData y;
};

Acquisition stage_simulate(RunConfig const &cfg, RunPaths const &paths);
Acquisition load_acquisition(RunPaths const &paths, std::string const &mask);

struct ReconOutput
{
  Tsmi tsmi;
  ReconTrace trace;
  std::string config_hash;
  double seconds = 0;
};

ReconOutput stage_recon(RunConfig const &cfg, RunPaths const &paths);
TissueMaps stage_match(RunConfig const &cfg, RunPaths const &paths);
EvalReport stage_eval(RunConfig const &cfg, RunPaths const &paths, bool images = true);

SamplingMask make_mask(RunConfig const &cfg);

} // namespace pnp
