#include "pnpmrf/pipeline.hpp"
#include "pnpmrf/keyvalue.hpp"
#include "pnpmrf/sampling.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pnp {

std::string to_string(Algorithm a)
{
  switch (a) {
  case Algorithm::SvdMrf: return "svdmrf";
  case Algorithm::Lrtv: return "lrtv";
  case Algorithm::Pnp: return "pnp";
  }
  return "?";
}

Algorithm parse_algorithm(std::string const &s)
{
  if (s == "svdmrf") { return Algorithm::SvdMrf; }
  if (s == "lrtv") { return Algorithm::Lrtv; }
  if (s == "pnp") { return Algorithm::Pnp; }
  throw ConfigError("unknown algorithm '" + s + "' (expected svdmrf, lrtv or pnp)");
}

namespace {

std::string num(double v)
{
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

bool parse_bool(KeyValueFile const &kv, KeyValueFile::Entry const &e)
{
  if (e.value == "true" || e.value == "1" || e.value == "yes") { return true; }
  if (e.value == "false" || e.value == "0" || e.value == "no") { return false; }
  kv.fail(e, "expected true or false");
}

} // namespace

void RunConfig::validate() const
{
  auto bad = [](std::string const &what) { throw ConfigError(what); };
  if (grid.width < 1 || grid.height < 1) { bad("grid must be non-empty"); }
  if (repetitions < 1) { bad("repetitions must be >= 1"); }
  if (mask != "spiral" && mask != "epi" && mask != "full") { bad("mask must be spiral, epi or full"); }
  if (samples_per_frame < 1 || samples_per_frame > grid.size()) { bad("samples_per_frame must lie in [1, width*height]"); }
  if (std::isnan(snr_db) || snr_db == -INFINITY) { bad("snr_db must be finite or inf"); }
  if (dict_t1 < 2 || dict_t2 < 2) { bad("dictionary needs at least 2 points per axis"); }
  if (rank < 1 || rank > repetitions) { bad("rank must lie in [1, repetitions]"); }
  if (!(lrtv_lambda > 0)) { bad("lrtv_lambda must be positive"); }
  if (lrtv_iterations < 1) { bad("lrtv_iterations must be >= 1"); }
  if (!(jitter >= 0 && jitter < 0.5)) { bad("jitter must lie in [0, 0.5)"); }
  try {
    sequence().validate();
    pnp.validate();
  } catch (DomainError const &e) {
    throw ConfigError(e.what());
  }
}

SequenceParams RunConfig::sequence() const
{
  SequenceParams s;
  s.repetitions = repetitions;
  s.flip_angles_deg = flips.empty() ? default_flip_schedule(repetitions) : read_flip_schedule(flips, repetitions);
  s.tr_s = tr_s;
  s.te_s = te_s;
  s.ti_s = ti_s;
  return s;
}

std::string RunConfig::reconstruction_hash() const
{
  KeyValueFile kv;
  kv.add("algorithm", to_string(algorithm));
  kv.add("repetitions", std::to_string(repetitions));
  kv.add("rank", std::to_string(rank));
  switch (algorithm) {
  case Algorithm::SvdMrf: break;
  case Algorithm::Lrtv:
    kv.add("gamma", num(pnp.gamma));
    kv.add("cg_tol", num(pnp.cg_tol));
    kv.add("cg_max_iter", std::to_string(pnp.cg_max_iter));
    kv.add("tv_iters", std::to_string(pnp.denoiser.tv_iters));
    kv.add("lrtv_lambda", num(lrtv_lambda));
    kv.add("lrtv_iterations", std::to_string(lrtv_iterations));
    break;
  case Algorithm::Pnp: {
    auto const &d = pnp.denoiser;
    kv.add("iterations", std::to_string(pnp.iterations));
    kv.add("gamma", num(pnp.gamma));
    kv.add("cg_tol", num(pnp.cg_tol));
    kv.add("cg_max_iter", std::to_string(pnp.cg_max_iter));
    kv.add("denoiser", to_string(d.kind));
    kv.add("sigma", num(d.sigma));
    if (d.kind == DenoiserKind::Gaussian) { kv.add("blur_sigma", num(d.blur_sigma)); }
    if (d.kind == DenoiserKind::Tv) {
      kv.add("tv_weight", num(d.tv_weight));
      kv.add("tv_iters", std::to_string(d.tv_iters));
    }
    if (d.kind == DenoiserKind::Cnn) { kv.add("weights", hex64(load_archive(d.weights).hash())); }
    break;
  }
  }
  return hex64(fnv1a(kv.str()));
}

std::string RunConfig::str() const
{
  KeyValueFile kv;
  kv.add("width", std::to_string(grid.width));
  kv.add("height", std::to_string(grid.height));
  kv.add("repetitions", std::to_string(repetitions));
  if (!flips.empty()) { kv.add("flips", flips.string()); }
  kv.add("tr", num(tr_s));
  kv.add("te", num(te_s));
  kv.add("ti", num(ti_s));
  kv.add("mask", mask);
  kv.add("samples_per_frame", std::to_string(samples_per_frame));
  kv.add("snr_db", num(snr_db));
  kv.add("phantom", phantom);
  kv.add("jitter", num(jitter));
  kv.add("on_grid", on_grid ? "true" : "false");
  kv.add("dict_t1", std::to_string(dict_t1));
  kv.add("dict_t2", std::to_string(dict_t2));
  kv.add("rank", std::to_string(rank));
  kv.add("seed", std::to_string(seed));
  kv.add("algorithm", to_string(algorithm));
  kv.add("iterations", std::to_string(pnp.iterations));
  kv.add("gamma", num(pnp.gamma));
  kv.add("cg_tol", num(pnp.cg_tol));
  kv.add("cg_max_iter", std::to_string(pnp.cg_max_iter));
  kv.add("denoiser", to_string(pnp.denoiser.kind));
  kv.add("sigma", num(pnp.denoiser.sigma));
  kv.add("blur_sigma", num(pnp.denoiser.blur_sigma));
  kv.add("tv_weight", num(pnp.denoiser.tv_weight));
  kv.add("tv_iters", std::to_string(pnp.denoiser.tv_iters));
  if (!pnp.denoiser.weights.empty()) { kv.add("weights", pnp.denoiser.weights.string()); }
  kv.add("lrtv_lambda", num(lrtv_lambda));
  kv.add("lrtv_iterations", std::to_string(lrtv_iterations));
  return kv.str();
}

RunConfig parse_run_config(KeyValueFile const &kv)
{
  RunConfig c;
  std::set<std::string> seen;
  for (auto const &e : kv.entries()) {
    if (!seen.insert(e.key).second) { kv.fail(e, "key given twice"); }
    auto real = [&] {
      try {
        return parse_double(e.value);
      } catch (ConfigError const &) {
        kv.fail(e, "'" + e.value + "' is not a number");
      }
    };
    auto count = [&] {
      double const v = real();
      if (v != std::floor(v) || std::abs(v) > 1e15) { kv.fail(e, "expected an integer"); }
      return Index(v);
    };
    auto const &k = e.key;
    try {
      if (k == "width") { c.grid.width = count(); }
      else if (k == "height") { c.grid.height = count(); }
      else if (k == "repetitions") { c.repetitions = count(); }
      else if (k == "flips") { c.flips = e.value; }
      else if (k == "tr") { c.tr_s = real(); }
      else if (k == "te") { c.te_s = real(); }
      else if (k == "ti") { c.ti_s = real(); }
      else if (k == "mask") { c.mask = e.value; }
      else if (k == "samples_per_frame") { c.samples_per_frame = count(); }
      else if (k == "snr_db") { c.snr_db = real(); }
      else if (k == "phantom") { c.phantom = e.value; }
      else if (k == "jitter") { c.jitter = real(); }
      else if (k == "on_grid") { c.on_grid = parse_bool(kv, e); }
      else if (k == "dict_t1") { c.dict_t1 = count(); }
      else if (k == "dict_t2") { c.dict_t2 = count(); }
      else if (k == "rank") { c.rank = count(); }
      else if (k == "seed") {
        Index const s = count();
        if (s < 0) { kv.fail(e, "seed must be >= 0"); }
        c.seed = std::uint64_t(s);
      }
      else if (k == "algorithm") { c.algorithm = parse_algorithm(e.value); }
      else if (k == "iterations") { c.pnp.iterations = count(); }
      else if (k == "gamma") { c.pnp.gamma = real(); }
      else if (k == "cg_tol") { c.pnp.cg_tol = real(); }
      else if (k == "cg_max_iter") { c.pnp.cg_max_iter = count(); }
      else if (k == "denoiser") { c.pnp.denoiser.kind = parse_denoiser_kind(e.value); }
      else if (k == "sigma") { c.pnp.denoiser.sigma = real(); }
      else if (k == "blur_sigma") { c.pnp.denoiser.blur_sigma = real(); }
      else if (k == "tv_weight") { c.pnp.denoiser.tv_weight = real(); }
      else if (k == "tv_iters") { c.pnp.denoiser.tv_iters = count(); }
      else if (k == "weights") { c.pnp.denoiser.weights = e.value; }
      else if (k == "lrtv_lambda") { c.lrtv_lambda = real(); }
      else if (k == "lrtv_iterations") { c.lrtv_iterations = count(); }
      else { kv.fail(e, "unknown key"); }
    } catch (ConfigError const &err) {
      if (std::string(err.what()).find(kv.source()) != std::string::npos) { throw; }
      kv.fail(e, err.what());
    }
  }
  return c;
}

RunConfig load_run_config(std::filesystem::path const &path)
{
  if (!std::filesystem::exists(path)) { throw ConfigError("config file " + path.string() + " does not exist"); }
  auto c = parse_run_config(KeyValueFile::load(path));
  // relative paths inside a config resolve against the config's directory
  auto const base = path.parent_path();
  if (!c.flips.empty() && c.flips.is_relative()) { c.flips = base / c.flips; }
  if (!c.pnp.denoiser.weights.empty() && c.pnp.denoiser.weights.is_relative()) {
    c.pnp.denoiser.weights = base / c.pnp.denoiser.weights;
  }
  if (c.phantom != "default" && std::filesystem::path(c.phantom).is_relative()) { c.phantom = (base / c.phantom).string(); }
  return c;
}

SamplingMask make_mask(RunConfig const &cfg)
{
  if (cfg.mask == "spiral") { return spiral_mask(cfg.grid, cfg.repetitions, cfg.samples_per_frame); }
  if (cfg.mask == "epi") { return epi_mask(cfg.grid, cfg.repetitions, cfg.samples_per_frame); }
  if (cfg.mask == "full") { return full_mask(cfg.grid, cfg.repetitions); }
  throw ConfigError("unknown mask '" + cfg.mask + "'");
}

LoadedDictionary stage_dict(RunConfig const &cfg, RunPaths const &paths, bool force)
{
  auto const seq = cfg.sequence();
  auto const dir = paths.dict();
  if (!force && std::filesystem::exists(dir / "manifest.txt")) {
    auto const m = KeyValueFile::load(dir / "manifest.txt");
    if (m.get("sequence_hash", "") == hex64(seq.hash()) && m.get_int("n_t1", 0) == cfg.dict_t1 &&
        m.get_int("n_t2", 0) == cfg.dict_t2 && m.get_int("subspace", 0) == cfg.rank) {
      return load_dictionary(dir);
    }
  }
  auto const grid = build_grid(cfg.dict_t1, cfg.dict_t2);
  auto const full = build_dictionary(grid, seq);
  auto basis = compute_subspace(full, cfg.rank);
  auto dict = compress(full, basis, grid);
  std::filesystem::create_directories(dir);
  save_dictionary(dir, dict, basis, seq, cfg.dict_t1, cfg.dict_t2);
  return {std::move(dict), std::move(basis), seq.hash()};
}

namespace {

LoadedDictionary require_dict(RunConfig const &cfg, RunPaths const &paths)
{
  if (!std::filesystem::exists(paths.dict() / "manifest.txt")) {
    throw Error("no dictionary in " + paths.dict().string() + "; run the dict stage first");
  }
  auto d = load_dictionary(paths.dict());
  if (d.sequence_hash != cfg.sequence().hash()) {
    throw Error("dictionary in " + paths.dict().string() + " was built for a different sequence");
  }
  if (d.basis.rank() != cfg.rank) { throw Error("dictionary subspace rank disagrees with the config"); }
  return d;
}

PhantomSpec phantom_spec(RunConfig const &cfg, ParamGrid const &grid)
{
  PhantomSpec s = cfg.phantom == "default" ? default_phantom_spec(cfg.grid, cfg.seed, cfg.jitter)
                                           : load_phantom_spec(cfg.phantom);
  if (s.grid != cfg.grid) { throw ConfigError("phantom grid disagrees with width/height"); }
  if (cfg.on_grid) { s = snap_to_grid(s, grid); }
  return s;
}

} // namespace

Acquisition stage_simulate(RunConfig const &cfg, RunPaths const &paths)
{
  auto const d = require_dict(cfg, paths);
  auto const maps = make_phantom(phantom_spec(cfg, d.dict.grid));
  auto const tsmi = simulate_tsmi(maps, cfg.sequence(), d.basis);
  auto const mask = make_mask(cfg);
  ForwardOperator const op(mask, d.basis.basis);
  // distinct stream from the phantom jitter
  auto const y = add_measurement_noise(op.apply(tsmi), cfg.snr_db, cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  auto const dir = paths.acquisition(cfg.mask);
  std::filesystem::create_directories(dir);
  write_maps(maps, dir, "gt_");
  write_tensor(to_tensor(tsmi), dir / "gt_tsmi.qmrt");
  save_mask(mask, dir / "mask");
  write_tensor(to_tensor(y), dir / "y.qmrt");
  std::ofstream(dir / "run.txt") << cfg.str();
  return {maps, tsmi, y};
}

Acquisition load_acquisition(RunPaths const &paths, std::string const &mask)
{
  auto const dir = paths.acquisition(mask);
  if (!std::filesystem::exists(dir / "y.qmrt")) {
    throw Error("no acquisition in " + dir.string() + "; run the simulate stage first");
  }
  auto const m = load_mask(dir / "mask");
  return {read_maps(dir, "gt_"), tsmi_from_tensor(read_tensor(dir / "gt_tsmi.qmrt")),
          kspace_from_tensor(read_tensor(dir / "y.qmrt"), m)};
}

ReconOutput stage_recon(RunConfig const &cfg, RunPaths const &paths)
{
  auto const d = require_dict(cfg, paths);
  auto const acq = load_acquisition(paths, cfg.mask);
  ForwardOperator const op(acq.y.mask, d.basis.basis);
  auto const start = std::chrono::steady_clock::now();
  ReconOutput out;
  switch (cfg.algorithm) {
  case Algorithm::SvdMrf: out.tsmi = svd_mrf(op, acq.y); break;
  case Algorithm::Lrtv: {
    LrtvOptions o;
    o.gamma = cfg.pnp.gamma;
    o.cg_tol = cfg.pnp.cg_tol;
    o.cg_max_iter = cfg.pnp.cg_max_iter;
    o.tv_iters = cfg.pnp.denoiser.tv_iters;
    auto r = lrtv(op, acq.y, cfg.lrtv_lambda, cfg.lrtv_iterations, o);
    out.tsmi = std::move(r.x);
    out.trace = std::move(r.trace);
    break;
  }
  case Algorithm::Pnp: {
    auto r = pnp_admm(op, acq.y, cfg.pnp);
    out.tsmi = std::move(r.x);
    out.trace = std::move(r.trace);
    break;
  }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.config_hash = cfg.reconstruction_hash();

  auto const dir = paths.result(cfg.mask, cfg.algorithm);
  std::filesystem::create_directories(dir);
  write_tensor(to_tensor(out.tsmi), dir / "tsmi.qmrt");
  write_trace_csv(out.trace, dir / "trace.csv");
  KeyValueFile run;
  run.add("config_hash", out.config_hash);
  run.add("mask", cfg.mask);
  run.add("algorithm", to_string(cfg.algorithm));
  run.add("seconds", num(out.seconds));
  run.add("cg_warnings", std::to_string(out.trace.cg_warnings));
  run.save(dir / "run.txt");
  return out;
}

TissueMaps stage_match(RunConfig const &cfg, RunPaths const &paths)
{
  auto const d = require_dict(cfg, paths);
  auto const dir = paths.result(cfg.mask, cfg.algorithm);
  if (!std::filesystem::exists(dir / "tsmi.qmrt")) {
    throw Error("no reconstruction in " + dir.string() + "; run the recon stage first");
  }
  auto const maps = match(tsmi_from_tensor(read_tensor(dir / "tsmi.qmrt")), d.dict);
  write_maps(maps, dir, "");
  return maps;
}

EvalReport stage_eval(RunConfig const &cfg, RunPaths const &paths, bool images)
{
  auto const acq = load_acquisition(paths, cfg.mask);
  auto const dir = paths.result(cfg.mask, cfg.algorithm);
  if (!std::filesystem::exists(dir / "t1.qmrt")) {
    throw Error("no matched maps in " + dir.string() + "; run the match stage first");
  }
  auto const maps = read_maps(dir, "");
  auto const tsmi = tsmi_from_tensor(read_tensor(dir / "tsmi.qmrt"));
  auto r = evaluate_run(acq.gt_maps, acq.gt_tsmi, maps, tsmi);
  r.mask_type = cfg.mask;
  r.algorithm = to_string(cfg.algorithm);
  r.config_hash = KeyValueFile::load(dir / "run.txt").get("config_hash", cfg.reconstruction_hash());
  std::ofstream(dir / "report.csv") << csv_header(true) << '\n' << csv_row(r, true) << '\n';

  if (images) {
    auto const img = dir / "images";
    std::filesystem::create_directories(img);
    Index const w = cfg.grid.width, h = cfg.grid.height;
    auto dump = [&](std::string const &name, Eigen::ArrayXd const &truth, Eigen::ArrayXd const &est, double hi) {
      write_pgm(est, w, h, 0.0, hi, img / (name + ".pgm"));
      write_pgm(truth, w, h, 0.0, hi, img / ("gt_" + name + ".pgm"));
      Eigen::ArrayXd const err = (est - truth).abs() * acq.gt_maps.mask.cast<double>();
      write_pgm(err, w, h, 0.0, 0.25 * hi, img / ("err_" + name + ".pgm"));
    };
    dump("t1", acq.gt_maps.t1, maps.t1, 4.5);
    dump("t2", acq.gt_maps.t2, maps.t2, 0.6);
    dump("pd", acq.gt_maps.pd, maps.pd, 1.2);
    Eigen::ArrayXd const c0 = tsmi.values.col(0).array().abs(), g0 = acq.gt_tsmi.values.col(0).array().abs();
    dump("tsmi0", g0, c0, g0.maxCoeff());
  }
  return r;
}

} // namespace pnp
