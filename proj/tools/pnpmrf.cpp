// Command-line front end for the staged reconstruction pipeline.
//
//   pnpmrf dict     --config run.txt --output out
//   pnpmrf simulate --config run.txt --output out --mask epi
//   pnpmrf recon    --config run.txt --output out --mask epi --algo pnp --denoiser tv
//   pnpmrf match    --config run.txt --output out --mask epi --algo pnp
//   pnpmrf eval     --config run.txt --output out --mask epi --algo pnp
//
// Exit codes: 0 ok, 1 usage, 2 configuration, 3 runtime failure.

#include "pnpmrf/pipeline.hpp"
#include "pnpmrf/sampling.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

enum Exit
{
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kRuntime = 3
};

struct Overrides
{
  std::string config;
  std::string output = "pnpmrf-run";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mask, algo, denoiser, weights;
  std::optional<double> sigma, gamma;
  std::optional<pnp::Index> iters;
};

void add_common(CLI::App *cmd, Overrides &o)
{
  cmd->add_option("--config", o.config, "run configuration file (key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--output", o.output, "artifact directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "phantom and noise seed");
  cmd->add_option("--mask", o.mask, "sampling pattern")->check(CLI::IsMember({"spiral", "epi", "full"}));
}

void add_recon(CLI::App *cmd, Overrides &o)
{
  cmd->add_option("--algo", o.algo, "reconstruction algorithm")->check(CLI::IsMember({"svdmrf", "lrtv", "pnp"}));
  cmd->add_option("--denoiser", o.denoiser, "PnP denoiser")
    ->check(CLI::IsMember({"identity", "gaussian", "tv", "cnn"}));
  cmd->add_option("--weights", o.weights, "CNN weight archive directory");
  cmd->add_option("--sigma", o.sigma, "denoiser noise level");
  cmd->add_option("--iters", o.iters, "PnP / LRTV iterations");
  cmd->add_option("--gamma", o.gamma, "ADMM penalty");
}

pnp::RunConfig resolve(Overrides const &o)
{
  auto c = o.config.empty() ? pnp::RunConfig{} : pnp::load_run_config(o.config);
  if (o.seed) { c.seed = *o.seed; }
  if (o.mask) { c.mask = *o.mask; }
  if (o.algo) { c.algorithm = pnp::parse_algorithm(*o.algo); }
  if (o.denoiser) { c.pnp.denoiser.kind = pnp::parse_denoiser_kind(*o.denoiser); }
  if (o.weights) { c.pnp.denoiser.weights = *o.weights; }
  if (o.sigma) { c.pnp.denoiser.sigma = *o.sigma; }
  if (o.gamma) { c.pnp.gamma = *o.gamma; }
  if (o.iters) {
    c.pnp.iterations = *o.iters;
    c.lrtv_iterations = *o.iters;
  }
  c.validate();
  return c;
}

int run(CLI::App const &app, Overrides const &o)
{
  auto const cfg = resolve(o);
  pnp::RunPaths const paths{o.output};
  auto const *cmd = app.get_subcommands().front();
  auto const name = cmd->get_name();

  if (name == "dict") {
    auto const d = pnp::stage_dict(cfg, paths, true);
    std::printf("dictionary: %ld atoms, rank %ld, captured energy %.7f -> %s\n", long(d.dict.grid.size()),
                long(d.basis.rank()), d.basis.captured_energy(), paths.dict().c_str());
  } else if (name == "simulate") {
    pnp::stage_dict(cfg, paths);
    auto const a = pnp::stage_simulate(cfg, paths);
    auto const rep = pnp::validate_mask(a.y.mask);
    std::printf("simulated %s: %ldx%ld, %ld frames x %ld samples (compression %.2f), %ld foreground voxels -> %s\n",
                cfg.mask.c_str(), long(cfg.grid.width), long(cfg.grid.height), long(a.y.frames()), long(a.y.samples()),
                rep.compression_ratio, long(a.gt_maps.foreground()), paths.acquisition(cfg.mask).c_str());
  } else if (name == "recon") {
    auto const r = pnp::stage_recon(cfg, paths);
    std::printf("%s on %s: %.1f s, %zu iterations, %ld CG warnings, config hash %s -> %s\n",
                pnp::to_string(cfg.algorithm).c_str(), cfg.mask.c_str(), r.seconds, r.trace.rows.size(),
                long(r.trace.cg_warnings), r.config_hash.c_str(), paths.result(cfg.mask, cfg.algorithm).c_str());
  } else if (name == "match") {
    auto const m = pnp::stage_match(cfg, paths);
    std::printf("matched %ld foreground voxels -> %s\n", long(m.foreground()),
                paths.result(cfg.mask, cfg.algorithm).c_str());
  } else if (name == "eval") {
    auto const r = pnp::stage_eval(cfg, paths, !cmd->get_option("--no-images")->as<bool>());
    std::cout << pnp::text_table({r});
  }
  return kOk;
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Plug-and-play ADMM reconstruction for MR fingerprinting"};
  app.require_subcommand(1);
  Overrides o;
  for (auto const &[name, help] : std::vector<std::pair<std::string, std::string>>{
         {"dict", "build the dictionary and temporal subspace"},
         {"simulate", "phantom -> TSMI -> noisy subsampled k-space"},
         {"recon", "reconstruct the TSMI from simulated k-space"},
         {"match", "dictionary matching of a reconstruction"},
         {"eval", "score a reconstruction against the ground truth"}}) {
    auto *cmd = app.add_subcommand(name, help);
    add_common(cmd, o);
    if (name != "dict" && name != "simulate") { add_recon(cmd, o); }
    if (name == "eval") { cmd->add_flag("--no-images", "skip the PGM image dumps"); }
  }

  try {
    app.parse(argc, argv);
  } catch (CLI::CallForHelp const &e) {
    return app.exit(e);
  } catch (CLI::ParseError const &e) {
    app.exit(e);
    return kUsage;
  }

  try {
    return run(app, o);
  } catch (pnp::ConfigError const &e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfig;
  } catch (std::exception const &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
}
