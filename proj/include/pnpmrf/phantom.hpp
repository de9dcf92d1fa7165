#pragma once

#include "core.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pnp {

struct ParamGrid;

// Centre and semi-axes in normalized image coordinates ([-1, 1] across the grid).
struct Ellipse
{
  double cx = 0, cy = 0;
  double ax = 1, ay = 1;
  double angle_deg = 0;
  double t1 = 0, t2 = 0, pd = 0;
};

struct PhantomSpec
{
  Grid grid;
  std::vector<Ellipse> regions; // later regions overwrite earlier ones
  std::uint64_t seed = 0;
  double jitter = 0; // relative perturbation of geometry and relaxation times, 0 disables

  void validate() const;
};

/*
 * Brain-like layout: CSF rim, gray matter cortex, white matter, ventricles,
 * deep gray nuclei and a small long-T2 lesion.
 *   white matter  T1 0.78 s, T2 0.08 s
 *   gray matter   T1 1.20 s, T2 0.11 s
 *   CSF           T1 4.00 s, T2 0.50 s
 */
PhantomSpec default_phantom_spec(Grid g, std::uint64_t seed = 0, double jitter = 0);

TissueMaps make_phantom(PhantomSpec const &spec);

// Moves every region's (t1, t2) to the nearest dictionary atom in log space.
PhantomSpec snap_to_grid(PhantomSpec spec, ParamGrid const &grid);

// "width = ", "height = ", "seed = ", "jitter = ", repeated
// "region = cx cy ax ay angle t1 t2 pd"
PhantomSpec load_phantom_spec(std::filesystem::path const &path);
void save_phantom_spec(PhantomSpec const &spec, std::filesystem::path const &path);

/*
 * Complex circular AWGN with per-sample variance ||y||^2 / (N 10^(snr/10)).
 * snr_db = +inf returns y unchanged.
 */
KSpaceData add_measurement_noise(KSpaceData const &y, double snr_db, std::uint64_t seed);

} // namespace pnp
