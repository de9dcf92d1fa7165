#pragma once

#include "core.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace pnp {

inline constexpr double kGoldenAngleDeg = 137.507764;

struct SpiralOptions
{
  // Distance between spiral turns in grid units. Zero picks
  // clamp(W*H / (2 * budget), 1, 8).
  double pitch = 0.0;
};

double spiral_pitch(Grid g, Index samples_per_frame, SpiralOptions const &opts = {});

/*
 * One frame of the Archimedean spiral r = a * theta, rotated by `rotation_rad`,
 * walked from the k-space centre, rounded to the nearest grid point and
 * deduplicated in traversal order until `samples` unique points are found.
 */
std::vector<KCoord> spiral_frame(Grid g, Index samples, double rotation_rad, double pitch);

// Frame k is rotated by k golden angles. samples == W*H returns the full grid.
SamplingMask spiral_mask(Grid g, Index frames, Index samples_per_frame, SpiralOptions const &opts = {});

/*
 * q = floor(m / W) full rows spaced s = round(H / q) apart starting at row
 * (k mod s), plus the first m - q*W entries of the next row in the pattern.
 */
SamplingMask epi_mask(Grid g, Index frames, Index samples_per_frame);

// Every frame samples the whole grid in raster order.
SamplingMask full_mask(Grid g, Index frames);

struct MaskReport
{
  std::vector<Index> per_frame_counts;
  Index duplicates = 0;
  Index off_grid = 0;
  Index frames_with_dc = 0;
  double compression_ratio = 0;
  std::vector<double> radial_density; // fraction sampled per unit-width radial bin, averaged over frames
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

MaskReport validate_mask(SamplingMask const &mask);

// Fraction of the pixels inside `region` (a predicate on KCoord) sampled by frame k.
template <typename Pred>
double frame_density(SamplingMask const &mask, Index k, Pred region)
{
  Index inside = 0, hit = 0;
  int const x0 = -int(mask.grid.width / 2), y0 = -int(mask.grid.height / 2);
  for (int y = y0; y < y0 + int(mask.grid.height); y++) {
    for (int x = x0; x < x0 + int(mask.grid.width); x++) {
      if (region(KCoord{x, y})) { inside++; }
    }
  }
  for (auto c : mask.frame(k)) {
    if (region(c)) { hit++; }
  }
  return inside ? double(hit) / double(inside) : 0.0;
}

// mask.qmrt (T x m x 2) plus mask.txt manifest
void save_mask(SamplingMask const &mask, std::filesystem::path const &dir);
SamplingMask load_mask(std::filesystem::path const &dir);

} // namespace pnp
