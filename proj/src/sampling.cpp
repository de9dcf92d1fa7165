#include "pnpmrf/sampling.hpp"
#include "pnpmrf/keyvalue.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace pnp {

namespace {

void check_budget(Grid g, Index frames, Index samples)
{
  if (g.width < 1 || g.height < 1) { throw DomainError("sampling grid must be non-empty"); }
  if (frames < 1) { throw DomainError("mask needs at least one frame"); }
  if (samples < 1 || samples > g.size()) {
    throw DomainError("samples per frame must lie in [1, " + std::to_string(g.size()) + "]");
  }
}

std::vector<KCoord> raster(Grid g)
{
  std::vector<KCoord> out;
  out.reserve(std::size_t(g.size()));
  int const x0 = -int(g.width / 2), y0 = -int(g.height / 2);
  for (int y = y0; y < y0 + int(g.height); y++) {
    for (int x = x0; x < x0 + int(g.width); x++) { out.push_back({x, y}); }
  }
  return out;
}

} // namespace

double spiral_pitch(Grid g, Index samples_per_frame, SpiralOptions const &opts)
{
  if (opts.pitch > 0) { return opts.pitch; }
  return std::clamp(double(g.size()) / (2.0 * double(samples_per_frame)), 1.0, 8.0);
}

std::vector<KCoord> spiral_frame(Grid g, Index samples, double rotation_rad, double pitch)
{
  check_budget(g, 1, samples);
  if (!(pitch > 0)) { throw DomainError("spiral pitch must be positive"); }
  if (samples == g.size()) { return raster(g); }

  double const a = pitch / (2.0 * std::numbers::pi);
  double const r_stop = std::hypot(double(g.width), double(g.height)) / 2.0 + 1.0;
  double constexpr step = 0.25; // arc length between continuous samples, in grid units

  std::vector<char> seen(std::size_t(g.size()), 0);
  std::vector<KCoord> out;
  out.reserve(std::size_t(samples));
  double theta = 0.0;
  while (Index(out.size()) < samples) {
    double const r = a * theta;
    if (r > r_stop) {
      throw DomainError("spiral budget of " + std::to_string(samples) + " samples is unattainable on a " +
                        std::to_string(g.width) + "x" + std::to_string(g.height) + " grid (reached " +
                        std::to_string(out.size()) + ")");
    }
    KCoord const k{int(std::lround(r * std::cos(theta + rotation_rad))),
                   int(std::lround(r * std::sin(theta + rotation_rad)))};
    if (on_grid(k, g)) {
      auto &s = seen[std::size_t(fft_index(k, g))];
      if (!s) {
        s = 1;
        out.push_back(k);
      }
    }
    theta += step / std::sqrt(r * r + a * a);
  }
  return out;
}

SamplingMask spiral_mask(Grid g, Index frames, Index samples_per_frame, SpiralOptions const &opts)
{
  check_budget(g, frames, samples_per_frame);
  double const pitch = spiral_pitch(g, samples_per_frame, opts);
  double const golden = kGoldenAngleDeg * std::numbers::pi / 180.0;
  SamplingMask m{"spiral", g, frames, samples_per_frame, {}};
  m.coords.reserve(std::size_t(frames * samples_per_frame));
  for (Index k = 0; k < frames; k++) {
    auto const f = spiral_frame(g, samples_per_frame, double(k) * golden, pitch);
    m.coords.insert(m.coords.end(), f.begin(), f.end());
  }
  return m;
}

SamplingMask epi_mask(Grid g, Index frames, Index samples_per_frame)
{
  check_budget(g, frames, samples_per_frame);
  Index const q = samples_per_frame / g.width;
  if (q == 0) {
    throw DomainError("EPI budget of " + std::to_string(samples_per_frame) + " is below one readout row of " +
                      std::to_string(g.width));
  }
  Index const s = std::max<Index>(1, Index(std::lround(double(g.height) / double(q))));
  Index const rem = samples_per_frame - q * g.width;
  int const x0 = -int(g.width / 2), y0 = -int(g.height / 2);

  SamplingMask m{"epi", g, frames, samples_per_frame, {}};
  m.coords.reserve(std::size_t(frames * samples_per_frame));
  std::vector<char> used(std::size_t(g.height));
  for (Index k = 0; k < frames; k++) {
    std::fill(used.begin(), used.end(), 0);
    Index const offset = k % s;
    // wrapped rows that collide with an earlier one move to the next free row
    auto take_row = [&](Index j) {
      Index r = (offset + j * s) % g.height;
      while (used[std::size_t(r)]) { r = (r + 1) % g.height; }
      used[std::size_t(r)] = 1;
      return int(r) + y0;
    };
    for (Index j = 0; j < q; j++) {
      int const ky = take_row(j);
      for (int x = x0; x < x0 + int(g.width); x++) { m.coords.push_back({x, ky}); }
    }
    if (rem > 0) {
      int const ky = take_row(q);
      for (int x = x0; x < x0 + int(rem); x++) { m.coords.push_back({x, ky}); }
    }
  }
  return m;
}

SamplingMask full_mask(Grid g, Index frames)
{
  check_budget(g, frames, g.size());
  SamplingMask m{"full", g, frames, g.size(), {}};
  auto const r = raster(g);
  for (Index k = 0; k < frames; k++) { m.coords.insert(m.coords.end(), r.begin(), r.end()); }
  return m;
}

MaskReport validate_mask(SamplingMask const &mask)
{
  MaskReport rep;
  Grid const g = mask.grid;
  auto violation = [&](std::string v) { rep.violations.push_back(std::move(v)); };

  if (g.width < 1 || g.height < 1) {
    violation("empty grid");
    return rep;
  }
  if (mask.samples_per_frame < 1) { violation("non-positive sample budget"); }
  if (Index(mask.coords.size()) != mask.frames * mask.samples_per_frame) {
    violation("coordinate count " + std::to_string(mask.coords.size()) + " != frames x samples_per_frame");
    return rep;
  }
  rep.compression_ratio = mask.samples_per_frame > 0 ? double(g.size()) / double(mask.samples_per_frame) : 0.0;

  double const rmax = std::hypot(double(g.width), double(g.height)) / 2.0;
  std::size_t const bins = std::size_t(std::ceil(rmax)) + 1;
  std::vector<double> bin_pixels(bins, 0.0), bin_hits(bins, 0.0);
  for (auto k : raster(g)) { bin_pixels[std::size_t(std::hypot(k.kx, k.ky))] += 1; }

  std::vector<char> seen(std::size_t(g.size()));
  for (Index f = 0; f < mask.frames; f++) {
    std::fill(seen.begin(), seen.end(), 0);
    Index count = 0;
    bool dc = false;
    for (auto k : mask.frame(f)) {
      if (!on_grid(k, g)) {
        rep.off_grid++;
        continue;
      }
      auto &s = seen[std::size_t(fft_index(k, g))];
      if (s) {
        rep.duplicates++;
        continue;
      }
      s = 1;
      count++;
      dc = dc || (k.kx == 0 && k.ky == 0);
      bin_hits[std::size_t(std::hypot(k.kx, k.ky))] += 1;
    }
    rep.per_frame_counts.push_back(count);
    if (dc) { rep.frames_with_dc++; }
    if (count != mask.samples_per_frame) {
      violation("frame " + std::to_string(f) + " has " + std::to_string(count) + " unique on-grid samples, expected " +
                std::to_string(mask.samples_per_frame));
    }
  }
  if (rep.duplicates) { violation(std::to_string(rep.duplicates) + " duplicate samples"); }
  if (rep.off_grid) { violation(std::to_string(rep.off_grid) + " off-grid samples"); }

  rep.radial_density.resize(bins);
  for (std::size_t b = 0; b < bins; b++) {
    rep.radial_density[b] = bin_pixels[b] > 0 ? bin_hits[b] / (bin_pixels[b] * double(std::max<Index>(mask.frames, 1))) : 0.0;
  }
  return rep;
}

void save_mask(SamplingMask const &mask, std::filesystem::path const &dir)
{
  std::filesystem::create_directories(dir);
  write_tensor(to_tensor(mask), dir / "mask.qmrt");
  KeyValueFile m;
  m.add("pattern", mask.pattern);
  m.add("width", std::to_string(mask.grid.width));
  m.add("height", std::to_string(mask.grid.height));
  m.add("frames", std::to_string(mask.frames));
  m.add("samples_per_frame", std::to_string(mask.samples_per_frame));
  m.save(dir / "mask.txt");
}

SamplingMask load_mask(std::filesystem::path const &dir)
{
  auto const m = KeyValueFile::load(dir / "mask.txt");
  Grid const g{m.get_int("width"), m.get_int("height")};
  auto mask = mask_from_tensor(read_tensor(dir / "mask.qmrt"), g, m.get("pattern"));
  if (mask.frames != m.get_int("frames") || mask.samples_per_frame != m.get_int("samples_per_frame")) {
    throw ShapeError(dir.string() + ": mask manifest disagrees with mask.qmrt");
  }
  return mask;
}

} // namespace pnp
