#include "pnpmrf/phantom.hpp"
#include "pnpmrf/dictionary.hpp"
#include "pnpmrf/keyvalue.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

namespace pnp {

void PhantomSpec::validate() const
{
  if (grid.width < 1 || grid.height < 1) { throw DomainError("phantom grid must be non-empty"); }
  if (!(jitter >= 0 && jitter < 0.5)) { throw DomainError("phantom jitter must lie in [0, 0.5)"); }
  for (std::size_t i = 0; i < regions.size(); i++) {
    auto const &r = regions[i];
    auto const where = "region " + std::to_string(i);
    if (!(r.ax > 0 && r.ay > 0)) { throw DomainError(where + ": semi-axes must be positive"); }
    if (r.t1 < ParamGrid::kT1Min || r.t1 > ParamGrid::kT1Max || r.t2 < ParamGrid::kT2Min || r.t2 > ParamGrid::kT2Max) {
      throw DomainError(where + ": (t1, t2) outside the dictionary range");
    }
    if (r.t2 > r.t1) { throw DomainError(where + ": t2 exceeds t1"); }
    if (!(r.pd >= 0)) { throw DomainError(where + ": negative proton density"); }
  }
}

PhantomSpec default_phantom_spec(Grid g, std::uint64_t seed, double jitter)
{
  constexpr double wm_t1 = 0.78, wm_t2 = 0.08;
  constexpr double gm_t1 = 1.2, gm_t2 = 0.11;
  constexpr double csf_t1 = 4.0, csf_t2 = 0.5;
  PhantomSpec s;
  s.grid = g;
  s.seed = seed;
  s.jitter = jitter;
  s.regions = {
    {0.0, 0.0, 0.86, 0.96, 0, csf_t1, csf_t2, 1.0},     // CSF rim
    {0.0, 0.01, 0.80, 0.90, 0, gm_t1, gm_t2, 0.8},      // cortex
    {0.0, 0.02, 0.64, 0.74, 0, wm_t1, wm_t2, 0.7},      // white matter
    {-0.2, -0.08, 0.08, 0.26, 18, csf_t1, csf_t2, 1.0}, // ventricles
    {0.2, -0.08, 0.08, 0.26, -18, csf_t1, csf_t2, 1.0},
    {-0.33, 0.22, 0.1, 0.14, 0, gm_t1, gm_t2, 0.85}, // deep gray nuclei
    {0.33, 0.22, 0.1, 0.14, 0, gm_t1, gm_t2, 0.85},
    {0.3, -0.48, 0.07, 0.07, 0, 1.5, 0.2, 0.9}, // lesion
  };
  if (jitter > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto &r : s.regions) {
      r.cx += 0.1 * jitter * u(rng);
      r.cy += 0.1 * jitter * u(rng);
      r.ax *= 1.0 + jitter * u(rng);
      r.ay *= 1.0 + jitter * u(rng);
      r.angle_deg += 20.0 * jitter * u(rng);
      r.t1 *= 1.0 + jitter * u(rng);
      r.t2 *= 1.0 + jitter * u(rng);
      r.t2 = std::min(r.t2, r.t1);
      r.t1 = std::clamp(r.t1, ParamGrid::kT1Min, ParamGrid::kT1Max);
      r.t2 = std::clamp(r.t2, ParamGrid::kT2Min, ParamGrid::kT2Max);
      r.pd = std::clamp(r.pd * (1.0 + 0.5 * jitter * u(rng)), 0.7, 1.0);
    }
  }
  return s;
}

TissueMaps make_phantom(PhantomSpec const &spec)
{
  spec.validate();
  Index const w = spec.grid.width, h = spec.grid.height;
  TissueMaps m(w, h);
  for (auto const &r : spec.regions) {
    double const a = r.angle_deg * std::numbers::pi / 180.0;
    double const ca = std::cos(a), sa = std::sin(a);
    for (Index y = 0; y < h; y++) {
      double const v = (double(y) + 0.5 - double(h) / 2.0) / (double(h) / 2.0);
      for (Index x = 0; x < w; x++) {
        double const u = (double(x) + 0.5 - double(w) / 2.0) / (double(w) / 2.0);
        double const du = u - r.cx, dv = v - r.cy;
        double const p = (du * ca + dv * sa) / r.ax;
        double const q = (-du * sa + dv * ca) / r.ay;
        if (p * p + q * q > 1.0) { continue; }
        Index const i = y * w + x;
        bool const fg = r.pd > 0;
        m.mask[i] = fg;
        m.t1[i] = fg ? r.t1 : 0.0;
        m.t2[i] = fg ? r.t2 : 0.0;
        m.pd[i] = fg ? r.pd : 0.0;
      }
    }
  }
  m.validate();
  return m;
}

PhantomSpec snap_to_grid(PhantomSpec spec, ParamGrid const &grid)
{
  if (grid.atoms.empty()) { throw DomainError("cannot snap to an empty dictionary grid"); }
  for (auto &r : spec.regions) {
    double best = INFINITY;
    std::pair<double, double> nearest{r.t1, r.t2};
    for (auto [t1, t2] : grid.atoms) {
      double const d = std::pow(std::log(t1 / r.t1), 2) + std::pow(std::log(t2 / r.t2), 2);
      if (d < best) {
        best = d;
        nearest = {t1, t2};
      }
    }
    std::tie(r.t1, r.t2) = nearest;
  }
  return spec;
}

PhantomSpec load_phantom_spec(std::filesystem::path const &path)
{
  auto const kv = KeyValueFile::load(path);
  PhantomSpec s;
  s.grid = {kv.get_int("width"), kv.get_int("height")};
  s.seed = std::uint64_t(kv.get_int("seed", 0));
  s.jitter = kv.get_double("jitter", 0.0);
  for (auto const *e : kv.all("region")) {
    auto const tok = split_ws(e->value);
    if (tok.size() != 8) { kv.fail(*e, "expected 'cx cy ax ay angle t1 t2 pd'"); }
    double v[8];
    for (std::size_t i = 0; i < 8; i++) {
      try {
        v[i] = parse_double(tok[i]);
      } catch (ConfigError const &) {
        kv.fail(*e, "'" + tok[i] + "' is not a number");
      }
    }
    s.regions.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]});
  }
  try {
    s.validate();
  } catch (DomainError const &err) {
    throw ConfigError(path.string() + ": " + err.what());
  }
  return s;
}

void save_phantom_spec(PhantomSpec const &spec, std::filesystem::path const &path)
{
  KeyValueFile kv;
  kv.add("width", std::to_string(spec.grid.width));
  kv.add("height", std::to_string(spec.grid.height));
  kv.add("seed", std::to_string(spec.seed));
  std::ostringstream j;
  j.precision(17);
  j << spec.jitter;
  kv.add("jitter", j.str());
  for (auto const &r : spec.regions) {
    std::ostringstream s;
    s.precision(17);
    s << r.cx << ' ' << r.cy << ' ' << r.ax << ' ' << r.ay << ' ' << r.angle_deg << ' ' << r.t1 << ' ' << r.t2 << ' '
      << r.pd;
    kv.add("region", s.str());
  }
  kv.save(path);
}

KSpaceData add_measurement_noise(KSpaceData const &y, double snr_db, std::uint64_t seed)
{
  if (std::isinf(snr_db) && snr_db > 0) { return y; }
  if (!std::isfinite(snr_db)) { throw DomainError("SNR must be finite or +inf"); }
  double const n = double(y.values.size());
  double const variance = y.values.squaredNorm() / (n * std::pow(10.0, snr_db / 10.0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(variance / 2.0));
  KSpaceData out = y;
  for (Index k = 0; k < out.values.cols(); k++) {
    for (Index j = 0; j < out.values.rows(); j++) {
      double const re = g(rng);
      double const im = g(rng);
      out.values(j, k) += Cx(re, im);
    }
  }
  return out;
}

} // namespace pnp
