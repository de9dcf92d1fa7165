#include "pnpmrf/epg.hpp"
#include "pnpmrf/dictionary.hpp"
#include "pnpmrf/keyvalue.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace pnp {

void SequenceParams::validate() const
{
  if (repetitions < 1) { throw DomainError("sequence needs at least one repetition"); }
  if (Index(flip_angles_deg.size()) != repetitions) {
    throw DomainError("flip schedule has " + std::to_string(flip_angles_deg.size()) + " entries for " +
                      std::to_string(repetitions) + " repetitions");
  }
  if (!(te_s > 0) || !(te_s < tr_s)) { throw DomainError("echo time must satisfy 0 < TE < TR"); }
  if (!(ti_s >= 0)) { throw DomainError("inversion time must be non-negative"); }
  for (auto a : flip_angles_deg) {
    if (!(a > 0 && a <= 180)) { throw DomainError("flip angle " + std::to_string(a) + " outside (0, 180]"); }
  }
}

std::uint64_t SequenceParams::hash() const
{
  std::ostringstream s;
  s.precision(17);
  s << repetitions << ' ' << tr_s << ' ' << te_s << ' ' << ti_s;
  for (auto a : flip_angles_deg) { s << ' ' << a; }
  return fnv1a(s.str());
}

std::vector<double> default_flip_schedule(Index repetitions)
{
  if (repetitions < 1) { throw DomainError("flip schedule needs at least one repetition"); }
  std::vector<double> flips(static_cast<std::size_t>(repetitions));
  for (Index k = 0; k < repetitions; k++) {
    flips[std::size_t(k)] = 10.0 + 50.0 * std::abs(std::sin(std::numbers::pi * double(k) / double(repetitions)));
  }
  return flips;
}

std::vector<double> read_flip_schedule(std::filesystem::path const &path, Index repetitions)
{
  std::ifstream f(path);
  if (!f) { throw ConfigError("cannot open flip-angle file " + path.string()); }
  std::vector<double> flips;
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    n++;
    auto const tok = split_ws(line);
    if (tok.empty()) { continue; }
    if (tok.size() != 1) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected one flip angle per line");
    }
    try {
      flips.push_back(parse_double(tok[0]));
    } catch (ConfigError const &) {
      throw ConfigError(path.string() + ":" + std::to_string(n) + ": '" + tok[0] + "' is not a number");
    }
  }
  if (Index(flips.size()) != repetitions) {
    throw ConfigError(path.string() + ": expected " + std::to_string(repetitions) + " flip angles, found " +
                      std::to_string(flips.size()));
  }
  return flips;
}

void write_flip_schedule(std::vector<double> const &flips, std::filesystem::path const &path)
{
  std::ofstream f(path, std::ios::trunc);
  if (!f) { throw Error("cannot open " + path.string() + " for writing"); }
  f.precision(17);
  for (auto a : flips) { f << a << '\n'; }
}

SequenceParams default_sequence(Index repetitions)
{
  return {repetitions, default_flip_schedule(repetitions), 0.010, 0.0018, 0.018};
}

/*
 * RF pulses are applied about the y axis, which keeps every configuration state
 * real-valued: F-_k = conj(F+_k) only matters for k = 0 where both are real.
 */
Fingerprint simulate_fingerprint(double t1_s, double t2_s, SequenceParams const &seq, EpgOptions const &opts)
{
  if (!(t1_s > 0) || !(t2_s > 0) || t2_s > t1_s) {
    throw DomainError("invalid relaxation pair (t1=" + std::to_string(t1_s) + ", t2=" + std::to_string(t2_s) + ")");
  }
  seq.validate();
  if (opts.max_order < 1) { throw DomainError("EPG ladder needs at least one dephased order"); }

  std::size_t const K = std::size_t(opts.max_order);
  std::vector<double> fp(K + 1, 0.0), fm(K + 1, 0.0), z(K + 1, 0.0);

  auto relax = [&](double dt, std::size_t active) {
    double const e1 = std::exp(-dt / t1_s);
    double const e2 = std::exp(-dt / t2_s);
    for (std::size_t k = 0; k <= active; k++) {
      fp[k] *= e2;
      fm[k] *= e2;
      z[k] *= e1;
    }
    z[0] += 1.0 - e1;
  };

  z[0] = -1.0;
  relax(seq.ti_s, 0);

  Fingerprint signal(seq.repetitions);
  std::size_t active = 0; // highest order that can be populated
  for (Index r = 0; r < seq.repetitions; r++) {
    double const a = seq.flip_angles_deg[std::size_t(r)] * std::numbers::pi / 180.0;
    double const c2 = std::cos(a / 2) * std::cos(a / 2);
    double const s2 = std::sin(a / 2) * std::sin(a / 2);
    double const sa = std::sin(a);
    double const ca = std::cos(a);
    for (std::size_t k = 0; k <= active; k++) {
      double const p = fp[k], m = fm[k], l = z[k];
      fp[k] = c2 * p - s2 * m + sa * l;
      fm[k] = -s2 * p + c2 * m + sa * l;
      z[k] = -0.5 * sa * (p + m) + ca * l;
    }

    relax(seq.te_s, active);
    signal[r] = std::abs(fp[0]);
    relax(seq.tr_s - seq.te_s, active);

    // unit gradient dephasing: F+ climbs one order, F- descends one order
    for (std::size_t k = std::min(active + 1, K); k >= 1; k--) { fp[k] = fp[k - 1]; }
    for (std::size_t k = 0; k < K; k++) { fm[k] = fm[k + 1]; }
    fm[K] = 0.0;
    fp[0] = fm[0];
    active = std::min(active + 1, K);
  }
  return signal;
}

Tsmi simulate_tsmi(TissueMaps const &maps, SequenceParams const &seq, SubspaceBasis const &basis,
                   EpgOptions const &opts)
{
  if (basis.basis.rows() != seq.repetitions) {
    throw ShapeError("basis temporal length " + std::to_string(basis.basis.rows()) + " does not match " +
                     std::to_string(seq.repetitions) + " repetitions");
  }
  if (maps.t1.size() != maps.pixels() || maps.t2.size() != maps.pixels() || maps.pd.size() != maps.pixels() ||
      maps.mask.size() != maps.pixels()) {
    throw ShapeError("tissue maps do not match the requested image grid");
  }
  Tsmi x(maps.width, maps.height, basis.basis.cols());
  std::map<std::pair<double, double>, Eigen::RowVectorXd> cache;
  for (Index v = 0; v < maps.pixels(); v++) {
    if (!maps.mask[v]) { continue; }
    auto const key = std::make_pair(maps.t1[v], maps.t2[v]);
    auto it = cache.find(key);
    if (it == cache.end()) {
      Eigen::RowVectorXd const c = simulate_fingerprint(key.first, key.second, seq, opts).transpose() * basis.basis;
      it = cache.emplace(key, c).first;
    }
    x.values.row(v) = maps.pd[v] * it->second;
  }
  return x;
}

} // namespace pnp
