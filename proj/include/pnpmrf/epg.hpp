#pragma once

#include "core.hpp"

#include <filesystem>
#include <vector>

namespace pnp {

struct SubspaceBasis;

/*
 * Inversion-prepared FISP sequence: 180 degree inversion, a delay of ti_s, then
 * `repetitions` RF pulses spaced tr_s apart with the echo sampled te_s after
 * each pulse.
 */
struct SequenceParams
{
  Index repetitions = 0;
  std::vector<double> flip_angles_deg;
  double tr_s = 0.010;
  double te_s = 0.0018;
  double ti_s = 0.018;

  void validate() const;
  std::uint64_t hash() const;
};

// alpha_k = 10 + 50 |sin(pi k / T)| degrees
std::vector<double> default_flip_schedule(Index repetitions);
// One value per line, exactly `repetitions` lines.
std::vector<double> read_flip_schedule(std::filesystem::path const &path, Index repetitions);
void write_flip_schedule(std::vector<double> const &flips, std::filesystem::path const &path);

// T=200, TI 18 ms, TR 10 ms, TE 1.8 ms with the default flip schedule.
SequenceParams default_sequence(Index repetitions = 200);

struct EpgOptions
{
  Index max_order = 40; // configuration-state ladder truncation
};

using Fingerprint = Eigen::VectorXd;

// |F0| at each echo time, one value per repetition.
Fingerprint simulate_fingerprint(double t1_s, double t2_s, SequenceParams const &seq, EpgOptions const &opts = {});

// x_v = PD_v * B(T1_v, T2_v) projected on the basis; background voxels are zero.
Tsmi simulate_tsmi(TissueMaps const &maps, SequenceParams const &seq, SubspaceBasis const &basis,
                   EpgOptions const &opts = {});

} // namespace pnp
