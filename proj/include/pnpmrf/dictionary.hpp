#pragma once

#include "core.hpp"
#include "epg.hpp"

#include <filesystem>
#include <utility>
#include <vector>

namespace pnp {

struct ParamGrid
{
  static constexpr double kT1Min = 0.01, kT1Max = 6.0;
  static constexpr double kT2Min = 0.004, kT2Max = 0.6;

  std::vector<double> t1_values;
  std::vector<double> t2_values;
  std::vector<std::pair<double, double>> atoms; // (t1, t2), t2 <= t1

  Index size() const { return Index(atoms.size()); }
};

// Log-spaced values over the full dictionary box; atoms keep only t2 <= t1.
ParamGrid build_grid(Index n_t1, Index n_t2);
// Grid from an explicit atom list (used when loading a persisted dictionary).
ParamGrid grid_from_atoms(std::vector<std::pair<double, double>> atoms);

// Row i = simulate_fingerprint(grid.atoms[i]).
Eigen::MatrixXd build_dictionary(ParamGrid const &grid, SequenceParams const &seq, EpgOptions const &opts = {});

struct SubspaceBasis
{
  Eigen::MatrixXd basis;           // T x t, orthonormal columns
  Eigen::VectorXd singular_values; // min(T, N_atoms), decreasing

  Index temporal() const { return basis.rows(); }
  Index rank() const { return basis.cols(); }
  // Fraction of the squared Frobenius norm captured by the first `rank()` components.
  double captured_energy() const;
};

/*
 * Top-t right singular vectors of the N x T dictionary. Each column's first
 * entry that is not negligibly small is made positive so the basis is
 * reproducible. Throws DomainError when the dictionary has rank < t.
 */
SubspaceBasis compute_subspace(Eigen::MatrixXd const &dict_full, Index t);

// Throws DomainError if basis^T basis deviates from identity by more than tol.
void check_orthonormal(Eigen::MatrixXd const &basis, double tol = 1e-10);

struct CompressedDictionary
{
  Eigen::MatrixXd atoms; // N x t
  Eigen::VectorXd norms; // ||atoms.row(i)||
  ParamGrid grid;
};

CompressedDictionary compress(Eigen::MatrixXd const &dict_full, SubspaceBasis const &basis, ParamGrid grid);

struct MatchOptions
{
  double background_fraction = 1e-8; // of the largest voxel norm
  Index block = 1024;                // voxels per GEMM block
};

/*
 * Exhaustive matching by normalized (signed) inner product. Ties resolve to
 * the lowest atom index. PD is reported signed.
 */
TissueMaps match(Tsmi const &tsmi, CompressedDictionary const &dict, MatchOptions const &opts = {});

// atoms.qmrt, norms.qmrt, grid.qmrt, basis.qmrt, singular_values.qmrt, manifest.txt
void save_dictionary(std::filesystem::path const &dir, CompressedDictionary const &dict, SubspaceBasis const &basis,
                     SequenceParams const &seq, Index n_t1, Index n_t2);
struct LoadedDictionary
{
  CompressedDictionary dict;
  SubspaceBasis basis;
  std::uint64_t sequence_hash = 0;
};
LoadedDictionary load_dictionary(std::filesystem::path const &dir);

} // namespace pnp
