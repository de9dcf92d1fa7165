#include "pnpmrf/dictionary.hpp"
#include "pnpmrf/keyvalue.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace pnp {

namespace {

std::vector<double> logspace(double lo, double hi, Index n)
{
  std::vector<double> v(static_cast<std::size_t>(n));
  double const step = (std::log(hi) - std::log(lo)) / double(n - 1);
  for (Index i = 0; i < n; i++) { v[std::size_t(i)] = std::exp(std::log(lo) + step * double(i)); }
  v.front() = lo;
  v.back() = hi;
  return v;
}

} // namespace

ParamGrid build_grid(Index n_t1, Index n_t2)
{
  if (n_t1 < 2 || n_t2 < 2) { throw DomainError("dictionary grid needs at least two values per axis"); }
  ParamGrid g;
  g.t1_values = logspace(ParamGrid::kT1Min, ParamGrid::kT1Max, n_t1);
  g.t2_values = logspace(ParamGrid::kT2Min, ParamGrid::kT2Max, n_t2);
  for (auto t1 : g.t1_values) {
    for (auto t2 : g.t2_values) {
      if (t2 <= t1) { g.atoms.emplace_back(t1, t2); }
    }
  }
  return g;
}

ParamGrid grid_from_atoms(std::vector<std::pair<double, double>> atoms)
{
  ParamGrid g;
  for (auto [t1, t2] : atoms) {
    if (!(t1 > 0) || !(t2 > 0) || t2 > t1) { throw DomainError("infeasible dictionary atom"); }
    g.t1_values.push_back(t1);
    g.t2_values.push_back(t2);
  }
  auto uniq = [](std::vector<double> &v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(g.t1_values);
  uniq(g.t2_values);
  g.atoms = std::move(atoms);
  return g;
}

Eigen::MatrixXd build_dictionary(ParamGrid const &grid, SequenceParams const &seq, EpgOptions const &opts)
{
  seq.validate();
  Eigen::MatrixXd d(grid.size(), seq.repetitions);
  for (Index i = 0; i < grid.size(); i++) {
    auto [t1, t2] = grid.atoms[std::size_t(i)];
    d.row(i) = simulate_fingerprint(t1, t2, seq, opts).transpose();
  }
  return d;
}

double SubspaceBasis::captured_energy() const
{
  double const total = singular_values.squaredNorm();
  if (total == 0) { return 0; }
  return singular_values.head(rank()).squaredNorm() / total;
}

SubspaceBasis compute_subspace(Eigen::MatrixXd const &dict_full, Index t)
{
  Index const n = dict_full.rows(), T = dict_full.cols();
  if (t < 1 || t > std::min(n, T)) {
    throw DomainError("subspace dimension " + std::to_string(t) + " must lie in [1, min(atoms, T)]");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dict_full, Eigen::ComputeThinV);
  Eigen::VectorXd const &s = svd.singularValues();
  double const tol = double(std::max(n, T)) * std::numeric_limits<double>::epsilon() * s(0);
  if (!(s(0) > 0) || s(t - 1) <= tol) {
    throw DomainError("dictionary rank is below the requested subspace dimension " + std::to_string(t));
  }
  SubspaceBasis b{svd.matrixV().leftCols(t), s};
  for (Index c = 0; c < t; c++) {
    auto col = b.basis.col(c);
    double const small = 1e-12 * col.cwiseAbs().maxCoeff();
    for (Index r = 0; r < T; r++) {
      if (std::abs(col(r)) > small) {
        if (col(r) < 0) { col = -col; }
        break;
      }
    }
  }
  check_orthonormal(b.basis);
  return b;
}

void check_orthonormal(Eigen::MatrixXd const &basis, double tol)
{
  Eigen::MatrixXd const g = basis.transpose() * basis;
  double const err = (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
  if (!(err <= tol)) { throw DomainError("basis columns are not orthonormal (max deviation " + std::to_string(err) + ")"); }
}

CompressedDictionary compress(Eigen::MatrixXd const &dict_full, SubspaceBasis const &basis, ParamGrid grid)
{
  if (dict_full.cols() != basis.temporal()) { throw ShapeError("dictionary and basis disagree on temporal length"); }
  if (dict_full.rows() != grid.size()) { throw ShapeError("dictionary rows do not match the parameter grid"); }
  CompressedDictionary c{dict_full * basis.basis, {}, std::move(grid)};
  c.norms = c.atoms.rowwise().norm();
  for (Index i = 0; i < c.norms.size(); i++) {
    if (!(c.norms(i) > 0)) { throw DomainError("compressed atom " + std::to_string(i) + " has zero norm"); }
  }
  return c;
}

TissueMaps match(Tsmi const &tsmi, CompressedDictionary const &dict, MatchOptions const &opts)
{
  if (tsmi.channels != dict.atoms.cols()) {
    throw ShapeError("TSMI has " + std::to_string(tsmi.channels) + " channels but dictionary atoms have " +
                     std::to_string(dict.atoms.cols()));
  }
  TissueMaps maps(tsmi.width, tsmi.height);
  Eigen::VectorXd const voxel_norm = tsmi.values.rowwise().norm();
  double const max_norm = voxel_norm.size() ? voxel_norm.maxCoeff() : 0.0;
  double const threshold = opts.background_fraction * max_norm;
  if (!(max_norm > 0)) { return maps; }

  Eigen::RowVectorXd const inv_norm = dict.norms.cwiseInverse().transpose();
  Index const n = tsmi.pixels(), N = dict.atoms.rows();
  Eigen::MatrixXd corr;
  for (Index b0 = 0; b0 < n; b0 += opts.block) {
    Index const nb = std::min(opts.block, n - b0);
    corr.noalias() = tsmi.values.middleRows(b0, nb) * dict.atoms.transpose();
    for (Index j = 0; j < nb; j++) {
      Index const v = b0 + j;
      if (!(voxel_norm(v) >= threshold) || voxel_norm(v) == 0) { continue; }
      Index best = 0;
      double best_score = corr(j, 0) * inv_norm(0);
      for (Index i = 1; i < N; i++) {
        double const s = corr(j, i) * inv_norm(i);
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      auto [t1, t2] = dict.grid.atoms[std::size_t(best)];
      maps.mask[v] = true;
      maps.t1[v] = t1;
      maps.t2[v] = t2;
      maps.pd[v] = corr(j, best) * inv_norm(best) * inv_norm(best);
    }
  }
  return maps;
}

namespace {

Tensor matrix_tensor(Eigen::MatrixXd const &m)
{
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> const r = m;
  return Tensor({std::uint64_t(m.rows()), std::uint64_t(m.cols())}, std::vector<double>(r.data(), r.data() + r.size()));
}

Eigen::MatrixXd tensor_matrix(Tensor const &t, std::string const &name)
{
  if (t.ndim() != 2) { throw ShapeError(name + " must be a matrix"); }
  auto const v = t.as_real();
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> const>(
    v.data(), Index(t.shape()[0]), Index(t.shape()[1]));
}

Tensor vector_tensor(Eigen::VectorXd const &v)
{
  return Tensor({std::uint64_t(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

} // namespace

void save_dictionary(std::filesystem::path const &dir, CompressedDictionary const &dict, SubspaceBasis const &basis,
                     SequenceParams const &seq, Index n_t1, Index n_t2)
{
  std::filesystem::create_directories(dir);
  Eigen::MatrixXd pairs(dict.grid.size(), 2);
  for (Index i = 0; i < dict.grid.size(); i++) {
    pairs(i, 0) = dict.grid.atoms[std::size_t(i)].first;
    pairs(i, 1) = dict.grid.atoms[std::size_t(i)].second;
  }
  write_tensor(matrix_tensor(dict.atoms), dir / "atoms.qmrt");
  write_tensor(vector_tensor(dict.norms), dir / "norms.qmrt");
  write_tensor(matrix_tensor(pairs), dir / "grid.qmrt");
  write_tensor(matrix_tensor(basis.basis), dir / "basis.qmrt");
  write_tensor(vector_tensor(basis.singular_values), dir / "singular_values.qmrt");

  KeyValueFile m;
  m.add("format", "pnpmrf-dictionary 1");
  m.add("t1_range", std::to_string(ParamGrid::kT1Min) + " " + std::to_string(ParamGrid::kT1Max));
  m.add("t2_range", std::to_string(ParamGrid::kT2Min) + " " + std::to_string(ParamGrid::kT2Max));
  m.add("n_t1", std::to_string(n_t1));
  m.add("n_t2", std::to_string(n_t2));
  m.add("atoms", std::to_string(dict.grid.size()));
  m.add("subspace", std::to_string(basis.rank()));
  m.add("repetitions", std::to_string(seq.repetitions));
  m.add("captured_energy", std::to_string(basis.captured_energy()));
  m.add("sequence_hash", hex64(seq.hash()));
  m.save(dir / "manifest.txt");
}

LoadedDictionary load_dictionary(std::filesystem::path const &dir)
{
  auto const manifest = KeyValueFile::load(dir / "manifest.txt");
  Eigen::MatrixXd const pairs = tensor_matrix(read_tensor(dir / "grid.qmrt"), "grid");
  if (pairs.cols() != 2) { throw ShapeError("grid tensor must be N x 2"); }
  std::vector<std::pair<double, double>> atoms(std::size_t(pairs.rows()));
  for (Index i = 0; i < pairs.rows(); i++) { atoms[std::size_t(i)] = {pairs(i, 0), pairs(i, 1)}; }

  LoadedDictionary out;
  out.dict.grid = grid_from_atoms(std::move(atoms));
  out.dict.atoms = tensor_matrix(read_tensor(dir / "atoms.qmrt"), "atoms");
  auto const norms = read_tensor(dir / "norms.qmrt").as_real();
  out.dict.norms = Eigen::Map<Eigen::VectorXd const>(norms.data(), Index(norms.size()));
  out.basis.basis = tensor_matrix(read_tensor(dir / "basis.qmrt"), "basis");
  auto const sv = read_tensor(dir / "singular_values.qmrt").as_real();
  out.basis.singular_values = Eigen::Map<Eigen::VectorXd const>(sv.data(), Index(sv.size()));
  out.sequence_hash = std::stoull(manifest.get("sequence_hash"), nullptr, 16);

  if (out.dict.atoms.rows() != out.dict.grid.size() || out.dict.norms.size() != out.dict.grid.size()) {
    throw ShapeError(dir.string() + ": dictionary tensors disagree on atom count");
  }
  if (out.dict.atoms.cols() != out.basis.rank()) {
    throw ShapeError(dir.string() + ": atom dimension does not match the basis");
  }
  if (manifest.get_int("atoms") != out.dict.grid.size()) {
    throw ShapeError(dir.string() + ": manifest atom count disagrees with grid.qmrt");
  }
  check_orthonormal(out.basis.basis);
  return out;
}

} // namespace pnp
