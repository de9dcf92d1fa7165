#pragma once

#include "core.hpp"
#include "fft.hpp"

#include <memory>
#include <vector>

namespace pnp {

/*
 * Real-linear acquisition operator A: R^{n x t} -> C^{m x T}. For frame k the
 * TSMI is expanded with basis row k, transformed by a unitary 2-D FFT and
 * gathered at the frame's mask locations. The adjoint is taken with respect to
 * Re<.,.> on the k-space side, so it keeps the real part after the inverse FFT.
 *
 * Because the FFT is linear the operator transforms the t channel images once
 * and mixes them per sample, which is mathematically identical to expanding
 * every frame first. The normal operator A^H A is diagonal in k-space up to a
 * t x t Gram block per sampled location.
 */
class ForwardOperator
{
public:
  ForwardOperator(SamplingMask mask, Eigen::MatrixXd basis);

  SamplingMask const &mask() const { return mask_; }
  Eigen::MatrixXd const &basis() const { return basis_; }
  Grid grid() const { return mask_.grid; }
  Index frames() const { return mask_.frames; }
  Index channels() const { return basis_.cols(); }

  KSpaceData apply(Tsmi const &x) const;
  Tsmi adjoint(KSpaceData const &y) const;
  Tsmi normal(Tsmi const &x) const; // A^H A x

private:
  void check(Tsmi const &x) const;
  std::vector<Cx> channel_spectra(Tsmi const &x) const; // t stacked FFTs
  Tsmi channel_images(std::vector<Cx> &spectra) const;  // inverse FFT, real part

  SamplingMask mask_;
  Eigen::MatrixXd basis_;
  std::shared_ptr<Fft2 const> fft_;
  std::vector<Index> sample_index_;  // fft_index of every (frame, sample)
  std::vector<Index> gram_location_; // distinct sampled k-space locations
  std::vector<Eigen::MatrixXd> gram_; // sum over frames sampling that location of b_k b_k^T
};

struct CgReport
{
  Index iterations = 0;
  double relative_residual = 0;
  bool converged = false;
  std::vector<double> residuals; // relative residual after each iteration (entry 0 = start)
};

struct CgResult
{
  Tsmi x;
  CgReport report;
};

/*
 * h(z) = argmin_x ||y - A x||^2 + gamma ||x - z||^2, solved on the normal
 * equations (A^H A + gamma I) x = A^H y + gamma z by the conjugate residual
 * variant of conjugate gradient (monotone residual), warm started at z. Stops
 * at ||r|| / ||b|| <= tol or after max_iter iterations; non-convergence is
 * reported, not thrown.
 */
CgResult data_consistency(ForwardOperator const &op, KSpaceData const &y, Tsmi const &z, double gamma,
                          double tol = 1e-4, Index max_iter = 50);
// Same, with A^H y precomputed.
CgResult data_consistency_aty(ForwardOperator const &op, Tsmi const &aty, Tsmi const &z, double gamma, double tol,
                              Index max_iter);

} // namespace pnp
