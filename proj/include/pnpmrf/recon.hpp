#pragma once

#include "denoise.hpp"
#include "forward.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace pnp {

struct PnPConfig
{
  Index iterations = 100;
  double gamma = 0.05;
  double cg_tol = 1e-4;
  Index cg_max_iter = 50;
  DenoiserSpec denoiser;
  bool trace = true;

  void validate() const;
};

struct TraceRow
{
  Index iteration = 0;
  double primal_gap = 0;    // ||x_k - v_k||
  double fp_residual = 0;   // ||v_k - v_{k-1}||
  double data_fidelity = 0; // ||y - A v_k||
  double seconds = 0;       // wall time since the start of the reconstruction
  Index cg_iterations = 0;
  bool cg_converged = true;
};

struct ReconTrace
{
  std::vector<TraceRow> rows;
  Index cg_warnings = 0; // data-consistency solves that hit cg_max_iter
};

struct ReconResult
{
  Tsmi x;
  ReconTrace trace;
};

// x_k = h(z) with z = v_{k-1} - u_{k-1}
using DataStep = std::function<Tsmi(Tsmi const &z, TraceRow &row)>;
// v_k = f(x_k + u_{k-1})
using DenoiseStep = std::function<Tsmi(Tsmi const &x)>;
// ||y - A v|| for the trace; may be empty
using FidelityFn = std::function<double(Tsmi const &v)>;

/*
 * The ADMM skeleton shared by every iterative reconstruction:
 *   x_k = h(v_{k-1} - u_{k-1})
 *   v_k = f(x_k + u_{k-1})
 *   u_k = u_{k-1} + (x_k - v_k)
 * starting from v_0 and u_0 = 0; returns v_K.
 */
ReconResult admm_iterate(Tsmi v0, DataStep const &h, DenoiseStep const &f, Index iterations,
                         FidelityFn const &fidelity = {});

ReconResult pnp_admm(ForwardOperator const &op, KSpaceData const &y, PnPConfig const &cfg, Denoiser const &f);
ReconResult pnp_admm(ForwardOperator const &op, KSpaceData const &y, PnPConfig const &cfg);

// Zero-filling reconstruction x = A^H y.
Tsmi svd_mrf(ForwardOperator const &op, KSpaceData const &y);

struct LrtvOptions
{
  double gamma = 0.05;
  double cg_tol = 1e-4;
  Index cg_max_iter = 50;
  Index tv_iters = 50;
};

/*
 * LRTV-style baseline: argmin ||y - A x||^2 + lambda TV(x) on the shared
 * subspace, run on the ADMM skeleton with the TV proximal step
 * (ROF weight lambda / (2 gamma)) in place of the denoiser.
 */
ReconResult lrtv(ForwardOperator const &op, KSpaceData const &y, double lambda = 4e-5, Index iterations = 200,
                 LrtvOptions const &opts = {});

// iteration,primal_gap,fp_residual,data_fidelity,seconds
void write_trace_csv(ReconTrace const &trace, std::filesystem::path const &path);

} // namespace pnp
