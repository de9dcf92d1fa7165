#include "pnpmrf/recon.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace pnp {

void PnPConfig::validate() const
{
  if (iterations < 1) { throw DomainError("PnP needs at least one iteration"); }
  if (!(gamma > 0)) { throw DomainError("gamma must be positive"); }
  if (!(cg_tol > 0)) { throw DomainError("cg_tol must be positive"); }
  if (cg_max_iter < 1) { throw DomainError("cg_max_iter must be >= 1"); }
  denoiser.validate();
}

ReconResult admm_iterate(Tsmi v0, DataStep const &h, DenoiseStep const &f, Index iterations, FidelityFn const &fidelity)
{
  auto const start = std::chrono::steady_clock::now();
  ReconResult res{std::move(v0), {}};
  Tsmi &v = res.x;
  Tsmi u(v.width, v.height, v.channels);
  Tsmi z = v;
  for (Index k = 1; k <= iterations; k++) {
    TraceRow row;
    row.iteration = k;
    z.values = v.values - u.values;
    Tsmi const x = h(z, row);
    z.values = x.values + u.values;
    Tsmi vk = f(z);
    if (!vk.same_shape(v)) { throw ShapeError("denoiser changed the TSMI shape"); }
    u.values += x.values - vk.values;

    row.primal_gap = (x.values - vk.values).norm();
    row.fp_residual = (vk.values - v.values).norm();
    v = std::move(vk);
    row.data_fidelity = fidelity ? fidelity(v) : 0.0;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!row.cg_converged) { res.trace.cg_warnings++; }
    res.trace.rows.push_back(row);
  }
  return res;
}

namespace {

ReconResult admm_with_cg(ForwardOperator const &op, KSpaceData const &y, double gamma, double cg_tol,
                         Index cg_max_iter, DenoiseStep const &f, Index iterations, bool trace)
{
  Tsmi const aty = op.adjoint(y);
  DataStep h = [&](Tsmi const &z, TraceRow &row) {
    auto r = data_consistency_aty(op, aty, z, gamma, cg_tol, cg_max_iter);
    row.cg_iterations = r.report.iterations;
    row.cg_converged = r.report.converged;
    return std::move(r.x);
  };
  FidelityFn fidelity;
  if (trace) {
    fidelity = [&](Tsmi const &v) { return (y.values - op.apply(v).values).norm(); };
  }
  return admm_iterate(aty, h, f, iterations, fidelity);
}

} // namespace

ReconResult pnp_admm(ForwardOperator const &op, KSpaceData const &y, PnPConfig const &cfg, Denoiser const &f)
{
  cfg.validate();
  DenoiseStep step = [&](Tsmi const &x) { return f(x); };
  return admm_with_cg(op, y, cfg.gamma, cfg.cg_tol, cfg.cg_max_iter, step, cfg.iterations, cfg.trace);
}

ReconResult pnp_admm(ForwardOperator const &op, KSpaceData const &y, PnPConfig const &cfg)
{
  cfg.validate();
  auto const f = make_denoiser(cfg.denoiser);
  return pnp_admm(op, y, cfg, *f);
}

Tsmi svd_mrf(ForwardOperator const &op, KSpaceData const &y) { return op.adjoint(y); }

ReconResult lrtv(ForwardOperator const &op, KSpaceData const &y, double lambda, Index iterations,
                 LrtvOptions const &opts)
{
  if (!(lambda > 0)) { throw DomainError("LRTV lambda must be positive"); }
  if (iterations < 1) { throw DomainError("LRTV needs at least one iteration"); }
  if (!(opts.gamma > 0)) { throw DomainError("gamma must be positive"); }
  double const weight = lambda / (2.0 * opts.gamma);
  DenoiseStep step = [&](Tsmi const &x) { return tv_denoise(x, weight, opts.tv_iters); };
  return admm_with_cg(op, y, opts.gamma, opts.cg_tol, opts.cg_max_iter, step, iterations, true);
}

void write_trace_csv(ReconTrace const &trace, std::filesystem::path const &path)
{
  std::ofstream f(path, std::ios::trunc);
  if (!f) { throw Error("cannot open " + path.string() + " for writing"); }
  f.precision(10);
  f << "iteration,primal_gap,fp_residual,data_fidelity,seconds\n";
  for (auto const &r : trace.rows) {
    f << r.iteration << ',' << r.primal_gap << ',' << r.fp_residual << ',' << r.data_fidelity << ',' << r.seconds
      << '\n';
  }
}

} // namespace pnp
