#include "pnpmrf/forward.hpp"
#include "pnpmrf/dictionary.hpp"
#include "pnpmrf/sampling.hpp"

#include <cmath>

namespace pnp {

ForwardOperator::ForwardOperator(SamplingMask mask, Eigen::MatrixXd basis)
  : mask_(std::move(mask))
  , basis_(std::move(basis))
{
  if (basis_.rows() != mask_.frames) {
    throw ShapeError("basis temporal length " + std::to_string(basis_.rows()) + " != mask frames " +
                     std::to_string(mask_.frames));
  }
  check_orthonormal(basis_, 1e-8);
  auto const report = validate_mask(mask_);
  if (!report.ok()) { throw ShapeError("invalid sampling mask: " + report.violations.front()); }

  Grid const g = mask_.grid;
  fft_ = std::make_shared<Fft2 const>(g);
  sample_index_.reserve(mask_.coords.size());
  for (auto k : mask_.coords) { sample_index_.push_back(fft_index(k, g)); }

  Index const t = channels();
  std::vector<Index> slot(std::size_t(g.size()), -1);
  for (Index k = 0; k < mask_.frames; k++) {
    Eigen::VectorXd const b = basis_.row(k).transpose();
    Eigen::MatrixXd const outer = b * b.transpose();
    for (Index j = 0; j < mask_.samples_per_frame; j++) {
      Index const p = sample_index_[std::size_t(k * mask_.samples_per_frame + j)];
      auto &s = slot[std::size_t(p)];
      if (s < 0) {
        s = Index(gram_.size());
        gram_location_.push_back(p);
        gram_.push_back(Eigen::MatrixXd::Zero(t, t));
      }
      gram_[std::size_t(s)] += outer;
    }
  }
}

void ForwardOperator::check(Tsmi const &x) const
{
  if (x.width != grid().width || x.height != grid().height || x.channels != channels()) {
    throw ShapeError("TSMI shape (" + std::to_string(x.width) + "x" + std::to_string(x.height) + "x" +
                     std::to_string(x.channels) + ") does not match the operator");
  }
}

std::vector<Cx> ForwardOperator::channel_spectra(Tsmi const &x) const
{
  Index const n = grid().size();
  std::vector<Cx> spectra(std::size_t(n * channels()));
  for (Index c = 0; c < channels(); c++) {
    Cx *s = spectra.data() + c * n;
    for (Index p = 0; p < n; p++) { s[p] = x.values(p, c); }
    fft_->forward(s);
  }
  return spectra;
}

Tsmi ForwardOperator::channel_images(std::vector<Cx> &spectra) const
{
  Index const n = grid().size();
  Tsmi x(grid().width, grid().height, channels());
  for (Index c = 0; c < channels(); c++) {
    Cx *s = spectra.data() + c * n;
    fft_->inverse(s);
    for (Index p = 0; p < n; p++) { x.values(p, c) = s[p].real(); }
  }
  return x;
}

KSpaceData ForwardOperator::apply(Tsmi const &x) const
{
  check(x);
  auto const spectra = channel_spectra(x);
  Index const n = grid().size(), m = mask_.samples_per_frame, t = channels();
  KSpaceData y{mask_, Eigen::MatrixXcd::Zero(m, frames())};
  for (Index k = 0; k < frames(); k++) {
    for (Index j = 0; j < m; j++) {
      Index const p = sample_index_[std::size_t(k * m + j)];
      Cx acc = 0;
      for (Index c = 0; c < t; c++) { acc += basis_(k, c) * spectra[std::size_t(c * n + p)]; }
      y.values(j, k) = acc;
    }
  }
  return y;
}

Tsmi ForwardOperator::adjoint(KSpaceData const &y) const
{
  if (y.frames() != frames() || y.samples() != mask_.samples_per_frame || !(y.mask.coords == mask_.coords)) {
    throw ShapeError("k-space data was not acquired with this operator's mask");
  }
  Index const n = grid().size(), m = mask_.samples_per_frame, t = channels();
  std::vector<Cx> spectra(std::size_t(n * t), Cx(0));
  for (Index k = 0; k < frames(); k++) {
    for (Index j = 0; j < m; j++) {
      Index const p = sample_index_[std::size_t(k * m + j)];
      Cx const v = y.values(j, k);
      for (Index c = 0; c < t; c++) { spectra[std::size_t(c * n + p)] += basis_(k, c) * v; }
    }
  }
  return channel_images(spectra);
}

Tsmi ForwardOperator::normal(Tsmi const &x) const
{
  check(x);
  Index const n = grid().size(), t = channels();
  auto spectra = channel_spectra(x);
  std::vector<Cx> out(spectra.size(), Cx(0));
  Eigen::VectorXcd v(t);
  for (std::size_t i = 0; i < gram_location_.size(); i++) {
    Index const p = gram_location_[i];
    for (Index c = 0; c < t; c++) { v(c) = spectra[std::size_t(c * n + p)]; }
    Eigen::VectorXcd const g = gram_[i] * v;
    for (Index c = 0; c < t; c++) { out[std::size_t(c * n + p)] = g(c); }
  }
  return channel_images(out);
}

namespace {

double dot(Tsmi const &a, Tsmi const &b) { return a.values.cwiseProduct(b.values).sum(); }

} // namespace

CgResult data_consistency(ForwardOperator const &op, KSpaceData const &y, Tsmi const &z, double gamma, double tol,
                          Index max_iter)
{
  return data_consistency_aty(op, op.adjoint(y), z, gamma, tol, max_iter);
}

CgResult data_consistency_aty(ForwardOperator const &op, Tsmi const &aty, Tsmi const &z, double gamma, double tol,
                              Index max_iter)
{
  if (!(gamma >= 0) || !std::isfinite(gamma)) { throw DomainError("gamma must be finite and non-negative"); }
  if (!(tol > 0)) { throw DomainError("CG tolerance must be positive"); }
  if (max_iter < 0) { throw DomainError("CG iteration limit must be non-negative"); }
  if (!aty.same_shape(z)) { throw ShapeError("data-consistency operands disagree in shape"); }

  auto system = [&](Tsmi const &v) {
    Tsmi out = op.normal(v);
    out.values += gamma * v.values;
    return out;
  };

  Tsmi b = aty;
  b.values += gamma * z.values;
  double const bnorm = b.norm();
  CgResult res{z, {}};
  if (bnorm == 0) {
    res.x.values.setZero();
    res.report.converged = true;
    res.report.residuals = {0.0};
    return res;
  }

  // Conjugate residual iteration: the Krylov method of the CG family that
  // minimises ||r|| at every step, so the reported residual never increases.
  Tsmi r = b;
  r.values -= system(res.x).values;
  Tsmi ar = system(r);
  Tsmi p = r;
  Tsmi ap = ar;
  double rar = dot(r, ar);
  res.report.residuals.push_back(r.norm() / bnorm);
  res.report.relative_residual = res.report.residuals.back();
  res.report.converged = res.report.relative_residual <= tol;

  while (!res.report.converged && res.report.iterations < max_iter) {
    double const apap = dot(ap, ap);
    if (!(apap > 0) || !(rar > 0)) { break; } // singular direction (gamma = 0 and p in the null space)
    double const alpha = rar / apap;
    res.x.values += alpha * p.values;
    r.values -= alpha * ap.values;
    res.report.iterations++;
    res.report.relative_residual = r.norm() / bnorm;
    res.report.residuals.push_back(res.report.relative_residual);
    res.report.converged = res.report.relative_residual <= tol;
    if (res.report.converged) { break; }
    ar = system(r);
    double const rar_new = dot(r, ar);
    double const beta = rar_new / rar;
    p.values = r.values + beta * p.values;
    ap.values = ar.values + beta * ap.values;
    rar = rar_new;
  }
  return res;
}

} // namespace pnp
