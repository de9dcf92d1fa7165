#include "pnpmrf/denoise.hpp"

#include <cmath>

namespace pnp {

std::string to_string(DenoiserKind k)
{
  switch (k) {
  case DenoiserKind::Identity: return "identity";
  case DenoiserKind::Gaussian: return "gaussian";
  case DenoiserKind::Tv: return "tv";
  case DenoiserKind::Cnn: return "cnn";
  }
  return "unknown";
}

DenoiserKind parse_denoiser_kind(std::string const &s)
{
  if (s == "identity") { return DenoiserKind::Identity; }
  if (s == "gaussian") { return DenoiserKind::Gaussian; }
  if (s == "tv") { return DenoiserKind::Tv; }
  if (s == "cnn") { return DenoiserKind::Cnn; }
  throw ConfigError("unknown denoiser '" + s + "' (expected identity, gaussian, tv or cnn)");
}

void DenoiserSpec::validate() const
{
  if (!(sigma >= 0) || !std::isfinite(sigma)) { throw DomainError("denoiser sigma must be finite and >= 0"); }
  if (!(blur_sigma >= 0)) { throw DomainError("gaussian blur_sigma must be >= 0"); }
  if (!(tv_weight >= 0)) { throw DomainError("tv_weight must be >= 0"); }
  if (tv_iters < 1) { throw DomainError("tv_iters must be >= 1"); }
  if (kind == DenoiserKind::Cnn && weights.empty()) { throw ConfigError("cnn denoiser needs a weight archive"); }
}

namespace {

// Symmetric extension: -1 -> 0, -2 -> 1, n -> n-1
Index mirror(Index i, Index n)
{
  if (n == 1) { return 0; }
  Index const period = 2 * n;
  i %= period;
  if (i < 0) { i += period; }
  return i < n ? i : period - 1 - i;
}

} // namespace

Tsmi gaussian_blur(Tsmi const &x, double blur_sigma)
{
  if (!(blur_sigma >= 0)) { throw DomainError("blur_sigma must be >= 0"); }
  if (blur_sigma == 0) { return x; }
  Index const radius = std::max<Index>(1, Index(std::ceil(3.0 * blur_sigma)));
  Eigen::VectorXd kernel(2 * radius + 1);
  for (Index i = -radius; i <= radius; i++) {
    kernel(i + radius) = std::exp(-0.5 * double(i * i) / (blur_sigma * blur_sigma));
  }
  kernel /= kernel.sum();

  Index const w = x.width, h = x.height;
  Tsmi out(w, h, x.channels);
  Eigen::VectorXd tmp(w * h);
  for (Index c = 0; c < x.channels; c++) {
    auto const in = x.values.col(c);
    for (Index r = 0; r < h; r++) {
      for (Index col = 0; col < w; col++) {
        double acc = 0;
        for (Index i = -radius; i <= radius; i++) { acc += kernel(i + radius) * in(r * w + mirror(col + i, w)); }
        tmp(r * w + col) = acc;
      }
    }
    auto dst = out.values.col(c);
    for (Index r = 0; r < h; r++) {
      for (Index col = 0; col < w; col++) {
        double acc = 0;
        for (Index i = -radius; i <= radius; i++) { acc += kernel(i + radius) * tmp(mirror(r + i, h) * w + col); }
        dst(r * w + col) = acc;
      }
    }
  }
  return out;
}

namespace {

using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void gradient(Image const &u, Image &gx, Image &gy)
{
  Index const h = u.rows(), w = u.cols();
  gx.setZero(h, w);
  gy.setZero(h, w);
  if (w > 1) { gx.leftCols(w - 1) = u.rightCols(w - 1) - u.leftCols(w - 1); }
  if (h > 1) { gy.topRows(h - 1) = u.bottomRows(h - 1) - u.topRows(h - 1); }
}

// Negative adjoint of the forward-difference gradient.
void divergence(Image const &px, Image const &py, Image &d)
{
  Index const h = px.rows(), w = px.cols();
  d.setZero(h, w);
  if (w > 1) {
    d.col(0) += px.col(0);
    d.middleCols(1, w - 2) += px.middleCols(1, w - 2) - px.leftCols(w - 2);
    d.col(w - 1) -= px.col(w - 2);
  }
  if (h > 1) {
    d.row(0) += py.row(0);
    d.middleRows(1, h - 2) += py.middleRows(1, h - 2) - py.topRows(h - 2);
    d.row(h - 1) -= py.row(h - 2);
  }
}

} // namespace

Tsmi tv_denoise(Tsmi const &x, double lambda, Index iterations)
{
  if (!(lambda >= 0)) { throw DomainError("TV weight must be >= 0"); }
  if (iterations < 1) { throw DomainError("TV needs at least one iteration"); }
  if (lambda == 0) { return x; }
  double constexpr tau = 0.25;
  Index const w = x.width, h = x.height;
  Tsmi out(w, h, x.channels);
  Image px, py, d, gx, gy;
  for (Index c = 0; c < x.channels; c++) {
    Image const f = Eigen::Map<Image const>(x.values.col(c).data(), h, w);
    px.setZero(h, w);
    py.setZero(h, w);
    for (Index it = 0; it < iterations; it++) {
      divergence(px, py, d);
      gradient(d - f / lambda, gx, gy);
      Image const denom = 1.0 + tau * (gx.square() + gy.square()).sqrt();
      px = (px + tau * gx) / denom;
      py = (py + tau * gy) / denom;
    }
    divergence(px, py, d);
    Image const u = f - lambda * d;
    out.values.col(c) = Eigen::Map<Eigen::VectorXd const>(u.data(), w * h);
  }
  return out;
}

double total_variation(Tsmi const &x, Index channel)
{
  Image const u = Eigen::Map<Image const>(x.values.col(channel).data(), x.height, x.width);
  Image gx, gy;
  gradient(u, gx, gy);
  return (gx.square() + gy.square()).sqrt().sum();
}

std::pair<Tsmi, NormalizeRecord> normalize_wrap(Tsmi const &x)
{
  NormalizeRecord rec;
  double const lo = x.values.minCoeff();
  double const hi = x.values.maxCoeff();
  if (!(hi > lo)) {
    rec.degenerate = true;
    return {x, rec};
  }
  rec.offset = lo;
  rec.scale = hi - lo;
  Tsmi out = x;
  out.values = (x.values.array() - lo) / rec.scale;
  return {std::move(out), rec};
}

Tsmi denormalize(Tsmi const &x, NormalizeRecord const &rec)
{
  if (rec.degenerate) { return x; }
  Tsmi out = x;
  out.values = x.values.array() * rec.scale + rec.offset;
  return out;
}

namespace {

class IdentityDenoiser final : public Denoiser
{
public:
  Tsmi operator()(Tsmi const &x) const override { return x; }
};

class GaussianDenoiser final : public Denoiser
{
public:
  explicit GaussianDenoiser(double s)
    : sigma_(s)
  {
  }
  Tsmi operator()(Tsmi const &x) const override { return gaussian_blur(x, sigma_); }

private:
  double sigma_;
};

class TvDenoiser final : public Denoiser
{
public:
  TvDenoiser(double lambda, Index iters)
    : lambda_(lambda)
    , iters_(iters)
  {
  }
  // Runs in the same [0, 1]-normalized units as the CNN so sigma means the same for both.
  Tsmi operator()(Tsmi const &x) const override
  {
    auto [xn, rec] = normalize_wrap(x);
    return denormalize(tv_denoise(xn, lambda_, iters_), rec);
  }

private:
  double lambda_;
  Index iters_;
};

class CnnDenoiser final : public Denoiser
{
public:
  CnnDenoiser(WeightArchive a, double sigma)
    : archive_(std::move(a))
    , sigma_(sigma)
  {
  }
  Tsmi operator()(Tsmi const &x) const override
  {
    auto [xn, rec] = normalize_wrap(x);
    return denormalize(cnn_infer(archive_, xn, sigma_), rec);
  }

private:
  WeightArchive archive_;
  double sigma_;
};

} // namespace

std::unique_ptr<Denoiser> make_denoiser(DenoiserSpec const &spec)
{
  spec.validate();
  switch (spec.kind) {
  case DenoiserKind::Identity: return std::make_unique<IdentityDenoiser>();
  case DenoiserKind::Gaussian: return std::make_unique<GaussianDenoiser>(spec.blur_sigma);
  case DenoiserKind::Tv: return std::make_unique<TvDenoiser>(spec.tv_weight * spec.sigma, spec.tv_iters);
  case DenoiserKind::Cnn: return std::make_unique<CnnDenoiser>(load_archive(spec.weights), spec.sigma);
  }
  throw ConfigError("unknown denoiser kind");
}

Tsmi denoise(DenoiserSpec const &spec, Tsmi const &x)
{
  if (!x.values.allFinite()) { throw DomainError("denoiser input holds non-finite values"); }
  return (*make_denoiser(spec))(x);
}

} // namespace pnp
