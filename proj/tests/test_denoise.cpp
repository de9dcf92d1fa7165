#include "oracles.hpp"
#include "pnpmrf/denoise.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace pnp;

namespace {

// Two flat regions split by a vertical edge, one value per channel.
Tsmi two_regions(Index w, Index h, Index t)
{
  Tsmi x(w, h, t);
  for (Index y = 0; y < h; y++) {
    for (Index xx = 0; xx < w; xx++) {
      for (Index c = 0; c < t; c++) { x.values(y * w + xx, c) = xx < w / 2 ? 0.2 + 0.1 * double(c) : 0.8 - 0.1 * double(c); }
    }
  }
  return x;
}

Tsmi add_noise(Tsmi x, double sigma, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  for (Index i = 0; i < x.values.size(); i++) { x.values.data()[i] += g(rng); }
  return x;
}

double mse(Tsmi const &a, Tsmi const &b) { return (a.values - b.values).squaredNorm() / double(a.values.size()); }

// 1/2 ||u - f||^2 + lambda * sum_c TV(u_c), with TV from the literal forward-difference definition.
double rof_energy(Tsmi const &u, Tsmi const &f, double lambda)
{
  double tv = 0;
  for (Index c = 0; c < u.channels; c++) {
    for (Index y = 0; y < u.height; y++) {
      for (Index x = 0; x < u.width; x++) {
        double const v = u.values(y * u.width + x, c);
        double const dx = x + 1 < u.width ? u.values(y * u.width + x + 1, c) - v : 0.0;
        double const dy = y + 1 < u.height ? u.values((y + 1) * u.width + x, c) - v : 0.0;
        tv += std::hypot(dx, dy);
      }
    }
  }
  return 0.5 * (u.values - f.values).squaredNorm() + lambda * tv;
}

// Direct 2-D Gaussian sum at an interior pixel, weights normalized over the square support.
double blur_at(Tsmi const &x, Index c, Index px, Index py, double s)
{
  Index const r = Index(std::ceil(3 * s));
  double acc = 0, wsum = 0;
  for (Index dy = -r; dy <= r; dy++) {
    for (Index dx = -r; dx <= r; dx++) {
      double const wgt = std::exp(-double(dx * dx + dy * dy) / (2 * s * s));
      acc += wgt * x.values((py + dy) * x.width + px + dx, c);
      wsum += wgt;
    }
  }
  return acc / wsum;
}

} // namespace

TEST_CASE("identity denoiser returns its input exactly", "[denoise]")
{
  auto const x = oracle::random_tsmi(9, 7, 4, 1);
  DenoiserSpec spec;
  spec.kind = DenoiserKind::Identity;
  auto const y = denoise(spec, x);
  CHECK(y.same_shape(x));
  CHECK(y.values == x.values);
}

TEST_CASE("denoiser kinds parse and print", "[denoise]")
{
  for (auto k : {DenoiserKind::Identity, DenoiserKind::Gaussian, DenoiserKind::Tv, DenoiserKind::Cnn}) {
    CHECK(parse_denoiser_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_denoiser_kind("bm3d"), ConfigError);
}

TEST_CASE("gaussian blur keeps constants and matches the direct sum", "[denoise]")
{
  Tsmi flat(12, 10, 2);
  flat.values.col(0).setConstant(0.7);
  flat.values.col(1).setConstant(-3.0);
  auto const b = gaussian_blur(flat, 1.3);
  CHECK((b.values - flat.values).cwiseAbs().maxCoeff() < 1e-14);

  auto const x = oracle::random_tsmi(20, 20, 2, 4);
  auto const y = gaussian_blur(x, 1.0);
  for (auto [px, py] : {std::pair<Index, Index>{10, 10}, {5, 7}, {14, 12}}) {
    for (Index c = 0; c < 2; c++) { CHECK(std::abs(y.values(py * 20 + px, c) - blur_at(x, c, px, py, 1.0)) < 1e-12); }
  }
  CHECK(gaussian_blur(x, 0.0).values == x.values);
  CHECK(y.norm() < x.norm());
}

TEST_CASE("TV denoising reduces error on a noisy piecewise-constant image", "[denoise]")
{
  auto const clean = two_regions(32, 32, 3);
  auto const noisy = add_noise(clean, 1e-2, 5);
  DenoiserSpec spec;
  spec.kind = DenoiserKind::Tv;
  spec.sigma = 1e-2;
  spec.tv_weight = 1.0;
  auto const out = denoise(spec, noisy);
  INFO("noisy mse " << mse(noisy, clean) << " denoised mse " << mse(out, clean));
  CHECK(mse(out, clean) < 0.5 * mse(noisy, clean));
  for (Index c = 0; c < 3; c++) { CHECK(total_variation(out, c) < total_variation(noisy, c)); }
}

TEST_CASE("TV output lowers the ROF energy and is locally optimal", "[denoise]")
{
  auto const f = add_noise(two_regions(16, 16, 1), 0.05, 9);
  double const lambda = 0.05;
  auto const u = tv_denoise(f, lambda, 300);
  double const eu = rof_energy(u, f, lambda);
  CHECK(eu < rof_energy(f, f, lambda));
  CHECK(eu < rof_energy(gaussian_blur(f, 1.0), f, lambda));
  // random small perturbations must not lower the energy noticeably
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1e-3);
  for (int trial = 0; trial < 20; trial++) {
    Tsmi p = u;
    for (Index i = 0; i < p.values.size(); i++) { p.values.data()[i] += g(rng); }
    CHECK(rof_energy(p, f, lambda) > eu - 1e-4 * eu);
  }
  CHECK(tv_denoise(f, 0.0, 50).values == f.values);
}

TEST_CASE("stronger TV weight gives a flatter result", "[denoise]")
{
  auto const f = add_noise(two_regions(24, 24, 1), 0.05, 2);
  double const weak = total_variation(tv_denoise(f, 0.01, 100), 0);
  double const strong = total_variation(tv_denoise(f, 0.2, 100), 0);
  CHECK(strong < weak);
  CHECK(weak < total_variation(f, 0));
}

TEST_CASE("total variation of simple images", "[denoise]")
{
  auto const x = two_regions(8, 4, 1);
  // one vertical edge of height 4 with jump 0.6
  CHECK(total_variation(x, 0) == Catch::Approx(4 * 0.6).epsilon(1e-12));
  CHECK(total_variation(Tsmi(5, 5, 1), 0) == 0.0);
}

TEST_CASE("normalization round-trips and handles degenerate volumes", "[denoise]")
{
  auto x = oracle::random_tsmi(10, 8, 3, 7);
  x.values = 4.0 * x.values.array() + 2.5;
  auto const [n, rec] = normalize_wrap(x);
  CHECK(n.values.minCoeff() == Catch::Approx(0.0).margin(1e-15));
  CHECK(n.values.maxCoeff() == Catch::Approx(1.0).epsilon(1e-15));
  CHECK_FALSE(rec.degenerate);
  CHECK((denormalize(n, rec).values - x.values).cwiseAbs().maxCoeff() < 1e-12);

  Tsmi flat(4, 4, 2);
  flat.values.setConstant(0.3);
  auto const [nf, rf] = normalize_wrap(flat);
  CHECK(rf.degenerate);
  CHECK(nf.values == flat.values);
  CHECK(denormalize(nf, rf).values == flat.values);

  Tsmi unit(3, 3, 1);
  unit.values.col(0).setLinSpaced(0.0, 1.0);
  auto const [nu, ru] = normalize_wrap(unit);
  CHECK(nu.values == unit.values);
}

TEST_CASE("every denoiser preserves the TSMI shape", "[denoise]")
{
  auto const x = oracle::random_tsmi(13, 11, 5, 3);
  for (auto k : {DenoiserKind::Identity, DenoiserKind::Gaussian, DenoiserKind::Tv}) {
    DenoiserSpec spec;
    spec.kind = k;
    CHECK(denoise(spec, x).same_shape(x));
  }
  oracle::TempDir dir("den");
  save_archive(make_archive({4, 8}, 1, 5), dir / "net");
  DenoiserSpec spec;
  spec.kind = DenoiserKind::Cnn;
  spec.weights = dir / "net";
  CHECK(denoise(spec, x).same_shape(x));
}

TEST_CASE("denoiser specs are validated before use", "[denoise]")
{
  DenoiserSpec spec;
  spec.kind = DenoiserKind::Cnn;
  CHECK_THROWS_AS(make_denoiser(spec), ConfigError);
  spec.weights = "/nonexistent/weights";
  CHECK_THROWS(make_denoiser(spec));
  spec = {};
  spec.sigma = -1.0;
  CHECK_THROWS_AS(make_denoiser(spec), DomainError);
  spec = {};
  auto bad = oracle::random_tsmi(4, 4, 2, 1);
  bad.values(3, 1) = std::nan("");
  CHECK_THROWS_AS(denoise(spec, bad), DomainError);
}
