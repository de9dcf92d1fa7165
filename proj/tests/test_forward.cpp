#include "oracles.hpp"
#include "pnpmrf/forward.hpp"
#include "pnpmrf/sampling.hpp"

#include <catch_amalgamated.hpp>

using namespace pnp;

namespace {

double real_inner(Eigen::MatrixXcd const &a, Eigen::MatrixXcd const &b) { return (a.conjugate().cwiseProduct(b)).sum().real(); }

double adjoint_mismatch(ForwardOperator const &op, std::uint64_t seed)
{
  auto const x = oracle::random_tsmi(op.grid().width, op.grid().height, op.channels(), seed);
  KSpaceData y{op.mask(), oracle::random_samples(op.mask().samples_per_frame, op.frames(), seed + 1)};
  double const lhs = real_inner(op.apply(x).values, y.values);
  double const rhs = x.values.cwiseProduct(op.adjoint(y).values).sum();
  return std::abs(lhs - rhs) / (x.norm() * y.norm());
}

} // namespace

TEST_CASE("forward operator matches the literal per-frame DFT", "[forward]")
{
  Grid const g{8, 6};
  Index const T = 5, t = 3;
  auto const B = oracle::random_basis(T, t, 2);
  for (auto const &mask : {spiral_mask(g, T, 13), epi_mask(g, T, 19), full_mask(g, T)}) {
    INFO(mask.pattern);
    ForwardOperator const op(mask, B);
    auto const x = oracle::random_tsmi(8, 6, t, 5);
    auto const y = op.apply(x);
    auto const ref = oracle::naive_apply(mask, B, x);
    CHECK((y.values - ref).cwiseAbs().maxCoeff() < 1e-12 * ref.cwiseAbs().maxCoeff() * 10);
  }
}

TEST_CASE("zero maps to zero", "[forward]")
{
  Grid const g{8, 8};
  ForwardOperator const op(spiral_mask(g, 4, 10), oracle::random_basis(4, 2, 1));
  CHECK(op.apply(Tsmi(8, 8, 2)).values.isZero(0));
  KSpaceData y{op.mask(), Eigen::MatrixXcd::Zero(10, 4)};
  CHECK(op.adjoint(y).values.isZero(0));
}

TEST_CASE("single frame full sampling is a unitary FFT", "[forward]")
{
  Grid const g{12, 10};
  ForwardOperator const op(full_mask(g, 1), Eigen::MatrixXd::Identity(1, 1));
  auto const x = oracle::random_tsmi(12, 10, 1, 9);
  auto const y = op.apply(x);
  CHECK(std::abs(y.norm() - x.norm()) < 1e-12 * x.norm());
  // DC coefficient is the scaled sum
  CHECK(std::abs(y.values(std::size_t(5 * 12 + 6), 0) - x.values.sum() / std::sqrt(120.0)) < 1e-12);
}

TEST_CASE("linearity", "[forward]")
{
  Grid const g{16, 16};
  ForwardOperator const op(spiral_mask(g, 6, 30), oracle::random_basis(6, 3, 4));
  auto const x1 = oracle::random_tsmi(16, 16, 3, 1), x2 = oracle::random_tsmi(16, 16, 3, 2);
  Tsmi combo = x1;
  combo.values = 2.5 * x1.values - 0.75 * x2.values;
  Eigen::MatrixXcd const lhs = op.apply(combo).values;
  Eigen::MatrixXcd const rhs = 2.5 * op.apply(x1).values - 0.75 * op.apply(x2).values;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12 * rhs.cwiseAbs().maxCoeff());
}

TEST_CASE("adjoint dot-product test", "[forward]")
{
  std::uint64_t seed = 100;
  for (Grid g : {Grid{16, 16}, Grid{32, 32}, Grid{15, 9}}) {
    for (Index t : {1, 3, 10}) {
      Index const T = std::max<Index>(t, 12);
      auto const B = oracle::random_basis(T, t, seed++);
      for (auto const &mask : {spiral_mask(g, T, g.size() / 5), epi_mask(g, T, g.width + 3), full_mask(g, T)}) {
        INFO(mask.pattern << " " << g.width << "x" << g.height << " t=" << t);
        CHECK(adjoint_mismatch(ForwardOperator(mask, B), seed++) < 1e-10);
      }
    }
  }
}

TEST_CASE("normal operator equals adjoint of apply", "[forward]")
{
  Grid const g{16, 12};
  for (auto const &mask : {spiral_mask(g, 9, 40), epi_mask(g, 9, 40)}) {
    ForwardOperator const op(mask, oracle::random_basis(9, 4, 3));
    auto const x = oracle::random_tsmi(16, 12, 4, 8);
    auto const a = op.normal(x);
    auto const b = op.adjoint(op.apply(x));
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-12 * b.values.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("full sampling with an orthonormal basis is an isometry", "[forward]")
{
  Grid const g{10, 10};
  ForwardOperator const op(full_mask(g, 7), oracle::random_basis(7, 3, 6));
  auto const x = oracle::random_tsmi(10, 10, 3, 1);
  CHECK((op.adjoint(op.apply(x)).values - x.values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("shape mismatches are rejected", "[forward]")
{
  Grid const g{8, 8};
  CHECK_THROWS_AS(ForwardOperator(spiral_mask(g, 4, 10), oracle::random_basis(5, 2, 1)), ShapeError);
  Eigen::MatrixXd skew = oracle::random_basis(4, 2, 1);
  skew(0, 0) += 0.1;
  CHECK_THROWS_AS(ForwardOperator(spiral_mask(g, 4, 10), skew), DomainError);
  ForwardOperator const op(spiral_mask(g, 4, 10), oracle::random_basis(4, 2, 1));
  CHECK_THROWS_AS(op.apply(Tsmi(8, 8, 3)), ShapeError);
  CHECK_THROWS_AS(op.apply(Tsmi(8, 4, 2)), ShapeError);
  KSpaceData other{epi_mask(g, 4, 10), Eigen::MatrixXcd::Zero(10, 4)};
  CHECK_THROWS_AS(op.adjoint(other), ShapeError);
}

TEST_CASE("CG agrees with a dense direct solve", "[forward][cg]")
{
  Grid const g{16, 16};
  Index const T = 8, t = 3;
  std::uint64_t seed = 40;
  for (auto const &mask : {spiral_mask(g, T, 40), epi_mask(g, T, 40)}) {
    ForwardOperator const op(mask, oracle::random_basis(T, t, seed++));
    auto const M = oracle::materialize(op, 16, 16, t);
    KSpaceData const y{mask, oracle::random_samples(40, T, seed++)};
    auto const z = oracle::random_tsmi(16, 16, t, seed++);
    for (double gamma : {0.005, 0.05, 0.5}) {
      INFO(mask.pattern << " gamma=" << gamma);
      auto const ref = oracle::dense_prox(M, y.values, oracle::flatten(z), gamma);
      auto const cg = data_consistency(op, y, z, gamma, 1e-10, 500);
      CHECK(cg.report.converged);
      CHECK((oracle::flatten(cg.x) - ref).norm() / ref.norm() < 1e-6);
    }
  }
}

TEST_CASE("CG residual decreases monotonically", "[forward][cg]")
{
  Grid const g{32, 32};
  std::uint64_t seed = 7;
  for (auto const &mask : {spiral_mask(g, 20, 60), epi_mask(g, 20, 60)}) {
    ForwardOperator const op(mask, oracle::random_basis(20, 5, seed++));
    KSpaceData const y{mask, oracle::random_samples(60, 20, seed++)};
    auto const z = oracle::random_tsmi(32, 32, 5, seed++);
    for (double gamma : {0.005, 0.05, 0.5}) {
      auto const cg = data_consistency(op, y, z, gamma, 1e-12, 200);
      auto const &r = cg.report.residuals;
      REQUIRE(r.size() >= 2);
      for (std::size_t i = 1; i < r.size(); i++) {
        INFO(mask.pattern << " gamma=" << gamma << " iteration " << i);
        CHECK(r[i] <= r[i - 1]);
      }
    }
  }
}

TEST_CASE("CG limits and reports", "[forward][cg]")
{
  Grid const g{16, 16};
  auto const mask = spiral_mask(g, 8, 50);
  ForwardOperator const op(mask, oracle::random_basis(8, 3, 1));
  auto const z = oracle::random_tsmi(16, 16, 3, 2);

  // strong proximity term pins the solution to z
  auto const yz = op.apply(z);
  auto const prox = data_consistency(op, yz, z, 1e6);
  CHECK((prox.x.values - z.values).norm() / z.norm() < 1e-5);

  auto const capped = data_consistency(op, KSpaceData{mask, oracle::random_samples(50, 8, 3)}, z, 0.05, 1e-14, 2);
  CHECK_FALSE(capped.report.converged);
  CHECK(capped.report.iterations == 2);
  CHECK(capped.report.residuals.size() == 3);
  CHECK(capped.report.relative_residual == capped.report.residuals.back());

  CHECK_THROWS_AS(data_consistency(op, yz, z, -1.0), DomainError);
}

TEST_CASE("full sampling with gamma zero recovers the image", "[forward][cg]")
{
  Grid const g{16, 16};
  ForwardOperator const op(full_mask(g, 6), oracle::random_basis(6, 3, 5));
  auto const truth = oracle::random_tsmi(16, 16, 3, 6);
  auto const y = op.apply(truth);
  auto const cg = data_consistency(op, y, Tsmi(16, 16, 3), 0.0);
  CHECK(cg.report.converged);
  CHECK((cg.x.values - truth.values).norm() / truth.norm() < 1e-4);
}
