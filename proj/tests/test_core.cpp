#include "oracles.hpp"
#include "pnpmrf/core.hpp"

#include <catch_amalgamated.hpp>

#include <cstring>
#include <fstream>
#include <random>

using namespace pnp;
using Catch::Matchers::ContainsSubstring;

namespace {

std::vector<unsigned char> file_bytes(std::filesystem::path const &p)
{
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void write_bytes(std::filesystem::path const &p, std::vector<unsigned char> const &b)
{
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<char const *>(b.data()), std::streamsize(b.size()));
}

} // namespace

TEST_CASE("QMRT identity matrix layout", "[core][qmrt]")
{
  oracle::TempDir dir("core");
  Tensor const eye({2, 2}, std::vector<double>{1.0, 0.0, 0.0, 1.0});
  write_tensor(eye, dir / "eye.qmrt");
  auto const b = file_bytes(dir / "eye.qmrt");
  // 4 magic + 3 header bytes + 2 x 8 dims + 4 x 8 payload
  REQUIRE(b.size() == 55);
  CHECK(std::memcmp(b.data(), "QMRT", 4) == 0);
  CHECK(b[4] == 1);
  CHECK(b[5] == 0);
  CHECK(b[6] == 2);
  CHECK(b[7] == 2);
  for (int i = 8; i < 15; i++) { CHECK(b[std::size_t(i)] == 0); }
  double one;
  std::memcpy(&one, b.data() + 23, 8);
  CHECK(one == 1.0);
  auto const back = read_tensor(dir / "eye.qmrt");
  CHECK(back.identical(eye));
}

TEST_CASE("QMRT scalar and dtypes round-trip bit-exactly", "[core][qmrt]")
{
  oracle::TempDir dir("core");
  Tensor const scalar({}, std::vector<double>{3.5});
  write_tensor(scalar, dir / "s.qmrt");
  auto const s = read_tensor(dir / "s.qmrt");
  REQUIRE(s.ndim() == 0);
  CHECK(s.real64()[0] == 3.5);

  std::mt19937_64 rng(7);
  std::normal_distribution<float> g;
  std::vector<float> big(224 * 224 * 10);
  for (auto &v : big) { v = g(rng); }
  Tensor const r32({224, 224, 10}, big);
  write_tensor(r32, dir / "r32.qmrt");
  auto const back = read_tensor(dir / "r32.qmrt");
  CHECK(back.dtype() == DType::Real32);
  CHECK(back.identical(r32));

  std::vector<Cx> cx{{1.0, -2.0}, {0.25, 1e-300}, {-0.0, 3.0}};
  Tensor const c({3}, cx);
  write_tensor(c, dir / "c.qmrt");
  auto const cb = read_tensor(dir / "c.qmrt");
  CHECK(cb.identical(c));
  auto const raw = file_bytes(dir / "c.qmrt");
  double im;
  std::memcpy(&im, raw.data() + 15 + 8, 8);
  CHECK(im == -2.0); // interleaved re, im
}

TEST_CASE("QMRT rejects malformed files", "[core][qmrt]")
{
  oracle::TempDir dir("core");
  Tensor const t({4}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  write_tensor(t, dir / "t.qmrt");
  auto const good = file_bytes(dir / "t.qmrt");

  auto bad = good;
  std::memcpy(bad.data(), "XXXX", 4);
  write_bytes(dir / "magic.qmrt", bad);
  CHECK_THROWS_WITH(read_tensor(dir / "magic.qmrt"), ContainsSubstring("magic"));

  bad = good;
  bad.resize(good.size() - 16);
  write_bytes(dir / "trunc.qmrt", bad);
  CHECK_THROWS_AS(read_tensor(dir / "trunc.qmrt"), FormatError);
  CHECK_THROWS_WITH(read_tensor(dir / "trunc.qmrt"), ContainsSubstring("truncated payload"));

  bad = good;
  bad[5] = 9;
  write_bytes(dir / "dtype.qmrt", bad);
  CHECK_THROWS_WITH(read_tensor(dir / "dtype.qmrt"), ContainsSubstring("dtype"));

  bad = good;
  bad.push_back(0);
  write_bytes(dir / "trail.qmrt", bad);
  CHECK_THROWS_AS(read_tensor(dir / "trail.qmrt"), FormatError);

  CHECK_THROWS_WITH(read_tensor(dir / "missing.qmrt"), ContainsSubstring("missing.qmrt"));
}

TEST_CASE("Tensor invariants", "[core]")
{
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 0}, std::vector<double>{}), ShapeError);
  CHECK_THROWS_AS(Tensor({1}, std::vector<double>{NAN}), DomainError);
  CHECK_NOTHROW(Tensor({2}, std::vector<double>{0, 1}, true));
  CHECK_THROWS_AS(Tensor({2}, std::vector<double>{0, 0.5}, true), DomainError);
  Tensor const c({1}, std::vector<Cx>{{1, 1}});
  CHECK_THROWS_AS(c.real64(), ShapeError);
  CHECK_THROWS_AS(c.as_real(), ShapeError);
}

TEST_CASE("TSMI, mask and k-space tensors round-trip", "[core]")
{
  auto const x = oracle::random_tsmi(5, 3, 2, 1);
  auto const tx = to_tensor(x);
  CHECK(tx.shape() == Tensor::Shape{2, 3, 5});
  // channel 1, row 2, col 4
  CHECK(tx.real64()[std::size_t(1 * 15 + 2 * 5 + 4)] == x.values(2 * 5 + 4, 1));
  auto const xb = tsmi_from_tensor(tx);
  CHECK(xb.values == x.values);

  Grid const g{4, 4};
  SamplingMask m{"custom", g, 2, 2, {{0, 0}, {1, -2}, {-2, 1}, {1, 1}}};
  auto const mb = mask_from_tensor(to_tensor(m), g, "custom");
  CHECK(mb.coords == m.coords);
  CHECK_THROWS_AS(mask_from_tensor(to_tensor(m), Grid{2, 2}, "custom"), ShapeError);

  KSpaceData y{m, oracle::random_samples(2, 2, 3)};
  auto const yb = kspace_from_tensor(to_tensor(y), m);
  CHECK(yb.values == y.values);
}

TEST_CASE("k-space coordinates", "[core]")
{
  Grid const g{4, 5};
  CHECK(on_grid({-2, -2}, g));
  CHECK(on_grid({1, 2}, g));
  CHECK_FALSE(on_grid({2, 0}, g));
  CHECK_FALSE(on_grid({0, -3}, g));
  CHECK(fft_index({0, 0}, g) == 0);
  CHECK(fft_index({-1, 0}, g) == 3);
  CHECK(fft_index({1, -1}, g) == 4 * 4 + 1);
}

TEST_CASE("Tissue map invariants and persistence", "[core]")
{
  TissueMaps m(2, 1);
  m.mask << true, false;
  m.t1 << 1.0, 0.0;
  m.t2 << 0.1, 0.0;
  m.pd << 0.8, 0.0;
  CHECK_NOTHROW(m.validate());
  oracle::TempDir dir("maps");
  write_maps(m, dir.path(), "gt_");
  auto const b = read_maps(dir.path(), "gt_");
  CHECK((b.t1 == m.t1).all());
  CHECK((b.mask == m.mask).all());

  m.t2[0] = 2.0;
  CHECK_THROWS_WITH(m.validate(), ContainsSubstring("t2 exceeds t1"));
  m.t2[0] = 0.1;
  m.pd[1] = 0.5;
  CHECK_THROWS_WITH(m.validate(), ContainsSubstring("background"));
}
