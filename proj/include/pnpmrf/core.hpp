#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pnp {

using Index = Eigen::Index;
using Cx = std::complex<double>;

struct Error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

// Malformed file contents (bad magic, truncated payload, unknown dtype, ...)
struct FormatError : Error
{
  using Error::Error;
};

// Physically or mathematically invalid arguments
struct DomainError : Error
{
  using Error::Error;
};

struct ShapeError : Error
{
  using Error::Error;
};

struct ConfigError : Error
{
  using Error::Error;
};

enum class DType : std::uint8_t
{
  Real64 = 0,
  Complex128 = 1,
  Real32 = 2
};

std::string to_string(DType d);

/*
 * Dense row-major tensor with one of three element types. Immutable after
 * construction; the constructors check the shape/size agreement and (unless the
 * tensor is flagged as a 0/1 mask) that every value is finite.
 */
class Tensor
{
public:
  using Shape = std::vector<std::uint64_t>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool is_mask = false);
  Tensor(Shape shape, std::vector<Cx> data);
  Tensor(Shape shape, std::vector<float> data);

  DType dtype() const;
  Shape const &shape() const { return shape_; }
  std::uint64_t size() const;
  std::size_t ndim() const { return shape_.size(); }

  // Throw ShapeError if the dtype does not match.
  std::span<double const> real64() const;
  std::span<Cx const> complex128() const;
  std::span<float const> real32() const;

  // Any real dtype widened to double.
  std::vector<double> as_real() const;

  // Bitwise equality of dtype, shape and payload.
  bool identical(Tensor const &other) const;

private:
  Shape shape_;
  std::variant<std::vector<double>, std::vector<Cx>, std::vector<float>> data_;
};

// QMRT container: "QMRT", u8 version (=1), u8 dtype, u8 ndim, ndim x u64 dims,
// raw payload. Everything little-endian, complex stored as interleaved re,im.
void write_tensor(Tensor const &t, std::filesystem::path const &path);
Tensor read_tensor(std::filesystem::path const &path);

struct Grid
{
  Index width = 0;
  Index height = 0;

  Index size() const { return width * height; }
  bool operator==(Grid const &) const = default;
};

/*
 * Time-series of magnetisation images compressed to `channels` subspace
 * channels. Stored as an (width*height) x channels column-major matrix so each
 * channel image is contiguous; pixel p = row * width + col.
 */
struct Tsmi
{
  Index width = 0;
  Index height = 0;
  Index channels = 0;
  Eigen::MatrixXd values;

  Tsmi() = default;
  Tsmi(Index w, Index h, Index t);
  Tsmi(Index w, Index h, Eigen::MatrixXd v);

  Grid grid() const { return {width, height}; }
  Index pixels() const { return width * height; }
  bool same_shape(Tsmi const &other) const;
  double norm() const { return values.norm(); }
};

// Tensor of shape [channels, height, width]
Tensor to_tensor(Tsmi const &x);
Tsmi tsmi_from_tensor(Tensor const &t);

// Centered Cartesian k-space coordinate, kx in [-W/2, W-1-W/2]
struct KCoord
{
  int kx = 0;
  int ky = 0;
  bool operator==(KCoord const &) const = default;
};

bool on_grid(KCoord k, Grid g);
// Index into an unshifted (FFT-ordered) row-major k-space array.
Index fft_index(KCoord k, Grid g);

struct SamplingMask
{
  std::string pattern;
  Grid grid;
  Index frames = 0;
  Index samples_per_frame = 0;
  std::vector<KCoord> coords; // frame-major, frames * samples_per_frame

  std::span<KCoord const> frame(Index k) const;
};

// T x m x 2 tensor of (kx, ky) stored as real64 integers
Tensor to_tensor(SamplingMask const &m);
SamplingMask mask_from_tensor(Tensor const &t, Grid g, std::string pattern);

struct KSpaceData
{
  SamplingMask mask;
  Eigen::MatrixXcd values; // samples_per_frame x frames

  Index frames() const { return values.cols(); }
  Index samples() const { return values.rows(); }
  double norm() const { return values.norm(); }
};

// Tensor of shape [frames, samples]
Tensor to_tensor(KSpaceData const &y);
KSpaceData kspace_from_tensor(Tensor const &t, SamplingMask mask);

struct TissueMaps
{
  Index width = 0;
  Index height = 0;
  Eigen::ArrayXd t1;
  Eigen::ArrayXd t2;
  Eigen::ArrayXd pd;
  Eigen::Array<bool, Eigen::Dynamic, 1> mask; // true = foreground

  TissueMaps() = default;
  TissueMaps(Index w, Index h);

  Index pixels() const { return width * height; }
  Index foreground() const { return mask.count(); }
  // Throws DomainError describing the first violated invariant.
  void validate() const;
};

void write_maps(TissueMaps const &m, std::filesystem::path const &dir, std::string const &prefix);
TissueMaps read_maps(std::filesystem::path const &dir, std::string const &prefix);

} // namespace pnp
