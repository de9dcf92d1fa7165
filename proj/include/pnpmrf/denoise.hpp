#pragma once

#include "core.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace pnp {

enum class DenoiserKind
{
  Identity,
  Gaussian,
  Tv,
  Cnn
};

std::string to_string(DenoiserKind k);
DenoiserKind parse_denoiser_kind(std::string const &s);

struct DenoiserSpec
{
  DenoiserKind kind = DenoiserKind::Tv;
  double sigma = 1e-2;     // noise level, [0,1]-normalized units for the CNN
  double blur_sigma = 1.0; // gaussian: kernel std in pixels
  double tv_weight = 1.0;  // tv: lambda_tv = tv_weight * sigma on the [0, 1]-normalized volume
  Index tv_iters = 50;
  std::filesystem::path weights; // cnn: archive directory

  void validate() const;
};

// Per-channel separable Gaussian blur with symmetric boundary extension.
Tsmi gaussian_blur(Tsmi const &x, double blur_sigma);

/*
 * Per-channel ROF denoising, argmin_u 1/2 ||u - x||^2 + lambda TV(u), by
 * Chambolle's dual projection with a fixed number of iterations.
 */
Tsmi tv_denoise(Tsmi const &x, double lambda, Index iterations);
// Isotropic total variation of one channel (forward differences).
double total_variation(Tsmi const &x, Index channel);

struct NormalizeRecord
{
  double offset = 0; // volume minimum
  double scale = 1;  // volume range
  bool degenerate = false;
};

// Affine map of the whole volume onto [0, 1]; constant volumes pass through unchanged.
std::pair<Tsmi, NormalizeRecord> normalize_wrap(Tsmi const &x);
Tsmi denormalize(Tsmi const &x, NormalizeRecord const &rec);

/*
 * Residual U-Net: head conv, per scale `blocks` residual blocks (conv-relu-conv
 * plus identity) followed by a 2x2 stride-2 conv, residual blocks at the
 * coarsest scale, then transposed-conv upsampling with additive skips and a
 * tail conv. All convolutions are bias-free. Weight layouts follow the usual
 * [out, in, kh, kw] convention ([in, out, kh, kw] for transposed convs).
 */
struct WeightArchive
{
  struct Layer
  {
    std::string name;
    std::vector<std::uint64_t> shape;
    std::vector<float> weights;
  };

  std::string architecture = "unet-res";
  std::vector<Index> channels; // per scale
  Index blocks = 2;
  Index in_channels = 0;  // t + 1 (TSMI channels plus noise map)
  Index out_channels = 0; // t
  std::string activation = "relu";
  Index head_kernel = 3;
  Index body_kernel = 3;
  Index tail_kernel = 3;
  Index sample_kernel = 2;
  std::vector<Layer> layers; // execution order

  Index scales() const { return Index(channels.size()); }
  Layer const &layer(std::string const &name) const;
  // Expected (name, shape) list in execution order for the declared architecture.
  std::vector<std::pair<std::string, std::vector<std::uint64_t>>> expected_layers() const;
  // Throws FormatError naming the first inconsistent layer.
  void validate() const;
  std::uint64_t hash() const;
};

WeightArchive load_archive(std::filesystem::path const &dir);
void save_archive(WeightArchive const &a, std::filesystem::path const &dir);
// Archive with the expected layer list filled with the given per-layer initializer.
WeightArchive make_archive(std::vector<Index> channels, Index blocks, Index t, Index head_kernel = 3,
                           Index body_kernel = 3, Index tail_kernel = 3);

/*
 * Runs the network on [t channels of x_norm, one channel filled with sigma].
 * Spatial sizes not divisible by 2^(scales-1) are reflect-padded and cropped.
 */
Tsmi cnn_infer(WeightArchive const &archive, Tsmi const &x_norm, double sigma);

class Denoiser
{
public:
  virtual ~Denoiser() = default;
  virtual Tsmi operator()(Tsmi const &x) const = 0;
};

// Loads and validates the CNN archive up front for kind == Cnn.
std::unique_ptr<Denoiser> make_denoiser(DenoiserSpec const &spec);
Tsmi denoise(DenoiserSpec const &spec, Tsmi const &x);

} // namespace pnp
