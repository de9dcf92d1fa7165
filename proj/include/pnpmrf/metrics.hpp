#pragma once

#include "core.hpp"

#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace pnp {

using ImageRef = Eigen::Ref<Eigen::ArrayXd const>;
using MaskRef = Eigen::Ref<Eigen::Array<bool, Eigen::Dynamic, 1> const>;

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// Peak used when none is given: max |ref|.
double default_peak(ImageRef ref);

// 10 log10(peak^2 / MSE); +inf when the images are identical.
double psnr(ImageRef ref, ImageRef test, double peak);
double psnr(ImageRef ref, ImageRef test);

/*
 * Mean SSIM over all positions where an 11x11 Gaussian window (std 1.5) fits
 * inside the image. C1 = (0.01 peak)^2, C2 = (0.03 peak)^2.
 */
double ssim(ImageRef ref, ImageRef test, Index width, Index height, double peak);

// Mean |ref - test| over foreground pixels; throws DomainError for an empty mask.
double mae(ImageRef ref, ImageRef test, MaskRef foreground);

struct QuantityScores
{
  double psnr_db = 0;
  double ssim = 0;
  double mae = 0;
};

struct EvalReport
{
  std::string mask_type;
  std::string algorithm;
  std::string config_hash;
  QuantityScores tsmi, t1, t2, pd;
  std::vector<QuantityScores> tsmi_channels;
};

/*
 * TSMI scores are arithmetic means of per-channel PSNR/SSIM (peak = max |ref|
 * of each channel) and the mean absolute error over all pixels. Map scores use
 * the ground-truth foreground only: PSNR and MAE over foreground pixels, SSIM
 * on images whose background is zeroed in both maps.
 */
EvalReport evaluate_run(TissueMaps const &gt_maps, Tsmi const &gt_tsmi, TissueMaps const &maps, Tsmi const &tsmi);

std::string csv_header(bool per_channel = false);
std::string csv_row(EvalReport const &r, bool per_channel = false);
std::string text_table(std::vector<EvalReport> const &reports);

// 8-bit binary PGM with values linearly mapped from [lo, hi].
void write_pgm(ImageRef img, Index width, Index height, double lo, double hi, std::filesystem::path const &path);

} // namespace pnp
