#include "pnpmrf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pnp {

double default_peak(ImageRef ref) { return ref.size() ? ref.abs().maxCoeff() : 0.0; }

double psnr(ImageRef ref, ImageRef test, double peak)
{
  if (ref.size() != test.size()) { throw ShapeError("PSNR operands differ in size"); }
  if (ref.size() == 0) { throw ShapeError("PSNR of empty images"); }
  if (!(peak > 0)) { throw DomainError("PSNR peak must be positive"); }
  double const mse = (ref - test).square().mean();
  if (mse == 0) { return kPsnrIdentical; }
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(ImageRef ref, ImageRef test) { return psnr(ref, test, default_peak(ref)); }

namespace {

constexpr Index kWin = 11;
constexpr double kWinSigma = 1.5;

using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// 'valid' separable Gaussian filter
Plane filter_valid(Plane const &in, Eigen::ArrayXd const &k)
{
  Index const h = in.rows(), w = in.cols(), oh = h - kWin + 1, ow = w - kWin + 1;
  Plane tmp = Plane::Zero(h, ow);
  for (Index i = 0; i < kWin; i++) { tmp += k(i) * in.middleCols(i, ow); }
  Plane out = Plane::Zero(oh, ow);
  for (Index i = 0; i < kWin; i++) { out += k(i) * tmp.middleRows(i, oh); }
  return out;
}

} // namespace

double ssim(ImageRef ref, ImageRef test, Index width, Index height, double peak)
{
  if (ref.size() != width * height || test.size() != width * height) { throw ShapeError("SSIM operands differ in size"); }
  if (width < kWin || height < kWin) {
    throw ShapeError("SSIM needs images of at least " + std::to_string(kWin) + "x" + std::to_string(kWin));
  }
  if (!(peak > 0)) { throw DomainError("SSIM peak must be positive"); }
  Eigen::ArrayXd k(kWin);
  for (Index i = 0; i < kWin; i++) {
    double const d = double(i - kWin / 2);
    k(i) = std::exp(-d * d / (2 * kWinSigma * kWinSigma));
  }
  k /= k.sum();

  Plane const x = Eigen::Map<Plane const>(ref.data(), height, width);
  Plane const y = Eigen::Map<Plane const>(test.data(), height, width);
  Plane const mx = filter_valid(x, k), my = filter_valid(y, k);
  Plane const sxx = filter_valid(x * x, k) - mx * mx;
  Plane const syy = filter_valid(y * y, k) - my * my;
  Plane const sxy = filter_valid(x * y, k) - mx * my;
  double const c1 = (0.01 * peak) * (0.01 * peak), c2 = (0.03 * peak) * (0.03 * peak);
  Plane const map = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
  return map.mean();
}

double mae(ImageRef ref, ImageRef test, MaskRef foreground)
{
  if (ref.size() != test.size() || ref.size() != foreground.size()) { throw ShapeError("MAE operands differ in size"); }
  Index const n = foreground.count();
  if (n == 0) { throw DomainError("MAE over an empty foreground"); }
  return foreground.select((ref - test).abs(), 0.0).sum() / double(n);
}

namespace {

Eigen::ArrayXd gather(Eigen::ArrayXd const &a, Eigen::Array<bool, Eigen::Dynamic, 1> const &m)
{
  Eigen::ArrayXd out(m.count());
  Index j = 0;
  for (Index i = 0; i < a.size(); i++) {
    if (m[i]) { out[j++] = a[i]; }
  }
  return out;
}

QuantityScores map_scores(Eigen::ArrayXd const &ref, Eigen::ArrayXd const &test, TissueMaps const &gt)
{
  auto const &fg = gt.mask;
  QuantityScores s;
  Eigen::ArrayXd const r = gather(ref, fg), t = gather(test, fg);
  double const peak = default_peak(r);
  s.psnr_db = psnr(r, t, peak);
  s.ssim = ssim(fg.select(ref, 0.0), fg.select(test, 0.0), gt.width, gt.height, peak);
  s.mae = mae(ref, test, fg);
  return s;
}

} // namespace

EvalReport evaluate_run(TissueMaps const &gt_maps, Tsmi const &gt_tsmi, TissueMaps const &maps, Tsmi const &tsmi)
{
  if (!gt_tsmi.same_shape(tsmi)) { throw ShapeError("TSMIs differ in shape"); }
  if (gt_maps.pixels() != maps.pixels() || gt_maps.pixels() != gt_tsmi.pixels()) {
    throw ShapeError("tissue maps and TSMIs disagree in size");
  }
  EvalReport rep;
  for (Index c = 0; c < gt_tsmi.channels; c++) {
    Eigen::ArrayXd const r = gt_tsmi.values.col(c).array(), t = tsmi.values.col(c).array();
    double const peak = default_peak(r);
    QuantityScores q;
    q.psnr_db = psnr(r, t, peak);
    q.ssim = ssim(r, t, gt_tsmi.width, gt_tsmi.height, peak);
    q.mae = (r - t).abs().mean();
    rep.tsmi_channels.push_back(q);
    rep.tsmi.psnr_db += q.psnr_db / double(gt_tsmi.channels);
    rep.tsmi.ssim += q.ssim / double(gt_tsmi.channels);
    rep.tsmi.mae += q.mae / double(gt_tsmi.channels);
  }
  rep.t1 = map_scores(gt_maps.t1, maps.t1, gt_maps);
  rep.t2 = map_scores(gt_maps.t2, maps.t2, gt_maps);
  rep.pd = map_scores(gt_maps.pd, maps.pd, gt_maps);
  return rep;
}

std::string csv_header(bool per_channel)
{
  std::string h = "mask,algorithm,config_hash";
  for (auto q : {"tsmi", "t1", "t2", "pd"}) {
    for (auto m : {"psnr", "ssim", "mae"}) { h += std::string(",") + q + "_" + m; }
  }
  if (per_channel) { h += ",channel_psnr"; }
  return h;
}

std::string csv_row(EvalReport const &r, bool per_channel)
{
  std::ostringstream s;
  s.precision(8);
  s << r.mask_type << ',' << r.algorithm << ',' << r.config_hash;
  for (auto const *q : {&r.tsmi, &r.t1, &r.t2, &r.pd}) { s << ',' << q->psnr_db << ',' << q->ssim << ',' << q->mae; }
  if (per_channel) {
    s << ',';
    for (std::size_t c = 0; c < r.tsmi_channels.size(); c++) { s << (c ? ";" : "") << r.tsmi_channels[c].psnr_db; }
  }
  return s.str();
}

std::string text_table(std::vector<EvalReport> const &reports)
{
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %-14s | %8s %7s | %8s %7s %9s | %8s %7s %9s | %8s %7s %9s\n", "mask",
                "algorithm", "TSMI dB", "SSIM", "T1 dB", "SSIM", "MAE(s)", "T2 dB", "SSIM", "MAE(s)", "PD dB", "SSIM",
                "MAE");
  out += line;
  out += std::string(std::strlen(line) - 1, '-') + "\n";
  for (auto const &r : reports) {
    std::snprintf(line, sizeof(line),
                  "%-8s %-14s | %8.2f %7.4f | %8.2f %7.4f %9.5f | %8.2f %7.4f %9.5f | %8.2f %7.4f %9.5f\n",
                  r.mask_type.c_str(), r.algorithm.c_str(), r.tsmi.psnr_db, r.tsmi.ssim, r.t1.psnr_db, r.t1.ssim,
                  r.t1.mae, r.t2.psnr_db, r.t2.ssim, r.t2.mae, r.pd.psnr_db, r.pd.ssim, r.pd.mae);
    out += line;
  }
  return out;
}

void write_pgm(ImageRef img, Index width, Index height, double lo, double hi, std::filesystem::path const &path)
{
  if (img.size() != width * height) { throw ShapeError("PGM image size mismatch"); }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) { throw Error("cannot open " + path.string() + " for writing"); }
  f << "P5\n" << width << ' ' << height << "\n255\n";
  double const range = hi > lo ? hi - lo : 1.0;
  for (Index i = 0; i < img.size(); i++) {
    double const v = std::clamp((img[i] - lo) / range, 0.0, 1.0);
    f.put(char(static_cast<unsigned char>(std::lround(255.0 * v))));
  }
}

} // namespace pnp
