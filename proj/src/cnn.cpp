#include "pnpmrf/denoise.hpp"
#include "pnpmrf/keyvalue.hpp"

#include <algorithm>
#include <cstring>

namespace pnp {

namespace {

using Shape = std::vector<std::uint64_t>;

std::string shape_str(Shape const &s)
{
  std::string out;
  for (auto d : s) { out += (out.empty() ? "" : " ") + std::to_string(d); }
  return out;
}

Shape conv_shape(Index out, Index in, Index k) { return {std::uint64_t(out), std::uint64_t(in), std::uint64_t(k), std::uint64_t(k)}; }

} // namespace

WeightArchive::Layer const &WeightArchive::layer(std::string const &name) const
{
  for (auto const &l : layers) {
    if (l.name == name) { return l; }
  }
  throw FormatError("weight archive has no layer '" + name + "'");
}

std::vector<std::pair<std::string, Shape>> WeightArchive::expected_layers() const
{
  std::vector<std::pair<std::string, Shape>> out;
  Index const S = scales();
  if (S < 1) { return out; }
  auto blocks_at = [&](std::string const &prefix, Index c) {
    for (Index b = 0; b < blocks; b++) {
      auto const p = prefix + ".block" + std::to_string(b);
      out.emplace_back(p + ".conv1.weight", conv_shape(c, c, body_kernel));
      out.emplace_back(p + ".conv2.weight", conv_shape(c, c, body_kernel));
    }
  };
  out.emplace_back("head.weight", conv_shape(channels[0], in_channels, head_kernel));
  for (Index s = 0; s + 1 < S; s++) {
    auto const p = "down" + std::to_string(s);
    blocks_at(p, channels[std::size_t(s)]);
    out.emplace_back(p + ".sample.weight", conv_shape(channels[std::size_t(s + 1)], channels[std::size_t(s)], sample_kernel));
  }
  blocks_at("body", channels[std::size_t(S - 1)]);
  for (Index s = S - 2; s >= 0; s--) {
    auto const p = "up" + std::to_string(s);
    // transposed conv: [in, out, k, k]
    out.emplace_back(p + ".sample.weight", conv_shape(channels[std::size_t(s + 1)], channels[std::size_t(s)], sample_kernel));
    blocks_at(p, channels[std::size_t(s)]);
  }
  out.emplace_back("tail.weight", conv_shape(out_channels, channels[0], tail_kernel));
  return out;
}

void WeightArchive::validate() const
{
  if (architecture != "unet-res") { throw FormatError("unsupported architecture '" + architecture + "'"); }
  if (activation != "relu") { throw FormatError("unsupported activation '" + activation + "'"); }
  if (channels.empty()) { throw FormatError("archive declares no scales"); }
  for (auto c : channels) {
    if (c < 1) { throw FormatError("channel counts must be positive"); }
  }
  if (blocks < 0) { throw FormatError("negative block count"); }
  if (out_channels < 1 || in_channels != out_channels + 1) {
    throw FormatError("input channels must equal output channels + 1 (noise map), found " +
                      std::to_string(in_channels) + " and " + std::to_string(out_channels));
  }
  for (auto k : {head_kernel, body_kernel, tail_kernel}) {
    if (k < 1 || k % 2 == 0) { throw FormatError("convolution kernels must be odd and positive"); }
  }
  if (sample_kernel != 2) { throw FormatError("only 2x2 stride-2 resampling is supported"); }

  auto const expected = expected_layers();
  if (expected.size() != layers.size()) {
    throw FormatError("archive lists " + std::to_string(layers.size()) + " layers, architecture needs " +
                      std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); i++) {
    auto const &l = layers[i];
    if (l.name != expected[i].first) {
      throw FormatError("layer " + std::to_string(i) + " is '" + l.name + "', expected '" + expected[i].first + "'");
    }
    if (l.shape != expected[i].second) {
      throw FormatError("layer '" + l.name + "' has shape [" + shape_str(l.shape) + "], expected [" +
                        shape_str(expected[i].second) + "]");
    }
    std::uint64_t n = 1;
    for (auto d : l.shape) { n *= d; }
    if (l.weights.size() != n) { throw FormatError("layer '" + l.name + "' holds the wrong number of weights"); }
  }
}

std::uint64_t WeightArchive::hash() const
{
  std::uint64_t h = fnv1a(std::string{});
  for (auto const &l : layers) {
    h = fnv1a(l.name, h);
    h = fnv1a(std::as_bytes(std::span(l.weights)), h);
  }
  return h;
}

WeightArchive make_archive(std::vector<Index> channels, Index blocks, Index t, Index head_kernel, Index body_kernel,
                           Index tail_kernel)
{
  WeightArchive a;
  a.channels = std::move(channels);
  a.blocks = blocks;
  a.in_channels = t + 1;
  a.out_channels = t;
  a.head_kernel = head_kernel;
  a.body_kernel = body_kernel;
  a.tail_kernel = tail_kernel;
  for (auto const &[name, shape] : a.expected_layers()) {
    std::uint64_t n = 1;
    for (auto d : shape) { n *= d; }
    a.layers.push_back({name, shape, std::vector<float>(n, 0.0f)});
  }
  return a;
}

void save_archive(WeightArchive const &a, std::filesystem::path const &dir)
{
  a.validate();
  std::filesystem::create_directories(dir);
  KeyValueFile m;
  m.add("architecture", a.architecture);
  m.add("scales", std::to_string(a.scales()));
  std::string ch;
  for (auto c : a.channels) { ch += (ch.empty() ? "" : " ") + std::to_string(c); }
  m.add("channels", ch);
  m.add("blocks", std::to_string(a.blocks));
  m.add("in_channels", std::to_string(a.in_channels));
  m.add("out_channels", std::to_string(a.out_channels));
  m.add("activation", a.activation);
  m.add("head_kernel", std::to_string(a.head_kernel));
  m.add("body_kernel", std::to_string(a.body_kernel));
  m.add("tail_kernel", std::to_string(a.tail_kernel));
  m.add("sample_kernel", std::to_string(a.sample_kernel));
  for (auto const &l : a.layers) {
    m.add("layer", l.name + " " + shape_str(l.shape));
    write_tensor(Tensor(l.shape, l.weights), dir / (l.name + ".qmrt"));
  }
  m.add("hash", hex64(a.hash()));
  m.save(dir / "manifest.txt");
}

WeightArchive load_archive(std::filesystem::path const &dir)
{
  if (!std::filesystem::exists(dir / "manifest.txt")) {
    throw FormatError("weight archive " + dir.string() + " has no manifest.txt");
  }
  auto const m = KeyValueFile::load(dir / "manifest.txt");
  WeightArchive a;
  a.architecture = m.get("architecture");
  for (auto const &tok : split_ws(m.get("channels"))) { a.channels.push_back(std::stol(tok)); }
  if (m.get_int("scales") != a.scales()) { throw FormatError("manifest 'scales' disagrees with 'channels'"); }
  a.blocks = m.get_int("blocks");
  a.in_channels = m.get_int("in_channels");
  a.out_channels = m.get_int("out_channels");
  a.activation = m.get("activation", "relu");
  a.head_kernel = m.get_int("head_kernel", 3);
  a.body_kernel = m.get_int("body_kernel", 3);
  a.tail_kernel = m.get_int("tail_kernel", 3);
  a.sample_kernel = m.get_int("sample_kernel", 2);

  for (auto const *e : m.all("layer")) {
    auto const tok = split_ws(e->value);
    if (tok.empty()) { m.fail(*e, "empty layer entry"); }
    WeightArchive::Layer l;
    l.name = tok[0];
    for (std::size_t i = 1; i < tok.size(); i++) { l.shape.push_back(std::stoull(tok[i])); }
    auto const path = dir / (l.name + ".qmrt");
    if (!std::filesystem::exists(path)) { throw FormatError("layer '" + l.name + "': missing tensor file"); }
    auto const t = read_tensor(path);
    if (t.shape() != l.shape) {
      throw FormatError("layer '" + l.name + "': tensor shape [" + shape_str(t.shape()) + "] disagrees with manifest [" +
                        shape_str(l.shape) + "]");
    }
    if (t.dtype() == DType::Real32) {
      l.weights.assign(t.real32().begin(), t.real32().end());
    } else {
      auto const v = t.as_real();
      l.weights.assign(v.begin(), v.end());
    }
    a.layers.push_back(std::move(l));
  }
  a.validate();
  if (m.has("hash") && m.get("hash") != hex64(a.hash())) {
    throw FormatError("weight archive integrity hash mismatch in " + dir.string());
  }
  return a;
}

namespace {

// Feature maps: channels x (h*w), one row per channel.
using Features = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using WeightMatrix = Eigen::Map<Features const>;

struct Tensor3
{
  Index h = 0, w = 0;
  Features data;
};

Tensor3 conv(Tensor3 const &in, WeightArchive::Layer const &l)
{
  Index const out_c = Index(l.shape[0]), in_c = Index(l.shape[1]), k = Index(l.shape[2]), pad = k / 2;
  Index const h = in.h, w = in.w;
  if (in.data.rows() != in_c) { throw ShapeError("layer '" + l.name + "': input channel mismatch"); }
  WeightMatrix const weights(l.weights.data(), out_c, in_c * k * k);
  if (k == 1) { return {h, w, weights * in.data}; }

  Features cols = Features::Zero(in_c * k * k, h * w);
  for (Index c = 0; c < in_c; c++) {
    for (Index dy = 0; dy < k; dy++) {
      for (Index dx = 0; dx < k; dx++) {
        auto dst = cols.row((c * k + dy) * k + dx);
        for (Index y = 0; y < h; y++) {
          Index const sy = y + dy - pad;
          if (sy < 0 || sy >= h) { continue; }
          Index const x_lo = std::max<Index>(0, pad - dx), x_hi = std::min(w, w + pad - dx);
          for (Index x = x_lo; x < x_hi; x++) { dst(y * w + x) = in.data(c, sy * w + x + dx - pad); }
        }
      }
    }
  }
  return {h, w, weights * cols};
}

Tensor3 conv_down(Tensor3 const &in, WeightArchive::Layer const &l)
{
  Index const out_c = Index(l.shape[0]), in_c = Index(l.shape[1]);
  Index const h = in.h / 2, w = in.w / 2;
  WeightMatrix const weights(l.weights.data(), out_c, in_c * 4);
  Features cols(in_c * 4, h * w);
  for (Index c = 0; c < in_c; c++) {
    for (Index dy = 0; dy < 2; dy++) {
      for (Index dx = 0; dx < 2; dx++) {
        auto dst = cols.row((c * 2 + dy) * 2 + dx);
        for (Index y = 0; y < h; y++) {
          for (Index x = 0; x < w; x++) { dst(y * w + x) = in.data(c, (2 * y + dy) * in.w + 2 * x + dx); }
        }
      }
    }
  }
  return {h, w, weights * cols};
}

Tensor3 conv_up(Tensor3 const &in, WeightArchive::Layer const &l)
{
  Index const in_c = Index(l.shape[0]), out_c = Index(l.shape[1]);
  Index const h = in.h * 2, w = in.w * 2;
  Tensor3 out{h, w, Features::Zero(out_c, h * w)};
  Features tap(out_c, in_c);
  for (Index dy = 0; dy < 2; dy++) {
    for (Index dx = 0; dx < 2; dx++) {
      for (Index i = 0; i < in_c; i++) {
        for (Index o = 0; o < out_c; o++) { tap(o, i) = l.weights[std::size_t(((i * out_c + o) * 2 + dy) * 2 + dx)]; }
      }
      Features const part = tap * in.data;
      for (Index o = 0; o < out_c; o++) {
        for (Index y = 0; y < in.h; y++) {
          for (Index x = 0; x < in.w; x++) { out.data(o, (2 * y + dy) * w + 2 * x + dx) = part(o, y * in.w + x); }
        }
      }
    }
  }
  return out;
}

Tensor3 res_blocks(WeightArchive const &a, std::string const &prefix, Tensor3 x)
{
  for (Index b = 0; b < a.blocks; b++) {
    auto const p = prefix + ".block" + std::to_string(b);
    Tensor3 r = conv(x, a.layer(p + ".conv1.weight"));
    r.data = r.data.cwiseMax(0.0f);
    r = conv(r, a.layer(p + ".conv2.weight"));
    x.data += r.data;
  }
  return x;
}

// numpy-style 'reflect' index (edge not repeated)
Index reflect(Index i, Index n)
{
  if (n == 1) { return 0; }
  Index const period = 2 * (n - 1);
  i %= period;
  if (i < 0) { i += period; }
  return i < n ? i : period - i;
}

} // namespace

Tsmi cnn_infer(WeightArchive const &archive, Tsmi const &x_norm, double sigma)
{
  archive.validate();
  if (x_norm.channels + 1 != archive.in_channels || x_norm.channels != archive.out_channels) {
    throw ShapeError("network expects " + std::to_string(archive.out_channels) + " TSMI channels, input has " +
                     std::to_string(x_norm.channels));
  }
  Index const S = archive.scales();
  Index const mult = Index(1) << (S - 1);
  Index const h = x_norm.height, w = x_norm.width;
  Index const ph = (h + mult - 1) / mult * mult, pw = (w + mult - 1) / mult * mult;

  Tensor3 x{ph, pw, Features(archive.in_channels, ph * pw)};
  for (Index c = 0; c < x_norm.channels; c++) {
    for (Index y = 0; y < ph; y++) {
      for (Index xx = 0; xx < pw; xx++) {
        x.data(c, y * pw + xx) = float(x_norm.values(reflect(y, h) * w + reflect(xx, w), c));
      }
    }
  }
  x.data.row(archive.in_channels - 1).setConstant(float(sigma));

  std::vector<Tensor3> skips;
  x = conv(x, archive.layer("head.weight"));
  skips.push_back(x);
  for (Index s = 0; s + 1 < S; s++) {
    auto const p = "down" + std::to_string(s);
    x = res_blocks(archive, p, std::move(x));
    x = conv_down(x, archive.layer(p + ".sample.weight"));
    skips.push_back(x);
  }
  x = res_blocks(archive, "body", std::move(x));
  for (Index s = S - 2; s >= 0; s--) {
    auto const p = "up" + std::to_string(s);
    x.data += skips[std::size_t(s + 1)].data;
    x = conv_up(x, archive.layer(p + ".sample.weight"));
    x = res_blocks(archive, p, std::move(x));
  }
  if (S > 1) { x.data += skips[0].data; }
  x = conv(x, archive.layer("tail.weight"));

  Tsmi out(w, h, archive.out_channels);
  for (Index c = 0; c < archive.out_channels; c++) {
    for (Index y = 0; y < h; y++) {
      for (Index xx = 0; xx < w; xx++) { out.values(y * w + xx, c) = double(x.data(c, y * pw + xx)); }
    }
  }
  return out;
}

} // namespace pnp
