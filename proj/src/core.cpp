#include "pnpmrf/core.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace pnp {

namespace {

constexpr char kMagic[4] = {'Q', 'M', 'R', 'T'};
constexpr std::uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap(T v)
{
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

template <typename T>
T to_le(T v)
{
  if constexpr (std::endian::native == std::endian::big) {
    return byteswap(v);
  } else {
    return v;
  }
}

std::uint64_t product(Tensor::Shape const &s)
{
  return std::accumulate(s.begin(), s.end(), std::uint64_t{1}, std::multiplies<>());
}

void check_shape(Tensor::Shape const &shape, std::size_t n)
{
  for (auto d : shape) {
    if (d == 0) { throw ShapeError("tensor dimensions must be positive"); }
  }
  if (product(shape) != n) {
    throw ShapeError("tensor shape holds " + std::to_string(product(shape)) + " elements but " +
                     std::to_string(n) + " were given");
  }
}

std::size_t element_bytes(DType d)
{
  switch (d) {
  case DType::Real64: return 8;
  case DType::Complex128: return 16;
  case DType::Real32: return 4;
  }
  return 0;
}

template <typename T>
void write_payload(std::ofstream &f, std::span<T const> v)
{
  if constexpr (std::endian::native == std::endian::little) {
    f.write(reinterpret_cast<char const *>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  } else {
    for (auto x : v) {
      if constexpr (std::is_same_v<T, Cx>) {
        double parts[2] = {to_le(x.real()), to_le(x.imag())};
        f.write(reinterpret_cast<char const *>(parts), sizeof(parts));
      } else {
        auto le = to_le(x);
        f.write(reinterpret_cast<char const *>(&le), sizeof(le));
      }
    }
  }
}

template <typename T>
std::vector<T> decode_payload(std::vector<char> const &raw, std::size_t n)
{
  std::vector<T> out(n);
  std::memcpy(out.data(), raw.data(), raw.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (auto &x : out) {
      if constexpr (std::is_same_v<T, Cx>) {
        x = Cx(byteswap(x.real()), byteswap(x.imag()));
      } else {
        x = byteswap(x);
      }
    }
  }
  return out;
}

} // namespace

std::string to_string(DType d)
{
  switch (d) {
  case DType::Real64: return "real64";
  case DType::Complex128: return "complex128";
  case DType::Real32: return "real32";
  }
  return "unknown";
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool is_mask)
  : shape_(std::move(shape))
{
  check_shape(shape_, data.size());
  for (auto v : data) {
    if (is_mask ? (v != 0.0 && v != 1.0) : !std::isfinite(v)) {
      throw DomainError(is_mask ? "mask tensor holds a value other than 0/1" : "tensor holds a non-finite value");
    }
  }
  data_ = std::move(data);
}

Tensor::Tensor(Shape shape, std::vector<Cx> data)
  : shape_(std::move(shape))
{
  check_shape(shape_, data.size());
  for (auto v : data) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) { throw DomainError("tensor holds a non-finite value"); }
  }
  data_ = std::move(data);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
  : shape_(std::move(shape))
{
  check_shape(shape_, data.size());
  for (auto v : data) {
    if (!std::isfinite(v)) { throw DomainError("tensor holds a non-finite value"); }
  }
  data_ = std::move(data);
}

DType Tensor::dtype() const { return static_cast<DType>(data_.index()); }

std::uint64_t Tensor::size() const { return product(shape_); }

std::span<double const> Tensor::real64() const
{
  if (auto p = std::get_if<0>(&data_)) { return *p; }
  throw ShapeError("expected a real64 tensor, found " + to_string(dtype()));
}

std::span<Cx const> Tensor::complex128() const
{
  if (auto p = std::get_if<1>(&data_)) { return *p; }
  throw ShapeError("expected a complex128 tensor, found " + to_string(dtype()));
}

std::span<float const> Tensor::real32() const
{
  if (auto p = std::get_if<2>(&data_)) { return *p; }
  throw ShapeError("expected a real32 tensor, found " + to_string(dtype()));
}

std::vector<double> Tensor::as_real() const
{
  if (auto p = std::get_if<0>(&data_)) { return *p; }
  if (auto p = std::get_if<2>(&data_)) { return {p->begin(), p->end()}; }
  throw ShapeError("expected a real tensor, found complex128");
}

bool Tensor::identical(Tensor const &other) const
{
  if (shape_ != other.shape_ || data_.index() != other.data_.index()) { return false; }
  return std::visit(
    [&](auto const &a) {
      auto const &b = std::get<std::decay_t<decltype(a)>>(other.data_);
      return a.size() == b.size() &&
             std::memcmp(a.data(), b.data(), a.size() * sizeof(typename std::decay_t<decltype(a)>::value_type)) == 0;
    },
    data_);
}

void write_tensor(Tensor const &t, std::filesystem::path const &path)
{
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) { throw Error("cannot open " + path.string() + " for writing"); }
  if (t.ndim() > 255) { throw ShapeError("tensor rank exceeds 255"); }
  f.write(kMagic, 4);
  std::uint8_t const header[3] = {kVersion, static_cast<std::uint8_t>(t.dtype()), static_cast<std::uint8_t>(t.ndim())};
  f.write(reinterpret_cast<char const *>(header), 3);
  for (auto d : t.shape()) {
    auto le = to_le(d);
    f.write(reinterpret_cast<char const *>(&le), sizeof(le));
  }
  switch (t.dtype()) {
  case DType::Real64: write_payload(f, t.real64()); break;
  case DType::Complex128: write_payload(f, t.complex128()); break;
  case DType::Real32: write_payload(f, t.real32()); break;
  }
  if (!f) { throw Error("write failed for " + path.string()); }
}

Tensor read_tensor(std::filesystem::path const &path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) { throw Error("cannot open " + path.string() + " for reading"); }
  auto fail = [&](std::string const &what) { throw FormatError(path.string() + ": " + what); };

  char magic[4];
  if (!f.read(magic, 4)) { fail("truncated header (magic)"); }
  if (std::memcmp(magic, kMagic, 4) != 0) { fail("bad magic, expected QMRT"); }
  std::uint8_t header[3];
  if (!f.read(reinterpret_cast<char *>(header), 3)) { fail("truncated header (version/dtype/ndim)"); }
  if (header[0] != kVersion) { fail("unsupported version " + std::to_string(header[0])); }
  if (header[1] > 2) { fail("unknown dtype code " + std::to_string(header[1])); }
  auto const dtype = static_cast<DType>(header[1]);

  Tensor::Shape shape(header[2]);
  for (auto &d : shape) {
    if (!f.read(reinterpret_cast<char *>(&d), sizeof(d))) { fail("truncated header (dims)"); }
    d = to_le(d);
    if (d == 0) { fail("zero-length dimension"); }
  }
  auto const n = product(shape);
  auto const bytes = n * element_bytes(dtype);
  std::vector<char> raw(bytes);
  if (!f.read(raw.data(), static_cast<std::streamsize>(bytes))) {
    fail("truncated payload: expected " + std::to_string(bytes) + " bytes, found " + std::to_string(f.gcount()));
  }
  if (f.peek() != std::char_traits<char>::eof()) { fail("trailing bytes after payload"); }

  switch (dtype) {
  case DType::Real64: return Tensor(shape, decode_payload<double>(raw, n));
  case DType::Complex128: return Tensor(shape, decode_payload<Cx>(raw, n));
  case DType::Real32: return Tensor(shape, decode_payload<float>(raw, n));
  }
  fail("unknown dtype");
  return {};
}

Tsmi::Tsmi(Index w, Index h, Index t)
  : width(w)
  , height(h)
  , channels(t)
  , values(Eigen::MatrixXd::Zero(w * h, t))
{
  if (w < 1 || h < 1 || t < 1) { throw ShapeError("TSMI dimensions must be positive"); }
}

Tsmi::Tsmi(Index w, Index h, Eigen::MatrixXd v)
  : width(w)
  , height(h)
  , channels(v.cols())
  , values(std::move(v))
{
  if (w < 1 || h < 1 || channels < 1) { throw ShapeError("TSMI dimensions must be positive"); }
  if (values.rows() != w * h) { throw ShapeError("TSMI values do not match the image grid"); }
}

bool Tsmi::same_shape(Tsmi const &o) const
{
  return width == o.width && height == o.height && channels == o.channels;
}

Tensor to_tensor(Tsmi const &x)
{
  std::vector<double> data(x.values.data(), x.values.data() + x.values.size());
  return Tensor({std::uint64_t(x.channels), std::uint64_t(x.height), std::uint64_t(x.width)}, std::move(data));
}

Tsmi tsmi_from_tensor(Tensor const &t)
{
  if (t.ndim() != 3) { throw ShapeError("TSMI tensor must be [channels, height, width]"); }
  auto const v = t.as_real();
  auto const &s = t.shape();
  Index const c = Index(s[0]), h = Index(s[1]), w = Index(s[2]);
  return Tsmi(w, h, Eigen::Map<Eigen::MatrixXd const>(v.data(), w * h, c));
}

bool on_grid(KCoord k, Grid g)
{
  int const x0 = -int(g.width / 2), y0 = -int(g.height / 2);
  return k.kx >= x0 && k.kx < x0 + int(g.width) && k.ky >= y0 && k.ky < y0 + int(g.height);
}

Index fft_index(KCoord k, Grid g)
{
  Index const x = (k.kx + g.width) % g.width;
  Index const y = (k.ky + g.height) % g.height;
  return y * g.width + x;
}

std::span<KCoord const> SamplingMask::frame(Index k) const
{
  return std::span<KCoord const>(coords).subspan(std::size_t(k * samples_per_frame), std::size_t(samples_per_frame));
}

Tensor to_tensor(SamplingMask const &m)
{
  std::vector<double> data;
  data.reserve(m.coords.size() * 2);
  for (auto k : m.coords) {
    data.push_back(k.kx);
    data.push_back(k.ky);
  }
  return Tensor({std::uint64_t(m.frames), std::uint64_t(m.samples_per_frame), 2}, std::move(data));
}

SamplingMask mask_from_tensor(Tensor const &t, Grid g, std::string pattern)
{
  if (t.ndim() != 3 || t.shape()[2] != 2) { throw ShapeError("mask tensor must be [frames, samples, 2]"); }
  auto const v = t.as_real();
  SamplingMask m{std::move(pattern), g, Index(t.shape()[0]), Index(t.shape()[1]), {}};
  m.coords.resize(v.size() / 2);
  for (std::size_t i = 0; i < m.coords.size(); i++) {
    m.coords[i] = {int(v[2 * i]), int(v[2 * i + 1])};
    if (!on_grid(m.coords[i], g)) { throw ShapeError("mask tensor holds an off-grid coordinate"); }
  }
  return m;
}

Tensor to_tensor(KSpaceData const &y)
{
  // values are samples x frames column-major == frames x samples row-major
  std::vector<Cx> data(y.values.data(), y.values.data() + y.values.size());
  return Tensor({std::uint64_t(y.frames()), std::uint64_t(y.samples())}, std::move(data));
}

KSpaceData kspace_from_tensor(Tensor const &t, SamplingMask mask)
{
  if (t.ndim() != 2 || Index(t.shape()[0]) != mask.frames || Index(t.shape()[1]) != mask.samples_per_frame) {
    throw ShapeError("k-space tensor shape does not match the sampling mask");
  }
  auto const v = t.complex128();
  Eigen::MatrixXcd values = Eigen::Map<Eigen::MatrixXcd const>(v.data(), mask.samples_per_frame, mask.frames);
  return {std::move(mask), std::move(values)};
}

TissueMaps::TissueMaps(Index w, Index h)
  : width(w)
  , height(h)
  , t1(Eigen::ArrayXd::Zero(w * h))
  , t2(Eigen::ArrayXd::Zero(w * h))
  , pd(Eigen::ArrayXd::Zero(w * h))
  , mask(Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(w * h, false))
{
}

void TissueMaps::validate() const
{
  Index const n = pixels();
  if (t1.size() != n || t2.size() != n || pd.size() != n || mask.size() != n) {
    throw ShapeError("tissue map sizes do not match the image grid");
  }
  for (Index i = 0; i < n; i++) {
    auto where = [&] { return " at pixel " + std::to_string(i); };
    if (mask[i]) {
      if (!(t1[i] > 0) || !(t2[i] > 0)) { throw DomainError("non-positive relaxation time" + where()); }
      if (t2[i] > t1[i]) { throw DomainError("t2 exceeds t1" + where()); }
      if (!(pd[i] >= 0)) { throw DomainError("negative proton density" + where()); }
    } else if (t1[i] != 0 || t2[i] != 0 || pd[i] != 0) {
      throw DomainError("background pixel holds nonzero values" + where());
    }
  }
}

void write_maps(TissueMaps const &m, std::filesystem::path const &dir, std::string const &prefix)
{
  Tensor::Shape const shape{std::uint64_t(m.height), std::uint64_t(m.width)};
  auto vec = [](Eigen::ArrayXd const &a) { return std::vector<double>(a.data(), a.data() + a.size()); };
  write_tensor(Tensor(shape, vec(m.t1)), dir / (prefix + "t1.qmrt"));
  write_tensor(Tensor(shape, vec(m.t2)), dir / (prefix + "t2.qmrt"));
  write_tensor(Tensor(shape, vec(m.pd)), dir / (prefix + "pd.qmrt"));
  write_tensor(Tensor(shape, vec(m.mask.cast<double>()), true), dir / (prefix + "mask.qmrt"));
}

TissueMaps read_maps(std::filesystem::path const &dir, std::string const &prefix)
{
  auto load = [&](std::string const &name) {
    auto t = read_tensor(dir / (prefix + name + ".qmrt"));
    if (t.ndim() != 2) { throw ShapeError(prefix + name + " must be a 2-D map"); }
    return t;
  };
  auto const t1 = load("t1");
  TissueMaps m(Index(t1.shape()[1]), Index(t1.shape()[0]));
  auto assign = [&](Eigen::ArrayXd &dst, Tensor const &t) {
    if (t.shape() != t1.shape()) { throw ShapeError("tissue maps disagree in shape"); }
    auto v = t.as_real();
    dst = Eigen::Map<Eigen::ArrayXd const>(v.data(), Index(v.size()));
  };
  assign(m.t1, t1);
  assign(m.t2, load("t2"));
  assign(m.pd, load("pd"));
  Eigen::ArrayXd mk;
  assign(mk, load("mask"));
  m.mask = mk > 0.5;
  return m;
}

} // namespace pnp
