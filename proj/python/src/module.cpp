// Python bindings. TSMIs cross the boundary as float64 arrays of shape
// (channels, height, width), k-space as complex128 arrays of shape
// (frames, samples), masks as int arrays of shape (frames, samples, 2).

#include "pnpmrf/pipeline.hpp"
#include "pnpmrf/sampling.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace pnp;

namespace {

using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using CxArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

Tsmi tsmi_from_numpy(RealArray const &a)
{
  if (a.ndim() != 3) { throw ShapeError("TSMI arrays must have shape (channels, height, width)"); }
  Index const t = a.shape(0), h = a.shape(1), w = a.shape(2);
  Tsmi x(w, h, t);
  auto const *p = a.data();
  for (Index c = 0; c < t; c++) {
    for (Index i = 0; i < w * h; i++) { x.values(i, c) = p[c * w * h + i]; }
  }
  return x;
}

RealArray tsmi_to_numpy(Tsmi const &x)
{
  RealArray a({x.channels, x.height, x.width});
  auto *p = a.mutable_data();
  Index const n = x.pixels();
  for (Index c = 0; c < x.channels; c++) {
    for (Index i = 0; i < n; i++) { p[c * n + i] = x.values(i, c); }
  }
  return a;
}

KSpaceData kspace_from_numpy(SamplingMask const &mask, CxArray const &a)
{
  if (a.ndim() != 2 || a.shape(0) != mask.frames || a.shape(1) != mask.samples_per_frame) {
    throw ShapeError("k-space arrays must have shape (frames, samples_per_frame) of the mask");
  }
  KSpaceData y{mask, Eigen::MatrixXcd(mask.samples_per_frame, mask.frames)};
  auto const *p = a.data();
  for (Index k = 0; k < mask.frames; k++) {
    for (Index j = 0; j < mask.samples_per_frame; j++) { y.values(j, k) = p[k * mask.samples_per_frame + j]; }
  }
  return y;
}

CxArray kspace_to_numpy(KSpaceData const &y)
{
  CxArray a({y.frames(), y.samples()});
  auto *p = a.mutable_data();
  for (Index k = 0; k < y.frames(); k++) {
    for (Index j = 0; j < y.samples(); j++) { p[k * y.samples() + j] = y.values(j, k); }
  }
  return a;
}

RealArray map_to_numpy(Eigen::ArrayXd const &v, Index w, Index h)
{
  RealArray a({h, w});
  std::copy(v.data(), v.data() + v.size(), a.mutable_data());
  return a;
}

py::dict maps_to_dict(TissueMaps const &m)
{
  py::dict d;
  d["t1"] = map_to_numpy(m.t1, m.width, m.height);
  d["t2"] = map_to_numpy(m.t2, m.width, m.height);
  d["pd"] = map_to_numpy(m.pd, m.width, m.height);
  py::array_t<bool> mask({m.height, m.width});
  std::copy(m.mask.data(), m.mask.data() + m.mask.size(), mask.mutable_data());
  d["mask"] = mask;
  return d;
}

TissueMaps maps_from_dict(py::dict const &d)
{
  auto const t1 = d["t1"].cast<RealArray>();
  if (t1.ndim() != 2) { throw ShapeError("maps must be 2-D arrays"); }
  TissueMaps m(t1.shape(1), t1.shape(0));
  auto fill = [&](Eigen::ArrayXd &dst, RealArray const &a) {
    if (a.size() != m.pixels()) { throw ShapeError("maps disagree in shape"); }
    std::copy(a.data(), a.data() + a.size(), dst.data());
  };
  fill(m.t1, t1);
  fill(m.t2, d["t2"].cast<RealArray>());
  fill(m.pd, d["pd"].cast<RealArray>());
  auto const mask = d["mask"].cast<py::array_t<bool, py::array::c_style | py::array::forcecast>>();
  if (mask.size() != m.pixels()) { throw ShapeError("maps disagree in shape"); }
  std::copy(mask.data(), mask.data() + mask.size(), m.mask.data());
  return m;
}

py::array_t<int> mask_coords(SamplingMask const &m)
{
  py::array_t<int> a({m.frames, m.samples_per_frame, Index(2)});
  auto *p = a.mutable_data();
  for (std::size_t i = 0; i < m.coords.size(); i++) {
    p[2 * i] = m.coords[i].kx;
    p[2 * i + 1] = m.coords[i].ky;
  }
  return a;
}

py::dict trace_to_dict(ReconTrace const &t)
{
  std::vector<double> gap, fp, fid, sec;
  for (auto const &r : t.rows) {
    gap.push_back(r.primal_gap);
    fp.push_back(r.fp_residual);
    fid.push_back(r.data_fidelity);
    sec.push_back(r.seconds);
  }
  py::dict d;
  d["primal_gap"] = gap;
  d["fp_residual"] = fp;
  d["data_fidelity"] = fid;
  d["seconds"] = sec;
  d["cg_warnings"] = t.cg_warnings;
  return d;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Plug-and-play ADMM reconstruction for MR fingerprinting";

  // Registered base first: pybind11 tries the most recently registered translator first.
  auto const &base = py::register_exception<Error>(m, "Error", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);

  // sequence and simulation
  py::class_<SequenceParams>(m, "SequenceParams")
    .def(py::init([](Index repetitions) { return default_sequence(repetitions); }), py::arg("repetitions") = 200)
    .def_readwrite("repetitions", &SequenceParams::repetitions)
    .def_readwrite("flip_angles_deg", &SequenceParams::flip_angles_deg)
    .def_readwrite("tr", &SequenceParams::tr_s)
    .def_readwrite("te", &SequenceParams::te_s)
    .def_readwrite("ti", &SequenceParams::ti_s)
    .def("validate", &SequenceParams::validate)
    .def("hash", &SequenceParams::hash);
  m.def("default_flip_schedule", &default_flip_schedule, py::arg("repetitions"));
  m.def(
    "simulate_fingerprint",
    [](double t1, double t2, SequenceParams const &seq, Index max_order) {
      return simulate_fingerprint(t1, t2, seq, {max_order});
    },
    py::arg("t1"), py::arg("t2"), py::arg("seq"), py::arg("max_order") = 40);

  // dictionary
  py::class_<ParamGrid>(m, "ParamGrid")
    .def_readonly("t1_values", &ParamGrid::t1_values)
    .def_readonly("t2_values", &ParamGrid::t2_values)
    .def_readonly("atoms", &ParamGrid::atoms)
    .def("__len__", &ParamGrid::size);
  m.def("build_grid", &build_grid, py::arg("n_t1"), py::arg("n_t2"));
  m.def(
    "build_dictionary", [](ParamGrid const &g, SequenceParams const &s) { return build_dictionary(g, s); },
    py::arg("grid"), py::arg("seq"));
  py::class_<SubspaceBasis>(m, "SubspaceBasis")
    .def_readonly("basis", &SubspaceBasis::basis)
    .def_readonly("singular_values", &SubspaceBasis::singular_values)
    .def_property_readonly("rank", &SubspaceBasis::rank)
    .def("captured_energy", &SubspaceBasis::captured_energy);
  m.def("compute_subspace", &compute_subspace, py::arg("dictionary"), py::arg("rank"));
  py::class_<CompressedDictionary>(m, "CompressedDictionary")
    .def_readonly("atoms", &CompressedDictionary::atoms)
    .def_readonly("norms", &CompressedDictionary::norms)
    .def_readonly("grid", &CompressedDictionary::grid);
  m.def("compress", &compress, py::arg("dictionary"), py::arg("basis"), py::arg("grid"));
  m.def(
    "match", [](RealArray const &x, CompressedDictionary const &d) { return maps_to_dict(match(tsmi_from_numpy(x), d)); },
    py::arg("tsmi"), py::arg("dictionary"));

  // sampling and forward model
  py::class_<SamplingMask>(m, "SamplingMask")
    .def_readonly("pattern", &SamplingMask::pattern)
    .def_readonly("frames", &SamplingMask::frames)
    .def_readonly("samples_per_frame", &SamplingMask::samples_per_frame)
    .def_property_readonly("shape", [](SamplingMask const &s) { return py::make_tuple(s.grid.height, s.grid.width); })
    .def_property_readonly("coords", &mask_coords);
  m.def("spiral_mask", [](Index w, Index h, Index frames, Index m) { return spiral_mask({w, h}, frames, m); },
        py::arg("width"), py::arg("height"), py::arg("frames"), py::arg("samples_per_frame"));
  m.def("epi_mask", [](Index w, Index h, Index frames, Index m) { return epi_mask({w, h}, frames, m); },
        py::arg("width"), py::arg("height"), py::arg("frames"), py::arg("samples_per_frame"));
  m.def("full_mask", [](Index w, Index h, Index frames) { return full_mask({w, h}, frames); }, py::arg("width"),
        py::arg("height"), py::arg("frames"));

  py::class_<ForwardOperator>(m, "ForwardOperator")
    .def(py::init<SamplingMask, Eigen::MatrixXd>(), py::arg("mask"), py::arg("basis"))
    .def_property_readonly("mask", &ForwardOperator::mask)
    .def_property_readonly("basis", &ForwardOperator::basis)
    .def("apply", [](ForwardOperator const &op, RealArray const &x) { return kspace_to_numpy(op.apply(tsmi_from_numpy(x))); })
    .def("adjoint",
         [](ForwardOperator const &op, CxArray const &y) { return tsmi_to_numpy(op.adjoint(kspace_from_numpy(op.mask(), y))); })
    .def("normal", [](ForwardOperator const &op, RealArray const &x) { return tsmi_to_numpy(op.normal(tsmi_from_numpy(x))); });
  m.def(
    "data_consistency",
    [](ForwardOperator const &op, CxArray const &y, RealArray const &z, double gamma, double tol, Index max_iter) {
      auto r = data_consistency(op, kspace_from_numpy(op.mask(), y), tsmi_from_numpy(z), gamma, tol, max_iter);
      return py::make_tuple(tsmi_to_numpy(r.x), r.report.iterations, r.report.converged, r.report.residuals);
    },
    py::arg("op"), py::arg("y"), py::arg("z"), py::arg("gamma"), py::arg("tol") = 1e-4, py::arg("max_iter") = 50);

  // denoisers
  m.def(
    "denoise",
    [](RealArray const &x, std::string const &kind, double sigma, double tv_weight, Index tv_iters, double blur_sigma,
       std::string const &weights) {
      DenoiserSpec s;
      s.kind = parse_denoiser_kind(kind);
      s.sigma = sigma;
      s.tv_weight = tv_weight;
      s.tv_iters = tv_iters;
      s.blur_sigma = blur_sigma;
      s.weights = weights;
      return tsmi_to_numpy(denoise(s, tsmi_from_numpy(x)));
    },
    py::arg("x"), py::arg("kind") = "tv", py::arg("sigma") = 1e-2, py::arg("tv_weight") = 1.0, py::arg("tv_iters") = 50,
    py::arg("blur_sigma") = 1.0, py::arg("weights") = std::string{});
  m.def("tv_denoise", [](RealArray const &x, double lambda, Index iters) { return tsmi_to_numpy(tv_denoise(tsmi_from_numpy(x), lambda, iters)); },
        py::arg("x"), py::arg("weight"), py::arg("iterations") = 50);
  m.def("cnn_infer",
        [](std::filesystem::path const &weights, RealArray const &x, double sigma) {
          return tsmi_to_numpy(cnn_infer(load_archive(weights), tsmi_from_numpy(x), sigma));
        },
        py::arg("weights"), py::arg("x_norm"), py::arg("sigma"));
  m.def("archive_hash", [](std::filesystem::path const &dir) { return hex64(load_archive(dir).hash()); }, py::arg("weights"));

  // reconstruction
  m.def("svd_mrf",
        [](ForwardOperator const &op, CxArray const &y) { return tsmi_to_numpy(svd_mrf(op, kspace_from_numpy(op.mask(), y))); },
        py::arg("op"), py::arg("y"));
  m.def(
    "pnp_admm",
    [](ForwardOperator const &op, CxArray const &y, Index iterations, double gamma, std::string const &denoiser,
       double sigma, double tv_weight, std::string const &weights, double cg_tol, Index cg_max_iter) {
      PnPConfig c;
      c.iterations = iterations;
      c.gamma = gamma;
      c.cg_tol = cg_tol;
      c.cg_max_iter = cg_max_iter;
      c.denoiser.kind = parse_denoiser_kind(denoiser);
      c.denoiser.sigma = sigma;
      c.denoiser.tv_weight = tv_weight;
      c.denoiser.weights = weights;
      ReconResult r;
      {
        py::gil_scoped_release release;
        r = pnp_admm(op, kspace_from_numpy(op.mask(), y), c);
      }
      return py::make_tuple(tsmi_to_numpy(r.x), trace_to_dict(r.trace));
    },
    py::arg("op"), py::arg("y"), py::arg("iterations") = 100, py::arg("gamma") = 0.05, py::arg("denoiser") = "tv",
    py::arg("sigma") = 1e-2, py::arg("tv_weight") = 1.0, py::arg("weights") = std::string{},
    py::arg("cg_tol") = 1e-4, py::arg("cg_max_iter") = 50);
  m.def(
    "lrtv",
    [](ForwardOperator const &op, CxArray const &y, double lambda, Index iterations) {
      auto r = lrtv(op, kspace_from_numpy(op.mask(), y), lambda, iterations);
      return py::make_tuple(tsmi_to_numpy(r.x), trace_to_dict(r.trace));
    },
    py::arg("op"), py::arg("y"), py::arg("lam") = 4e-5, py::arg("iterations") = 200);

  // phantom
  m.def(
    "make_phantom",
    [](Index w, Index h, std::uint64_t seed, double jitter) { return maps_to_dict(make_phantom(default_phantom_spec({w, h}, seed, jitter))); },
    py::arg("width") = 224, py::arg("height") = 224, py::arg("seed") = 0, py::arg("jitter") = 0.0);
  m.def(
    "simulate_tsmi",
    [](py::dict const &maps, SequenceParams const &seq, SubspaceBasis const &basis) {
      return tsmi_to_numpy(simulate_tsmi(maps_from_dict(maps), seq, basis));
    },
    py::arg("maps"), py::arg("seq"), py::arg("basis"));
  m.def(
    "add_measurement_noise",
    [](SamplingMask const &mask, CxArray const &y, double snr_db, std::uint64_t seed) {
      return kspace_to_numpy(add_measurement_noise(kspace_from_numpy(mask, y), snr_db, seed));
    },
    py::arg("mask"), py::arg("y"), py::arg("snr_db"), py::arg("seed"));

  // metrics
  m.def("psnr", [](Eigen::ArrayXd const &r, Eigen::ArrayXd const &t, std::optional<double> peak) {
    return peak ? psnr(r, t, *peak) : psnr(r, t);
  }, py::arg("ref"), py::arg("test"), py::arg("peak") = py::none());
  m.def(
    "ssim",
    [](RealArray const &r, RealArray const &t, double peak) {
      if (r.ndim() != 2 || t.ndim() != 2) { throw ShapeError("ssim expects 2-D images"); }
      Eigen::Map<Eigen::ArrayXd const> a(r.data(), r.size()), b(t.data(), t.size());
      return ssim(a, b, r.shape(1), r.shape(0), peak);
    },
    py::arg("ref"), py::arg("test"), py::arg("peak") = 1.0);
  m.def("mae", [](Eigen::ArrayXd const &r, Eigen::ArrayXd const &t, Eigen::Array<bool, Eigen::Dynamic, 1> const &fg) {
    return mae(r, t, fg);
  }, py::arg("ref"), py::arg("test"), py::arg("foreground"));

  // tensors
  m.def("read_tensor", [](std::filesystem::path const &p) {
    auto const t = read_tensor(p);
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    if (t.dtype() == DType::Complex128) {
      py::array_t<std::complex<double>> a(shape);
      std::copy(t.complex128().begin(), t.complex128().end(), a.mutable_data());
      return py::object(a);
    }
    auto const v = t.as_real();
    py::array_t<double> a(shape);
    std::copy(v.begin(), v.end(), a.mutable_data());
    return py::object(a);
  }, py::arg("path"));
  m.def("write_tensor", [](py::array const &a, std::filesystem::path const &p) {
    Tensor::Shape shape(a.shape(), a.shape() + a.ndim());
    if (py::isinstance<py::array_t<std::complex<double>>>(a)) {
      auto const c = a.cast<CxArray>();
      write_tensor(Tensor(shape, std::vector<Cx>(c.data(), c.data() + c.size())), p);
    } else if (py::isinstance<py::array_t<float>>(a)) {
      auto const f = a.cast<py::array_t<float, py::array::c_style | py::array::forcecast>>();
      write_tensor(Tensor(shape, std::vector<float>(f.data(), f.data() + f.size())), p);
    } else {
      auto const d = a.cast<RealArray>();
      write_tensor(Tensor(shape, std::vector<double>(d.data(), d.data() + d.size())), p);
    }
  }, py::arg("array"), py::arg("path"));

  // staged pipeline
  py::class_<RunConfig>(m, "RunConfig")
    .def(py::init<>())
    .def_static("load", &load_run_config, py::arg("path"))
    .def_property("mask", [](RunConfig const &c) { return c.mask; }, [](RunConfig &c, std::string v) { c.mask = std::move(v); })
    .def_property("algorithm", [](RunConfig const &c) { return to_string(c.algorithm); },
                  [](RunConfig &c, std::string const &v) { c.algorithm = parse_algorithm(v); })
    .def("validate", &RunConfig::validate)
    .def("reconstruction_hash", &RunConfig::reconstruction_hash)
    .def("__str__", &RunConfig::str);
  m.def("run_stage", [](RunConfig const &cfg, std::filesystem::path const &out, std::string const &stage) -> py::object {
    RunPaths const paths{out};
    py::gil_scoped_release release;
    if (stage == "dict") { stage_dict(cfg, paths, true); }
    else if (stage == "simulate") {
      stage_dict(cfg, paths);
      stage_simulate(cfg, paths);
    } else if (stage == "recon") {
      auto const r = stage_recon(cfg, paths);
      py::gil_scoped_acquire gil;
      return py::str(r.config_hash);
    } else if (stage == "match") { stage_match(cfg, paths); }
    else if (stage == "eval") {
      auto const r = stage_eval(cfg, paths, false);
      py::gil_scoped_acquire gil;
      py::dict d;
      for (auto [name, q] : {std::pair{"tsmi", r.tsmi}, {"t1", r.t1}, {"t2", r.t2}, {"pd", r.pd}}) {
        d[name] = py::make_tuple(q.psnr_db, q.ssim, q.mae);
      }
      d["config_hash"] = r.config_hash;
      return d;
    } else { throw ConfigError("unknown stage '" + stage + "'"); }
    py::gil_scoped_acquire gil;
    return py::none();
  }, py::arg("config"), py::arg("output"), py::arg("stage"));
}
