#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rmpd/errors.hpp"
#include "rmpd/evaluation.hpp"
#include "rmpd/external.hpp"
#include "rmpd/image.hpp"
#include "rmpd/interchange.hpp"
#include "rmpd/prediction_difference.hpp"

namespace py = pybind11;
using namespace rmpd;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

RasterImage to_image(const FloatArray& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw InvalidArgument("image must have shape (height, width, 3)");
    const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
    return RasterImage(w, h, std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> from_image(const RasterImage& img) {
    py::array_t<float> out({img.height(), img.width(), std::size_t{3}});
    std::copy(img.data().begin(), img.data().end(), out.mutable_data());
    return out;
}

py::array_t<float> from_map(const SaliencyMap& m) {
    py::array_t<float> out({m.height, m.width});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

SaliencyMap to_map(const FloatArray& a) {
    if (a.ndim() != 2) throw InvalidArgument("saliency map must be 2-D");
    SaliencyMap m(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

BinaryMask to_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw InvalidArgument("mask must be 2-D");
    BinaryMask m(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
    for (py::ssize_t i = 0; i < a.size(); ++i) m.data[static_cast<std::size_t>(i)] = a.data()[i] ? 1 : 0;
    return m;
}

py::array_t<std::uint32_t> from_labels(const SegmentationMap& s) {
    py::array_t<std::uint32_t> out({s.height(), s.width()});
    std::copy(s.labels().begin(), s.labels().end(), out.mutable_data());
    return out;
}

ClassSelector selector(std::optional<std::size_t> class_id) {
    return class_id ? ClassSelector::of(*class_id) : ClassSelector::argmax();
}

ColorSpace colorspace(const std::string& s) {
    if (s == "rgb") return ColorSpace::rgb;
    if (s == "lab") return ColorSpace::lab;
    throw InvalidArgument("colorspace must be 'rgb' or 'lab'");
}

ClassifierHandle callback(std::size_t num_classes, py::function fn) {
    auto shared = std::make_shared<py::function>(std::move(fn));
    auto call = [shared](const RasterImage& img) -> Probabilities {
        py::gil_scoped_acquire gil;
        return (*shared)(from_image(img)).cast<Probabilities>();
    };
    // The Python callable must be released with the GIL held.
    auto release = std::shared_ptr<void>(nullptr, [shared](void*) mutable {
        py::gil_scoped_acquire gil;
        shared.reset();
    });
    return make_callback_classifier(
        num_classes, [call, release](const RasterImage& img) { return call(img); }, "python");
}

}  // namespace

PYBIND11_MODULE(_rmpd, m) {
    m.doc() = "Region-based multi-scale prediction-difference saliency";

    auto backend_error = py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);
    py::register_exception<ProtocolError>(m, "ProtocolError", backend_error.ptr());
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const InvalidArgument& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    py::class_<ClassifierHandle>(m, "Classifier")
        .def_static("constant", &make_constant_oracle, py::arg("probabilities"))
        .def_static(
            "area_fraction",
            [](std::array<double, 3> color, double tolerance, double reference_fraction) {
                return make_area_fraction_oracle({color, tolerance, reference_fraction});
            },
            py::arg("color") = std::array<double, 3>{255.0, 0.0, 0.0}, py::arg("tolerance") = 30.0,
            py::arg("reference_fraction") = 0.25)
        .def_static("callback", &callback, py::arg("num_classes"), py::arg("fn"),
                    "Wraps fn(image: float32[H, W, 3]) -> sequence of probabilities.")
        .def_static(
            "external",
            [](const std::vector<std::string>& argv, std::size_t num_classes, long timeout_ms) {
                py::gil_scoped_release nogil;
                return open_external(argv, num_classes, ExternalOptions{std::chrono::milliseconds(timeout_ms)});
            },
            py::arg("argv"), py::arg("num_classes") = 0, py::arg("timeout_ms") = 30000)
        .def_static("interchange", &open_interchange, py::arg("path"))
        .def(
            "predict",
            [](ClassifierHandle& f, const FloatArray& image) {
                const auto img = to_image(image);
                py::gil_scoped_release nogil;
                return f.predict(img);
            },
            py::arg("image"))
        .def_property_readonly("call_count", &ClassifierHandle::call_count)
        .def("reset_call_count", &ClassifierHandle::reset_call_count)
        .def_property_readonly("num_classes", &ClassifierHandle::num_classes)
        .def_property_readonly("kind", [](const ClassifierHandle& f) { return std::string(to_string(f.kind())); })
        .def("__repr__", [](const ClassifierHandle& f) { return "<Classifier " + f.describe() + ">"; });

    m.def(
        "regional",
        [](ClassifierHandle& f, const FloatArray& image, std::optional<std::size_t> class_id, int r,
           const std::string& g, std::uint64_t seed, double bandwidth, double sigma2, std::size_t bg_scale,
           double compactness, int iterations, const std::string& cs) {
            const auto img = to_image(image);
            PDConfig cfg;
            cfg.r = r;
            cfg.g.kind = parse_difference(g);
            cfg.seed = seed;
            cfg.segmenter = {compactness, iterations, colorspace(cs)};
            cfg.background = {bandwidth, sigma2, bg_scale, cfg.segmenter};
            RegionalResult res;
            {
                py::gil_scoped_release nogil;
                res = regional_pd(f, img, selector(class_id), cfg);
            }
            py::list scales, segs;
            for (const auto& s : res.per_scale) scales.append(from_map(s));
            for (const auto& s : res.segmentations) segs.append(from_labels(s));
            py::dict out;
            out["fused"] = from_map(res.fused);
            out["per_scale"] = scales;
            out["segmentations"] = segs;
            out["class_id"] = res.class_id;
            out["baseline"] = res.baseline;
            out["background_mu"] = res.background.mu;
            return out;
        },
        py::arg("classifier"), py::arg("image"), py::arg("class_id") = py::none(), py::arg("r") = 5,
        py::arg("g") = "sub", py::arg("seed") = 0, py::arg("bandwidth") = 25.0, py::arg("sigma2") = 10.0,
        py::arg("bg_scale") = 256, py::arg("compactness") = 10.0, py::arg("iterations") = 10,
        py::arg("colorspace") = "rgb");

    m.def(
        "pixelwise",
        [](ClassifierHandle& f, const FloatArray& image, std::optional<std::size_t> class_id, std::size_t k,
           std::size_t l, std::size_t samples, const std::string& g, std::uint64_t seed) {
            const auto img = to_image(image);
            BaselineConfig cfg;
            cfg.k = k;
            cfg.l = l;
            cfg.samples = samples;
            cfg.g.kind = parse_difference(g);
            cfg.seed = seed;
            PixelwiseResult res;
            {
                py::gil_scoped_release nogil;
                res = pixelwise_pd(f, img, selector(class_id), cfg);
            }
            py::dict out;
            out["map"] = from_map(res.map);
            out["class_id"] = res.class_id;
            out["baseline"] = res.baseline;
            return out;
        },
        py::arg("classifier"), py::arg("image"), py::arg("class_id") = py::none(), py::arg("k") = 10,
        py::arg("l") = 14, py::arg("samples") = 10, py::arg("g") = "sub", py::arg("seed") = 0);

    m.def(
        "tabular",
        [](std::size_t num_classes, py::function fn, std::vector<double> values,
           std::vector<std::vector<double>> domains, std::vector<std::vector<double>> priors, std::size_t class_id,
           const std::string& g) {
            TabularModel model(num_classes, [fn](std::span<const double> v) {
                return fn(std::vector<double>(v.begin(), v.end())).cast<Probabilities>();
            });
            const auto res = tabular_pd(model, {std::move(values), std::move(domains), std::move(priors)}, class_id,
                                        {parse_difference(g)});
            py::dict out;
            out["saliency"] = res.saliency;
            out["marginal"] = res.marginal;
            out["baseline"] = res.baseline;
            out["calls"] = model.call_count();
            return out;
        },
        py::arg("num_classes"), py::arg("fn"), py::arg("values"), py::arg("domains"), py::arg("priors"),
        py::arg("class_id"), py::arg("g") = "sub");

    m.def(
        "segment",
        [](const FloatArray& image, std::size_t regions, std::uint64_t seed, double compactness, int iterations,
           const std::string& cs) {
            const auto img = to_image(image);
            return from_labels(segment(img, regions, seed, {compactness, iterations, colorspace(cs)}));
        },
        py::arg("image"), py::arg("regions"), py::arg("seed") = 0, py::arg("compactness") = 10.0,
        py::arg("iterations") = 10, py::arg("colorspace") = "rgb");
    m.def("ladder_scale_seed", &ladder_scale_seed, py::arg("seed"), py::arg("j"));

    m.def(
        "sweep",
        [](const FloatArray& map, const py::array_t<bool, py::array::c_style | py::array::forcecast>& truth,
           std::size_t steps, double beta) {
            const auto c = sweep(to_map(map), to_mask(truth), steps, beta);
            py::dict out;
            out["thresholds"] = c.thresholds;
            out["precision"] = c.precision;
            out["recall"] = c.recall;
            out["f_measure"] = c.f_measure;
            return out;
        },
        py::arg("map"), py::arg("truth"), py::arg("steps") = 101, py::arg("beta") = 1.0);

    m.def("load_image", [](const std::filesystem::path& p) { return from_image(load_image(p)); }, py::arg("path"));
    m.def(
        "save_image", [](const FloatArray& image, const std::filesystem::path& p) { save_image(to_image(image), p); },
        py::arg("image"), py::arg("path"));
    m.def("load_saliency", [](const std::filesystem::path& p) { return from_map(load_saliency_raw(p)); },
          py::arg("path"));

    m.def("pixelwise_call_budget", &pixelwise_call_budget, py::arg("width"), py::arg("height"),
          py::arg("samples") = 10);
    m.def(
        "regional_call_budget",
        [](int r) {
            const auto b = regional_call_budget(r);
            return py::make_tuple(b.exact, b.max);
        },
        py::arg("r") = 5);
    m.def("interchange_available", &interchange_available);
}
