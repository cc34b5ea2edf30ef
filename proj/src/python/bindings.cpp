// Python bindings for the main operations: synthetic data, the selective
// scan, directional scan/merge, pixel shuffle, losses, metrics, the
// complexity model and a thin inference wrapper around the full network.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "forma/complexity.hpp"
#include "forma/metrics.hpp"
#include "forma/model.hpp"
#include "forma/trainer.hpp"

namespace py = pybind11;
using namespace forma;

namespace {

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Arr& a) {
    Shape shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] = a.shape(i);
    Tensor t(std::move(shape));
    std::memcpy(t.data(), a.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
    return t;
}

py::array to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::memcpy(a.mutable_data(), t.data(),
                sizeof(double) * static_cast<std::size_t>(t.size()));
    return a;
}

Graph& scratch_graph() {
    static Graph g = [] {
        Graph gg;
        gg.set_recording(false);
        return gg;
    }();
    return g;
}

ModelConfig config_for(const std::string& scale, const std::string& variant) {
    ModelConfig cfg = ModelConfig::from_scale(scale);
    cfg.variant = variant_from_string(variant);
    return cfg;
}

class PyModel {
  public:
    PyModel(const std::string& scale, const std::string& variant, std::uint64_t seed)
        : net_(FormaNet::init(seed, config_for(scale, variant))) {}
    explicit PyModel(FormaNet net) : net_(std::move(net)) {}

    static PyModel load(const std::string& path) { return PyModel(load_model(path)); }
    void save(const std::string& path) const { save_model(path, net_, {}); }

    py::array infer(const Arr& image) const {
        Graph g;
        g.set_recording(false);
        return to_array(net_.forward(g, to_tensor(image)).prob);
    }

    py::array predict(const Arr& image, double tau) const {
        Graph g;
        g.set_recording(false);
        const auto out = net_.forward(g, to_tensor(image));
        return to_array(predict_mask(out.prob, tau));
    }

    std::int64_t parameter_count() const {
        std::int64_t n = 0;
        for (const auto& p : net_.parameters()) n += p.t.size();
        return n;
    }

    std::string variant() const { return variant_name(net_.cfg.variant); }
    std::string scale() const { return net_.cfg.scale; }

  private:
    FormaNet net_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "tampering localization core: scan kernels, data, losses, model";

    m.def(
        "synth_tamper",
        [](std::uint64_t seed, std::int64_t h, std::int64_t w) {
            const Sample s = synth_tamper(seed, h, w);
            const char* kind = s.kind == TamperKind::authentic ? "authentic"
                               : s.kind == TamperKind::splice  ? "splice"
                                                               : "copy_move";
            return py::make_tuple(to_array(s.image), to_array(s.mask), kind);
        },
        py::arg("seed"), py::arg("h") = 64, py::arg("w") = 64,
        "Deterministic synthetic forgery: (image [3,H,W], mask [H,W], kind).");

    m.def(
        "s6_scan",
        [](const Arr& u, const Arr& delta, const Arr& b, const Arr& c,
           const Arr& a_log, const Arr& d_skip, std::int64_t chunk) {
            return to_array(ss2d::s6_scan(scratch_graph(), to_tensor(u),
                                          to_tensor(delta), to_tensor(b), to_tensor(c),
                                          to_tensor(a_log), to_tensor(d_skip), chunk));
        },
        py::arg("u"), py::arg("delta"), py::arg("b"), py::arg("c"), py::arg("a_log"),
        py::arg("d_skip"), py::arg("chunk") = 512,
        "Selective scan over one sequence; chunk size never changes the result.");

    m.def(
        "cross_scan",
        [](const Arr& fmap) {
            const auto seqs = ss2d::cross_scan(scratch_graph(), to_tensor(fmap));
            py::list out;
            for (const auto& s : seqs) out.append(to_array(s.values));
            return out;
        },
        py::arg("fmap"), "Unfold [H,W,C] into the four directional sequences.");

    m.def(
        "cross_merge",
        [](const Arr& fmap, const py::list& values) {
            Tensor origin = to_tensor(fmap);
            auto seqs = ss2d::cross_scan(scratch_graph(), origin);
            if (py::len(values) != 4)
                throw DimensionError("cross_merge expects four sequences");
            for (int i = 0; i < 4; ++i)
                seqs[static_cast<std::size_t>(i)].values =
                    to_tensor(values[i].cast<Arr>());
            return to_array(ss2d::cross_merge(scratch_graph(), seqs));
        },
        py::arg("fmap"), py::arg("values"),
        "Scatter four [L,C] sequences back onto the [H,W,C] grid and sum.");

    m.def(
        "pixel_shuffle",
        [](const Arr& x, int r) {
            return to_array(ops::pixel_shuffle(scratch_graph(), to_tensor(x), r));
        },
        py::arg("x"), py::arg("r"));
    m.def(
        "pixel_unshuffle",
        [](const Arr& x, int r) {
            return to_array(ops::pixel_unshuffle(scratch_graph(), to_tensor(x), r));
        },
        py::arg("x"), py::arg("r"));

    m.def(
        "srm_apply",
        [](const Arr& image) {
            std::mt19937_64 rng(0);
            NoiseExtractor ne = NoiseExtractor::init(rng, ModelConfig::toy_scale());
            return to_array(ne.srm_apply(scratch_graph(), to_tensor(image)));
        },
        py::arg("image"), "Fixed SRM residuals of a [3,H,W] image -> [9,H,W].");

    m.def(
        "dice_loss",
        [](const Arr& prob, const Arr& target) {
            return dice_loss(scratch_graph(), to_tensor(prob), to_tensor(target)).item();
        },
        py::arg("prob"), py::arg("target"));
    m.def(
        "focal_loss",
        [](const Arr& prob, const Arr& target) {
            return focal_loss(scratch_graph(), to_tensor(prob), to_tensor(target)).item();
        },
        py::arg("prob"), py::arg("target"));
    m.def(
        "f1_iou",
        [](const Arr& pred, const Arr& truth) {
            const PairScore s = f1_iou(to_tensor(pred), to_tensor(truth));
            return py::make_tuple(s.f1, s.iou);
        },
        py::arg("pred"), py::arg("truth"));

    m.def(
        "complexity",
        [](const std::string& scale, const std::string& variant, std::int64_t h,
           std::int64_t w, double flops_per_mac) {
            const auto rep =
                complexity_report(config_for(scale, variant), h, w, flops_per_mac);
            py::dict d;
            d["total_params"] = rep.total_params;
            d["total_macs"] = rep.total_macs;
            d["total_flops"] = rep.total_flops();
            py::list layers;
            for (const auto& l : rep.layers) {
                py::dict e;
                e["name"] = l.name;
                e["params"] = l.params;
                e["macs"] = l.macs;
                layers.append(e);
            }
            d["layers"] = layers;
            return d;
        },
        py::arg("scale") = "paper", py::arg("variant") = "full", py::arg("h") = 512,
        py::arg("w") = 512, py::arg("flops_per_mac") = 1.0);

    py::class_<PyModel>(m, "Model")
        .def(py::init<const std::string&, const std::string&, std::uint64_t>(),
             py::arg("scale") = "toy", py::arg("variant") = "full", py::arg("seed") = 0)
        .def_static("load", &PyModel::load, py::arg("path"))
        .def("save", &PyModel::save, py::arg("path"))
        .def("infer", &PyModel::infer, py::arg("image"),
             "Tampering probability map [H,W] for a [3,H,W] image in [0,1].")
        .def("predict", &PyModel::predict, py::arg("image"), py::arg("tau") = 0.5)
        .def("parameter_count", &PyModel::parameter_count)
        .def_property_readonly("variant", &PyModel::variant)
        .def_property_readonly("scale", &PyModel::scale);

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
}
