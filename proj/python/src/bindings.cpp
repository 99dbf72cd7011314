// Python view of the core library. Maps travel as 2-D float64/uint8 arrays,
// centroid lists as (n, 2) float64 arrays.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tgc/error.hpp"
#include "tgc/grad.hpp"
#include "tgc/graph.hpp"
#include "tgc/losses.hpp"
#include "tgc/maskio.hpp"
#include "tgc/spectrum.hpp"
#include "tgc/synth.hpp"
#include "tgc/trainer.hpp"

namespace py = pybind11;
using namespace tgc;

namespace {

using Grid = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

ProbMap to_map(const Grid& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    const auto h = static_cast<int>(a.shape(0));
    const auto w = static_cast<int>(a.shape(1));
    return ProbMap(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

LabelMask to_mask(const Labels& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    const auto h = static_cast<int>(a.shape(0));
    const auto w = static_cast<int>(a.shape(1));
    std::vector<std::uint8_t> v(a.data(), a.data() + a.size());
    for (auto& x : v) x = x ? 1 : 0;
    return LabelMask(w, h, std::move(v));
}

Grid from_map(const ProbMap& p) {
    Grid out({p.height(), p.width()});
    std::copy(p.values().begin(), p.values().end(), out.mutable_data());
    return out;
}

Labels from_mask(const LabelMask& m) {
    Labels out({m.height(), m.width()});
    std::copy(m.labels().begin(), m.labels().end(), out.mutable_data());
    return out;
}

std::vector<Point> to_points(const Grid& a) {
    if (a.size() == 0) return {};
    if (a.ndim() != 2 || a.shape(1) != 2) throw ShapeError("centroids must be an (n, 2) array");
    std::vector<Point> out(static_cast<std::size_t>(a.shape(0)));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {a.at(i, 0), a.at(i, 1)};
    return out;
}

Grid from_points(const std::vector<Point>& c) {
    Grid out({static_cast<py::ssize_t>(c.size()), py::ssize_t{2}});
    auto r = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < c.size(); ++i) {
        r(i, 0) = c[i].x;
        r(i, 1) = c[i].y;
    }
    return out;
}

TgcWeights weights(double w_spec, double w_conn, double w_adj, double tau, double alpha) {
    TgcWeights w;
    w.w_spec = w_spec;
    w.w_conn = w_conn;
    w.w_adj = w_adj;
    w.tau = tau;
    w.alpha = alpha;
    return w;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Topology graph consistency core";

    static py::exception<Error> base(m, "TgcError", PyExc_RuntimeError);
    static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
    static py::exception<IoError> io(m, "IoError", base.ptr());
    static py::exception<NumericalError> numerical(m, "NumericalError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            PyErr_SetString(validation.ptr(), e.what());
        } catch (const IoError& e) {
            PyErr_SetString(io.ptr(), e.what());
        } catch (const NumericalError& e) {
            PyErr_SetString(numerical.ptr(), e.what());
        } catch (const Error& e) {
            PyErr_SetString(base.ptr(), e.what());
        }
    });

    m.def("load_map", [](const std::filesystem::path& p) { return from_map(load_map(p)); }, py::arg("path"));
    m.def("threshold", [](const Grid& p, double t) { return from_mask(threshold(to_map(p), t)); }, py::arg("p"),
          py::arg("t") = 0.5);
    m.def(
        "connected_components",
        [](const Labels& mask, int connectivity, std::size_t min_area) {
            const RegionSet rs = connected_components(to_mask(mask), static_cast<Connectivity>(connectivity), min_area);
            py::list out;
            for (const auto& r : rs.regions) out.append(py::cast(r.pixels));
            return out;
        },
        py::arg("mask"), py::arg("connectivity") = 8, py::arg("min_area") = 1,
        "Regions as lists of flat pixel indices, ids in raster order.");
    m.def(
        "centroids",
        [](const Grid& p, double t, std::size_t min_area, const std::string& mode) {
            const ProbMap map = to_map(p);
            const RegionSet rs = connected_components(threshold(map, t), Connectivity::eight, min_area);
            if (mode != "soft" && mode != "hard") throw ValidationError("mode must be 'soft' or 'hard'");
            return from_points(centroids(rs, map, mode == "soft" ? CentroidMode::soft : CentroidMode::hard));
        },
        py::arg("p"), py::arg("t") = 0.5, py::arg("min_area") = 8, py::arg("mode") = "soft");
    m.def(
        "dice_jaccard",
        [](const Labels& a, const Labels& b) {
            const Overlap o = dice_jaccard(to_mask(a), to_mask(b));
            return py::make_tuple(o.dice, o.jaccard);
        },
        py::arg("pred"), py::arg("ref"));

    py::class_<RegionGraph>(m, "RegionGraph")
        .def_property_readonly("centroids", [](const RegionGraph& g) { return from_points(g.centroids); })
        .def_readonly("adjacency", &RegionGraph::adjacency)
        .def_readonly("degree", &RegionGraph::degree)
        .def_readonly("laplacian", &RegionGraph::laplacian)
        .def_readonly("k", &RegionGraph::k)
        .def_readonly("sigma", &RegionGraph::sigma)
        .def("__len__", &RegionGraph::size);

    m.def("estimate_sigma", [](const Grid& c) { return estimate_sigma(to_points(c)); }, py::arg("centroids"));
    m.def(
        "build_graph",
        [](const Grid& c, int k, std::optional<double> sigma) { return build_graph(to_points(c), {k, sigma}); },
        py::arg("centroids"), py::arg("k") = 5, py::arg("sigma") = py::none());
    m.def(
        "eig_sym",
        [](const Eigen::MatrixXd& a) {
            const Spectrum s = eig_sym(a);
            return py::make_tuple(s.eigenvalues, s.eigenvectors);
        },
        py::arg("a"));
    m.def("hard_component_count", &hard_component_count, py::arg("adjacency"), py::arg("w_eps") = 1e-12);
    m.def(
        "soft_component_count",
        [](const std::vector<double>& ev, double tau, double alpha) { return soft_component_count(ev, tau, alpha); },
        py::arg("eigenvalues"), py::arg("tau") = 0.05, py::arg("alpha") = 200.0);

    py::class_<LossBreakdown>(m, "LossBreakdown")
        .def_readonly("spec", &LossBreakdown::spec)
        .def_readonly("conn", &LossBreakdown::conn)
        .def_readonly("adj", &LossBreakdown::adj)
        .def_readonly("total", &LossBreakdown::total)
        .def_property_readonly("flags", [](const LossBreakdown& l) { return l.flags.names(); })
        .def("__repr__", [](const LossBreakdown& l) { return loss_to_json(l).dump(); });

    m.def(
        "tgc_loss",
        [](const RegionGraph& gp, const RegionGraph& gr, double w_spec, double w_conn, double w_adj, double tau,
           double alpha) { return tgc_loss(gp, gr, weights(w_spec, w_conn, w_adj, tau, alpha)); },
        py::arg("gp"), py::arg("gr"), py::arg("w_spec") = 1.0, py::arg("w_conn") = 1.0, py::arg("w_adj") = 1.0,
        py::arg("tau") = 0.05, py::arg("alpha") = 200.0);
    m.def(
        "tgc_grad_centroids",
        [](const RegionGraph& gp, const RegionGraph& gr, double w_spec, double w_conn, double w_adj, double tau,
           double alpha) {
            const CentroidGrad g = tgc_grad_centroids(gp, gr, weights(w_spec, w_conn, w_adj, tau, alpha));
            return py::make_tuple(from_points(g.grad), g.loss, g.degenerate_spectrum);
        },
        py::arg("gp"), py::arg("gr"), py::arg("w_spec") = 1.0, py::arg("w_conn") = 1.0, py::arg("w_adj") = 1.0,
        py::arg("tau") = 0.05, py::arg("alpha") = 200.0, "Returns (grad (n, 2), LossBreakdown, degenerate_spectrum).");

    m.def("dice_ce_loss", [](const Grid& p, const Labels& y) { return dice_ce_loss(to_map(p), to_mask(y)); },
          py::arg("p"), py::arg("y"));
    m.def(
        "rampup_weight",
        [](int epoch, double lambda_max, int ramp_epochs) { return rampup_weight(epoch, {lambda_max, ramp_epochs}); },
        py::arg("epoch"), py::arg("lambda_max") = 0.1, py::arg("ramp_epochs") = 1);

    py::class_<GradCheckReport>(m, "GradCheckReport")
        .def_readonly("max_rel_err", &GradCheckReport::max_rel_err)
        .def_readonly("h", &GradCheckReport::h);
    m.def(
        "run_gradcheck",
        [](std::uint64_t seed, int n_instances, double h) {
            GradCheckOptions o;
            o.seed = seed;
            o.n_instances = n_instances;
            o.h = h;
            return gradcheck_to_json(run_gradcheck(o)).dump();
        },
        py::arg("seed") = 0, py::arg("n_instances") = 30, py::arg("h") = 1e-5, "Suite report as a JSON string.");

    m.def(
        "generate_scene",
        [](std::uint64_t seed, int index, int size, int min_blobs, int max_blobs, double noise_sd) {
            SceneSpec spec;
            spec.seed = seed;
            spec.width = spec.height = size;
            spec.min_blobs = min_blobs;
            spec.max_blobs = max_blobs;
            spec.noise_sd = noise_sd;
            const Sample s = generate_scene(spec, index);
            return py::make_tuple(from_map(s.image), from_mask(s.mask), s.blobs_placed);
        },
        py::arg("seed") = 0, py::arg("index") = 0, py::arg("size") = 64, py::arg("min_blobs") = 2,
        py::arg("max_blobs") = 5, py::arg("noise_sd") = 0.12, "Returns (image, mask, blobs_placed).");
    m.def(
        "featurize",
        [](const Grid& image) {
            const FeatureStack f = featurize(to_map(image));
            py::array_t<double> out({f.height, f.width, kFeatureCount});
            std::copy(f.data.begin(), f.data.end(), out.mutable_data());
            return out;
        },
        py::arg("image"), "(H, W, 7) feature stack.");
    m.def(
        "forward",
        [](const std::array<double, kFeatureCount>& w, const Grid& image) {
            PixelModel model;
            model.weights = w;
            return from_map(forward(model, featurize(to_map(image))));
        },
        py::arg("weights"), py::arg("image"));
}
