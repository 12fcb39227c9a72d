#include "s2vr/errors.hpp"
#include "s2vr/features.hpp"
#include "s2vr/geometry.hpp"
#include "s2vr/graph.hpp"
#include "s2vr/io.hpp"
#include "s2vr/kernels.hpp"
#include "s2vr/metrics.hpp"
#include "s2vr/model.hpp"
#include "s2vr/solver.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace s2vr;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

model::OutputMode mode_of(const std::string& s) {
    return model::parse_mode(s);
}

model::ModelOptions options_of(const std::vector<double>& bandwidths, std::optional<double> rho, bool center_target,
                               bool auto_epsilon) {
    model::ModelOptions o;
    if (!bandwidths.empty()) o.bandwidths = bandwidths;
    o.rho = rho;
    o.center_target = center_target;
    o.auto_epsilon = auto_epsilon;
    return o;
}

}  // namespace

PYBIND11_MODULE(_s2vr, m) {
    m.doc() = "Structured multi-output kernel regression (samples are matrix columns)";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<DegenerateError>(m, "DegenerateError", base.ptr());
    py::register_exception<SolverError>(m, "SolverError", base.ptr());
    py::register_exception<GeometryError>(m, "GeometryError", base.ptr());
    py::register_exception<RenderError>(m, "RenderError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<ModeError>(m, "ModeError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    // kernels
    m.def("gaussian_kernel", &kernels::gaussian_kernel, py::arg("X"), py::arg("X2"), py::arg("sigma"));
    m.def("center_kernel", &kernels::center_kernel, py::arg("K"));
    m.def("alignment", &kernels::alignment, py::arg("K"), py::arg("K_target"));
    m.def("target_kernel", &kernels::target_kernel, py::arg("Y"), py::arg("center") = false);
    m.def("bandwidth_grid", &kernels::bandwidth_grid, py::arg("count") = 10, py::arg("lo") = 0.1, py::arg("hi") = 1.0);
    m.def(
        "align_weights",
        [](const Matrix& X, const std::vector<double>& bandwidths, const Matrix& K_target) {
            const auto a = kernels::align_weights(kernels::gaussian_bank(X, bandwidths), K_target);
            py::dict d;
            d["weights"] = Vector(a.weights.values());
            d["base_alignment"] = a.base_alignment;
            d["combined_alignment"] = a.combined_alignment;
            return d;
        },
        py::arg("X"), py::arg("bandwidths"), py::arg("K_target"),
        "Nonnegative unit-norm Gaussian kernel weights maximizing alignment with K_target.");
    m.def(
        "solve_nonneg_qp",
        [](const Matrix& V, const Vector& alpha) { return kernels::solve_nonneg_qp(V, alpha).q; }, py::arg("V"),
        py::arg("alpha"));

    // graph
    m.def(
        "laplacian",
        [](const Matrix& Y, std::optional<double> rho) {
            const auto g = graph::build_laplacian(Y, rho);
            return py::make_tuple(g.laplacian, g.rho);
        },
        py::arg("Y"), py::arg("rho") = py::none(), "(G, rho) for the output graph over the columns of Y.");

    // solver
    py::class_<solver::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("tau", &solver::TrainConfig::tau)
        .def_readwrite("gamma", &solver::TrainConfig::gamma)
        .def_readwrite("lambda_", &solver::TrainConfig::lambda)
        .def_readwrite("epsilon", &solver::TrainConfig::epsilon)
        .def_readwrite("max_outer", &solver::TrainConfig::max_outer)
        .def_readwrite("max_irwls", &solver::TrainConfig::max_irwls)
        .def_readwrite("max_s_iters", &solver::TrainConfig::max_s_iters)
        .def_readwrite("tol", &solver::TrainConfig::tol)
        .def_readwrite("smoothing", &solver::TrainConfig::smoothing)
        .def_readwrite("learn_structure", &solver::TrainConfig::learn_structure)
        .def("validate", &solver::TrainConfig::validate);

    m.def(
        "objective",
        [](const Matrix& beta, const Matrix& S, const Matrix& K, const Matrix& G, const Matrix& Y,
           const solver::TrainConfig& cfg) { return solver::objective(beta, S, K, G, Y, cfg).total; },
        py::arg("beta"), py::arg("S"), py::arg("K"), py::arg("G"), py::arg("Y"), py::arg("config"));
    m.def(
        "solve",
        [](const Matrix& K, const Matrix& G, const Matrix& Y, const solver::TrainConfig& cfg) {
            const auto s = solver::fit(K, G, Y, cfg);
            py::dict d;
            d["beta"] = s.beta;
            d["S"] = s.S;
            d["objective_trace"] = s.objective_trace;
            d["outer_trace"] = s.outer_trace;
            d["outer_iterations"] = s.outer_iterations;
            return d;
        },
        py::arg("K"), py::arg("G"), py::arg("Y"), py::arg("config"), "Alternating solver on a precomputed kernel.");

    // model
    py::class_<model::S2VRModel>(m, "Model")
        .def("predict", &model::S2VRModel::predict, py::arg("X"))
        .def_property_readonly("outputs", &model::S2VRModel::outputs)
        .def_property_readonly("feature_dim", &model::S2VRModel::feature_dim)
        .def_property_readonly("support_size", &model::S2VRModel::support_size)
        .def_property_readonly("mode", [](const model::S2VRModel& mm) { return std::string(model::to_string(mm.mode)); })
        .def_property_readonly("S", [](const model::S2VRModel& mm) { return mm.params.S; })
        .def_property_readonly("beta", [](const model::S2VRModel& mm) { return mm.params.beta; })
        .def_property_readonly("omega", [](const model::S2VRModel& mm) { return Vector(mm.params.omega.values()); })
        .def_property_readonly("bandwidths", [](const model::S2VRModel& mm) { return mm.bandwidths; })
        .def_property_readonly("output_mean", [](const model::S2VRModel& mm) { return mm.output_mean; })
        .def_property_readonly("rho", [](const model::S2VRModel& mm) { return mm.rho; })
        .def("to_bytes",
             [](const model::S2VRModel& mm) {
                 const auto b = model::serialize(mm);
                 return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
             })
        .def_static("from_bytes",
                    [](const py::bytes& data) {
                        const std::string s = data;
                        return model::deserialize(std::span<const std::uint8_t>(
                            reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
                    })
        .def("save", [](const model::S2VRModel& mm, const std::string& path) { model::save(mm, path); })
        .def_static("load", &model::load, py::arg("path"));

    m.def(
        "fit",
        [](const Matrix& X, const Matrix& Y, const solver::TrainConfig& cfg, const std::string& mode,
           const std::vector<double>& bandwidths, std::optional<double> rho, bool center_target, bool auto_epsilon) {
            return model::fit_model(X, Y, cfg, mode_of(mode), options_of(bandwidths, rho, center_target, auto_epsilon));
        },
        py::arg("X"), py::arg("Y"), py::arg("config") = solver::TrainConfig{}, py::arg("mode") = "joint",
        py::arg("bandwidths") = std::vector<double>{}, py::arg("rho") = py::none(), py::arg("center_target") = false,
        py::arg("auto_epsilon") = false);
    m.def(
        "fit_baseline",
        [](const Matrix& X, const Matrix& Y, const solver::TrainConfig& cfg, const std::string& mode,
           const std::vector<double>& bandwidths) {
            return model::fit_baseline_svr(X, Y, cfg, mode_of(mode), options_of(bandwidths, std::nullopt, false, false));
        },
        py::arg("X"), py::arg("Y"), py::arg("config") = solver::TrainConfig{}, py::arg("mode") = "joint",
        py::arg("bandwidths") = std::vector<double>{});

    // geometry
    m.def(
        "generate_spine",
        [](std::uint64_t seed, int terms, double max_amplitude, double rotation_jitter_deg) {
            geometry::SpineSampler s;
            s.terms = terms;
            s.max_amplitude = max_amplitude;
            s.rotation_jitter_deg = rotation_jitter_deg;
            return geometry::to_label(geometry::generate_spine(geometry::random_spine_params(seed, s)));
        },
        py::arg("seed"), py::arg("terms") = geometry::SpineSampler{}.terms,
        py::arg("max_amplitude") = geometry::SpineSampler{}.max_amplitude,
        py::arg("rotation_jitter_deg") = geometry::SpineSampler{}.rotation_jitter_deg,
        "139-value label of a random spine: h_1..h_68, v_1..v_68, TA, MA, BA.");
    m.def(
        "cobb_angles",
        [](const Vector& label) {
            const auto a = geometry::cobb_from_landmarks(geometry::from_label(label).vertebrae);
            return py::make_tuple(a.ta, a.ma, a.ba);
        },
        py::arg("label"), "(TA, MA, BA) measured on the landmarks of a 139-value label.");
    m.def("consistency_gap", &geometry::consistency_gap, py::arg("prediction"));

    // features
    m.def(
        "render",
        [](const Vector& label, int width, int height, double noise, std::uint64_t seed) {
            features::RenderOptions o;
            o.width = width;
            o.height = height;
            o.noise_level = noise;
            o.seed = seed;
            const auto img = features::render(geometry::from_label(label), o);
            Eigen::MatrixXd out(img.height, img.width);
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    out(y, x) = img.pixels[static_cast<std::size_t>(y) * img.width + x];
            return out;
        },
        py::arg("label"), py::arg("width") = 64, py::arg("height") = 256, py::arg("noise") = 0.02, py::arg("seed") = 0,
        "Rendered image as a height x width array.");
    m.def(
        "hog",
        [](const Eigen::MatrixXd& image, int cell, int block, int bins, double clip) {
            features::GrayImage img(static_cast<int>(image.cols()), static_cast<int>(image.rows()));
            for (Eigen::Index y = 0; y < image.rows(); ++y)
                for (Eigen::Index x = 0; x < image.cols(); ++x)
                    img.pixels[static_cast<std::size_t>(y * image.cols() + x)] = image(y, x);
            features::HogOptions o;
            o.cell = cell;
            o.block = block;
            o.bins = bins;
            o.clip = clip;
            const auto h = features::hog(img, o);
            return Vector(Eigen::Map<const Vector>(h.values.data(), static_cast<Eigen::Index>(h.values.size())));
        },
        py::arg("image"), py::arg("cell") = 8, py::arg("block") = 2, py::arg("bins") = 9, py::arg("clip") = 0.2);

    // metrics
    m.def("rrmse", &metrics::rrmse, py::arg("predicted"), py::arg("truth"), py::arg("train_mean"));
    m.def("pearson", &metrics::pearson, py::arg("a"), py::arg("b"));

    // io
    m.def("read_features", &io::read_features, py::arg("path"));
    m.def("read_annotations", &io::read_annotations, py::arg("path"));
}
