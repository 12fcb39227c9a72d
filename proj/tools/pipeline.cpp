#include "pipeline.hpp"

#include "s2vr/errors.hpp"
#include "s2vr/graph.hpp"
#include "s2vr/hash.hpp"
#include "s2vr/io.hpp"
#include "s2vr/kernels.hpp"
#include "s2vr/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>

namespace s2vr::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace {

const std::array<const char*, 3> kAngleNames = {"TA", "MA", "BA"};
const char* const kColumnAngles = "Angles";
const char* const kColumnJoint = "Angles & Landmarks";

// Canonical "key=value" lines fed to FNV-1a; paths are deliberately left out so the same
// configuration reproduces the same bytes wherever it writes.
class Digest {
public:
    explicit Digest(std::string_view command) { add("command", command); }
    Digest& add(std::string_view key, std::string_view value) {
        h_.update(key);
        h_.update("=");
        h_.update(value);
        h_.update("\n");
        return *this;
    }
    Digest& add(std::string_view key, double value) { return add(key, io::format_double(value)); }
    Digest& add(std::string_view key, std::int64_t value) { return add(key, std::to_string(value)); }
    Digest& add(std::string_view key, std::uint64_t value) { return add(key, std::to_string(value)); }
    Digest& add(std::string_view key, int value) { return add(key, static_cast<std::int64_t>(value)); }
    Digest& add(std::string_view key, bool value) { return add(key, std::string_view(value ? "1" : "0")); }
    Digest& file(std::string_view key, const std::string& path) { return add(key, io::file_digest(path)); }
    [[nodiscard]] std::uint64_t value() const { return h_.digest(); }
    [[nodiscard]] std::string hex() const { return h_.hex(); }

private:
    Fnv1a h_;
};

void add_training(Digest& d, const PipelineConfig& c) {
    const auto& t = c.train;
    d.add("tau", t.tau).add("gamma", t.gamma).add("lambda", t.lambda).add("epsilon", t.epsilon);
    d.add("max_outer", t.max_outer).add("max_irwls", t.max_irwls).add("max_s_iters", t.max_s_iters);
    d.add("tol", t.tol).add("smoothing", t.smoothing).add("learn_structure", t.learn_structure);
    d.add("bandwidth_count", c.bandwidth_count).add("bandwidth_lo", c.bandwidth_lo).add("bandwidth_hi", c.bandwidth_hi);
    d.add("rho", c.rho ? io::format_double(*c.rho) : std::string("auto"));
    d.add("center_target", c.center_target).add("auto_epsilon", c.auto_epsilon);
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void ensure_dir(const std::string& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

void ensure_parent(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) ensure_dir(parent.string());
}

std::vector<std::string> list_images(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("image directory '" + dir + "' does not exist");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

struct Dataset {
    Matrix X;
    Matrix Y;
};

Dataset load_dataset(const PipelineConfig& c) {
    Dataset d;
    d.X = io::read_features(c.features);
    d.Y = io::read_annotations(c.annotations);
    if (d.X.cols() != d.Y.cols()) {
        throw ShapeError("'" + c.features + "' has " + std::to_string(d.X.cols()) + " samples but '" + c.annotations +
                         "' has " + std::to_string(d.Y.cols()));
    }
    return d;
}

std::vector<std::string> output_columns(model::OutputMode mode, Eigen::Index q) {
    if (q == geometry::kLabelSize) return io::label_columns();
    if (mode == model::OutputMode::angles_only && q == geometry::kAngles) return io::angle_columns();
    std::vector<std::string> cols;
    for (Eigen::Index i = 0; i < q; ++i) cols.push_back("y_" + std::to_string(i + 1));
    return cols;
}

void flag_warnings(const solver::SolverFlags& f, CommandResult& r) {
    if (f.line_search_failed) r.warnings.emplace_back("solver: line search made no progress before convergence");
    if (f.regularized_solve) r.warnings.emplace_back("solver: singular structure update solved with a ridge");
    if (f.max_iterations_reached) r.warnings.emplace_back("solver: iteration limit reached before the tolerance");
}

json number(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

json per_angle(const std::array<double, 3>& v) {
    json o = json::object();
    for (std::size_t a = 0; a < 3; ++a) o[kAngleNames[a]] = number(v[a]);
    return o;
}

double mean3(const std::array<double, 3>& v) {
    return (v[0] + v[1] + v[2]) / 3.0;
}

json gap_json(const metrics::GapSummary& g) {
    json o;
    o["median"] = per_angle(g.median);
    o["mean"] = per_angle(g.mean);
    o["overall_median"] = number(g.overall_median);
    return o;
}

// The signed-sum ratio has a zero denominator whenever the reference mean is the test mean,
// e.g. when a model is scored on its own training set; report it as missing then.
double signed_sum_or_nan(const Vector& predicted, const Vector& truth, double mean) {
    try {
        return metrics::rrmse_signed_sums(predicted, truth, mean);
    } catch (const DegenerateError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

std::string cell(double v) {
    return std::isfinite(v) ? io::format_double(v) : std::string("NA");
}

void write_reports(const PipelineConfig& c, const json& report, const std::string& table, CommandResult& r) {
    ensure_dir(c.reports);
    const std::string csv = (fs::path(c.reports) / "report.csv").string();
    const std::string js = (fs::path(c.reports) / "report.json").string();
    io::write_file(csv, table);
    io::write_file(js, report.dump(2) + "\n");
    r.outputs.push_back(csv);
    r.outputs.push_back(js);
}

std::string render_report_table(const std::string& pipeline, const std::string& protocol,
                                const std::vector<std::string>& methods, const std::vector<std::array<double, 2>>& rrmse,
                                const std::vector<std::array<double, 2>>& corr) {
    std::string t = "# s2vr report v1\n# pipeline " + pipeline + "\n# protocol " + protocol + "\n";
    t += "# rrmse_pct: mean angle RRMSE in percent; correlation: mean Pearson over TA, MA, BA\n";
    t += std::string("method,metric,") + kColumnAngles + "," + kColumnJoint + "\n";
    for (std::size_t m = 0; m < methods.size(); ++m)
        t += methods[m] + ",rrmse_pct," + cell(rrmse[m][0]) + "," + cell(rrmse[m][1]) + "\n";
    for (std::size_t m = 0; m < methods.size(); ++m)
        t += methods[m] + ",correlation," + cell(corr[m][0]) + "," + cell(corr[m][1]) + "\n";
    return t;
}

}  // namespace

model::ModelOptions PipelineConfig::model_options() const {
    model::ModelOptions o;
    o.bandwidths = kernels::bandwidth_grid(bandwidth_count, bandwidth_lo, bandwidth_hi);
    o.rho = rho;
    o.center_target = center_target;
    o.auto_epsilon = auto_epsilon;
    return o;
}

std::string image_path(const std::string& dir, std::size_t index) {
    char name[32];
    std::snprintf(name, sizeof name, "spine_%06zu.pgm", index);
    return (fs::path(dir) / name).string();
}

CommandResult cmd_generate(const PipelineConfig& c, std::ostream& out) {
    if (c.samples < 0) throw ParameterError("generate: samples must be >= 0");
    Digest d("generate");
    d.add("samples", c.samples).add("seed", c.seed);
    const auto& s = c.sampler;
    d.add("terms", s.terms).add("max_amplitude", s.max_amplitude).add("phase_jitter", s.phase_jitter);
    d.add("rotation_jitter", s.rotation_jitter_deg).add("landmark_noise", s.landmark_noise);
    const auto& r = c.render;
    d.add("width", r.width).add("height", r.height).add("noise", r.noise_level).add("background", r.background);
    d.add("foreground", r.foreground).add("supersample", r.supersample);

    CommandResult result;
    result.pipeline = d.hex();

    ensure_parent(c.annotations);
    ensure_dir(c.images);
    for (const auto& old : list_images(c.images)) fs::remove(old);

    Matrix labels(geometry::kLabelSize, c.samples);
    for (int i = 0; i < c.samples; ++i) {
        const std::uint64_t sample_seed = splitmix(c.seed ^ splitmix(static_cast<std::uint64_t>(i)));
        const geometry::SpineAnnotation a = geometry::generate_spine(geometry::random_spine_params(sample_seed, s));
        labels.col(i) = geometry::to_label(a);
        features::RenderOptions ro = c.render;
        ro.seed = splitmix(sample_seed);
        const std::string path = image_path(c.images, static_cast<std::size_t>(i));
        io::write_pgm(path, features::render(a, ro), "s2vr pipeline " + result.pipeline + " sample " + std::to_string(i));
    }
    io::write_table(c.annotations, io::annotation_table(labels, result.pipeline));
    result.outputs.push_back(c.annotations);
    result.outputs.push_back(c.images);
    out << "generated " << c.samples << " spines -> " << c.annotations << ", " << c.images << "/\n";
    return result;
}

CommandResult cmd_features(const PipelineConfig& c, std::ostream& out) {
    const auto files = list_images(c.images);
    Digest d("features");
    d.add("cell", c.hog.cell).add("block", c.hog.block).add("bins", c.hog.bins).add("clip", c.hog.clip);
    for (const auto& f : files) d.file("image", f);

    CommandResult result;
    result.pipeline = d.hex();

    features::HogLayout layout;
    Matrix X;
    if (files.empty()) {
        layout = features::hog_layout(c.render.width, c.render.height, c.hog);
        X.resize(static_cast<Eigen::Index>(layout.length()), 0);
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
        const features::GrayImage img = io::read_pgm(files[i]);
        features::HogDescriptor h;
        try {
            h = features::hog(img, c.hog);
        } catch (const ShapeError& e) {
            throw ShapeError(files[i] + ": " + e.what());
        }
        if (i == 0) {
            layout = h.layout;
            X.resize(static_cast<Eigen::Index>(layout.length()), static_cast<Eigen::Index>(files.size()));
        } else if (h.values.size() != layout.length()) {
            throw ShapeError(files[i] + ": image size differs from " + files[0]);
        }
        X.col(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Vector>(h.values.data(), static_cast<Eigen::Index>(h.values.size()));
    }
    ensure_parent(c.features);
    io::write_table(c.features, io::feature_table(X, layout, result.pipeline));
    result.outputs.push_back(c.features);
    out << "extracted " << files.size() << " descriptors of length " << layout.length() << " -> " << c.features
        << "\n";
    return result;
}

CommandResult cmd_align(const PipelineConfig& c, std::ostream& out) {
    const Dataset data = load_dataset(c);
    Digest d("align");
    d.add("mode", model::to_string(c.mode)).add("center_target", c.center_target);
    d.add("bandwidth_count", c.bandwidth_count).add("bandwidth_lo", c.bandwidth_lo).add("bandwidth_hi", c.bandwidth_hi);
    d.file("features", c.features).file("annotations", c.annotations);
    CommandResult result;
    result.pipeline = d.hex();

    const Matrix Y = model::select_outputs(data.Y, c.mode);
    if (data.X.cols() < 2) throw DataError("align: need at least 2 samples");
    const model::FeatureScaler scaler = model::FeatureScaler::fit(data.X);
    const Matrix Yc = Y.colwise() - Y.rowwise().mean();
    const auto bandwidths = c.model_options().bandwidths;
    const kernels::AlignmentResult a =
        kernels::align_weights(kernels::gaussian_bank(scaler.apply(data.X), bandwidths), kernels::target_kernel(Yc, c.center_target));

    json report;
    report["format"] = "s2vr-alignment";
    report["version"] = 1;
    report["pipeline"] = result.pipeline;
    report["mode"] = std::string(model::to_string(c.mode));
    json rows = json::array();
    out << "sigma,base_alignment,omega\n";
    for (std::size_t m = 0; m < bandwidths.size(); ++m) {
        const auto mi = static_cast<Eigen::Index>(m);
        rows.push_back({{"sigma", bandwidths[m]}, {"base_alignment", a.base_alignment[mi]}, {"omega", a.weights[mi]}});
        out << io::format_double(bandwidths[m]) << "," << io::format_double(a.base_alignment[mi]) << ","
            << io::format_double(a.weights[mi]) << "\n";
    }
    report["kernels"] = rows;
    report["combined_alignment"] = a.combined_alignment;
    out << "combined alignment " << io::format_double(a.combined_alignment) << "\n";

    ensure_dir(c.reports);
    const std::string path = (fs::path(c.reports) / "alignment.json").string();
    io::write_file(path, report.dump(2) + "\n");
    result.outputs.push_back(path);
    return result;
}

CommandResult cmd_train(const PipelineConfig& c, std::ostream& out) {
    const Dataset data = load_dataset(c);
    Digest d("train");
    d.add("mode", model::to_string(c.mode));
    add_training(d, c);
    d.file("features", c.features).file("annotations", c.annotations);
    CommandResult result;
    result.pipeline = d.hex();

    model::FitResult fit = model::fit_model_detailed(data.X, data.Y, c.train, c.mode, c.model_options());
    fit.model.pipeline = d.value();
    ensure_parent(c.model);
    model::save(fit.model, c.model);
    result.outputs.push_back(c.model);
    flag_warnings(fit.state.flags, result);

    const auto& m = fit.model;
    std::ostringstream log;
    log << "# s2vr train-log v1\n# pipeline " << result.pipeline << "\n";
    log << "mode " << model::to_string(m.mode) << "\n";
    log << "samples " << data.X.cols() << " outputs " << m.outputs() << " features " << m.feature_dim() << " support "
        << m.support_size() << "\n";
    log << "rho " << io::format_double(m.rho) << " epsilon " << io::format_double(m.config.epsilon) << "\n";
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < m.bandwidths.size(); ++k) {
        const double w = m.params.omega[static_cast<Eigen::Index>(k)];
        sum_sq += w * w;
        log << "omega sigma=" << io::format_double(m.bandwidths[k]) << " weight=" << io::format_double(w) << "\n";
    }
    log << "omega_sum_squares " << io::format_double(sum_sq) << "\n";
    log << "combined_alignment " << io::format_double(fit.alignment.combined_alignment) << "\n";
    log << "initial objective=" << io::format_double(fit.state.outer_trace.front()) << "\n";
    for (std::size_t k = 1; k < fit.state.outer_trace.size(); ++k) {
        log << "outer " << k << " objective=" << io::format_double(fit.state.outer_trace[k]) << "\n";
    }
    for (std::size_t k = 0; k < fit.state.objective_trace.size(); ++k) {
        log << "step " << k << " objective=" << io::format_double(fit.state.objective_trace[k]) << "\n";
    }
    log << "iterations outer=" << fit.state.outer_iterations << " irwls=" << fit.state.irwls_iterations
        << " s=" << fit.state.s_iterations << "\n";
    for (const auto& w : result.warnings) log << "warning " << w << "\n";

    const std::string log_path = c.log.empty() ? c.model + ".log" : c.log;
    ensure_parent(log_path);
    io::write_file(log_path, log.str());
    result.outputs.push_back(log_path);
    out << "trained " << model::to_string(m.mode) << " model on " << data.X.cols() << " samples ("
        << fit.state.outer_iterations << " outer iterations, objective "
        << io::format_double(fit.state.outer_trace.back()) << ") -> " << c.model << "\n";
    return result;
}

CommandResult cmd_predict(const PipelineConfig& c, std::ostream& out) {
    const model::S2VRModel m = model::load(c.model);
    const Matrix X = io::read_features(c.features);
    if (X.rows() != m.feature_dim()) {
        throw ShapeError("'" + c.features + "' has descriptors of length " + std::to_string(X.rows()) +
                         " but the model in '" + c.model + "' expects " + std::to_string(m.feature_dim()));
    }
    Digest d("predict");
    d.file("model", c.model).file("features", c.features);
    CommandResult result;
    result.pipeline = d.hex();

    io::Table t;
    t.kind = "predictions";
    t.meta["pipeline"] = result.pipeline;
    t.meta["mode"] = std::string(model::to_string(m.mode));
    t.meta["model_pipeline"] = to_hex(m.pipeline);
    t.data = X.cols() ? m.predict(X) : Matrix(m.outputs(), 0);
    t.columns = output_columns(m.mode, m.outputs());
    ensure_parent(c.predictions);
    io::write_table(c.predictions, t);
    result.outputs.push_back(c.predictions);
    out << "predicted " << X.cols() << " samples -> " << c.predictions << "\n";
    return result;
}

CommandResult cmd_evaluate(const PipelineConfig& c, std::ostream& out) {
    const Dataset data = load_dataset(c);
    CommandResult result;
    json report;
    report["format"] = "s2vr-report";
    report["version"] = 1;

    if (c.protocol == "model") {
        const model::S2VRModel m = model::load(c.model);
        Digest d("evaluate-model");
        d.file("model", c.model).file("features", c.features).file("annotations", c.annotations);
        d.add("signed_rrmse", c.signed_rrmse);
        result.pipeline = d.hex();
        const metrics::EvalReport e = metrics::evaluate(m, data.X, data.Y, m.output_mean);
        const std::string method = m.config.learn_structure ? "S2VR" : "SVR";
        const std::size_t col = m.mode == model::OutputMode::angles_only ? 0 : 1;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        std::array<double, 2> rr{nan, nan}, cc{nan, nan};
        rr[col] = e.angle_rrmse_mean;
        cc[col] = mean3(e.correlation);

        report["pipeline"] = result.pipeline;
        report["protocol"] = "model";
        report["samples"] = data.X.cols();
        report["mode"] = std::string(model::to_string(m.mode));
        report["rrmse"] = {{"columns", {kColumnAngles, kColumnJoint}}, {"rows", {{method, {number(rr[0]), number(rr[1])}}}}};
        report["correlation"] = {{"columns", {kColumnAngles, kColumnJoint}},
                                 {"rows", {{method, {number(cc[0]), number(cc[1])}}}}};
        json detail;
        detail["rrmse_mean_all_outputs"] = number(e.rrmse_mean);
        detail["angle_rrmse"] = per_angle(e.angle_rrmse);
        detail["correlation"] = per_angle(e.correlation);
        if (c.signed_rrmse) {
            const Matrix truth = model::select_outputs(data.Y, m.mode);
            const Matrix pred = m.predict(data.X);
            std::array<double, 3> signed_sums{};
            for (Eigen::Index a = 0; a < 3; ++a) {
                const Eigen::Index row = truth.rows() - 3 + a;
                signed_sums[static_cast<std::size_t>(a)] = signed_sum_or_nan(
                    pred.row(row).transpose(), truth.row(row).transpose(), m.output_mean[row]);
            }
            detail["signed_sum_rrmse"] = per_angle(signed_sums);
        }
        report["per_angle"] = {{method, {{std::string(model::to_string(m.mode)), detail}}}};
        if (e.consistency) report["consistency_gap"] = {{method, gap_json(*e.consistency)}};
        report["pipeline"] = result.pipeline;
        write_reports(c, report, render_report_table(result.pipeline, "model", {method}, {rr}, {cc}), result);
        out << method << " " << model::to_string(m.mode) << ": angle RRMSE " << cell(e.angle_rrmse_mean)
            << "%, mean correlation " << cell(mean3(e.correlation)) << "\n";
        return result;
    }
    if (c.protocol != "cv") throw ParameterError("evaluate: unknown protocol '" + c.protocol + "' (cv or model)");
    if (data.Y.rows() != geometry::kLabelSize) {
        throw ShapeError("evaluate: the cross-validated comparison needs 139-value annotation records");
    }

    Digest d("evaluate-cv");
    add_training(d, c);
    d.add("folds", c.folds).add("leave_one_out", c.leave_one_out).add("seed", c.seed);
    d.add("signed_rrmse", c.signed_rrmse);
    d.file("features", c.features).file("annotations", c.annotations);
    result.pipeline = d.hex();

    metrics::CvOptions cv;
    cv.folds = c.folds;
    cv.leave_one_out = c.leave_one_out;
    cv.seed = c.seed;
    const model::ModelOptions options = c.model_options();

    const std::vector<std::pair<std::string, metrics::Method>> methods = {{"S2VR", metrics::Method::s2vr},
                                                                           {"SVR", metrics::Method::svr}};
    const std::array<model::OutputMode, 2> modes = {model::OutputMode::angles_only, model::OutputMode::joint};
    std::vector<std::string> names;
    std::vector<std::array<double, 2>> rr, cc;
    json rr_rows = json::object(), cc_rows = json::object(), detail = json::object(), gaps = json::object();

    for (const auto& [name, method] : methods) {
        names.push_back(name);
        std::array<double, 2> r{}, k{};
        json per_mode = json::object();
        for (std::size_t mi = 0; mi < modes.size(); ++mi) {
            const metrics::CvResult res = metrics::cross_validate(data.X, data.Y, c.train, modes[mi], method, cv, options);
            r[mi] = res.report.angle_rrmse_mean;
            k[mi] = mean3(res.report.correlation);
            json dm;
            dm["angle_rrmse"] = per_angle(res.report.angle_rrmse);
            dm["correlation"] = per_angle(res.report.correlation);
            dm["rrmse_mean_all_outputs"] = number(res.report.rrmse_mean);
            if (c.signed_rrmse) {
                const Matrix truth = model::select_outputs(data.Y, modes[mi]);
                std::array<double, 3> signed_sums{};
                for (Eigen::Index a = 0; a < 3; ++a) {
                    const Eigen::Index row = truth.rows() - 3 + a;
                    signed_sums[static_cast<std::size_t>(a)] =
                        signed_sum_or_nan(res.predictions.row(row).transpose(), truth.row(row).transpose(),
                                                   truth.row(row).mean());
                }
                dm["signed_sum_rrmse"] = per_angle(signed_sums);
            }
            per_mode[std::string(model::to_string(modes[mi]))] = dm;
            if (res.report.consistency) gaps[name] = gap_json(*res.report.consistency);
        }
        rr.push_back(r);
        cc.push_back(k);
        rr_rows[name] = {number(r[0]), number(r[1])};
        cc_rows[name] = {number(k[0]), number(k[1])};
        detail[name] = per_mode;
        out << name << ": angle RRMSE " << cell(r[0]) << "% (angles only) / " << cell(r[1])
            << "% (joint); mean correlation " << cell(k[0]) << " / " << cell(k[1]) << "\n";
    }

    report["pipeline"] = result.pipeline;
    report["protocol"] = "cv";
    report["folds"] = c.leave_one_out ? static_cast<int>(data.X.cols()) : c.folds;
    report["seed"] = c.seed;
    report["samples"] = data.X.cols();
    report["rrmse"] = {{"columns", {kColumnAngles, kColumnJoint}}, {"rows", rr_rows}};
    report["correlation"] = {{"columns", {kColumnAngles, kColumnJoint}}, {"rows", cc_rows}};
    report["per_angle"] = detail;
    report["consistency_gap"] = gaps;
    write_reports(c, report, render_report_table(result.pipeline, "cv", names, rr, cc), result);
    if (gaps.contains("S2VR")) {
        out << "S2VR joint consistency gap median " << gaps["S2VR"]["overall_median"].dump() << " deg\n";
    }
    return result;
}

}  // namespace s2vr::pipeline
