#include "doctest.h"

#include "pipeline.hpp"

#include "s2vr/errors.hpp"
#include "s2vr/hash.hpp"
#include "s2vr/io.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace s2vr;
using pipeline::PipelineConfig;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("s2vr_pipeline_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    [[nodiscard]] std::string operator/(const std::string& name) const { return (path / name).string(); }
};

PipelineConfig config_in(const TempDir& dir, int samples) {
    PipelineConfig c;
    c.annotations = dir / "annotations.csv";
    c.images = dir / "images";
    c.features = dir / "features.csv";
    c.model = dir / "model.s2vr";
    c.predictions = dir / "predictions.csv";
    c.reports = dir / "reports";
    c.samples = samples;
    c.seed = 3;
    c.train.lambda = 1.0;
    c.train.max_outer = 5;
    c.train.tol = 1e-6;
    c.folds = 2;
    return c;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("generate and features write header-only tables for zero samples") {
    TempDir dir;
    PipelineConfig c = config_in(dir, 0);
    std::ostringstream out;
    pipeline::cmd_generate(c, out);
    const Eigen::MatrixXd Y = io::read_annotations(c.annotations);
    CHECK(Y.rows() == 139);
    CHECK(Y.cols() == 0);
    pipeline::cmd_features(c, out);
    const Eigen::MatrixXd X = io::read_features(c.features);
    CHECK(X.rows() == 7812);
    CHECK(X.cols() == 0);
}

TEST_CASE("generate and features are byte-identical across output locations") {
    TempDir a, b;
    PipelineConfig ca = config_in(a, 6), cb = config_in(b, 6);
    std::ostringstream out;
    const auto ra = pipeline::cmd_generate(ca, out);
    const auto rb = pipeline::cmd_generate(cb, out);
    CHECK(ra.pipeline == rb.pipeline);
    CHECK(io::read_file(ca.annotations) == io::read_file(cb.annotations));
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(io::read_file(pipeline::image_path(ca.images, i)) == io::read_file(pipeline::image_path(cb.images, i)));
    }
    pipeline::cmd_features(ca, out);
    pipeline::cmd_features(cb, out);
    CHECK(io::read_file(ca.features) == io::read_file(cb.features));

    const io::Table t = io::read_table(ca.annotations);
    CHECK(t.meta.at("pipeline") == ra.pipeline);
    CHECK(io::read_file(pipeline::image_path(ca.images, 0)).find("s2vr pipeline " + ra.pipeline) != std::string::npos);
}

TEST_CASE("pipeline digest follows the seed and replaces stale images") {
    TempDir dir;
    PipelineConfig c = config_in(dir, 4);
    std::ostringstream out;
    const auto first = pipeline::cmd_generate(c, out);
    c.seed = 4;
    c.samples = 2;
    const auto second = pipeline::cmd_generate(c, out);
    CHECK(first.pipeline != second.pipeline);
    CHECK(!fs::exists(pipeline::image_path(c.images, 2)));
    pipeline::cmd_features(c, out);
    CHECK(io::read_features(c.features).cols() == 2);
}

TEST_CASE("train, predict and evaluate on a small synthetic set") {
    TempDir dir;
    PipelineConfig c = config_in(dir, 12);
    std::ostringstream out;
    pipeline::cmd_generate(c, out);
    pipeline::cmd_features(c, out);

    const auto align = pipeline::cmd_align(c, out);
    REQUIRE(align.outputs.size() == 1);
    CHECK(io::read_file(align.outputs[0]).find("combined_alignment") != std::string::npos);

    const auto trained = pipeline::cmd_train(c, out);
    const model::S2VRModel m = model::load(c.model);
    CHECK(to_hex(m.pipeline) == trained.pipeline);
    CHECK(m.outputs() == 139);

    SUBCASE("log has one objective line per outer iteration") {
        const auto lines = lines_of(io::read_file(c.model + ".log"));
        int outer_lines = 0, omega_lines = 0, reported = -1;
        for (const auto& l : lines) {
            if (l.rfind("outer ", 0) == 0) ++outer_lines;
            if (l.rfind("omega sigma=", 0) == 0) ++omega_lines;
            if (l.rfind("iterations outer=", 0) == 0) reported = std::stoi(l.substr(17));
        }
        CHECK(outer_lines == reported);
        CHECK(omega_lines == c.bandwidth_count);
        double sum_sq = -1.0;
        for (const auto& l : lines)
            if (l.rfind("omega_sum_squares ", 0) == 0) sum_sq = std::stod(l.substr(18));
        CHECK(std::abs(sum_sq - 1.0) <= 1e-10);
        CHECK(lines.at(1) == "# pipeline " + trained.pipeline);
    }

    SUBCASE("predictions table matches the model") {
        pipeline::cmd_predict(c, out);
        const io::Table t = io::read_table(c.predictions);
        CHECK(t.kind == "predictions");
        CHECK(t.columns == io::label_columns());
        const Eigen::MatrixXd direct = m.predict(io::read_features(c.features));
        CHECK((t.data - direct).cwiseAbs().maxCoeff() == 0.0);
        const std::string first = io::read_file(c.predictions);
        pipeline::cmd_predict(c, out);
        CHECK(io::read_file(c.predictions) == first);
    }

    SUBCASE("cross-validated report has the two table columns") {
        pipeline::cmd_evaluate(c, out);
        const auto lines = lines_of(io::read_file(c.reports + "/report.csv"));
        std::vector<std::string> body;
        for (const auto& l : lines)
            if (l[0] != '#') body.push_back(l);
        REQUIRE(body.size() == 5);
        CHECK(body[0] == "method,metric,Angles,Angles & Landmarks");
        CHECK(body[1].rfind("S2VR,rrmse_pct,", 0) == 0);
        CHECK(body[2].rfind("SVR,rrmse_pct,", 0) == 0);
        CHECK(body[3].rfind("S2VR,correlation,", 0) == 0);
        CHECK(body[4].rfind("SVR,correlation,", 0) == 0);
        CHECK(io::read_file(c.reports + "/report.json").find("consistency_gap") != std::string::npos);
    }

    SUBCASE("saved-model protocol fills only the model's column") {
        c.protocol = "model";
        c.signed_rrmse = true;
        pipeline::cmd_evaluate(c, out);
        const auto text = io::read_file(c.reports + "/report.csv");
        CHECK(text.find("S2VR,rrmse_pct,NA,") != std::string::npos);
        CHECK(io::read_file(c.reports + "/report.json").find("signed_sum_rrmse") != std::string::npos);
    }
}

TEST_CASE("interpolating model scored on its training data") {
    TempDir dir;
    PipelineConfig c = config_in(dir, 20);
    c.train.tau = 1e6;
    c.train.lambda = 0.0;
    c.train.learn_structure = false;
    c.protocol = "model";
    std::ostringstream out;
    const auto t0 = std::chrono::steady_clock::now();
    pipeline::cmd_generate(c, out);
    pipeline::cmd_features(c, out);
    pipeline::cmd_train(c, out);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 30.0);
    pipeline::cmd_evaluate(c, out);
    const std::string text = io::read_file(c.reports + "/report.csv");
    const auto pos = text.find("SVR,rrmse_pct,NA,");
    REQUIRE(pos != std::string::npos);
    const double rrmse = std::stod(text.substr(pos + 17));
    CHECK(rrmse < 0.1);
}

TEST_CASE("constant image gives a zero descriptor row") {
    TempDir dir;
    PipelineConfig c = config_in(dir, 0);
    fs::create_directories(c.images);
    io::write_pgm(pipeline::image_path(c.images, 0), features::GrayImage(64, 256, 0.4));
    std::ostringstream out;
    pipeline::cmd_features(c, out);
    const Eigen::MatrixXd X = io::read_features(c.features);
    REQUIRE(X.cols() == 1);
    CHECK(X.isZero(0.0));
}

TEST_CASE("generating the default 200 spines is quick") {
    TempDir dir;
    PipelineConfig c = config_in(dir, 200);
    std::ostringstream out;
    const auto t0 = std::chrono::steady_clock::now();
    pipeline::cmd_generate(c, out);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 60.0);
    CHECK(io::read_annotations(c.annotations).cols() == 200);
}

TEST_CASE("pipeline errors") {
    TempDir dir;
    PipelineConfig c = config_in(dir, 6);
    std::ostringstream out;
    CHECK_THROWS_AS(pipeline::cmd_features(c, out), IoError);
    pipeline::cmd_generate(c, out);
    pipeline::cmd_features(c, out);

    PipelineConfig bad = c;
    bad.protocol = "holdout";
    CHECK_THROWS_AS(pipeline::cmd_evaluate(bad, out), ParameterError);

    bad = c;
    bad.samples = -1;
    CHECK_THROWS_AS(pipeline::cmd_generate(bad, out), ParameterError);

    features::GrayImage odd(64, 128);
    io::write_pgm(pipeline::image_path(c.images, 6), odd);
    CHECK_THROWS_AS(pipeline::cmd_features(c, out), ShapeError);
    fs::remove(pipeline::image_path(c.images, 6));

    pipeline::cmd_train(c, out);
    PipelineConfig small = c;
    small.hog.cell = 16;
    small.features = dir / "coarse.csv";
    pipeline::cmd_features(small, out);
    small.model = c.model;
    CHECK_THROWS_AS(pipeline::cmd_predict(small, out), ShapeError);
}
