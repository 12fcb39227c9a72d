#include "s2vr/errors.hpp"
#include "s2vr/features.hpp"
#include "s2vr/geometry.hpp"
#include "s2vr/hash.hpp"
#include "s2vr/model.hpp"
#include "testing.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

using namespace s2vr;
using namespace s2vr::model;
using s2vr::testing::random_matrix;
using s2vr::testing::rel_error;

namespace {

struct Smooth {
    Matrix X, Y;
};

Smooth smooth_data(std::uint64_t seed, int n, int q = 4) {
    std::mt19937_64 rng(seed);
    Smooth s;
    s.X = random_matrix(rng, 3, n);
    const Matrix W = random_matrix(rng, q, 3);
    s.Y = (W * s.X).array().sin().matrix();
    s.Y.row(0).array() += 5.0;
    return s;
}

std::uint64_t matrix_digest(const Matrix& M) {
    return fnv1a(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(M.data()),
                                               static_cast<std::size_t>(M.size()) * sizeof(double)));
}

S2VRModel small_model() {
    const Smooth d = smooth_data(51, 25);
    solver::TrainConfig c;
    c.lambda = 0.5;
    c.gamma = 0.1;
    c.max_outer = 5;
    return fit_model(d.X, d.Y, c, OutputMode::joint);
}

}  // namespace

TEST_CASE("modes") {
    CHECK(parse_mode("joint") == OutputMode::joint);
    CHECK(parse_mode("angles_only") == OutputMode::angles_only);
    CHECK(parse_mode("angles") == OutputMode::angles_only);
    CHECK(to_string(OutputMode::angles_only) == "angles_only");
    CHECK_THROWS_AS(parse_mode("both"), ParameterError);
    const Matrix Y = Matrix::Random(139, 4);
    CHECK(select_outputs(Y, OutputMode::angles_only) == Y.bottomRows(3));
    CHECK(select_outputs(Y, OutputMode::joint) == Y);
    CHECK_THROWS_AS(select_outputs(Matrix::Zero(7, 2), OutputMode::angles_only), ModeError);
}

TEST_CASE("feature scaler") {
    std::mt19937_64 rng(52);
    Matrix X = random_matrix(rng, 5, 30, 3.0);
    X.row(2).setConstant(4.0);
    const FeatureScaler s = FeatureScaler::fit(X);
    const Matrix Z = s.apply(X);
    CHECK(Z.rowwise().mean().cwiseAbs().maxCoeff() <= 1e-14);
    for (int r : {0, 1, 3, 4}) {
        const double sd = std::sqrt(Z.row(r).array().square().mean());
        CHECK(sd == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-12));
    }
    CHECK(Z.row(2).isZero(0.0));
    CHECK_THROWS_AS((void)s.apply(Matrix::Zero(4, 3)), ShapeError);
}

TEST_CASE("joint spine model has 139 outputs") {
    geometry::SpineSampler sampler;
    const int n = 12;
    Matrix X, Y(geometry::kLabelSize, n);
    for (int i = 0; i < n; ++i) {
        const auto a = geometry::generate_spine(geometry::random_spine_params(i, sampler));
        Y.col(i) = geometry::to_label(a);
        features::RenderOptions ro;
        ro.seed = static_cast<std::uint64_t>(i);
        const auto h = features::hog(features::render(a, ro));
        if (i == 0) X.resize(static_cast<Eigen::Index>(h.values.size()), n);
        X.col(i) = Eigen::Map<const Vector>(h.values.data(), static_cast<Eigen::Index>(h.values.size()));
    }
    solver::TrainConfig c;
    c.max_outer = 3;
    const S2VRModel joint = fit_model(X, Y, c, OutputMode::joint);
    CHECK(joint.outputs() == 139);
    CHECK(joint.predict(X.leftCols(2)).rows() == 139);
    const S2VRModel angles = fit_model(X, Y, c, OutputMode::angles_only);
    CHECK(angles.outputs() == 3);
}

TEST_CASE("degenerate training data") {
    const Smooth d = smooth_data(53, 10);
    solver::TrainConfig c;
    Matrix same = Matrix::Ones(3, 5);
    CHECK_THROWS_AS(fit_model(same, d.Y.leftCols(5), c, OutputMode::joint), DataError);
    CHECK_THROWS_AS(fit_model(d.X.leftCols(4), d.Y.leftCols(4), c, OutputMode::joint), DataError);
    CHECK_THROWS_AS(fit_model(d.X, Matrix::Constant(4, 10, 2.0), c, OutputMode::joint), DataError);
    Matrix bad = d.X;
    bad(1, 1) = std::nan("");
    CHECK_THROWS_AS(fit_model(bad, d.Y, c, OutputMode::joint), DataError);
    CHECK_THROWS_AS(fit_model(d.X, d.Y.leftCols(9), c, OutputMode::joint), ShapeError);
}

TEST_CASE("interpolating fit recovers the training labels") {
    const Smooth d = smooth_data(54, 30);
    solver::TrainConfig c;
    c.tau = 1e6;
    c.lambda = 1e-6;
    c.max_outer = 50;
    c.tol = 1e-12;
    const FitResult r = fit_model_detailed(d.X, d.Y, c, OutputMode::joint);
    const Matrix pred = r.model.predict(d.X);
    CHECK(rel_error(pred.colwise() - r.model.output_mean, d.Y.colwise() - r.model.output_mean) < 1e-3);
    CHECK(rel_error(pred, d.Y) < 1e-3);
    CHECK(r.support.size() == 30);
    CHECK(r.model.support_size() == 30);
    CHECK(r.model.params.omega.values().norm() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("prediction contract") {
    S2VRModel m = small_model();
    const Smooth d = smooth_data(55, 6);
    Matrix twin(3, 2);
    twin.col(0) = d.X.col(0);
    twin.col(1) = d.X.col(0);
    const Matrix p = m.predict(twin);
    CHECK(p.col(0) == p.col(1));
    CHECK(m.predict(d.X) == m.predict(d.X));

    const Matrix base = m.predict(d.X).colwise() - m.output_mean;
    S2VRModel scaled = m;
    scaled.params.beta *= 2.5;
    CHECK(rel_error(scaled.predict(d.X).colwise() - m.output_mean, 2.5 * base) <= 1e-14);

    S2VRModel zero = m;
    zero.params.beta.setZero();
    const Matrix z = zero.predict(d.X);
    for (Eigen::Index i = 0; i < z.cols(); ++i) CHECK(z.col(i) == m.output_mean);

    CHECK_THROWS_AS((void)m.predict(Matrix::Zero(4, 2)), ShapeError);
}

TEST_CASE("training features are scaled identically at fit and predict time") {
    const Smooth d = smooth_data(56, 20);
    solver::TrainConfig c;
    c.max_outer = 2;
    const S2VRModel m = fit_model(d.X, d.Y, c, OutputMode::joint);
    CHECK(matrix_digest(m.scaler.apply(d.X)) == matrix_digest(m.support_features));
}

TEST_CASE("baseline is the frozen-structure fit") {
    const Smooth d = smooth_data(57, 20);
    solver::TrainConfig c;
    c.lambda = 0.4;
    c.gamma = 0.3;
    const S2VRModel base = fit_baseline_svr(d.X, d.Y, c, OutputMode::joint);
    const S2VRModel frozen = fit_model(d.X, d.Y, baseline_config(c), OutputMode::joint);
    CHECK(base.params.S == Matrix::Identity(4, 4));
    CHECK(base.predict(d.X) == frozen.predict(d.X));
}

TEST_CASE("epsilon > 0 drops inactive samples without changing predictions") {
    const Smooth d = smooth_data(58, 40);
    solver::TrainConfig c;
    c.epsilon = 0.4;
    c.tol = 1e-12;
    c.max_outer = 20;
    const FitResult r = fit_model_detailed(d.X, d.Y, c, OutputMode::joint);
    REQUIRE(r.support.size() < 40);
    REQUIRE(!r.support.empty());

    const Smooth t = smooth_data(59, 7);
    const Matrix Xs = r.model.scaler.apply(d.X);
    const Matrix Xt = r.model.scaler.apply(t.X);
    const Matrix Kt = kernels::combine(kernels::gaussian_cross_bank(Xs, Xt, r.model.bandwidths), r.model.params.omega);
    const Matrix full = (r.state.S * r.state.beta * Kt).colwise() + r.model.output_mean;
    CHECK((r.model.predict(t.X) - full).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + full.cwiseAbs().maxCoeff()));
}

TEST_CASE("serialization round trip") {
    const S2VRModel m = small_model();
    const auto bytes = serialize(m);
    const S2VRModel back = deserialize(bytes);
    const Smooth d = smooth_data(60, 9);
    CHECK(back.predict(d.X) == m.predict(d.X));
    CHECK(serialize(back) == bytes);
    CHECK(back.mode == m.mode);
    CHECK(back.config.lambda == m.config.lambda);
    CHECK(back.rho == m.rho);

    const auto path = (std::filesystem::temp_directory_path() / "s2vr_unit_model.bin").string();
    save(m, path);
    CHECK(load(path).predict(d.X) == m.predict(d.X));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load("/nonexistent/dir/model.bin"), IoError);
    CHECK_THROWS_AS(save(m, "/nonexistent/dir/model.bin"), IoError);
}

TEST_CASE("corrupted model streams") {
    const auto bytes = serialize(small_model());

    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20}, std::size_t{127}, bytes.size() / 2,
                            bytes.size() - 1}) {
        const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        CHECK_THROWS_AS(deserialize(truncated), FormatError);
    }

    auto flipped = bytes;
    flipped[200] ^= 0x40;
    try {
        deserialize(flipped);
        FAIL("no error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("checksum") != std::string::npos);
        CHECK(std::string(e.what()).find("offset " + std::to_string(bytes.size() - 8)) != std::string::npos);
    }

    auto bad_sum = bytes;
    bad_sum.back() ^= 0x01;
    CHECK_THROWS_WITH_AS(deserialize(bad_sum), doctest::Contains("offset"), FormatError);

    auto bad_version = bytes;
    bad_version[4] = 9;
    CHECK_THROWS_WITH_AS(deserialize(bad_version), doctest::Contains("version"), FormatError);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize(bad_magic), FormatError);

    auto longer = bytes;
    longer.push_back(0);
    CHECK_THROWS_AS(deserialize(longer), FormatError);
}
