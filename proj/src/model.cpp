#include "s2vr/model.hpp"

#include "s2vr/errors.hpp"
#include "s2vr/geometry.hpp"
#include "s2vr/graph.hpp"
#include "s2vr/hash.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace s2vr::model {

std::string_view to_string(OutputMode mode) {
    return mode == OutputMode::joint ? "joint" : "angles_only";
}

OutputMode parse_mode(std::string_view text) {
    if (text == "joint") return OutputMode::joint;
    if (text == "angles_only" || text == "angles") return OutputMode::angles_only;
    throw ParameterError("unknown mode '" + std::string(text) + "' (expected joint or angles_only)");
}

FeatureScaler FeatureScaler::fit(const Matrix& X) {
    if (X.cols() == 0) throw DataError("FeatureScaler: no samples");
    FeatureScaler s;
    const double n = static_cast<double>(X.cols());
    s.mean = X.rowwise().sum() / n;
    const double root_d = std::sqrt(static_cast<double>(X.rows()));
    s.scale.resize(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        const double var = (X.row(r).array() - s.mean[r]).square().sum() / n;
        const double sd = std::sqrt(var);
        s.scale[r] = (sd > 0.0 ? sd : 1.0) * root_d;
    }
    return s;
}

Matrix FeatureScaler::apply(const Matrix& X) const {
    if (X.rows() != mean.size()) {
        throw ShapeError("feature dimension " + std::to_string(X.rows()) + " does not match the model's " +
                         std::to_string(mean.size()));
    }
    return ((X.colwise() - mean).array().colwise() / scale.array()).matrix();
}

Matrix S2VRModel::predict(const Matrix& X_new) const {
    const Matrix Xs = scaler.apply(X_new);
    const kernels::BaseKernelBank cross = kernels::gaussian_cross_bank(support_features, Xs, bandwidths);
    const Matrix Kt = kernels::combine(cross, params.omega);
    Matrix Y = params.S * (params.beta * Kt);
    Y.colwise() += output_mean;
    return Y;
}

Matrix select_outputs(const Matrix& Y, OutputMode mode) {
    if (mode == OutputMode::joint) return Y;
    if (Y.rows() == geometry::kAngles) return Y;
    if (Y.rows() == geometry::kLabelSize) return Y.bottomRows(geometry::kAngles);
    throw ModeError("angles_only mode needs 3 or " + std::to_string(geometry::kLabelSize) + " label rows, got " +
                    std::to_string(Y.rows()));
}

FitResult fit_model_detailed(const Matrix& X, const Matrix& Y_in, const solver::TrainConfig& cfg_in, OutputMode mode,
                             const ModelOptions& options) {
    const Matrix Y = select_outputs(Y_in, mode);
    const Eigen::Index n = X.cols();
    if (n < 5) throw DataError("fit_model: need at least 5 samples, got " + std::to_string(n));
    if (Y.cols() != n) {
        throw ShapeError("fit_model: " + std::to_string(X.cols()) + " feature columns but " +
                         std::to_string(Y.cols()) + " label columns");
    }
    if (!X.allFinite() || !Y.allFinite()) throw DataError("fit_model: non-finite entries in the training data");
    solver::TrainConfig cfg = cfg_in;
    cfg.validate();

    FitResult result;
    S2VRModel& m = result.model;
    m.mode = mode;
    m.bandwidths = options.bandwidths;
    m.scaler = FeatureScaler::fit(X);
    const Matrix Xs = m.scaler.apply(X);

    m.output_mean = Y.rowwise().sum() / static_cast<double>(n);
    Matrix Yc = Y.colwise() - m.output_mean;
    if (Yc.cwiseAbs().maxCoeff() == 0.0) throw DataError("fit_model: labels have zero variance");

    const Matrix sq = kernels::squared_distances(Xs, Xs);
    if (sq.maxCoeff() == 0.0) {
        throw DataError("fit_model: all training inputs are identical (zero-variance kernel)");
    }
    kernels::BaseKernelBank bank;
    bank.bandwidths = options.bandwidths;
    for (double sigma : options.bandwidths) bank.kernels.push_back(kernels::gaussian_from_squared_distances(sq, sigma));

    result.alignment = kernels::align_weights(bank, kernels::target_kernel(Yc, options.center_target));
    m.params.omega = result.alignment.weights;
    const Matrix K = kernels::combine(bank, m.params.omega);

    if (options.auto_epsilon) {
        Vector norms = solver::residual_norms(Yc);
        std::vector<double> v(norms.data(), norms.data() + norms.size());
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
        cfg.epsilon = 0.01 * v[v.size() / 2];
    }

    const graph::OutputGraph g = graph::build_laplacian(Yc, options.rho);
    m.rho = g.rho;
    result.state = solver::fit(K, g.laplacian, Yc, cfg);
    m.config = cfg;

    // Keep samples that are active in the loss or carry non-negligible coefficients.
    const Matrix& beta = result.state.beta;
    const double beta_scale = beta.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool active = cfg.epsilon == 0.0 || result.state.irwls_weights[i] > 0.0;
        const bool carries = beta.col(i).cwiseAbs().maxCoeff() > 1e-12 * beta_scale;
        if (active || carries) result.support.push_back(i);
    }
    if (result.support.empty()) {
        for (Eigen::Index i = 0; i < n; ++i) result.support.push_back(i);
    }
    const auto ns = static_cast<Eigen::Index>(result.support.size());
    m.params.beta.resize(Y.rows(), ns);
    m.support_features.resize(Xs.rows(), ns);
    for (Eigen::Index k = 0; k < ns; ++k) {
        m.params.beta.col(k) = beta.col(result.support[static_cast<std::size_t>(k)]);
        m.support_features.col(k) = Xs.col(result.support[static_cast<std::size_t>(k)]);
    }
    m.params.S = result.state.S;
    return result;
}

S2VRModel fit_model(const Matrix& X, const Matrix& Y, const solver::TrainConfig& cfg, OutputMode mode,
                    const ModelOptions& options) {
    return fit_model_detailed(X, Y, cfg, mode, options).model;
}

solver::TrainConfig baseline_config(solver::TrainConfig cfg) {
    cfg.learn_structure = false;
    cfg.lambda = 0.0;
    cfg.gamma = 0.0;
    return cfg;
}

S2VRModel fit_baseline_svr(const Matrix& X, const Matrix& Y, const solver::TrainConfig& cfg, OutputMode mode,
                           const ModelOptions& options) {
    return fit_model(X, Y, baseline_config(cfg), mode, options);
}

// ---------------------------------------------------------------------------------------
// Binary container. All integers and floats little-endian.
//
//   "S2VR" | u32 version | u32 mode | u32 learn_structure | u64 pipeline digest
//   u64 q | u64 ns | u64 d | u64 m
//   f64 tau, gamma, lambda, epsilon, tol, smoothing, rho
//   i64 max_outer, max_irwls, max_s_iters
//   f64 beta[q*ns] | S[q*q] | support[d*ns] | scaler_mean[d] | scaler_scale[d]
//   f64 omega[m] | sigma[m] | output_mean[q]           (matrices row-major)
//   u64 FNV-1a checksum of every preceding byte
// ---------------------------------------------------------------------------------------

namespace {

constexpr std::size_t kHeaderBytes = 4 + 3 * 4 + 8 + 4 * 8 + 7 * 8 + 3 * 8;

class Writer {
public:
    void raw(const char* s, std::size_t n) { out_.insert(out_.end(), s, s + n); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void matrix(const Matrix& M) {
        for (Eigen::Index r = 0; r < M.rows(); ++r)
            for (Eigen::Index c = 0; c < M.cols(); ++c) f64(M(r, c));
    }
    void vector(const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
    }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
    void need(std::size_t n) const {
        if (pos_ + n > in_.size()) {
            throw FormatError("model stream truncated at offset " + std::to_string(in_.size()) + ": needed " +
                              std::to_string(pos_ + n) + " bytes");
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    Matrix matrix(Eigen::Index rows, Eigen::Index cols) {
        Matrix M(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = f64();
        return M;
    }
    Vector vector(Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = f64();
        return v;
    }
    [[nodiscard]] std::size_t position() const { return pos_; }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const S2VRModel& m) {
    const auto q = static_cast<std::uint64_t>(m.params.S.rows());
    const auto ns = static_cast<std::uint64_t>(m.params.beta.cols());
    const auto d = static_cast<std::uint64_t>(m.support_features.rows());
    const auto nm = static_cast<std::uint64_t>(m.bandwidths.size());
    if (static_cast<std::uint64_t>(m.params.omega.size()) != nm) throw ShapeError("serialize: omega/bandwidth mismatch");

    Writer w;
    w.raw("S2VR", 4);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(m.mode));
    w.u32(m.config.learn_structure ? 1U : 0U);
    w.u64(m.pipeline);
    w.u64(q);
    w.u64(ns);
    w.u64(d);
    w.u64(nm);
    for (double v : {m.config.tau, m.config.gamma, m.config.lambda, m.config.epsilon, m.config.tol,
                     m.config.smoothing, m.rho})
        w.f64(v);
    w.u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(m.config.max_outer)));
    w.u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(m.config.max_irwls)));
    w.u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(m.config.max_s_iters)));
    w.matrix(m.params.beta);
    w.matrix(m.params.S);
    w.matrix(m.support_features);
    w.vector(m.scaler.mean);
    w.vector(m.scaler.scale);
    w.vector(m.params.omega.values());
    for (double s : m.bandwidths) w.f64(s);
    w.vector(m.output_mean);
    const std::uint64_t checksum = fnv1a(w.bytes());
    w.u64(checksum);
    return std::move(w.bytes());
}

S2VRModel deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "S2VR", 4) != 0) {
        if (bytes.size() < 4) throw FormatError("model stream truncated at offset " + std::to_string(bytes.size()));
        throw FormatError("bad magic at offset 0: not an S2VR model");
    }
    Reader r(bytes);
    r.skip(4);
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) {
        throw FormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                          std::to_string(kFormatVersion) + ")");
    }
    const std::uint32_t mode = r.u32();
    const std::uint32_t learn = r.u32();
    const std::uint64_t pipeline = r.u64();
    const std::uint64_t q = r.u64();
    const std::uint64_t ns = r.u64();
    const std::uint64_t d = r.u64();
    const std::uint64_t nm = r.u64();
    const std::uint64_t limit = bytes.size() / 8 + 1;
    if (q > limit || ns > limit || d > limit || nm > limit || (q && ns > limit / q) || (d && ns > limit / d)) {
        throw FormatError("model header at offset 24 declares dimensions larger than the stream");
    }
    const std::uint64_t payload = q * ns + q * q + d * ns + 2 * d + 2 * nm + q;
    const std::size_t expected = kHeaderBytes + 8 * payload + 8;
    if (bytes.size() < expected) {
        throw FormatError("model stream truncated at offset " + std::to_string(bytes.size()) + ": expected " +
                          std::to_string(expected) + " bytes");
    }
    if (bytes.size() > expected) {
        throw FormatError("trailing data after offset " + std::to_string(expected) + " in model stream");
    }
    const std::size_t checksum_offset = expected - 8;
    const std::uint64_t computed = fnv1a(bytes.first(checksum_offset));
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[checksum_offset + i]) << (8 * i);
    if (computed != stored) {
        throw FormatError("checksum mismatch: value stored at offset " + std::to_string(checksum_offset) +
                          " does not match the payload");
    }
    if (mode > 1) throw FormatError("invalid output mode " + std::to_string(mode) + " at offset 8");

    S2VRModel m;
    m.mode = static_cast<OutputMode>(mode);
    m.config.learn_structure = learn != 0;
    m.pipeline = pipeline;
    m.config.tau = r.f64();
    m.config.gamma = r.f64();
    m.config.lambda = r.f64();
    m.config.epsilon = r.f64();
    m.config.tol = r.f64();
    m.config.smoothing = r.f64();
    m.rho = r.f64();
    m.config.max_outer = static_cast<int>(static_cast<std::int64_t>(r.u64()));
    m.config.max_irwls = static_cast<int>(static_cast<std::int64_t>(r.u64()));
    m.config.max_s_iters = static_cast<int>(static_cast<std::int64_t>(r.u64()));
    const auto Q = static_cast<Eigen::Index>(q);
    const auto NS = static_cast<Eigen::Index>(ns);
    const auto D = static_cast<Eigen::Index>(d);
    const auto NM = static_cast<Eigen::Index>(nm);
    m.params.beta = r.matrix(Q, NS);
    m.params.S = r.matrix(Q, Q);
    m.support_features = r.matrix(D, NS);
    m.scaler.mean = r.vector(D);
    m.scaler.scale = r.vector(D);
    const Vector omega = r.vector(NM);
    m.bandwidths.resize(nm);
    for (auto& s : m.bandwidths) s = r.f64();
    m.output_mean = r.vector(Q);
    try {
        m.params.omega = kernels::KernelWeights::from_normalized(omega);
    } catch (const Error& e) {
        throw FormatError(std::string("invalid kernel weights in model stream: ") + e.what());
    }
    return m;
}

void save(const S2VRModel& model, const std::string& path) {
    const auto bytes = serialize(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

S2VRModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace s2vr::model
