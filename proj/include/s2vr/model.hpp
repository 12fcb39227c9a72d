#pragma once

#include "s2vr/kernels.hpp"
#include "s2vr/solver.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace s2vr::model {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class OutputMode : std::uint32_t { joint = 0, angles_only = 1 };

std::string_view to_string(OutputMode mode);
OutputMode parse_mode(std::string_view text);

/// Per-dimension standardization followed by a 1/sqrt(d) factor, so squared distances
/// between scaled samples are O(1) whatever the descriptor length.
struct FeatureScaler {
    Vector mean;
    Vector scale;  ///< divisor applied after subtracting the mean

    static FeatureScaler fit(const Matrix& X);
    [[nodiscard]] Matrix apply(const Matrix& X) const;
};

struct ModelOptions {
    std::vector<double> bandwidths = kernels::bandwidth_grid();
    std::optional<double> rho;      ///< Laplacian width; median pairwise distance when empty
    bool center_target = false;     ///< also center K_T before alignment
    bool auto_epsilon = false;      ///< epsilon = 0.01 * median ||y_i|| of centered labels
};

struct ModelParams {
    Matrix beta;  ///< q x Ns
    Matrix S;     ///< q x q
    kernels::KernelWeights omega;
};

struct S2VRModel {
    ModelParams params;
    std::vector<double> bandwidths;
    Matrix support_features;  ///< scaled features of the support samples, d x Ns
    Vector output_mean;
    FeatureScaler scaler;
    solver::TrainConfig config;
    OutputMode mode = OutputMode::joint;
    double rho = 0.0;
    std::uint64_t pipeline = 0;  ///< digest of the config and inputs that produced the model

    [[nodiscard]] Eigen::Index outputs() const { return params.S.rows(); }
    [[nodiscard]] Eigen::Index feature_dim() const { return scaler.mean.size(); }
    [[nodiscard]] Eigen::Index support_size() const { return support_features.cols(); }

    /// y = S beta K_t + output_mean with K_t the weighted cross kernel to the support set.
    [[nodiscard]] Matrix predict(const Matrix& X_new) const;
};

struct FitResult {
    S2VRModel model;
    solver::SolverState state;
    kernels::AlignmentResult alignment;
    std::vector<Eigen::Index> support;  ///< training columns kept
};

/// Labels used for `mode`: angles_only keeps the last three rows of a 139-row label matrix.
Matrix select_outputs(const Matrix& Y, OutputMode mode);

FitResult fit_model_detailed(const Matrix& X, const Matrix& Y, const solver::TrainConfig& cfg, OutputMode mode,
                             const ModelOptions& options = {});

S2VRModel fit_model(const Matrix& X, const Matrix& Y, const solver::TrainConfig& cfg, OutputMode mode,
                    const ModelOptions& options = {});

/// Multi-output SVR baseline: the same pipeline with S frozen at I and lambda = gamma = 0.
solver::TrainConfig baseline_config(solver::TrainConfig cfg);

S2VRModel fit_baseline_svr(const Matrix& X, const Matrix& Y, const solver::TrainConfig& cfg, OutputMode mode,
                           const ModelOptions& options = {});

inline constexpr std::uint32_t kFormatVersion = 1;

std::vector<std::uint8_t> serialize(const S2VRModel& model);
S2VRModel deserialize(std::span<const std::uint8_t> bytes);

void save(const S2VRModel& model, const std::string& path);
S2VRModel load(const std::string& path);

}  // namespace s2vr::model
