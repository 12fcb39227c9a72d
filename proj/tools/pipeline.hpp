#pragma once

#include "s2vr/features.hpp"
#include "s2vr/geometry.hpp"
#include "s2vr/model.hpp"
#include "s2vr/solver.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace s2vr::pipeline {

struct PipelineConfig {
    // paths
    std::string annotations = "annotations.csv";
    std::string images = "images";
    std::string features = "features.csv";
    std::string model = "model.s2vr";
    std::string predictions = "predictions.csv";
    std::string reports = "reports";
    std::string log;  ///< training log; <model>.log when empty

    // data generation and rendering
    int samples = 200;
    geometry::SpineSampler sampler;
    features::RenderOptions render;
    features::HogOptions hog;

    // training
    solver::TrainConfig train;
    int bandwidth_count = 10;
    double bandwidth_lo = 0.1;
    double bandwidth_hi = 1.0;
    std::optional<double> rho;
    bool center_target = false;
    bool auto_epsilon = false;
    model::OutputMode mode = model::OutputMode::joint;

    // evaluation
    std::string protocol = "cv";  ///< cv: cross-validated comparison; model: score the saved model
    int folds = 5;
    bool leave_one_out = false;
    bool signed_rrmse = false;    ///< also report the signed-sum RRMSE variant

    std::uint64_t seed = 0;

    [[nodiscard]] model::ModelOptions model_options() const;
};

/// Outcome of one subcommand; warnings never change the written outputs.
struct CommandResult {
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
    std::string pipeline;  ///< hex digest embedded in every artifact written
};

CommandResult cmd_generate(const PipelineConfig& cfg, std::ostream& out);
CommandResult cmd_features(const PipelineConfig& cfg, std::ostream& out);
CommandResult cmd_align(const PipelineConfig& cfg, std::ostream& out);
CommandResult cmd_train(const PipelineConfig& cfg, std::ostream& out);
CommandResult cmd_predict(const PipelineConfig& cfg, std::ostream& out);
CommandResult cmd_evaluate(const PipelineConfig& cfg, std::ostream& out);

/// Path of the image for sample `index` inside the image directory.
std::string image_path(const std::string& dir, std::size_t index);

}  // namespace s2vr::pipeline
