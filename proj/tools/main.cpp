#include "pipeline.hpp"

#include "s2vr/errors.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace {

using s2vr::pipeline::PipelineConfig;

bool given_on_command_line(int argc, char** argv, std::string_view flag) {
    for (int i = 1; i < argc; ++i) {
        const std::string_view a = argv[i];
        if (a == flag || (a.size() > flag.size() && a.substr(0, flag.size()) == flag && a[flag.size()] == '=')) return true;
    }
    return false;
}

// Path settings only: a flag beats the environment, the environment beats the config file.
void apply_path_env(int argc, char** argv, PipelineConfig& cfg) {
    const struct {
        const char* flag;
        const char* env;
        std::string* target;
    } paths[] = {
        {"--annotations", "S2VR_ANNOTATIONS", &cfg.annotations}, {"--images", "S2VR_IMAGES", &cfg.images},
        {"--features", "S2VR_FEATURES", &cfg.features},          {"--model", "S2VR_MODEL", &cfg.model},
        {"--predictions", "S2VR_PREDICTIONS", &cfg.predictions}, {"--reports", "S2VR_REPORTS", &cfg.reports},
        {"--log", "S2VR_LOG", &cfg.log},
    };
    for (const auto& p : paths) {
        const char* value = std::getenv(p.env);
        if (value && *value && !given_on_command_line(argc, argv, p.flag)) *p.target = value;
    }
}

}  // namespace

int main(int argc, char** argv) {
    PipelineConfig cfg;
    CLI::App app{"s2vr: structured multi-output kernel regression for spinal curvature estimation"};
    app.set_config("--config", "", "TOML or INI file of option values; command-line flags take precedence");
    app.require_subcommand(1);
    app.fallthrough();

    auto* paths = "Paths (env: S2VR_<NAME>)";
    app.add_option("--annotations", cfg.annotations, "annotation table")->group(paths)->capture_default_str();
    app.add_option("--images", cfg.images, "directory of rendered images")->group(paths)->capture_default_str();
    app.add_option("--features", cfg.features, "feature table")->group(paths)->capture_default_str();
    app.add_option("--model", cfg.model, "model file")->group(paths)->capture_default_str();
    app.add_option("--predictions", cfg.predictions, "prediction table")->group(paths)->capture_default_str();
    app.add_option("--reports", cfg.reports, "report directory")->group(paths)->capture_default_str();
    app.add_option("--log", cfg.log, "training log (default <model>.log)")->group(paths);

    auto* gen = "Generation";
    app.add_option("--samples", cfg.samples, "number of spines")->group(gen)->check(CLI::NonNegativeNumber)->capture_default_str();
    app.add_option("--seed", cfg.seed, "seed for sampling, rendering noise and folds")->group(gen)->capture_default_str();
    app.add_option("--terms", cfg.sampler.terms, "sine terms in the curve")->group(gen)->capture_default_str();
    app.add_option("--max-amplitude", cfg.sampler.max_amplitude, "largest term amplitude (px)")->group(gen)->capture_default_str();
    app.add_option("--phase-jitter", cfg.sampler.phase_jitter)->group(gen)->capture_default_str();
    app.add_option("--rotation-jitter", cfg.sampler.rotation_jitter_deg, "per-vertebra tilt jitter (deg)")->group(gen)->capture_default_str();
    app.add_option("--landmark-noise", cfg.sampler.landmark_noise, "corner jitter (px)")->group(gen)->capture_default_str();
    app.add_option("--width", cfg.render.width)->group(gen)->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--height", cfg.render.height)->group(gen)->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--noise", cfg.render.noise_level, "pixel noise std")->group(gen)->check(CLI::NonNegativeNumber)->capture_default_str();
    app.add_option("--supersample", cfg.render.supersample)->group(gen)->check(CLI::PositiveNumber)->capture_default_str();

    auto* hog = "Descriptors";
    app.add_option("--cell", cfg.hog.cell, "HOG cell side (px)")->group(hog)->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--block", cfg.hog.block, "HOG block side (cells)")->group(hog)->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--bins", cfg.hog.bins)->group(hog)->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--clip", cfg.hog.clip)->group(hog)->capture_default_str();

    auto* tr = "Training";
    app.add_option("--tau", cfg.train.tau)->group(tr)->capture_default_str();
    app.add_option("--gamma", cfg.train.gamma)->group(tr)->capture_default_str();
    app.add_option("--lambda", cfg.train.lambda)->group(tr)->capture_default_str();
    app.add_option("--epsilon", cfg.train.epsilon)->group(tr)->capture_default_str();
    app.add_option("--max-outer", cfg.train.max_outer)->group(tr)->capture_default_str();
    app.add_option("--max-irwls", cfg.train.max_irwls)->group(tr)->capture_default_str();
    app.add_option("--max-s-iters", cfg.train.max_s_iters)->group(tr)->capture_default_str();
    app.add_option("--tol", cfg.train.tol)->group(tr)->capture_default_str();
    app.add_option("--smoothing", cfg.train.smoothing)->group(tr)->capture_default_str();
    bool no_structure = false;
    app.add_flag("--no-structure", no_structure, "freeze S = I (multi-output SVR)")->group(tr);
    app.add_option("--bandwidths", cfg.bandwidth_count, "number of Gaussian bandwidths")->group(tr)->capture_default_str();
    app.add_option("--bandwidth-lo", cfg.bandwidth_lo)->group(tr)->capture_default_str();
    app.add_option("--bandwidth-hi", cfg.bandwidth_hi)->group(tr)->capture_default_str();
    double rho = 0.0;
    auto* rho_opt = app.add_option("--rho", rho, "Laplacian width (default: median pairwise label distance)")->group(tr);
    app.add_flag("--center-target", cfg.center_target, "center the target kernel before alignment")->group(tr);
    app.add_flag("--auto-epsilon", cfg.auto_epsilon, "epsilon = 0.01 x median centered label norm")->group(tr);
    std::string mode = "joint";
    app.add_option("--mode", mode, "output set")->group(tr)->check(CLI::IsMember({"joint", "angles_only"}))->capture_default_str();

    auto* ev = "Evaluation";
    app.add_option("--protocol", cfg.protocol, "cv: S2VR vs SVR cross-validated; model: score the saved model")
        ->group(ev)
        ->check(CLI::IsMember({"cv", "model"}))
        ->capture_default_str();
    app.add_option("--folds", cfg.folds)->group(ev)->capture_default_str();
    app.add_flag("--loo", cfg.leave_one_out, "leave-one-out instead of k folds")->group(ev);
    app.add_flag("--signed-rrmse", cfg.signed_rrmse, "also report the signed-sum RRMSE variant")->group(ev);

    using Command = s2vr::pipeline::CommandResult (*)(const PipelineConfig&, std::ostream&);
    Command command = nullptr;
    const std::pair<const char*, std::pair<const char*, Command>> commands[] = {
        {"generate", {"sample synthetic spines and render images", s2vr::pipeline::cmd_generate}},
        {"features", {"HOG descriptors of every image", s2vr::pipeline::cmd_features}},
        {"align", {"kernel alignment weights per bandwidth", s2vr::pipeline::cmd_align}},
        {"train", {"fit a model and write a training log", s2vr::pipeline::cmd_train}},
        {"predict", {"predict labels with a saved model", s2vr::pipeline::cmd_predict}},
        {"evaluate", {"write the comparison report", s2vr::pipeline::cmd_evaluate}},
    };
    for (const auto& [name, entry] : commands) {
        Command fn = entry.second;
        app.add_subcommand(name, entry.first)->callback([&command, fn] { command = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    cfg.train.learn_structure = !no_structure;
    if (rho_opt->count() > 0) cfg.rho = rho;
    cfg.mode = s2vr::model::parse_mode(mode);
    apply_path_env(argc, argv, cfg);

    try {
        const auto result = command(cfg, std::cout);
        for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    } catch (const s2vr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
