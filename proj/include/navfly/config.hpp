#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "navfly/flywheel.hpp"

namespace navfly {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a CLI run depends on. The TOML layout mirrors the sections
/// below; every key is optional and unknown keys are rejected.
///
///   seed, jobs
///   [world]      size, cell_size, obstacle_density, landmarks
///   [benchmark]  train_worlds, validation_worlds, train_episodes,
///                validation_episodes, min_path_length, max_path_length
///   [noise]      visibility_range, bearing_jitter, landmark_dropout,
///                distance_bin_noise
///   [model]      hidden, init_scale
///   [train]      epochs, learning_rate
///   [rollout]    max_steps
///   [flywheel]   iterations, threshold_s, spacing, stop_on_drop, epochs,
///                learning_rate, keyframe_offset, qa_per_keyframe,
///                include_correction_samples, include_perception,
///                sample_half, oracle_remix, failed_only
///   [paths]      data, model
struct RunConfig {
    std::uint64_t seed{1};
    std::size_t jobs{1};
    BenchmarkConfig benchmark{.world = {.obstacle_density = 0.05}, .episodes = {.max_path_length = 10.0}};
    RandomizationConfig noise{.bearing_jitter = 0.1, .landmark_dropout = 0.1, .distance_bin_noise = 0.1};
    ModelHyper hyper{};
    TrainOptions train{.epochs = 20, .learning_rate = 0.01};
    FlywheelConfig flywheel{};
    std::string data_dir;
    std::string model_path;

    RunConfig();

    /// Copies seed, jobs, noise and rollout settings into the nested configs
    /// and validates the result. Throws ConfigError.
    void resolve();

    [[nodiscard]] EvalOptions eval_options() const;
};

[[nodiscard]] RunConfig parse_run_config(std::string_view toml_text, const std::string& source = "config");
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);
/// Fully resolved TOML; parse_run_config(to_toml(c)) reproduces c.
[[nodiscard]] std::string to_toml(const RunConfig& config);

}  // namespace navfly
