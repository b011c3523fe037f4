#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "navfly/annotator.hpp"
#include "navfly/datagen.hpp"
#include "navfly/dataset_io.hpp"
#include "navfly/metrics.hpp"
#include "navfly/policy.hpp"
#include "navfly/rollout.hpp"
#include "navfly/world.hpp"

namespace navfly {

/// Worlds and episodes for one experiment. Validation episodes live in
/// worlds never used for training.
struct Benchmark {
    std::vector<WorldSpec> worlds;
    std::vector<EpisodeSpec> train;
    std::vector<EpisodeSpec> validation;

    [[nodiscard]] const WorldSpec& world(const std::string& id) const;
};

struct BenchmarkConfig {
    std::uint64_t seed{1};
    std::size_t train_worlds{10};
    std::size_t validation_worlds{5};
    std::size_t train_episodes{200};
    std::size_t validation_episodes{50};
    WorldParams world{};
    EpisodeParams episodes{};
};

/// Episodes are spread evenly over the worlds of each split.
[[nodiscard]] Benchmark make_benchmark(const BenchmarkConfig& config);

struct EvalOptions {
    RandomizationConfig randomization{};
    RolloutOptions rollout{};
    std::size_t jobs{1};
};

struct EpisodeEvaluation {
    std::string episode_id;
    RolloutResult rollout;
};

struct SplitEvaluation {
    std::vector<EpisodeEvaluation> episodes;  // same order as the input
    MetricSummary summary;
    std::size_t failures{0};
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(const EpisodeSpec&)>;

/// Rolls out every episode on up to `jobs` threads. Results are indexed by
/// episode, so the outcome does not depend on scheduling.
[[nodiscard]] SplitEvaluation evaluate_split(const PolicyFactory& make_policy, const std::vector<EpisodeSpec>& episodes,
                                             const Benchmark& benchmark, const EvalOptions& options);
[[nodiscard]] SplitEvaluation evaluate_split(std::shared_ptr<const PolicyModel> model,
                                             const std::vector<EpisodeSpec>& episodes, const Benchmark& benchmark,
                                             const EvalOptions& options);

struct FlywheelConfig {
    int iterations{3};
    double threshold{kDefaultThreshold};
    double spacing{kDefaultSpacing};
    std::uint64_t seed{1};
    bool stop_on_drop{true};
    std::size_t jobs{1};
    RandomizationConfig randomization{};
    RolloutOptions rollout{};
    TrainOptions training{};
    MixOptions mix{};
    PerceptionOptions perception{};
    std::size_t keyframe_offset{1};
    bool failed_only{false};  // mine deviations only from unsuccessful rollouts
    std::filesystem::path out_dir;  // empty: keep everything in memory

    void validate() const;
};

void to_json(nlohmann::json& j, const FlywheelConfig& c);
void from_json(const nlohmann::json& j, FlywheelConfig& c);

struct IterationRecord {
    int iteration{0};
    MetricSummary train;
    MetricSummary validation;
    std::size_t deviations{0};
    std::size_t corrections_generated{0};
    std::size_t corrections_skipped{0};
    std::size_t sampled_corrections{0};
    std::size_t oracle_added{0};
    std::size_t action_samples{0};
    std::size_t perception_samples{0};
    std::size_t instruction_samples{0};
    std::size_t supervised_slots{0};
    std::uint64_t model_version{0};
    std::string checkpoint;  // relative to the run directory
    bool trained{false};
    std::vector<std::string> warnings;

    friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct FlywheelRunRecord {
    FlywheelConfig config;
    MetricSummary baseline;  // validation before the first iteration
    std::uint64_t baseline_version{0};
    std::vector<IterationRecord> iterations;
    int best_iteration{0};  // 0 = the incoming model
    bool stopped_early{false};
};

void to_json(nlohmann::json& j, const IterationRecord& r);
void from_json(const nlohmann::json& j, IterationRecord& r);
void to_json(nlohmann::json& j, const FlywheelRunRecord& r);
void from_json(const nlohmann::json& j, FlywheelRunRecord& r);

/// Validation SR per iteration, index 0 being the incoming model. True when
/// the latest value fell below the one before it.
[[nodiscard]] bool should_stop(const std::vector<double>& validation_sr);
/// Index of the highest SR; ties go to the later iteration.
[[nodiscard]] int best_iteration(const std::vector<double>& validation_sr);

/// Deviation detection over finished rollouts, one entry per episode. With
/// `failed_only`, successful rollouts are not error trajectories and get no
/// report.
[[nodiscard]] std::vector<std::optional<DeviationReport>> detect_all(const std::vector<EpisodeSpec>& episodes,
                                                                     const std::vector<EpisodeEvaluation>& rollouts,
                                                                     double threshold, double spacing,
                                                                     bool failed_only = false);

/// Oracle samples for every training episode (the navigation dataset).
[[nodiscard]] std::vector<OracleBundle> build_oracle_pool(const Benchmark& benchmark,
                                                          const RandomizationConfig& randomization,
                                                          std::size_t jobs = 1);
[[nodiscard]] Dataset flatten(const std::vector<OracleBundle>& pool);

struct IterationOutput {
    PolicyModel model;
    IterationRecord record;
    SplitEvaluation train_eval;
    Dataset dataset;
    std::vector<CorrectionRecord> corrections;
};

/// One evaluate -> detect -> correct -> mix -> retrain cycle on the
/// training split. With no sampled corrections the model is returned as is.
[[nodiscard]] IterationOutput run_iteration(const PolicyModel& model, const Benchmark& benchmark,
                                            const std::vector<OracleBundle>& oracle_pool,
                                            const FlywheelConfig& config, int iteration, Annotator& annotator);

struct FlywheelResult {
    PolicyModel best;
    FlywheelRunRecord record;
    std::vector<PolicyModel> models;  // index 0 = incoming model
};

/// Iterates run_iteration, evaluating validation SR after each. Stops on a
/// drop when configured and returns the highest-SR checkpoint. When
/// `config.out_dir` is set, writes run.json, timings.json, iter_<k>/ for each
/// iteration and the incoming model as iter_0/model.ckpt.
[[nodiscard]] FlywheelResult run_flywheel(const PolicyModel& model, const Benchmark& benchmark,
                                          const FlywheelConfig& config, Annotator& annotator);

/// Initial behavior cloning on the full navigation dataset.
[[nodiscard]] PolicyModel train_base(const Benchmark& benchmark, const RandomizationConfig& randomization,
                                     const TrainOptions& training, const ModelHyper& hyper = {},
                                     std::size_t jobs = 1);

void to_json(nlohmann::json& j, const Benchmark& b);
void from_json(const nlohmann::json& j, Benchmark& b);

/// Benchmark directory: worlds.json, train.jsonl, validation.jsonl.
void save_benchmark(const std::filesystem::path& dir, const Benchmark& benchmark);
[[nodiscard]] Benchmark load_benchmark(const std::filesystem::path& dir);

/// Trajectory log entry for iter_<k>/trajectories.jsonl.
[[nodiscard]] nlohmann::json trajectory_entry(const EpisodeSpec& episode, const RolloutResult& rollout,
                                              const std::optional<DeviationReport>& deviation);

}  // namespace navfly
