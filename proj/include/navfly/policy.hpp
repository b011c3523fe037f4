#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "navfly/features.hpp"
#include "navfly/world.hpp"

namespace navfly {

/// Up to four actions; STOP may only appear last.
using ActionChunk = std::vector<Action>;

enum class SampleKind { oracle, correction };

struct TrainSample {
    SampleKind kind{SampleKind::oracle};
    std::string episode_id;
    std::string instruction;
    std::vector<Observation> window;   // at most 16, oldest first
    std::vector<Action> history;       // at most 4 actions preceding the chunk
    std::vector<Action> target;        // the next (up to) 4 actions
    std::vector<bool> supervise;       // one flag per target slot

    friend bool operator==(const TrainSample&, const TrainSample&) = default;
};

enum class PerceptionTask { caption, qa };

enum class QaCategory : int { position = 0, color = 1, orientation = 2 };
inline constexpr int kQaCategories = 3;
inline constexpr std::array<std::string_view, kQaCategories> kQaCategoryNames = {"position", "color",
                                                                                 "orientation"};
inline constexpr std::array<std::string_view, 8> kCompassNames = {
    "east", "northeast", "north", "northwest", "west", "southwest", "south", "southeast"};

/// Number of answer classes for a QA category.
[[nodiscard]] std::size_t answer_classes(QaCategory category) noexcept;
/// Caption tokens are landmark names followed by colors.
[[nodiscard]] std::size_t caption_classes() noexcept;

struct PerceptionSample {
    std::string episode_id;
    std::vector<Observation> window;  // ends at the keyframe
    PerceptionTask task{PerceptionTask::caption};
    std::string prompt;               // caption prompt or question text
    std::vector<int> caption_tokens;  // caption target, indices into names ++ colors
    QaCategory category{QaCategory::position};
    int answer{0};

    friend bool operator==(const PerceptionSample&, const PerceptionSample&) = default;
};

/// Whole-episode observations paired with the instruction that described it.
struct InstructionSample {
    std::string episode_id;
    std::vector<Observation> observations;  // already subsampled to at most 16
    std::vector<std::size_t> tokens;        // vocabulary indices, sorted unique

    friend bool operator==(const InstructionSample&, const InstructionSample&) = default;
};

struct ModelHyper {
    std::size_t hidden{32};
    double init_scale{0.1};
};

struct TrainOptions {
    int epochs{5};
    double learning_rate{0.1};
    std::uint64_t seed{0};
    int first_epoch{0};  // epoch counter offset, so resumed training reuses the same shuffles
};

/// One linear softmax (or sigmoid) layer over the shared projection.
struct Head {
    std::size_t outputs{0};
    std::vector<double> weights;  // outputs x hidden, row-major
    std::vector<double> bias;

    friend bool operator==(const Head&, const Head&) = default;
};

enum class HeadId : int { action = 0, caption = 1, position = 2, color = 3, orientation = 4, instruction = 5 };
inline constexpr int kHeadCount = 6;

/// Shared linear projection of the sparse features, followed by task heads:
/// actions (softmax), captions (per-token sigmoid), one softmax per QA
/// category, and instruction tokens (per-token sigmoid).
class PolicyModel {
public:
    PolicyModel() = default;

    /// Shared weights drawn from a seeded normal; heads start at zero so the
    /// untrained model has uniform outputs.
    static PolicyModel initialize(std::uint64_t seed, const ModelHyper& hyper = {});

    [[nodiscard]] std::size_t input_dim() const noexcept { return input_dim_; }
    [[nodiscard]] std::size_t hidden() const noexcept { return hidden_; }
    [[nodiscard]] std::uint64_t version() const noexcept { return version_; }
    void set_version(std::uint64_t v) noexcept { version_ = v; }

    [[nodiscard]] std::span<const double> shared() const noexcept { return shared_; }
    [[nodiscard]] std::span<double> shared_mut() noexcept { return shared_; }
    [[nodiscard]] const Head& head(HeadId id) const { return heads_.at(static_cast<std::size_t>(id)); }
    [[nodiscard]] Head& head_mut(HeadId id) { return heads_.at(static_cast<std::size_t>(id)); }

    /// Shared projection h = W x.
    [[nodiscard]] std::vector<double> project(const FeatureVector& x) const;
    [[nodiscard]] std::vector<double> logits(HeadId id, const FeatureVector& x) const;

    friend bool operator==(const PolicyModel&, const PolicyModel&) = default;

private:
    std::size_t input_dim_{0};
    std::size_t hidden_{0};
    std::vector<double> shared_;  // input_dim x hidden, row per input feature
    std::array<Head, kHeadCount> heads_{};
    std::uint64_t version_{0};
};

/// Greedy action for one feature vector; ties go to the earlier ActionType.
[[nodiscard]] ActionType predict_action(const PolicyModel& model, const FeatureVector& x);

/// Decodes up to four actions, feeding each decoded action back through the
/// recent-action features. Decoding ends early at STOP.
[[nodiscard]] ActionChunk predict_chunk(const PolicyModel& model, const InstructionContext& instruction,
                                        std::span<const Observation> window, std::span<const Action> history,
                                        const ActionConfig& actions = {});

/// Instruction tokens whose sigmoid exceeds one half.
[[nodiscard]] std::vector<std::size_t> generate_instruction(const PolicyModel& model,
                                                            std::span<const Observation> episode_observations);

/// Caption tokens (indices into names ++ colors) predicted for a window.
[[nodiscard]] std::vector<int> predict_caption(const PolicyModel& model, std::span<const Observation> window);
[[nodiscard]] int predict_answer(const PolicyModel& model, QaCategory category, std::string_view question,
                                 std::span<const Observation> window);

/// A single training example after featurization.
struct Example {
    HeadId head{HeadId::action};
    FeatureVector features;
    int label{0};                   // softmax heads
    std::vector<double> targets;    // sigmoid heads, one per output
};

/// Every supervised slot of a sample becomes one action example; masked
/// slots produce none.
[[nodiscard]] std::vector<Example> action_examples(const TrainSample& sample);
[[nodiscard]] Example perception_example(const PerceptionSample& sample);
[[nodiscard]] Example instruction_example(const InstructionSample& sample);

[[nodiscard]] double example_loss(const PolicyModel& model, const Example& ex);

/// Dense gradient of `example_loss` with the same layout as the model.
struct Gradient {
    std::vector<double> shared;
    std::array<Head, kHeadCount> heads{};
};
[[nodiscard]] Gradient example_gradient(const PolicyModel& model, const Example& ex);
/// Summed gradient over every example a sample produces.
[[nodiscard]] Gradient sample_gradient(const PolicyModel& model, const TrainSample& sample);

/// SGD over all examples, reshuffled every epoch from (seed, epoch). Returns
/// a new model whose version is one past the input's.
[[nodiscard]] PolicyModel train(const PolicyModel& model, std::span<const TrainSample> samples,
                                std::span<const PerceptionSample> perception,
                                std::span<const InstructionSample> instructions, const TrainOptions& options);

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void save_model(const PolicyModel& model, const std::filesystem::path& path);
[[nodiscard]] PolicyModel load_model(const std::filesystem::path& path);

/// Interface used by rollouts to obtain the next action chunk.
struct PolicyInput {
    const InstructionContext& instruction;
    std::span<const Observation> window;
    std::span<const Action> recent_actions;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual ActionChunk act(const PolicyInput& input) = 0;
};

class ModelPolicy final : public Policy {
public:
    explicit ModelPolicy(std::shared_ptr<const PolicyModel> model, ActionConfig actions = {})
        : model_(std::move(model)), actions_(actions) {}
    ActionChunk act(const PolicyInput& input) override;

private:
    std::shared_ptr<const PolicyModel> model_;
    ActionConfig actions_;
};

/// Replays a fixed action list, four at a time.
class ScriptedPolicy final : public Policy {
public:
    explicit ScriptedPolicy(std::vector<Action> script) : script_(std::move(script)) {}
    ActionChunk act(const PolicyInput& input) override;

private:
    std::vector<Action> script_;
    std::size_t next_{0};
};

class StopPolicy final : public Policy {
public:
    ActionChunk act(const PolicyInput&) override { return {Action::stop()}; }
};

}  // namespace navfly
