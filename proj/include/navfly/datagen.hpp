#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "navfly/geometry.hpp"
#include "navfly/planner.hpp"
#include "navfly/policy.hpp"
#include "navfly/rollout.hpp"
#include "navfly/world.hpp"

namespace navfly {

class Annotator;

struct EpisodeParams {
    double min_path_length{4.0};
    double max_path_length{1e9};
    int max_retries{500};
    ActionConfig actions{};
};

/// Random start cells and landmark goals with planner-generated reference
/// points and templated instructions; the start heading faces the first leg
/// (quantized to the turn step). Oracle actions are replayed once to
/// confirm they are collision-free and reach the goal.
[[nodiscard]] std::vector<EpisodeSpec> generate_episodes(const WorldSpec& world, std::size_t count,
                                                         std::uint64_t seed, const EpisodeParams& params = {});

/// Templated instruction: "go forward", "turn left/right", "pass the <color>
/// <name>" clauses, ending with "stop at the <color> <name>" for the landmark
/// nearest the last reference point.
[[nodiscard]] std::string trajectory_to_instruction(std::span<const Point2> reference_points,
                                                    const WorldSpec& world);

struct EpisodeData {
    std::vector<TrainSample> samples;
    InstructionSample instruction;
};

/// Replays the oracle actions under observation noise and emits one sample
/// per step, all slots supervised, plus the instruction-generation sample.
[[nodiscard]] EpisodeData oracle_to_samples(const EpisodeSpec& episode, const WorldSpec& world,
                                            const RandomizationConfig& randcfg,
                                            std::size_t chunk_size = kChunkSize);

/// Observation frame around the deviation point.
struct Keyframe {
    std::size_t index{1};                 // 1-based timestep
    double heading{0.0};
    Observation observation;              // noise-free, what an annotator sees
    std::vector<Observation> window;      // the agent's own (noisy) frames ending here

    friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

struct CorrectionRecord {
    std::string episode_id;
    int iteration{0};
    std::string instruction;
    DeviationReport report;
    PlannedPath correction_path;                  // T_e
    std::vector<Action> correction_actions;       // compiled T_e, ends with STOP
    std::vector<Observation> correction_observations;  // one per movement action
    std::vector<Point2> correction_positions;     // replay of the correction
    std::vector<Observation> history_observations;  // frames 1..t of the executed run
    std::vector<Action> history_actions;          // the t-1 actions that reached M_t
    std::vector<Keyframe> keyframes;
};

struct CorrectionOptions {
    std::size_t keyframe_offset{1};
    ActionConfig actions{};
    int iteration{0};
};

/// Builds T_e = (M_t, G_{k+1}, ..., G_n), compiles it from the executed pose
/// at timestep t and replays it under the rollout's noise settings. Returns
/// nullopt (and logs) when the planner cannot route from M_t.
[[nodiscard]] std::optional<CorrectionRecord> make_correction(const EpisodeSpec& episode,
                                                              const RolloutResult& executed,
                                                              const DeviationReport& report,
                                                              const WorldSpec& world,
                                                              const RandomizationConfig& randcfg,
                                                              const CorrectionOptions& options = {});

/// Keyframe timesteps {t - w, t, t + w} clamped to [1, length], de-duplicated.
[[nodiscard]] std::vector<std::size_t> keyframe_indices(std::size_t t, std::size_t offset, std::size_t length);

/// Supervision flags for the chunk starting at combined step `step` when the
/// first correction action sits at `first_correction_step`.
[[nodiscard]] std::vector<bool> correction_mask(std::size_t step, std::size_t first_correction_step,
                                                std::size_t chunk_len);

/// Samples along history + correction; only chunk slots at or after the
/// first correction action are supervised.
[[nodiscard]] std::vector<TrainSample> correction_to_samples(const CorrectionRecord& record,
                                                             std::size_t chunk_size = kChunkSize);

struct PerceptionOptions {
    std::size_t qa_per_keyframe{3};
};

/// Caption and QA samples for each keyframe. Annotator failures skip the
/// keyframe (logged) instead of aborting.
[[nodiscard]] std::vector<PerceptionSample> make_perception(const CorrectionRecord& record, Annotator& annotator,
                                                            const PerceptionOptions& options = {});

/// Correction data that travels together through sampling.
struct CorrectionBundle {
    CorrectionRecord record;
    std::vector<TrainSample> samples;
    std::vector<PerceptionSample> perception;
};

/// Oracle data for one episode of the original training set.
struct OracleBundle {
    std::string episode_id;
    std::vector<TrainSample> samples;
    InstructionSample instruction;
};

struct MixOptions {
    bool include_correction_samples{true};
    bool include_perception{true};
    bool sample_half{true};     // false: use every correction and add no oracle episodes
    bool oracle_remix{true};
};

struct MixedDataset {
    std::vector<TrainSample> samples;
    std::vector<PerceptionSample> perception;
    std::vector<InstructionSample> instructions;
    std::vector<std::string> sampled_corrections;  // episode ids
    std::vector<std::string> oracle_episodes;
    std::size_t corrections_available{0};
    std::vector<std::string> warnings;

    [[nodiscard]] bool empty() const noexcept {
        return samples.empty() && perception.empty() && instructions.empty();
    }
};

/// Number of corrections kept and of oracle episodes re-mixed for
/// `available` corrections: floor(C/2) and floor(sampled/2).
struct MixCounts {
    std::size_t sampled{0};
    std::size_t oracle{0};
};
[[nodiscard]] MixCounts mix_counts(std::size_t available, const MixOptions& options = {});

/// Samples half of the corrections (with their perception data) and half as
/// many oracle episodes as sampled corrections.
[[nodiscard]] MixedDataset sample_mix(std::span<const CorrectionBundle> corrections,
                                      std::span<const OracleBundle> oracle_pool, std::uint64_t seed,
                                      const MixOptions& options = {});

}  // namespace navfly
