#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "navfly/geometry.hpp"
#include "navfly/metrics.hpp"
#include "navfly/policy.hpp"
#include "navfly/world.hpp"

namespace navfly {

/// One navigation task: instruction plus oracle reference points.
struct EpisodeSpec {
    std::string id;
    std::string world_id;
    Pose start;
    std::vector<Point2> reference_points;  // T_g, planner waypoints
    std::string instruction;
    Point2 goal;
    int goal_landmark{-1};
    double shortest_path_length{0.0};
    std::vector<Action> oracle_actions;    // compiled T_g, ends with STOP
    std::vector<Point2> oracle_positions;  // positions while replaying oracle_actions

    /// Reference-point trajectory used for deviation detection.
    [[nodiscard]] Trajectory oracle() const { return make_oracle(reference_points); }
    /// Dense replayed path used as the nDTW reference.
    [[nodiscard]] Trajectory dense_oracle() const { return make_oracle(oracle_positions); }

    friend bool operator==(const EpisodeSpec&, const EpisodeSpec&) = default;
};

void to_json(nlohmann::json& j, const EpisodeSpec& e);
void from_json(const nlohmann::json& j, EpisodeSpec& e);

struct RolloutOptions {
    int max_steps{200};
    ActionConfig actions{};
};

struct RolloutResult {
    std::vector<Pose> poses;                // one per recorded position
    std::vector<Observation> observations;  // observation at each pose
    std::vector<Action> actions;            // executed movement actions, STOP excluded
    bool stopped{false};
    int collisions{0};
    std::optional<std::string> failure;
    MetricReport metrics;

    [[nodiscard]] Trajectory trajectory() const;
};

/// Per-episode noise stream: derived from the randomization seed and the
/// episode id so concurrent rollouts never share state.
[[nodiscard]] Rng episode_rng(const RandomizationConfig& cfg, const std::string& episode_id,
                              std::uint64_t stream = 0);

/// Queries the policy for chunks over the 16 most recent observations until
/// STOP or `max_steps` executed actions. Policy exceptions end the episode
/// and are reported in `failure`.
[[nodiscard]] RolloutResult rollout(Policy& policy, const EpisodeSpec& episode, const WorldSpec& world,
                                    const RandomizationConfig& randcfg, const RolloutOptions& options = {});

/// Replays `actions` from `start` without noise; returns visited positions
/// and whether any step collided.
struct Replay {
    std::vector<Pose> poses;
    int collisions{0};
};
[[nodiscard]] Replay replay_actions(const Pose& start, std::span<const Action> actions, const WorldSpec& world);

}  // namespace navfly
