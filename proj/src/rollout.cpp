#include "navfly/rollout.hpp"

#include <algorithm>
#include <exception>

namespace navfly {

void to_json(nlohmann::json& j, const EpisodeSpec& e) {
    j = nlohmann::json{{"id", e.id},
                       {"world_id", e.world_id},
                       {"start", e.start},
                       {"reference_points", e.reference_points},
                       {"instruction", e.instruction},
                       {"goal", e.goal},
                       {"goal_landmark", e.goal_landmark},
                       {"shortest_path_length", e.shortest_path_length},
                       {"oracle_actions", e.oracle_actions},
                       {"oracle_positions", e.oracle_positions}};
}

void from_json(const nlohmann::json& j, EpisodeSpec& e) {
    j.at("id").get_to(e.id);
    j.at("world_id").get_to(e.world_id);
    j.at("start").get_to(e.start);
    j.at("reference_points").get_to(e.reference_points);
    j.at("instruction").get_to(e.instruction);
    j.at("goal").get_to(e.goal);
    j.at("goal_landmark").get_to(e.goal_landmark);
    j.at("shortest_path_length").get_to(e.shortest_path_length);
    j.at("oracle_actions").get_to(e.oracle_actions);
    j.at("oracle_positions").get_to(e.oracle_positions);
    if (e.reference_points.empty()) throw std::invalid_argument("episode " + e.id + " has no reference points");
}

Trajectory RolloutResult::trajectory() const {
    std::vector<Point2> pts;
    pts.reserve(poses.size());
    for (const auto& p : poses) pts.push_back(p.position);
    return Trajectory(std::move(pts), TrajectoryKind::executed);
}

Rng episode_rng(const RandomizationConfig& cfg, const std::string& episode_id, std::uint64_t stream) {
    return Rng(mix_seed(mix_seed(cfg.seed, hash_string(episode_id)), stream));
}

RolloutResult rollout(Policy& policy, const EpisodeSpec& episode, const WorldSpec& world,
                      const RandomizationConfig& randcfg, const RolloutOptions& options) {
    if (options.max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
    RolloutResult out;
    Rng rng = episode_rng(randcfg, episode.id);
    const InstructionContext instruction = parse_instruction(episode.instruction);
    Pose pose = episode.start;
    out.poses.push_back(pose);
    out.observations.push_back(observe(pose, world, randcfg, rng, 0));

    const auto max_steps = static_cast<std::size_t>(options.max_steps);
    while (!out.stopped && out.actions.size() < max_steps) {
        const std::size_t n_obs = out.observations.size();
        const std::size_t first = n_obs > kWindowSize ? n_obs - kWindowSize : 0;
        const std::size_t n_act = out.actions.size();
        const std::size_t first_act = n_act > kChunkSize ? n_act - kChunkSize : 0;
        ActionChunk chunk;
        try {
            chunk = policy.act(PolicyInput{
                instruction, std::span<const Observation>(out.observations).subspan(first),
                std::span<const Action>(out.actions).subspan(first_act)});
        } catch (const std::exception& e) {
            out.failure = std::string("policy failed at step ") + std::to_string(n_act) + ": " + e.what();
            break;
        }
        if (chunk.empty()) {
            out.failure = "policy returned an empty chunk at step " + std::to_string(n_act);
            break;
        }
        for (std::size_t i = 0; i < chunk.size() && i < kChunkSize; ++i) {
            const Action& a = chunk[i];
            if (a.type == ActionType::stop) {
                out.stopped = true;
                break;
            }
            const StepResult r = step(pose, a, world);
            pose = r.pose;
            out.collisions += r.collided ? 1 : 0;
            out.actions.push_back(a);
            out.poses.push_back(pose);
            out.observations.push_back(observe(pose, world, randcfg, rng, static_cast<int>(out.actions.size())));
            if (out.actions.size() >= max_steps) break;
        }
    }

    const Trajectory executed = out.trajectory();
    EpisodeResult result{executed,
                         episode.dense_oracle(),
                         episode.goal,
                         episode.shortest_path_length,
                         executed.length(),
                         out.stopped};
    out.metrics = evaluate_episode(result);
    return out;
}

Replay replay_actions(const Pose& start, std::span<const Action> actions, const WorldSpec& world) {
    Replay r;
    Pose pose = start;
    r.poses.push_back(pose);
    for (const auto& a : actions) {
        if (a.type == ActionType::stop) break;
        const StepResult s = step(pose, a, world);
        pose = s.pose;
        r.collisions += s.collided ? 1 : 0;
        r.poses.push_back(pose);
    }
    return r;
}

}  // namespace navfly
