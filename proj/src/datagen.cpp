#include "navfly/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include <spdlog/spdlog.h>

#include "navfly/annotator.hpp"
#include "navfly/metrics.hpp"

namespace navfly {

namespace {

constexpr double kTurnClauseAngle = 30.0 * std::numbers::pi / 180.0;
constexpr double kPassRadius = 1.0;

template <typename T>
std::vector<T> slice(std::span<const T> v, std::size_t begin, std::size_t end) {
    end = std::min(end, v.size());
    begin = std::min(begin, end);
    return std::vector<T>(v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end));
}

// Window, history and target for the chunk starting at `step` of a run
// whose observations[i] is the frame seen before actions[i].
TrainSample sample_at(std::span<const Observation> observations, std::span<const Action> actions, std::size_t step,
                      std::size_t chunk_size) {
    TrainSample s;
    s.window = slice(observations, step + 1 > kWindowSize ? step + 1 - kWindowSize : 0, step + 1);
    s.history = slice(actions, step > kChunkSize ? step - kChunkSize : 0, step);
    for (std::size_t j = step; j < actions.size() && s.target.size() < chunk_size; ++j) {
        s.target.push_back(actions[j]);
        if (actions[j].type == ActionType::stop) break;
    }
    return s;
}

int nearest_landmark(const WorldSpec& world, const Point2& p) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& lm : world.landmarks) {
        const double d = distance(lm.position, p);
        if (d < best_d) {
            best_d = d;
            best = lm.id;
        }
    }
    return best;
}

}  // namespace

std::string trajectory_to_instruction(std::span<const Point2> reference_points, const WorldSpec& world) {
    if (reference_points.empty()) throw std::invalid_argument("instruction needs at least one reference point");
    if (world.landmarks.empty()) throw std::invalid_argument("instruction needs a landmark to stop at");
    const int goal = nearest_landmark(world, reference_points.back());
    std::vector<std::string> clauses;
    std::vector<int> used{goal};

    if (reference_points.size() >= 2) {
        clauses.emplace_back("go forward");
        for (std::size_t seg = 0; seg + 1 < reference_points.size(); ++seg) {
            const Point2 a = reference_points[seg];
            const Point2 b = reference_points[seg + 1];
            if (seg > 0) {
                const Point2 prev = reference_points[seg - 1];
                const double turn = wrap_pi(std::atan2(b.y - a.y, b.x - a.x) - std::atan2(a.y - prev.y, a.x - prev.x));
                if (std::abs(turn) >= kTurnClauseAngle) {
                    clauses.emplace_back(turn > 0 ? "turn left" : "turn right");
                    clauses.emplace_back("go forward");
                }
            }
            // Landmarks close to this segment, in the order they are passed.
            std::vector<std::pair<double, int>> passed;
            const Point2 ab = b - a;
            const double len_sq = ab.x * ab.x + ab.y * ab.y;
            for (const auto& lm : world.landmarks) {
                if (std::find(used.begin(), used.end(), lm.id) != used.end()) continue;
                if (point_segment_distance(lm.position, a, b) > kPassRadius) continue;
                const Point2 ap = lm.position - a;
                const double along = len_sq > 0 ? (ap.x * ab.x + ap.y * ab.y) / len_sq : 0.0;
                passed.emplace_back(along, lm.id);
            }
            std::sort(passed.begin(), passed.end());
            for (const auto& [along, id] : passed) {
                clauses.push_back("pass the " + world.landmark(id).label());
                used.push_back(id);
            }
        }
    }
    clauses.push_back("stop at the " + world.landmark(goal).label());

    if (clauses.size() == 1) return clauses.front();
    std::string out;
    for (std::size_t i = 0; i + 1 < clauses.size(); ++i) {
        if (i > 0) out += ", ";
        out += clauses[i];
    }
    return out + " and " + clauses.back();
}

std::vector<EpisodeSpec> generate_episodes(const WorldSpec& world, std::size_t count, std::uint64_t seed,
                                           const EpisodeParams& params) {
    if (world.landmarks.size() < 2) throw std::invalid_argument("episode generation needs at least two landmarks");
    std::vector<std::array<int, 2>> free_cells;
    for (int y = 0; y < world.grid.height; ++y) {
        for (int x = 0; x < world.grid.width; ++x) {
            if (!world.grid.blocked(x, y)) free_cells.push_back({x, y});
        }
    }
    if (free_cells.empty()) throw GenerationError("world " + world.id + " has no free cells");

    Rng rng(mix_seed(seed, hash_string(world.id)));
    std::vector<EpisodeSpec> episodes;
    for (std::size_t idx = 0; idx < count; ++idx) {
        bool made = false;
        for (int attempt = 0; attempt < params.max_retries && !made; ++attempt) {
            const auto cell = free_cells[static_cast<std::size_t>(rng.below(free_cells.size()))];
            const Point2 start = world.grid.cell_center(cell[0], cell[1]);
            const Landmark& goal = world.landmarks[static_cast<std::size_t>(rng.below(world.landmarks.size()))];
            if (distance(start, goal.position) < kSuccessRadius) continue;
            PlannedPath path;
            try {
                path = plan(start, goal.position, world);
            } catch (const NoPathError&) {
                continue;
            }
            if (path.length < params.min_path_length || path.length > params.max_path_length) continue;
            // Start facing the first leg, quantized to the turn step.
            const Point2 first_leg = path.waypoints.size() > 1 ? path.waypoints[1] - start : Point2{1.0, 0.0};
            const double steps = std::round(std::atan2(first_leg.y, first_leg.x) / params.actions.turn_step);
            const Pose start_pose{start, wrap_two_pi(steps * params.actions.turn_step)};
            auto actions = path_to_actions(path, start_pose, params.actions);
            const Replay replay = replay_actions(start_pose, actions, world);
            if (replay.collisions > 0) continue;
            if (distance(replay.poses.back().position, goal.position) >= kSuccessRadius) continue;

            EpisodeSpec ep;
            char buf[64];
            std::snprintf(buf, sizeof(buf), "/s%llu/ep-%03zu", static_cast<unsigned long long>(seed), idx);
            ep.id = world.id + buf;
            ep.world_id = world.id;
            ep.start = start_pose;
            ep.reference_points = path.waypoints;
            ep.goal = goal.position;
            ep.goal_landmark = goal.id;
            ep.shortest_path_length = path.length;
            ep.instruction = trajectory_to_instruction(path.waypoints, world);
            ep.oracle_actions = std::move(actions);
            for (const auto& p : replay.poses) ep.oracle_positions.push_back(p.position);
            episodes.push_back(std::move(ep));
            made = true;
        }
        if (!made) {
            throw GenerationError("could not generate episode " + std::to_string(idx) + " in world " + world.id);
        }
    }
    return episodes;
}

EpisodeData oracle_to_samples(const EpisodeSpec& episode, const WorldSpec& world, const RandomizationConfig& randcfg,
                              std::size_t chunk_size) {
    if (chunk_size == 0 || chunk_size > kChunkSize) throw std::invalid_argument("chunk size must be in [1, 4]");
    Rng rng = episode_rng(randcfg, episode.id, 1);
    std::vector<Observation> obs;
    Pose pose = episode.start;
    obs.push_back(observe(pose, world, randcfg, rng, 0));
    for (std::size_t i = 0; i < episode.oracle_actions.size(); ++i) {
        const Action& a = episode.oracle_actions[i];
        if (a.type == ActionType::stop) break;
        pose = step(pose, a, world).pose;
        obs.push_back(observe(pose, world, randcfg, rng, static_cast<int>(i + 1)));
    }

    EpisodeData out;
    for (std::size_t s = 0; s < episode.oracle_actions.size(); ++s) {
        TrainSample sample = sample_at(obs, episode.oracle_actions, s, chunk_size);
        sample.kind = SampleKind::oracle;
        sample.episode_id = episode.id;
        sample.instruction = episode.instruction;
        sample.supervise.assign(sample.target.size(), true);
        out.samples.push_back(std::move(sample));
    }
    out.instruction.episode_id = episode.id;
    out.instruction.observations = subsample_episode(obs);
    out.instruction.tokens = parse_instruction(episode.instruction).token_ids;
    return out;
}

std::vector<std::size_t> keyframe_indices(std::size_t t, std::size_t offset, std::size_t length) {
    if (length == 0) return {};
    const auto clamp = [&](long v) {
        return static_cast<std::size_t>(std::clamp<long>(v, 1, static_cast<long>(length)));
    };
    const auto ti = static_cast<long>(t);
    const auto w = static_cast<long>(offset);
    std::vector<std::size_t> out{clamp(ti - w), clamp(ti), clamp(ti + w)};
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::optional<CorrectionRecord> make_correction(const EpisodeSpec& episode, const RolloutResult& executed,
                                                const DeviationReport& report, const WorldSpec& world,
                                                const RandomizationConfig& randcfg,
                                                const CorrectionOptions& options) {
    const std::size_t t = report.deviation_index;
    if (t == 0 || t > executed.poses.size()) throw std::invalid_argument("deviation index outside the executed run");
    const Pose at = executed.poses[t - 1];
    const auto& refs = episode.reference_points;

    std::vector<Point2> route{at.position};
    const std::size_t k = std::min(report.segment_index, refs.size() - 1);
    for (std::size_t i = std::max<std::size_t>(k, 1); i < refs.size(); ++i) route.push_back(refs[i]);
    if (refs.size() == 1) route.push_back(refs.front());

    CorrectionRecord rec;
    try {
        rec.correction_path = plan_through(route, world);
    } catch (const NoPathError& e) {
        spdlog::warn("skipping correction for {}: {}", episode.id, e.what());
        return std::nullopt;
    } catch (const std::invalid_argument& e) {
        spdlog::warn("skipping correction for {}: {}", episode.id, e.what());
        return std::nullopt;
    }
    rec.episode_id = episode.id;
    rec.iteration = options.iteration;
    rec.instruction = episode.instruction;
    rec.report = report;
    rec.correction_actions = path_to_actions(rec.correction_path, at, options.actions);

    Rng rng = episode_rng(randcfg, episode.id, 2 + static_cast<std::uint64_t>(options.iteration));
    Pose pose = at;
    rec.correction_positions.push_back(pose.position);
    for (const auto& a : rec.correction_actions) {
        if (a.type == ActionType::stop) break;
        pose = step(pose, a, world).pose;
        rec.correction_positions.push_back(pose.position);
        rec.correction_observations.push_back(
            observe(pose, world, randcfg, rng, static_cast<int>(t - 1 + rec.correction_observations.size() + 1)));
    }

    const std::span<const Observation> obs(executed.observations);
    const std::span<const Action> acts(executed.actions);
    rec.history_observations = slice(obs, 0, t);
    rec.history_actions = slice(acts, 0, t - 1);

    RandomizationConfig clean = randcfg;
    clean.bearing_jitter = 0.0;
    clean.landmark_dropout = 0.0;
    clean.distance_bin_noise = 0.0;
    Rng unused(0);
    for (std::size_t idx : keyframe_indices(t, options.keyframe_offset, executed.poses.size())) {
        Keyframe kf;
        kf.index = idx;
        kf.heading = executed.poses[idx - 1].heading;
        kf.observation = observe(executed.poses[idx - 1], world, clean, unused, static_cast<int>(idx - 1));
        kf.window = slice(obs, idx > kWindowSize ? idx - kWindowSize : 0, idx);
        rec.keyframes.push_back(std::move(kf));
    }
    return rec;
}

std::vector<bool> correction_mask(std::size_t step, std::size_t first_correction_step, std::size_t chunk_len) {
    std::vector<bool> mask(chunk_len);
    for (std::size_t j = 0; j < chunk_len; ++j) mask[j] = step + j >= first_correction_step;
    return mask;
}

std::vector<TrainSample> correction_to_samples(const CorrectionRecord& record, std::size_t chunk_size) {
    if (chunk_size == 0 || chunk_size > kChunkSize) throw std::invalid_argument("chunk size must be in [1, 4]");
    std::vector<Observation> obs = record.history_observations;
    obs.insert(obs.end(), record.correction_observations.begin(), record.correction_observations.end());
    std::vector<Action> acts = record.history_actions;
    acts.insert(acts.end(), record.correction_actions.begin(), record.correction_actions.end());

    const std::size_t first = record.history_actions.size();
    std::vector<TrainSample> out;
    for (std::size_t s = first + 1 > chunk_size ? first + 1 - chunk_size : 0; s < acts.size(); ++s) {
        TrainSample sample = sample_at(obs, acts, s, chunk_size);
        sample.kind = SampleKind::correction;
        sample.episode_id = record.episode_id;
        sample.instruction = record.instruction;
        sample.supervise = correction_mask(s, first, sample.target.size());
        out.push_back(std::move(sample));
    }
    return out;
}

std::vector<PerceptionSample> make_perception(const CorrectionRecord& record, Annotator& annotator,
                                              const PerceptionOptions& options) {
    std::vector<PerceptionSample> out;
    for (const auto& kf : record.keyframes) {
        Annotation caption;
        Annotation qa;
        try {
            caption = annotator.annotate(kf, PromptKind::caption);
            qa = annotator.annotate(kf, PromptKind::qa);
        } catch (const std::exception& e) {
            spdlog::warn("skipping keyframe {} of {}: {}", kf.index, record.episode_id, e.what());
            continue;
        }
        PerceptionSample cap;
        cap.episode_id = record.episode_id;
        cap.window = kf.window;
        cap.task = PerceptionTask::caption;
        cap.prompt = kCaptionPrompt;
        cap.caption_tokens = caption_tokens(caption.caption);
        out.push_back(std::move(cap));

        std::size_t taken = 0;
        for (const auto& pair : qa.qa) {
            if (taken >= options.qa_per_keyframe) break;
            const auto parsed = parse_qa(pair);
            if (!parsed) {
                spdlog::warn("dropping unparseable QA pair for {}: '{}' -> '{}'", record.episode_id, pair.question,
                             pair.answer);
                continue;
            }
            PerceptionSample s;
            s.episode_id = record.episode_id;
            s.window = kf.window;
            s.task = PerceptionTask::qa;
            s.prompt = pair.question;
            s.category = parsed->category;
            s.answer = parsed->answer;
            out.push_back(std::move(s));
            ++taken;
        }
    }
    return out;
}

MixCounts mix_counts(std::size_t available, const MixOptions& options) {
    MixCounts c;
    c.sampled = options.sample_half ? available / 2 : available;
    c.oracle = options.oracle_remix ? c.sampled / 2 : 0;
    return c;
}

MixedDataset sample_mix(std::span<const CorrectionBundle> corrections, std::span<const OracleBundle> oracle_pool,
                        std::uint64_t seed, const MixOptions& options) {
    MixedDataset mix;
    mix.corrections_available = corrections.size();
    const MixCounts counts = mix_counts(corrections.size(), options);

    std::vector<std::size_t> order(corrections.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng crng(mix_seed(seed, 0x636f7272ull));
    shuffle(order, crng);
    order.resize(counts.sampled);
    std::sort(order.begin(), order.end());
    for (auto i : order) {
        const auto& b = corrections[i];
        mix.sampled_corrections.push_back(b.record.episode_id);
        if (options.include_correction_samples) mix.samples.insert(mix.samples.end(), b.samples.begin(), b.samples.end());
        if (options.include_perception) {
            mix.perception.insert(mix.perception.end(), b.perception.begin(), b.perception.end());
        }
    }
    if (counts.sampled == 0) {
        mix.warnings.push_back("no correction trajectories sampled from " + std::to_string(corrections.size()) +
                               " available; flywheel iteration has no new data");
    }

    std::size_t want = counts.oracle;
    if (want > oracle_pool.size()) {
        mix.warnings.push_back("oracle pool holds " + std::to_string(oracle_pool.size()) + " episodes, " +
                               std::to_string(want) + " requested; taking all");
        want = oracle_pool.size();
    }
    std::vector<std::size_t> pool(oracle_pool.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    Rng orng(mix_seed(seed, 0x6f7261636c65ull));
    shuffle(pool, orng);
    pool.resize(want);
    std::sort(pool.begin(), pool.end());
    for (auto i : pool) {
        const auto& b = oracle_pool[i];
        mix.oracle_episodes.push_back(b.episode_id);
        mix.samples.insert(mix.samples.end(), b.samples.begin(), b.samples.end());
        mix.instructions.push_back(b.instruction);
    }
    for (const auto& w : mix.warnings) spdlog::warn("{}", w);
    return mix;
}

}  // namespace navfly
