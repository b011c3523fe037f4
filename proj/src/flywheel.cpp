#include "navfly/flywheel.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

namespace navfly {

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// exception after all workers have joined.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string iter_dir(int k) { return "iter_" + std::to_string(k); }

}  // namespace

const WorldSpec& Benchmark::world(const std::string& id) const {
    for (const auto& w : worlds) {
        if (w.id == id) return w;
    }
    throw std::invalid_argument("unknown world '" + id + "'");
}

Benchmark make_benchmark(const BenchmarkConfig& config) {
    if (config.train_worlds == 0 || config.validation_worlds == 0) {
        throw std::invalid_argument("benchmark needs at least one world per split");
    }
    Benchmark b;
    const auto build_split = [&](std::size_t world_count, std::size_t episodes, std::uint64_t stream,
                                 std::vector<EpisodeSpec>& out) {
        for (std::size_t w = 0; w < world_count; ++w) {
            const std::uint64_t world_seed = mix_seed(mix_seed(config.seed, stream), w);
            WorldSpec world = generate_world(world_seed, config.world);
            const std::size_t count = episodes / world_count + (w < episodes % world_count ? 1 : 0);
            auto eps = generate_episodes(world, count, mix_seed(world_seed, 0x657073ull), config.episodes);
            out.insert(out.end(), eps.begin(), eps.end());
            b.worlds.push_back(std::move(world));
        }
    };
    build_split(config.train_worlds, config.train_episodes, 1, b.train);
    build_split(config.validation_worlds, config.validation_episodes, 2, b.validation);
    return b;
}

SplitEvaluation evaluate_split(const PolicyFactory& make_policy, const std::vector<EpisodeSpec>& episodes,
                               const Benchmark& benchmark, const EvalOptions& options) {
    if (episodes.empty()) throw std::invalid_argument("cannot evaluate an empty split");
    SplitEvaluation out;
    out.episodes.resize(episodes.size());
    parallel_for(episodes.size(), options.jobs, [&](std::size_t i) {
        const EpisodeSpec& ep = episodes[i];
        auto policy = make_policy(ep);
        out.episodes[i] = {ep.id, rollout(*policy, ep, benchmark.world(ep.world_id), options.randomization,
                                          options.rollout)};
    });
    std::vector<MetricReport> reports;
    reports.reserve(out.episodes.size());
    for (const auto& e : out.episodes) {
        reports.push_back(e.rollout.metrics);
        if (e.rollout.failure) {
            ++out.failures;
            spdlog::warn("episode {}: {}", e.episode_id, *e.rollout.failure);
        }
    }
    out.summary = aggregate(reports);
    return out;
}

SplitEvaluation evaluate_split(std::shared_ptr<const PolicyModel> model, const std::vector<EpisodeSpec>& episodes,
                               const Benchmark& benchmark, const EvalOptions& options) {
    return evaluate_split(
        [&](const EpisodeSpec&) -> std::unique_ptr<Policy> {
            return std::make_unique<ModelPolicy>(model, options.rollout.actions);
        },
        episodes, benchmark, options);
}

void FlywheelConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
    if (!(threshold > 0)) throw std::invalid_argument("threshold S must be positive");
    if (!(spacing > 0)) throw std::invalid_argument("spacing must be positive");
    if (training.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (!(training.learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
    if (rollout.max_steps < 1) throw std::invalid_argument("max_steps must be positive");
    randomization.validate();
}

void to_json(nlohmann::json& j, const FlywheelConfig& c) {
    j = nlohmann::json{{"iterations", c.iterations},
                       {"threshold", c.threshold},
                       {"spacing", c.spacing},
                       {"seed", c.seed},
                       {"stop_on_drop", c.stop_on_drop},
                       {"randomization", c.randomization},
                       {"max_steps", c.rollout.max_steps},
                       {"epochs", c.training.epochs},
                       {"learning_rate", c.training.learning_rate},
                       {"include_correction_samples", c.mix.include_correction_samples},
                       {"include_perception", c.mix.include_perception},
                       {"sample_half", c.mix.sample_half},
                       {"oracle_remix", c.mix.oracle_remix},
                       {"qa_per_keyframe", c.perception.qa_per_keyframe},
                       {"keyframe_offset", c.keyframe_offset},
                       {"failed_only", c.failed_only}};
}

void from_json(const nlohmann::json& j, FlywheelConfig& c) {
    j.at("iterations").get_to(c.iterations);
    j.at("threshold").get_to(c.threshold);
    j.at("spacing").get_to(c.spacing);
    j.at("seed").get_to(c.seed);
    j.at("stop_on_drop").get_to(c.stop_on_drop);
    j.at("randomization").get_to(c.randomization);
    j.at("max_steps").get_to(c.rollout.max_steps);
    j.at("epochs").get_to(c.training.epochs);
    j.at("learning_rate").get_to(c.training.learning_rate);
    j.at("include_correction_samples").get_to(c.mix.include_correction_samples);
    j.at("include_perception").get_to(c.mix.include_perception);
    j.at("sample_half").get_to(c.mix.sample_half);
    j.at("oracle_remix").get_to(c.mix.oracle_remix);
    j.at("qa_per_keyframe").get_to(c.perception.qa_per_keyframe);
    j.at("keyframe_offset").get_to(c.keyframe_offset);
    j.at("failed_only").get_to(c.failed_only);
}

void to_json(nlohmann::json& j, const IterationRecord& r) {
    j = nlohmann::json{{"iteration", r.iteration},
                       {"train", r.train},
                       {"validation", r.validation},
                       {"deviations", r.deviations},
                       {"corrections_generated", r.corrections_generated},
                       {"corrections_skipped", r.corrections_skipped},
                       {"sampled_corrections", r.sampled_corrections},
                       {"oracle_added", r.oracle_added},
                       {"action_samples", r.action_samples},
                       {"perception_samples", r.perception_samples},
                       {"instruction_samples", r.instruction_samples},
                       {"supervised_slots", r.supervised_slots},
                       {"model_version", r.model_version},
                       {"checkpoint", r.checkpoint},
                       {"trained", r.trained},
                       {"warnings", r.warnings}};
}

void from_json(const nlohmann::json& j, IterationRecord& r) {
    j.at("iteration").get_to(r.iteration);
    j.at("train").get_to(r.train);
    j.at("validation").get_to(r.validation);
    j.at("deviations").get_to(r.deviations);
    j.at("corrections_generated").get_to(r.corrections_generated);
    j.at("corrections_skipped").get_to(r.corrections_skipped);
    j.at("sampled_corrections").get_to(r.sampled_corrections);
    j.at("oracle_added").get_to(r.oracle_added);
    j.at("action_samples").get_to(r.action_samples);
    j.at("perception_samples").get_to(r.perception_samples);
    j.at("instruction_samples").get_to(r.instruction_samples);
    j.at("supervised_slots").get_to(r.supervised_slots);
    j.at("model_version").get_to(r.model_version);
    j.at("checkpoint").get_to(r.checkpoint);
    j.at("trained").get_to(r.trained);
    j.at("warnings").get_to(r.warnings);
}

void to_json(nlohmann::json& j, const FlywheelRunRecord& r) {
    j = nlohmann::json{{"config", r.config},
                       {"baseline", r.baseline},
                       {"baseline_version", r.baseline_version},
                       {"iterations", r.iterations},
                       {"best_iteration", r.best_iteration},
                       {"stopped_early", r.stopped_early}};
}

void from_json(const nlohmann::json& j, FlywheelRunRecord& r) {
    j.at("config").get_to(r.config);
    j.at("baseline").get_to(r.baseline);
    j.at("baseline_version").get_to(r.baseline_version);
    j.at("iterations").get_to(r.iterations);
    j.at("best_iteration").get_to(r.best_iteration);
    j.at("stopped_early").get_to(r.stopped_early);
}

bool should_stop(const std::vector<double>& validation_sr) {
    const std::size_t n = validation_sr.size();
    return n >= 2 && validation_sr[n - 1] < validation_sr[n - 2];
}

int best_iteration(const std::vector<double>& validation_sr) {
    if (validation_sr.empty()) throw std::invalid_argument("no validation results to choose from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < validation_sr.size(); ++i) {
        if (validation_sr[i] >= validation_sr[best]) best = i;
    }
    return static_cast<int>(best);
}

std::vector<std::optional<DeviationReport>> detect_all(const std::vector<EpisodeSpec>& episodes,
                                                       const std::vector<EpisodeEvaluation>& rollouts,
                                                       double threshold, double spacing, bool failed_only) {
    if (episodes.size() != rollouts.size()) throw std::invalid_argument("episode and rollout counts differ");
    std::vector<std::optional<DeviationReport>> out;
    out.reserve(episodes.size());
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        if (failed_only && rollouts[i].rollout.metrics.success == 1) {
            out.emplace_back();
            continue;
        }
        out.push_back(detect_deviation(rollouts[i].rollout.trajectory(), episodes[i].oracle(), threshold, spacing));
    }
    return out;
}

std::vector<OracleBundle> build_oracle_pool(const Benchmark& benchmark, const RandomizationConfig& randomization,
                                            std::size_t jobs) {
    std::vector<OracleBundle> pool(benchmark.train.size());
    parallel_for(pool.size(), jobs, [&](std::size_t i) {
        const EpisodeSpec& ep = benchmark.train[i];
        EpisodeData data = oracle_to_samples(ep, benchmark.world(ep.world_id), randomization);
        pool[i] = {ep.id, std::move(data.samples), std::move(data.instruction)};
    });
    return pool;
}

Dataset flatten(const std::vector<OracleBundle>& pool) {
    Dataset d;
    for (const auto& b : pool) {
        d.samples.insert(d.samples.end(), b.samples.begin(), b.samples.end());
        d.instructions.push_back(b.instruction);
    }
    return d;
}

PolicyModel train_base(const Benchmark& benchmark, const RandomizationConfig& randomization,
                       const TrainOptions& training, const ModelHyper& hyper, std::size_t jobs) {
    const Dataset d = flatten(build_oracle_pool(benchmark, randomization, jobs));
    return train(PolicyModel::initialize(training.seed, hyper), d.samples, d.perception, d.instructions, training);
}

IterationOutput run_iteration(const PolicyModel& model, const Benchmark& benchmark,
                              const std::vector<OracleBundle>& oracle_pool, const FlywheelConfig& config,
                              int iteration, Annotator& annotator) {
    config.validate();
    IterationOutput out{model, {}, {}, {}, {}};
    IterationRecord& rec = out.record;
    rec.iteration = iteration;

    const EvalOptions eval{config.randomization, config.rollout, config.jobs};
    out.train_eval = evaluate_split(std::make_shared<const PolicyModel>(model), benchmark.train, benchmark, eval);
    rec.train = out.train_eval.summary;
    const auto detections = detect_all(benchmark.train, out.train_eval.episodes, config.threshold, config.spacing,
                                       config.failed_only);

    std::vector<std::optional<CorrectionBundle>> bundles(benchmark.train.size());
    parallel_for(bundles.size(), config.jobs, [&](std::size_t i) {
        if (!detections[i]) return;
        const EpisodeSpec& ep = benchmark.train[i];
        const WorldSpec& world = benchmark.world(ep.world_id);
        CorrectionOptions opts{config.keyframe_offset, config.rollout.actions, iteration};
        auto record = make_correction(ep, out.train_eval.episodes[i].rollout, *detections[i], world,
                                      config.randomization, opts);
        if (!record) return;
        CorrectionBundle b;
        b.samples = correction_to_samples(*record);
        b.perception = make_perception(*record, annotator, config.perception);
        b.record = std::move(*record);
        bundles[i] = std::move(b);
    });

    std::vector<CorrectionBundle> corrections;
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        if (detections[i]) ++rec.deviations;
        if (bundles[i]) corrections.push_back(std::move(*bundles[i]));
    }
    rec.corrections_generated = corrections.size();
    rec.corrections_skipped = rec.deviations - rec.corrections_generated;
    for (const auto& c : corrections) out.corrections.push_back(c.record);

    if (rec.deviations == 0) {
        rec.warnings.push_back("no deviations detected; model unchanged");
        spdlog::warn("iteration {}: {}", iteration, rec.warnings.back());
        rec.model_version = model.version();
        return out;
    }

    MixedDataset mix = sample_mix(corrections, oracle_pool, mix_seed(config.seed, static_cast<std::uint64_t>(iteration)),
                                  config.mix);
    rec.warnings.insert(rec.warnings.end(), mix.warnings.begin(), mix.warnings.end());
    rec.sampled_corrections = mix.sampled_corrections.size();
    rec.oracle_added = mix.oracle_episodes.size();
    out.dataset = {std::move(mix.samples), std::move(mix.perception), std::move(mix.instructions)};
    rec.action_samples = out.dataset.samples.size();
    rec.perception_samples = out.dataset.perception.size();
    rec.instruction_samples = out.dataset.instructions.size();
    for (const auto& s : out.dataset.samples) {
        rec.supervised_slots += static_cast<std::size_t>(std::count(s.supervise.begin(), s.supervise.end(), true));
    }

    if (rec.sampled_corrections == 0 || (out.dataset.samples.empty() && out.dataset.perception.empty() &&
                                         out.dataset.instructions.empty())) {
        rec.warnings.push_back("no correction data sampled; model unchanged");
        spdlog::warn("iteration {}: {}", iteration, rec.warnings.back());
        rec.model_version = model.version();
        return out;
    }

    TrainOptions training = config.training;
    training.seed = mix_seed(config.training.seed, 0x666c79ull + static_cast<std::uint64_t>(iteration));
    out.model = train(model, out.dataset.samples, out.dataset.perception, out.dataset.instructions, training);
    rec.trained = true;
    rec.model_version = out.model.version();
    spdlog::info("iteration {}: train SR {:.1f}, {} deviations, {} corrections, {} sampled, {} oracle", iteration,
                 rec.train.sr, rec.deviations, rec.corrections_generated, rec.sampled_corrections, rec.oracle_added);
    return out;
}

nlohmann::json trajectory_entry(const EpisodeSpec& episode, const RolloutResult& rollout,
                                const std::optional<DeviationReport>& deviation) {
    std::vector<Point2> positions;
    positions.reserve(rollout.poses.size());
    for (const auto& p : rollout.poses) positions.push_back(p.position);
    nlohmann::json j{{"episode_id", episode.id},
                     {"world_id", episode.world_id},
                     {"reference_points", episode.reference_points},
                     {"positions", positions},
                     {"actions", rollout.actions},
                     {"stopped", rollout.stopped},
                     {"collisions", rollout.collisions},
                     {"metrics", rollout.metrics},
                     {"deviation", deviation ? nlohmann::json(*deviation) : nlohmann::json(nullptr)}};
    if (rollout.failure) j["failure"] = *rollout.failure;
    return j;
}

FlywheelResult run_flywheel(const PolicyModel& model, const Benchmark& benchmark, const FlywheelConfig& config,
                            Annotator& annotator) {
    config.validate();
    if (benchmark.train.empty() || benchmark.validation.empty()) {
        throw std::invalid_argument("flywheel needs training and validation episodes");
    }
    const bool persist = !config.out_dir.empty();
    nlohmann::json timings = nlohmann::json::array();
    const auto run_start = std::chrono::steady_clock::now();

    FlywheelResult result;
    result.record.config = config;
    result.models.push_back(model);
    result.record.baseline_version = model.version();

    const EvalOptions eval{config.randomization, config.rollout, config.jobs};
    const auto oracle_pool = build_oracle_pool(benchmark, config.randomization, config.jobs);
    result.record.baseline =
        evaluate_split(std::make_shared<const PolicyModel>(model), benchmark.validation, benchmark, eval).summary;
    std::vector<double> sr{result.record.baseline.sr};
    spdlog::info("baseline validation SR {:.1f}", result.record.baseline.sr);

    for (int k = 1; k <= config.iterations; ++k) {
        const auto iter_start = std::chrono::steady_clock::now();
        IterationOutput out = run_iteration(result.models.back(), benchmark, oracle_pool, config, k, annotator);
        const double train_seconds = seconds_since(iter_start);
        out.record.validation =
            evaluate_split(std::make_shared<const PolicyModel>(out.model), benchmark.validation, benchmark, eval)
                .summary;
        spdlog::info("iteration {}: validation SR {:.1f}, NE {:.2f}", k, out.record.validation.sr,
                     out.record.validation.ne);

        if (persist) {
            const auto dir = config.out_dir / iter_dir(k);
            std::filesystem::create_directories(dir);
            const auto detections =
                detect_all(benchmark.train, out.train_eval.episodes, config.threshold, config.spacing,
                                       config.failed_only);
            std::ostringstream traj;
            for (std::size_t i = 0; i < benchmark.train.size(); ++i) {
                traj << trajectory_entry(benchmark.train[i], out.train_eval.episodes[i].rollout, detections[i]).dump()
                     << '\n';
            }
            write_text_atomic(dir / "trajectories.jsonl", traj.str());
            write_dataset(dir / "dataset.jsonl", out.dataset);
            DatasetManifest manifest = describe(out.dataset, config.seed, k);
            manifest.extra = {{"sampled_corrections", out.record.sampled_corrections},
                              {"oracle_added", out.record.oracle_added}};
            write_manifest(dir / "manifest.json", manifest);
            save_model(out.model, dir / "model.ckpt");
            out.record.checkpoint = iter_dir(k) + "/model.ckpt";
        }
        timings.push_back({{"iteration", k},
                           {"train_split_and_retrain_seconds", train_seconds},
                           {"total_seconds", seconds_since(iter_start)}});

        sr.push_back(out.record.validation.sr);
        result.models.push_back(std::move(out.model));
        result.record.iterations.push_back(std::move(out.record));
        if (config.stop_on_drop && should_stop(sr)) {
            result.record.stopped_early = k < config.iterations;
            spdlog::info("validation SR dropped at iteration {}; stopping", k);
            break;
        }
    }

    result.record.best_iteration = best_iteration(sr);
    result.best = result.models.at(static_cast<std::size_t>(result.record.best_iteration));
    if (persist) {
        save_model(model, config.out_dir / "iter_0" / "model.ckpt");
        write_json(config.out_dir / "run.json", nlohmann::json(result.record));
        write_json(config.out_dir / "timings.json",
                   {{"iterations", timings}, {"total_seconds", seconds_since(run_start)}});
    }
    return result;
}

void to_json(nlohmann::json& j, const Benchmark& b) {
    j = nlohmann::json{{"worlds", b.worlds}, {"train", b.train}, {"validation", b.validation}};
}

void from_json(const nlohmann::json& j, Benchmark& b) {
    j.at("worlds").get_to(b.worlds);
    j.at("train").get_to(b.train);
    j.at("validation").get_to(b.validation);
}

void save_benchmark(const std::filesystem::path& dir, const Benchmark& benchmark) {
    std::filesystem::create_directories(dir);
    write_json(dir / "worlds.json", nlohmann::json(benchmark.worlds));
    write_episodes(dir / "train.jsonl", benchmark.train);
    write_episodes(dir / "validation.jsonl", benchmark.validation);
}

Benchmark load_benchmark(const std::filesystem::path& dir) {
    Benchmark b;
    read_json(dir / "worlds.json").get_to(b.worlds);
    b.train = read_episodes(dir / "train.jsonl");
    b.validation = read_episodes(dir / "validation.jsonl");
    for (const auto* split : {&b.train, &b.validation}) {
        for (const auto& ep : *split) (void)b.world(ep.world_id);
    }
    return b;
}

}  // namespace navfly
