#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "navfly/flywheel.hpp"
#include "support.hpp"

using namespace navfly;
using testing::TempDir;

namespace {

BenchmarkConfig small_config(std::uint64_t seed = 3) {
    BenchmarkConfig c;
    c.seed = seed;
    c.train_worlds = 2;
    c.validation_worlds = 1;
    c.train_episodes = 16;
    c.validation_episodes = 8;
    c.world.obstacle_density = 0.05;
    c.episodes.max_path_length = 10.0;
    return c;
}

const Benchmark& small_benchmark() {
    static const Benchmark b = make_benchmark(small_config());
    return b;
}

const PolicyModel& small_base() {
    static const PolicyModel m = [] {
        TrainOptions t;
        t.epochs = 3;
        t.learning_rate = 0.02;
        t.seed = 1;
        return train_base(small_benchmark(), RandomizationConfig{}, t, ModelHyper{16, 0.1});
    }();
    return m;
}

FlywheelConfig small_flywheel(int iterations) {
    FlywheelConfig c;
    c.iterations = iterations;
    c.stop_on_drop = false;
    c.seed = 4;
    c.randomization = {.bearing_jitter = 0.1, .landmark_dropout = 0.1, .distance_bin_noise = 0.1, .seed = 4};
    c.training.epochs = 2;
    c.training.learning_rate = 0.02;
    c.jobs = 2;
    return c;
}

PolicyFactory scripted_factory() {
    return [](const EpisodeSpec& ep) { return std::make_unique<ScriptedPolicy>(ep.oracle_actions); };
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("flywheel") {

TEST_CASE("make_benchmark splits worlds and is deterministic") {
    const auto& b = small_benchmark();
    CHECK(b.worlds.size() == 3);
    CHECK(b.train.size() == 16);
    CHECK(b.validation.size() == 8);
    std::set<std::string> train_worlds, val_worlds;
    for (const auto& ep : b.train) train_worlds.insert(ep.world_id);
    for (const auto& ep : b.validation) val_worlds.insert(ep.world_id);
    CHECK(train_worlds.size() == 2);
    CHECK(val_worlds.size() == 1);
    for (const auto& id : val_worlds) CHECK(train_worlds.count(id) == 0);
    const auto again = make_benchmark(small_config());
    CHECK(again.train == b.train);
    CHECK(again.validation == b.validation);
    CHECK_FALSE(make_benchmark(small_config(4)).train == b.train);

    TempDir dir("bench");
    save_benchmark(dir.path(), b);
    const auto loaded = load_benchmark(dir.path());
    CHECK(loaded.worlds == b.worlds);
    CHECK(loaded.train == b.train);
    CHECK(loaded.validation == b.validation);
}

TEST_CASE("evaluate_split: scripted, stop and determinism") {
    const auto& b = small_benchmark();
    const auto scripted = evaluate_split(scripted_factory(), b.train, b, EvalOptions{});
    CHECK(scripted.summary.sr == 100.0);
    CHECK(scripted.summary.episodes == b.train.size());
    CHECK(scripted.failures == 0);
    for (std::size_t i = 0; i < b.train.size(); ++i) CHECK(scripted.episodes[i].episode_id == b.train[i].id);

    const PolicyFactory stop = [](const EpisodeSpec&) { return std::make_unique<StopPolicy>(); };
    CHECK(evaluate_split(stop, b.train, b, EvalOptions{}).summary.sr == 0.0);

    EvalOptions noisy;
    noisy.randomization = {.bearing_jitter = 0.2, .landmark_dropout = 0.2, .distance_bin_noise = 0.2, .seed = 8};
    const auto model = std::make_shared<const PolicyModel>(small_base());
    const auto one = evaluate_split(model, b.validation, b, noisy);
    noisy.jobs = 4;
    const auto four = evaluate_split(model, b.validation, b, noisy);
    CHECK(one.summary == four.summary);
    for (std::size_t i = 0; i < one.episodes.size(); ++i) {
        CHECK(one.episodes[i].rollout.poses == four.episodes[i].rollout.poses);
    }
}

TEST_CASE("evaluate_split survives failing policies") {
    const auto& b = small_benchmark();
    struct Throwing final : Policy {
        ActionChunk act(const PolicyInput&) override { throw std::runtime_error("broken"); }
    };
    const PolicyFactory bad = [](const EpisodeSpec&) { return std::make_unique<Throwing>(); };
    const auto eval = evaluate_split(bad, b.validation, b, EvalOptions{});
    CHECK(eval.failures == b.validation.size());
    CHECK(eval.summary.sr == 0.0);
}

TEST_CASE("scripted rollouts trigger no deviations") {
    const auto& b = small_benchmark();
    const auto eval = evaluate_split(scripted_factory(), b.train, b, EvalOptions{});
    for (const auto& d : detect_all(b.train, eval.episodes, kDefaultThreshold, kDefaultSpacing)) {
        CHECK_FALSE(d.has_value());
    }
}

TEST_CASE("should_stop and best_iteration") {
    // Baseline 0.45, then iterations 1-4.
    const std::vector<double> sr{0.45, 0.50, 0.56, 0.60, 0.58};
    for (std::size_t n = 1; n < sr.size(); ++n) {
        CHECK_FALSE(should_stop(std::vector<double>(sr.begin(), sr.begin() + static_cast<long>(n))));
    }
    CHECK(should_stop(sr));
    CHECK(best_iteration(sr) == 3);
    CHECK(best_iteration({0.1, 0.2, 0.3, 0.4}) == 3);
    CHECK(best_iteration({0.5, 0.5}) == 1);
    CHECK(best_iteration({0.9, 0.5, 0.4}) == 0);
    CHECK_FALSE(should_stop({0.5, 0.5}));
    CHECK_THROWS_AS((void)best_iteration({}), std::invalid_argument);
}

TEST_CASE("flywheel config validation and json") {
    FlywheelConfig c;
    CHECK_NOTHROW(c.validate());
    c.iterations = 0;
    CHECK_THROWS(c.validate());
    c = {};
    c.threshold = 0.0;
    CHECK_THROWS(c.validate());
    c = small_flywheel(3);
    nlohmann::json j = c;
    const auto back = j.get<FlywheelConfig>();
    CHECK(nlohmann::json(back) == j);
}

TEST_CASE("a huge threshold yields no corrections and leaves the model unchanged") {
    const auto& b = small_benchmark();
    auto cfg = small_flywheel(1);
    cfg.threshold = 1000.0;
    StubAnnotator stub;
    const auto pool = build_oracle_pool(b, cfg.randomization);
    const auto out = run_iteration(small_base(), b, pool, cfg, 1, stub);
    CHECK(out.record.deviations == 0);
    CHECK(out.record.corrections_generated == 0);
    CHECK_FALSE(out.record.trained);
    CHECK(out.model == small_base());
    CHECK(out.record.model_version == small_base().version());
    CHECK_FALSE(out.record.warnings.empty());
}

TEST_CASE("iteration counts follow the sampling rule") {
    const auto& b = small_benchmark();
    const auto cfg = small_flywheel(1);
    StubAnnotator stub;
    const auto pool = build_oracle_pool(b, cfg.randomization);
    const auto out = run_iteration(small_base(), b, pool, cfg, 1, stub);
    const auto& r = out.record;
    REQUIRE(r.deviations > 1);
    CHECK(r.corrections_generated + r.corrections_skipped == r.deviations);
    CHECK(r.sampled_corrections == r.corrections_generated / 2);
    CHECK(r.oracle_added == std::min(r.sampled_corrections / 2, pool.size()));
    CHECK(r.trained);
    CHECK(r.model_version == small_base().version() + 1);
    CHECK(r.action_samples == out.dataset.samples.size());
    CHECK(r.perception_samples == out.dataset.perception.size());
    CHECK(r.instruction_samples == r.oracle_added);
    std::size_t slots = 0;
    for (const auto& s : out.dataset.samples) {
        slots += static_cast<std::size_t>(std::count(s.supervise.begin(), s.supervise.end(), true));
    }
    CHECK(r.supervised_slots == slots);
    CHECK(out.corrections.size() == r.corrections_generated);
    for (const auto& c : out.corrections) {
        CHECK(c.iteration == 1);
        const auto ep = std::find_if(b.train.begin(), b.train.end(), [&](const auto& e) { return e.id == c.episode_id; });
        REQUIRE(ep != b.train.end());
        CHECK(c.correction_path.waypoints.back() == ep->goal);
    }
}

TEST_CASE("run_flywheel: artifacts, cross-check, lineage and reproducibility") {
    const auto& b = small_benchmark();
    TempDir dir_a("fly"), dir_b("fly");
    auto cfg = small_flywheel(2);
    cfg.out_dir = dir_a.path();
    StubAnnotator stub;
    const auto result = run_flywheel(small_base(), b, cfg, stub);
    cfg.out_dir = dir_b.path();
    (void)run_flywheel(small_base(), b, cfg, stub);

    const auto& rec = result.record;
    REQUIRE(rec.iterations.size() == 2);
    CHECK(result.models.size() == 3);
    for (const auto& f : {"run.json", "timings.json", "iter_0/model.ckpt", "iter_1/trajectories.jsonl",
                          "iter_1/dataset.jsonl", "iter_1/manifest.json", "iter_1/model.ckpt",
                          "iter_2/model.ckpt"}) {
        CHECK_MESSAGE(std::filesystem::exists(dir_a / f), f);
    }
    // run.json is byte-identical across runs; the output directory is not recorded.
    CHECK(read_text(dir_a / "run.json") == read_text(dir_b / "run.json"));
    CHECK(nlohmann::json::parse(read_text(dir_a / "run.json")).get<FlywheelRunRecord>().iterations == rec.iterations);
    CHECK(read_text(dir_a / "iter_1/dataset.jsonl") == read_text(dir_b / "iter_1/dataset.jsonl"));

    // Lineage: every trained iteration bumps the version of its predecessor.
    std::uint64_t version = rec.baseline_version;
    for (std::size_t k = 0; k < rec.iterations.size(); ++k) {
        const auto& it = rec.iterations[k];
        CHECK(it.iteration == static_cast<int>(k + 1));
        if (it.trained) ++version;
        CHECK(it.model_version == version);
        CHECK(result.models[k + 1].version() == version);
        CHECK(load_model(dir_a / it.checkpoint) == result.models[k + 1]);
    }
    CHECK(load_model(dir_a / "iter_0/model.ckpt") == small_base());
    CHECK(result.best == result.models[static_cast<std::size_t>(rec.best_iteration)]);

    std::vector<double> sr{rec.baseline.sr};
    for (const auto& it : rec.iterations) sr.push_back(it.validation.sr);
    CHECK(rec.best_iteration == best_iteration(sr));

    // Offline detection over the stored trajectories reproduces the deviation count.
    for (int k = 1; k <= 2; ++k) {
        std::istringstream lines(read_text(dir_a / ("iter_" + std::to_string(k)) / "trajectories.jsonl"));
        std::size_t count = 0, entries = 0;
        for (std::string line; std::getline(lines, line);) {
            const auto j = nlohmann::json::parse(line);
            const auto positions = j.at("positions").get<std::vector<Point2>>();
            const auto refs = j.at("reference_points").get<std::vector<Point2>>();
            const auto d = detect_deviation(Trajectory(positions, TrajectoryKind::executed), make_oracle(refs),
                                            rec.config.threshold, rec.config.spacing);
            CHECK(d.has_value() == !j.at("deviation").is_null());
            if (d) {
                ++count;
                CHECK(j.at("deviation").at("deviation_index").get<std::size_t>() == d->deviation_index);
            }
            ++entries;
        }
        CHECK(entries == b.train.size());
        CHECK(count == rec.iterations[static_cast<std::size_t>(k - 1)].deviations);
    }
    const auto manifest = read_manifest(dir_a / "iter_1/manifest.json");
    CHECK(manifest.source_iteration == 1);
    CHECK(manifest.extra.at("sampled_corrections") == rec.iterations[0].sampled_corrections);
}

TEST_CASE("run_flywheel with N = 1 runs exactly one iteration") {
    const auto& b = small_benchmark();
    auto cfg = small_flywheel(1);
    cfg.stop_on_drop = true;
    StubAnnotator stub;
    const auto result = run_flywheel(small_base(), b, cfg, stub);
    CHECK(result.record.iterations.size() == 1);
    CHECK_FALSE(result.record.stopped_early);
}

TEST_CASE("run_flywheel stops on a drop and keeps the best checkpoint") {
    const auto& b = small_benchmark();
    auto cfg = small_flywheel(4);
    cfg.stop_on_drop = true;
    // A large learning rate makes later iterations unstable enough to drop.
    cfg.training.learning_rate = 0.5;
    cfg.training.epochs = 3;
    StubAnnotator stub;
    const auto result = run_flywheel(small_base(), b, cfg, stub);
    const auto& rec = result.record;
    std::vector<double> sr{rec.baseline.sr};
    for (const auto& it : rec.iterations) sr.push_back(it.validation.sr);
    for (std::size_t n = 2; n < sr.size(); ++n) {
        CHECK_FALSE(should_stop(std::vector<double>(sr.begin(), sr.begin() + static_cast<long>(n))));
    }
    if (rec.iterations.size() < 4) {
        CHECK(should_stop(sr));
        CHECK(rec.stopped_early);
    }
    CHECK(rec.best_iteration == best_iteration(sr));
    CHECK(result.best == result.models[static_cast<std::size_t>(rec.best_iteration)]);
}

TEST_CASE("trajectory entries") {
    const auto& b = small_benchmark();
    const auto eval = evaluate_split(scripted_factory(), b.train, b, EvalOptions{});
    const auto j = trajectory_entry(b.train[0], eval.episodes[0].rollout, std::nullopt);
    CHECK(j.at("episode_id") == b.train[0].id);
    CHECK(j.at("deviation").is_null());
    CHECK(j.at("positions").size() == eval.episodes[0].rollout.poses.size());
    CHECK(j.at("metrics").at("success") == 1);
}

}
