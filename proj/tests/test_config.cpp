#include "doctest.h"

#include <fstream>

#include "navfly/config.hpp"
#include "support.hpp"

using namespace navfly;

namespace {

std::string config_error(std::string_view text) {
    try {
        auto c = parse_run_config(text, "test.toml");
        c.resolve();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("benchmark defaults") {
    RunConfig c;
    CHECK(c.seed == 1);
    CHECK(c.benchmark.train_worlds == 10);
    CHECK(c.benchmark.train_episodes == 200);
    CHECK(c.benchmark.validation_episodes == 50);
    CHECK(c.benchmark.world.obstacle_density == 0.05);
    CHECK(c.benchmark.episodes.max_path_length == 10.0);
    CHECK(c.noise.bearing_jitter == 0.1);
    CHECK(c.noise.landmark_dropout == 0.1);
    CHECK(c.noise.distance_bin_noise == 0.1);
    CHECK(c.train.epochs == 20);
    CHECK(c.train.learning_rate == 0.01);
    CHECK(c.flywheel.training.epochs == 10);
    CHECK(c.flywheel.training.learning_rate == 0.01);
    CHECK(c.flywheel.threshold == 1.0);
    CHECK(c.flywheel.spacing == 0.05);
    // The library defaults stay as specified.
    CHECK(WorldParams{}.obstacle_density == 0.12);
    CHECK(TrainOptions{}.epochs == 5);
    CHECK(TrainOptions{}.learning_rate == 0.1);
    CHECK(parse_run_config("").benchmark.world.obstacle_density == 0.05);
}

TEST_CASE("resolve propagates seeds and noise") {
    auto c = parse_run_config("seed = 9\njobs = 3\n[noise]\nbearing_jitter = 0.3\n");
    c.resolve();
    CHECK(c.benchmark.seed == 9);
    CHECK(c.noise.seed == 9);
    CHECK(c.train.seed == 9);
    CHECK(c.flywheel.seed == 9);
    CHECK(c.flywheel.jobs == 3);
    CHECK(c.flywheel.randomization.bearing_jitter == 0.3);
    CHECK(c.flywheel.randomization.seed == 9);
    CHECK(c.eval_options().jobs == 3);
    CHECK(c.eval_options().randomization.bearing_jitter == 0.3);
}

TEST_CASE("to_toml round trips exactly") {
    auto c = parse_run_config(R"(
seed = 12
[world]
obstacle_density = 0.07
landmarks = 6
[benchmark]
train_episodes = 40
min_path_length = 3.5
[noise]
landmark_dropout = 0.15
[model]
hidden = 24
[train]
epochs = 7
learning_rate = 0.003
[rollout]
max_steps = 150
[flywheel]
iterations = 4
threshold_s = 1.5
stop_on_drop = false
sample_half = false
failed_only = true
[paths]
data = "bench"
model = "base.ckpt"
)");
    c.resolve();
    const auto text = to_toml(c);
    auto back = parse_run_config(text);
    back.resolve();
    CHECK(to_toml(back) == text);
    CHECK(back.benchmark.world.obstacle_density == c.benchmark.world.obstacle_density);
    CHECK(back.train.learning_rate == c.train.learning_rate);
    CHECK(back.flywheel.threshold == 1.5);
    CHECK_FALSE(back.flywheel.mix.sample_half);
    CHECK(back.flywheel.failed_only);
    CHECK(back.flywheel.rollout.max_steps == 150);
    CHECK(back.data_dir == "bench");
    CHECK(back.model_path == "base.ckpt");

    RunConfig d;
    d.resolve();
    auto d2 = parse_run_config(to_toml(d));
    d2.resolve();
    CHECK(to_toml(d2) == to_toml(d));
}

TEST_CASE("unknown keys and type errors") {
    CHECK(config_error("[world]\ncolour = 1\n").find("unknown key 'world.colour'") != std::string::npos);
    CHECK(config_error("bogus = 1\n").find("unknown key 'bogus'") != std::string::npos);
    CHECK(config_error("[mystery]\n").find("mystery") != std::string::npos);
    CHECK(config_error("seed = \"x\"\n").find("seed") != std::string::npos);
    CHECK(config_error("[train]\nepochs = 0\n").find("train.epochs") != std::string::npos);
    CHECK(config_error("[world]\nobstacle_density = \"dense\"\n").find("world.obstacle_density") != std::string::npos);
    CHECK(config_error("world = 3\n").find("must be a table") != std::string::npos);
    CHECK(config_error("seed = \n").find("test.toml:1") != std::string::npos);
    CHECK(config_error("[noise]\nlandmark_dropout = 2.0\n").find("noise probabilities") != std::string::npos);
    CHECK(config_error("[flywheel]\nthreshold_s = 0.0\n").find("threshold") != std::string::npos);
    CHECK(config_error("[benchmark]\nmin_path_length = 20.0\n").find("min_path_length") != std::string::npos);
    CHECK(config_error("[world]\nobstacle_density = 0.05\n").empty());
    // Integers are accepted where floats are expected.
    CHECK(config_error("[flywheel]\nthreshold_s = 2\n").empty());
}

TEST_CASE("load_run_config") {
    testing::TempDir dir("cfg");
    CHECK_THROWS_AS((void)load_run_config(dir / "absent.toml"), ConfigError);
    {
        std::ofstream out(dir / "run.toml");
        out << "seed = 5\n";
    }
    CHECK(load_run_config(dir / "run.toml").seed == 5);
}

}
