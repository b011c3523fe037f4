#include "doctest.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "navfly/datagen.hpp"
#include "navfly/rollout.hpp"
#include "navfly/world.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace navfly;
using testing::open_world;

namespace {

constexpr double kPi = std::numbers::pi;
const RandomizationConfig kNoNoise{};

EpisodeSpec straight_episode(const Point2& start, const Point2& goal) {
    EpisodeSpec e;
    e.id = "straight";
    e.world_id = "open";
    e.start = Pose{start, 0.0};
    e.reference_points = {start, goal};
    e.goal = goal;
    e.shortest_path_length = distance(start, goal);
    e.oracle_positions = {start, goal};
    e.instruction = "go forward";
    return e;
}

}  // namespace

TEST_SUITE("gridworld") {

TEST_CASE("generate_world is deterministic per seed") {
    const WorldParams p{};
    CHECK(generate_world(42, p) == generate_world(42, p));
    CHECK_FALSE(generate_world(42, p) == generate_world(43, p));
}

TEST_CASE("density zero leaves every cell free") {
    WorldParams p;
    p.obstacle_density = 0.0;
    const auto w = generate_world(1, p);
    CHECK(w.grid.free_count() == static_cast<std::size_t>(p.size * p.size));
}

TEST_CASE("generate_world preconditions") {
    WorldParams p;
    p.obstacle_density = 0.5;
    CHECK_THROWS_AS((void)generate_world(1, p), std::invalid_argument);
    p = {};
    p.landmark_count = 0;
    CHECK_THROWS_AS((void)generate_world(1, p), std::invalid_argument);
    p = {};
    p.landmark_count = 49;
    CHECK_THROWS_AS((void)generate_world(1, p), std::invalid_argument);
}

TEST_CASE("random worlds have connected free space and sound landmarks") {
    Rng rng(99);
    for (int c = 0; c < 300; ++c) {
        WorldParams p;
        p.size = 8 + static_cast<int>(rng.below(24));
        p.obstacle_density = rng.uniform(0.0, 0.4);
        p.landmark_count = 1 + static_cast<int>(rng.below(10));
        const auto w = generate_world(rng.next(), p);
        CHECK(oracle::flood_fill_count(w.grid) == w.grid.free_count());
        REQUIRE(w.landmarks.size() == static_cast<std::size_t>(p.landmark_count));
        for (std::size_t i = 0; i < w.landmarks.size(); ++i) {
            const auto& l = w.landmarks[i];
            CHECK(l.id == static_cast<int>(i));
            CHECK(w.grid.point_free(l.position));
            for (std::size_t j = 0; j < i; ++j) {
                CHECK_FALSE((w.landmarks[j].name == l.name && w.landmarks[j].color == l.color));
            }
        }
    }
}

TEST_CASE("step forward, into a wall, and a full turn") {
    auto w = open_world(10);
    const Pose start{{1.25, 1.25}, 0.0};
    const auto moved = step(start, Action::forward(0.25), w);
    CHECK_FALSE(moved.collided);
    CHECK(moved.pose.position.x == doctest::Approx(1.5));
    CHECK(moved.pose.position.y == doctest::Approx(1.25));

    w.grid.set(3, 2, true);  // cell spanning x in [1.5, 2.0)
    const auto blocked = step(Pose{{1.3, 1.25}, 0.0}, Action::forward(0.25), w);
    CHECK(blocked.collided);
    CHECK(blocked.pose == Pose{{1.3, 1.25}, 0.0});

    Pose p = start;
    for (int i = 0; i < 24; ++i) p = step(p, Action::turn_left(kPi / 12), w).pose;
    CHECK(std::abs(wrap_pi(p.heading - start.heading)) < 1e-9);
    const auto right = step(start, Action::turn_right(kPi / 12), w);
    CHECK(right.pose.heading == doctest::Approx(2 * kPi - kPi / 12));
    CHECK(step(start, Action::stop(), w).pose == start);
}

TEST_CASE("leaving the grid counts as a collision") {
    const auto w = open_world(4);
    const auto r = step(Pose{{0.1, 1.0}, kPi}, Action::forward(0.25), w);
    CHECK(r.collided);
}

TEST_CASE("observe: landmark dead ahead at one meter") {
    const auto w = open_world(10, {{0, 0, 2.25, 1.25}});
    Rng rng(1);
    const auto obs = observe(Pose{{1.25, 1.25}, 0.0}, w, kNoNoise, rng, 3);
    CHECK(obs.timestamp == 3);
    REQUIRE(obs.visible.size() == 1);
    CHECK(kSectorNames[obs.visible[0].bearing_bin] == "ahead");
    CHECK(obs.visible[0].distance_bin == DistanceBin::near);
    CHECK(obs.visible[0].name == 0);
    CHECK(obs.visible[0].color == 0);
}

TEST_CASE("observe: occlusion, range and dropout") {
    auto w = open_world(12, {{1, 1, 4.25, 1.25}});
    Rng rng(1);
    CHECK(observe(Pose{{1.25, 1.25}, 0.0}, w, kNoNoise, rng).visible.size() == 1);
    w.grid.set(5, 2, true);  // wall between agent and landmark
    CHECK(observe(Pose{{1.25, 1.25}, 0.0}, w, kNoNoise, rng).visible.empty());

    const auto far = open_world(30, {{1, 1, 14.25, 1.25}});
    CHECK(observe(Pose{{1.25, 1.25}, 0.0}, far, kNoNoise, rng).visible.empty());

    RandomizationConfig drop;
    drop.landmark_dropout = 1.0;
    const auto near = open_world(10, {{0, 0, 2.25, 1.25}, {2, 3, 1.25, 3.25}});
    CHECK(observe(Pose{{1.25, 1.25}, 0.0}, near, drop, rng).visible.empty());
}

TEST_CASE("observe: noise-free bins equal the analytic bins") {
    Rng rng(5);
    for (int c = 0; c < 100; ++c) {
        WorldParams p;
        p.obstacle_density = 0.0;
        const auto w = generate_world(rng.next(), p);
        const Pose pose{{rng.uniform(0.5, 11.5), rng.uniform(0.5, 11.5)}, wrap_two_pi(rng.uniform(0, 7))};
        const auto obs = observe(pose, w, kNoNoise, rng);
        for (const auto& v : obs.visible) {
            const auto& l = w.landmark(v.landmark_id);
            const double d = distance(pose.position, l.position);
            const double rel = wrap_two_pi(std::atan2(l.position.y - pose.position.y, l.position.x - pose.position.x) -
                                           pose.heading);
            // Sector 0 is centered on the heading; sectors advance counter-clockwise.
            CHECK(v.bearing_bin == static_cast<int>(std::floor(wrap_two_pi(rel + kPi / 8) / (kPi / 4))) % 8);
            const DistanceBin expected =
                d < kNearLimit ? DistanceBin::near : (d < kMidLimit ? DistanceBin::mid : DistanceBin::far);
            CHECK(v.distance_bin == expected);
        }
    }
}

TEST_CASE("observe is deterministic given the rng state") {
    const auto w = generate_world(3, WorldParams{});
    RandomizationConfig noisy{.bearing_jitter = 0.3, .landmark_dropout = 0.3, .distance_bin_noise = 0.3};
    const Pose pose{w.landmarks[0].position + Point2{0.0, 0.0}, 1.0};
    Rng a(17), b(17);
    CHECK(observe(pose, w, noisy, a) == observe(pose, w, noisy, b));
}

TEST_CASE("observe reports clearance") {
    auto w = open_world(10);
    w.grid.set(3, 2, true);
    Rng rng(1);
    const auto obs = observe(Pose{{1.25, 1.25}, 0.0}, w, kNoNoise, rng);
    CHECK(obs.clearance[0] == Clearance::blocked);
    CHECK(obs.clearance[2] == Clearance::open);
    const auto obs2 = observe(Pose{{0.95, 1.25}, 0.0}, w, kNoNoise, rng);
    CHECK(obs2.clearance[0] == Clearance::close);
}

TEST_CASE("rollout: immediate stop") {
    const auto w = open_world(24);
    const auto ep = straight_episode({1.25, 1.25}, {11.25, 1.25});
    StopPolicy stop;
    const auto r = rollout(stop, ep, w, kNoNoise);
    CHECK(r.poses.size() == 1);
    CHECK(r.actions.empty());
    CHECK(r.stopped);
    CHECK(r.metrics.ne == doctest::Approx(10.0));
    CHECK(r.metrics.success == 0);
}

TEST_CASE("rollout: scripted oracle replay succeeds") {
    WorldParams p;
    const auto w = generate_world(12, p);
    const auto episodes = generate_episodes(w, 20, 4);
    for (const auto& ep : episodes) {
        ScriptedPolicy scripted(ep.oracle_actions);
        const auto r = rollout(scripted, ep, w, kNoNoise);
        CHECK(r.metrics.success == 1);
        CHECK(r.metrics.ndtw >= 0.99);
        CHECK(r.collisions == 0);
    }
}

TEST_CASE("rollout: determinism, collision safety and trajectory length") {
    const auto w = generate_world(8, WorldParams{});
    const auto episodes = generate_episodes(w, 10, 2);
    RandomizationConfig noisy{.bearing_jitter = 0.2, .landmark_dropout = 0.2, .distance_bin_noise = 0.2, .seed = 5};
    Rng rng(6);
    for (const auto& ep : episodes) {
        // A random walk bumps into walls often.
        std::vector<Action> script;
        for (int i = 0; i < 60; ++i) {
            const auto k = rng.below(3);
            script.push_back(Action::of_type(static_cast<ActionType>(k), ActionConfig{}));
        }
        ScriptedPolicy a(script), b(script);
        const auto ra = rollout(a, ep, w, noisy);
        const auto rb = rollout(b, ep, w, noisy);
        CHECK(ra.poses == rb.poses);
        CHECK(ra.observations == rb.observations);
        CHECK(ra.metrics == rb.metrics);
        CHECK(ra.poses.size() == ra.actions.size() + 1);
        CHECK(ra.observations.size() == ra.poses.size());
        for (const auto& pose : ra.poses) CHECK(w.grid.point_free(pose.position));
    }
}

TEST_CASE("rollout: max steps and policy failures") {
    const auto w = open_world(24);
    const auto ep = straight_episode({1.25, 1.25}, {11.25, 1.25});
    ScriptedPolicy spinner(std::vector<Action>(100, Action::turn_left(kPi / 12)));
    RolloutOptions opt;
    opt.max_steps = 10;
    const auto r = rollout(spinner, ep, w, kNoNoise, opt);
    CHECK(r.actions.size() == 10);
    CHECK_FALSE(r.stopped);

    struct Throwing final : Policy {
        ActionChunk act(const PolicyInput&) override { throw std::runtime_error("boom"); }
    } bad;
    const auto f = rollout(bad, ep, w, kNoNoise);
    REQUIRE(f.failure.has_value());
    CHECK(f.failure->find("boom") != std::string::npos);
    CHECK(f.metrics.success == 0);
}

TEST_CASE("world json round trip") {
    const auto w = generate_world(5, WorldParams{});
    nlohmann::json j = w;
    CHECK(j.at("grid").is_string());
    CHECK(j.get<WorldSpec>() == w);
    const std::vector<std::uint8_t> cells{0, 0, 1, 1, 1, 0};
    CHECK(encode_rle(cells) == "2:0,3:1,1:0");
    CHECK(decode_rle("2:0,3:1,1:0", 6) == cells);
    CHECK_THROWS((void)decode_rle("2:0,3:1", 6));
}

TEST_CASE("randomization config validation") {
    RandomizationConfig c;
    CHECK_NOTHROW(c.validate());
    c.landmark_dropout = 1.5;
    CHECK_THROWS(c.validate());
    c = {};
    c.visibility_range = 0.0;
    CHECK_THROWS(c.validate());
}

}
