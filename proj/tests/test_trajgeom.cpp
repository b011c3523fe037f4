#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "navfly/geometry.hpp"
#include "navfly/rng.hpp"
#include "oracles.hpp"

using namespace navfly;

namespace {

Trajectory oracle_of(std::vector<Point2> pts) { return Trajectory(std::move(pts), TrajectoryKind::oracle); }
Trajectory executed_of(std::vector<Point2> pts) { return Trajectory(std::move(pts), TrajectoryKind::executed); }

}  // namespace

TEST_SUITE("trajgeom") {

TEST_CASE("trajectory invariants") {
    CHECK_THROWS_AS(Trajectory({}, TrajectoryKind::executed), std::invalid_argument);
    CHECK_THROWS_AS(oracle_of({{0, 0}, {0, 0}}), std::invalid_argument);
    CHECK_NOTHROW(executed_of({{0, 0}, {0, 0}}));
    CHECK_THROWS_AS(executed_of({{0, std::nan("")}}), std::invalid_argument);
    CHECK(make_oracle(std::vector<Point2>{{0, 0}, {0, 0}, {1, 0}, {1, 0}}).size() == 2);
    CHECK(executed_of({{0, 0}, {3, 4}, {3, 5}}).length() == doctest::Approx(6.0));
}

TEST_CASE("interpolate splits a unit segment") {
    const auto path = interpolate(oracle_of({{0, 0}, {1, 0}}), 0.5);
    REQUIRE(path.samples.size() == 3);
    CHECK(path.samples[0] == Point2{0, 0});
    CHECK(path.samples[1] == Point2{0.5, 0});
    CHECK(path.samples[2] == Point2{1, 0});
    CHECK(path.spacing == 0.5);
}

TEST_CASE("interpolate keeps a single point") {
    const auto path = interpolate(oracle_of({{0, 0}}), 0.1);
    REQUIRE(path.samples.size() == 1);
    CHECK(path.samples[0] == Point2{0, 0});
}

TEST_CASE("interpolate a 3-4-5 segment at unit spacing") {
    const auto path = interpolate(oracle_of({{0, 0}, {3, 4}}), 1.0);
    REQUIRE(path.samples.size() == 6);
    for (std::size_t i = 1; i < path.samples.size(); ++i) {
        CHECK(distance(path.samples[i - 1], path.samples[i]) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("interpolate rejects non-positive spacing") {
    CHECK_THROWS_AS((void)interpolate(oracle_of({{0, 0}, {1, 0}}), 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)interpolate(oracle_of({{0, 0}, {1, 0}}), -1.0), std::invalid_argument);
}

TEST_CASE("interpolate keeps vertices, bounds gaps and tags earlier segments") {
    Rng rng(7);
    for (int c = 0; c < 200; ++c) {
        const auto pts = oracle::random_polyline(rng, 2 + rng.below(5), 10.0);
        const double spacing = rng.uniform(0.01, 0.7);
        const auto path = interpolate(oracle_of(pts), spacing);
        REQUIRE(path.samples.size() == path.source_segment.size());
        for (std::size_t i = 1; i < path.samples.size(); ++i) {
            CHECK(distance(path.samples[i - 1], path.samples[i]) <= spacing + 1e-12);
            CHECK(path.source_segment[i] >= path.source_segment[i - 1]);
        }
        std::size_t at = 0;
        for (std::size_t v = 0; v < pts.size(); ++v) {
            while (at < path.samples.size() && !(path.samples[at] == pts[v])) ++at;
            REQUIRE(at < path.samples.size());
            // A shared vertex belongs to the segment that ends there.
            CHECK(path.source_segment[at] == (v == 0 ? 0 : v - 1));
        }
    }
}

TEST_CASE("point_to_path drops onto an axis-aligned segment") {
    const auto path = interpolate(oracle_of({{0, 0}, {10, 0}}), kDefaultSpacing);
    const auto proj = point_to_path({3, 2.5}, path);
    CHECK(proj.distance == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(proj.foot.x == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(proj.foot.y == 0.0);
    CHECK(proj.segment_index == 1);
}

TEST_CASE("point_to_path on the path") {
    const auto path = interpolate(oracle_of({{0, 0}, {10, 0}, {10, 4}}), 0.5);
    const auto proj = point_to_path({10, 2}, path);
    CHECK(proj.distance == 0.0);
    CHECK(proj.foot == Point2{10, 2});
    CHECK(proj.segment_index == 2);
}

TEST_CASE("point_to_path tie goes to the earliest sample") {
    const auto path = interpolate(oracle_of({{0, 0}, {2, 0}}), 1.0);
    const auto proj = point_to_path({0.5, 1.0}, path);
    CHECK(proj.foot == Point2{0, 0});
    CHECK(proj.sample_index == 0);
    CHECK_THROWS_AS((void)point_to_path({0, 0}, InterpolatedPath{}), std::invalid_argument);
}

TEST_CASE("point_to_path matches dense brute force within spacing/2") {
    Rng rng(11);
    for (int c = 0; c < 300; ++c) {
        const auto pts = oracle::random_polyline(rng, 2 + rng.below(4), 8.0);
        const double spacing = rng.uniform(0.02, 0.5);
        const Point2 p{rng.uniform(-2, 10), rng.uniform(-2, 10)};
        const auto proj = point_to_path(p, interpolate(oracle_of(pts), spacing));
        const auto dense = oracle::nearest(p, oracle::dense_samples(pts, spacing / 100));
        CHECK(std::abs(proj.distance - dense.distance) <= spacing / 2);
        CHECK(proj.distance >= oracle::polyline_distance(p, pts) - 1e-12);
    }
}

TEST_CASE("detect_deviation: identical trajectories never deviate") {
    const std::vector<Point2> pts{{0, 0}, {5, 0}, {5, 5}};
    for (double s : {0.01, 0.5, 1.0, 3.0}) CHECK_FALSE(detect_deviation(executed_of(pts), oracle_of(pts), s).has_value());
}

TEST_CASE("detect_deviation worked example") {
    const auto report = detect_deviation(executed_of({{0, 0}, {2, 0.5}, {4, 0.5}, {5, 3}, {7, 3}}),
                                         oracle_of({{0, 0}, {5, 0}, {5, 5}}), 1.0);
    REQUIRE(report.has_value());
    CHECK(report->deviation_index == 5);
    CHECK(report->distance == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(report->foot.x == doctest::Approx(5.0));
    CHECK(report->foot.y == doctest::Approx(3.0));
    CHECK(report->segment_index == 2);
    REQUIRE(report->per_step_distances.size() == 5);
    CHECK(report->per_step_distances[1] == doctest::Approx(0.5));
    CHECK(report->per_step_distances[3] == doctest::Approx(0.0));

    // Same answer from an independent sampler at a much finer spacing.
    const auto dense = oracle::detect({{0, 0}, {2, 0.5}, {4, 0.5}, {5, 3}, {7, 3}}, {{0, 0}, {5, 0}, {5, 5}}, 1.0,
                                      0.001, 0.0);
    REQUIRE(dense.index.has_value());
    CHECK(*dense.index == 5);
    CHECK(dense.at_index.distance == doctest::Approx(2.0));
    CHECK(dense.at_index.segment == 2);
}

TEST_CASE("detect_deviation at the first step") {
    const auto report = detect_deviation(executed_of({{0, 10}, {0, 0}}), oracle_of({{0, 0}, {5, 0}}), 1.0);
    REQUIRE(report.has_value());
    CHECK(report->deviation_index == 1);
    CHECK(report->per_step_distances.size() == 1);
}

TEST_CASE("detect_deviation rejects bad arguments") {
    const auto o = oracle_of({{0, 0}, {1, 0}});
    CHECK_THROWS_AS((void)detect_deviation(executed_of({{0, 0}}), o, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)detect_deviation(executed_of({{0, 0}}), o, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("detect_deviation: first crossing, threshold monotone, report invariants") {
    Rng rng(3);
    for (int c = 0; c < 300; ++c) {
        const auto o = oracle::random_polyline(rng, 2 + rng.below(4), 8.0);
        const auto e = oracle::random_walk(rng, o.front(), 3 + rng.below(25), 0.8);
        const double s = rng.uniform(0.2, 2.0);
        const auto r = detect_deviation(executed_of(e), oracle_of(o), s);
        if (!r) continue;
        CHECK(r->distance > s);
        CHECK(r->per_step_distances.size() == r->deviation_index);
        for (std::size_t i = 0; i + 1 < r->per_step_distances.size(); ++i) CHECK(r->per_step_distances[i] <= s);
        CHECK(r->segment_index >= 1);
        CHECK(r->segment_index <= o.size() - 1);
        CHECK(oracle::segment_foot(r->foot, o[r->segment_index - 1], o[r->segment_index]).distance < 1e-9);
        for (double bigger : {s * 1.1, s + 0.5, s * 3}) {
            const auto r2 = detect_deviation(executed_of(e), oracle_of(o), bigger);
            if (r2) CHECK(r2->deviation_index >= r->deviation_index);
        }
    }
}

TEST_CASE("refinement: halving spacing never raises h by more than the old spacing") {
    Rng rng(5);
    for (int c = 0; c < 100; ++c) {
        const auto o = oracle::random_polyline(rng, 2 + rng.below(4), 8.0);
        const auto e = oracle::random_walk(rng, o.front(), 10, 0.8);
        double spacing = 0.4;
        auto coarse = interpolate(oracle_of(o), spacing);
        for (int level = 0; level < 6; ++level) {
            const auto fine = interpolate(oracle_of(o), spacing / 2);
            for (const auto& p : e) {
                CHECK(point_to_path(p, fine).distance <= point_to_path(p, coarse).distance + spacing);
            }
            coarse = fine;
            spacing /= 2;
        }
        // Converges to the analytic point-to-segment distance.
        const auto finest = interpolate(oracle_of(o), 1e-4);
        for (const auto& p : e) {
            CHECK(std::abs(point_to_path(p, finest).distance - oracle::polyline_distance(p, o)) <= 5e-5 + 1e-9);
        }
    }
}

TEST_CASE("exact on axis-aligned single segments within spacing/2") {
    Rng rng(9);
    for (int c = 0; c < 300; ++c) {
        const bool horizontal = rng.bernoulli(0.5);
        const double a = rng.uniform(-5, 5);
        const double b = a + rng.uniform(0.1, 10);
        const double k = rng.uniform(-5, 5);
        const Point2 p0 = horizontal ? Point2{a, k} : Point2{k, a};
        const Point2 p1 = horizontal ? Point2{b, k} : Point2{k, b};
        const double spacing = rng.uniform(0.01, 0.5);
        const Point2 p{rng.uniform(-8, 8), rng.uniform(-8, 8)};
        const auto proj = point_to_path(p, interpolate(oracle_of({p0, p1}), spacing));
        CHECK(std::abs(proj.distance - point_segment_distance(p, p0, p1)) <= spacing / 2);
        CHECK(std::abs(point_segment_distance(p, p0, p1) - oracle::segment_foot(p, p0, p1).distance) < 1e-12);
    }
}

TEST_CASE("detect_deviation agrees with a dense-sampling oracle on unambiguous cases") {
    Rng rng(21);
    int checked = 0;
    while (checked < 200) {
        const auto o = oracle::random_polyline(rng, 2 + rng.below(4), 8.0);
        const auto e = oracle::random_walk(rng, o.front(), 3 + rng.below(20), 0.8);
        const double spacing = kDefaultSpacing;
        const auto dense = oracle::detect(e, o, 1.0, spacing / 100, spacing / 2);
        if (dense.ambiguous) continue;
        ++checked;
        const auto r = detect_deviation(executed_of(e), oracle_of(o), 1.0, spacing);
        REQUIRE(r.has_value() == dense.index.has_value());
        if (!r) continue;
        CHECK(r->deviation_index == *dense.index);
        CHECK(std::abs(r->distance - dense.at_index.distance) <= spacing / 2);
        CHECK(r->segment_index == dense.at_index.segment);
        CHECK(distance(r->foot, dense.at_index.foot) <= spacing / 2 + spacing / 100);
    }
}

TEST_CASE("angle wrapping") {
    const double pi = std::numbers::pi;
    CHECK(wrap_two_pi(-0.5) == doctest::Approx(2 * pi - 0.5));
    CHECK(wrap_two_pi(2 * pi) == 0.0);
    CHECK(wrap_pi(pi) == doctest::Approx(pi));
    CHECK(wrap_pi(-pi) == doctest::Approx(pi));
    CHECK(wrap_pi(3 * pi / 2) == doctest::Approx(-pi / 2));
}

}
