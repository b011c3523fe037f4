#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "navfly/metrics.hpp"
#include "navfly/rng.hpp"
#include "oracles.hpp"

using namespace navfly;

namespace {

Trajectory executed_of(std::vector<Point2> pts) { return Trajectory(std::move(pts), TrajectoryKind::executed); }

std::vector<Point2> random_points(Rng& rng, std::size_t n, double extent) {
    std::vector<Point2> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back({rng.uniform(0, extent), rng.uniform(0, extent)});
    return v;
}

MetricReport random_report(Rng& rng) {
    const auto pts = random_points(rng, 1 + rng.below(30), 12.0);
    const Point2 goal{rng.uniform(0, 12), rng.uniform(0, 12)};
    const auto oracle_pts = oracle::random_polyline(rng, 2 + rng.below(4), 12.0);
    EpisodeResult ep{executed_of(pts), make_oracle(oracle_pts), goal, rng.uniform(0.1, 20),
                     executed_of(pts).length(), rng.bernoulli(0.5)};
    return evaluate_episode(ep);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("navigation error") {
    CHECK(navigation_error({1, 2}, {1, 2}) == 0.0);
    CHECK(navigation_error({0, 0}, {3, 4}) == doctest::Approx(5.0));
    Rng rng(1);
    for (int c = 0; c < 500; ++c) {
        const Point2 a{rng.uniform(-10, 10), rng.uniform(-10, 10)};
        const Point2 b{rng.uniform(-10, 10), rng.uniform(-10, 10)};
        const double th = rng.uniform(0, 2 * std::numbers::pi);
        const Point2 t{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const auto rot = [&](Point2 p) {
            return Point2{std::cos(th) * p.x - std::sin(th) * p.y + t.x, std::sin(th) * p.x + std::cos(th) * p.y + t.y};
        };
        CHECK(navigation_error(rot(a), rot(b)) == doctest::Approx(navigation_error(a, b)).epsilon(1e-12));
        CHECK(navigation_error(a, b) == navigation_error(b, a));
    }
}

TEST_CASE("success is strict") {
    CHECK(success(2.9, 3.0) == 1);
    CHECK(success(3.0, 3.0) == 0);
    CHECK(success(0.0) == 1);
    CHECK(success(std::nextafter(3.0, 0.0)) == 1);
    CHECK_THROWS_AS((void)success(-0.1), std::invalid_argument);
}

TEST_CASE("oracle success counts the closest approach") {
    const auto traj = executed_of({{0, 0}, {7.1, 0}, {5, 0}});
    const Point2 goal{10, 0};
    CHECK(oracle_success(traj, goal) == 1);
    CHECK(success(navigation_error(traj.back(), goal)) == 0);
    CHECK(oracle_success(executed_of({{0, 0}, {1, 0}}), goal) == 0);
}

TEST_CASE("spl") {
    CHECK(spl(1, 7.0, 7.0) == 1.0);
    CHECK(spl(1, 10.0, 12.5) == doctest::Approx(0.8));
    CHECK(spl(0, 10.0, 12.5) == 0.0);
    CHECK(spl(1, 10.0, 4.0) == 1.0);
    CHECK_THROWS_AS((void)spl(1, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)spl(1, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("ndtw examples") {
    const auto t = executed_of({{0, 0}, {1, 0}, {2, 1}});
    CHECK(ndtw(t, make_oracle(t.points())) == 1.0);
    CHECK(ndtw(executed_of({{0, 0}}), make_oracle(std::vector<Point2>{{3, 0}})) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(std::exp(-1.0) == doctest::Approx(0.367879).epsilon(1e-6));
    CHECK_THROWS_AS((void)dtw(std::span<const Point2>{}, t.points()), std::invalid_argument);
    CHECK_THROWS_AS((void)ndtw(t, make_oracle(t.points()), 0.0), std::invalid_argument);
}

TEST_CASE("dtw equals exhaustive alignment enumeration") {
    Rng rng(2);
    for (int c = 0; c < 300; ++c) {
        const auto a = random_points(rng, 1 + rng.below(6), 10.0);
        const auto b = random_points(rng, 1 + rng.below(6), 10.0);
        CHECK(std::abs(dtw(a, b) - oracle::dtw_enumerate(a, b)) <= 1e-9);
    }
}

TEST_CASE("ndtw stays in (0, 1]") {
    Rng rng(3);
    for (int c = 0; c < 2000; ++c) {
        const auto a = random_points(rng, 1 + rng.below(20), 10.0);
        const auto b = oracle::random_polyline(rng, 1 + rng.below(20), 10.0);
        const double v = ndtw(executed_of(a), make_oracle(b));
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("episode invariants over random episodes") {
    Rng rng(4);
    for (int c = 0; c < 2000; ++c) {
        const auto r = random_report(rng);
        CHECK(r.spl <= r.success);
        CHECK(r.oracle_success >= r.success);
        CHECK(r.ndtw > 0.0);
        CHECK(r.ndtw <= 1.0);
    }
}

TEST_CASE("aggregate") {
    const MetricReport a{1.0, 1, 1, 0.5, 0.9};
    const MetricReport b{4.0, 0, 1, 0.0, 0.3};
    const auto one = aggregate(std::vector<MetricReport>{a});
    CHECK(one.episodes == 1);
    CHECK(one.ne == 1.0);
    CHECK(one.sr == 100.0);
    CHECK(one.spl == 50.0);
    CHECK(one.ndtw == doctest::Approx(90.0));
    const auto two = aggregate(std::vector<MetricReport>{a, b});
    CHECK(two.sr == 50.0);
    CHECK(two.os == 100.0);
    CHECK(two.ne == 2.5);
    CHECK_THROWS_AS((void)aggregate(std::vector<MetricReport>{}), std::invalid_argument);
}

TEST_CASE("aggregate is permutation invariant") {
    Rng rng(5);
    for (int c = 0; c < 50; ++c) {
        std::vector<MetricReport> v;
        for (std::size_t i = 0; i < 1 + rng.below(40); ++i) v.push_back(random_report(rng));
        const auto s = aggregate(v);
        for (int k = 0; k < 5; ++k) {
            shuffle(v, rng);
            CHECK(aggregate(v) == s);
        }
    }
}

TEST_CASE("summary csv and json") {
    const MetricSummary s{2, 1.23456, 50.0, 100.0, 42.25, 77.5};
    CHECK(summary_csv_row(s) == "1.2346,50.0,100.0,42.2,77.5");
    CHECK(std::string(kSummaryCsvHeader) == "ne,sr,os,spl,ndtw");
    nlohmann::json j = s;
    CHECK(j.get<MetricSummary>() == s);
    const MetricReport r{1.5, 1, 1, 0.25, 0.5};
    nlohmann::json jr = r;
    CHECK(jr.get<MetricReport>() == r);
}

}
