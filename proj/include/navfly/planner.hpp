#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "navfly/geometry.hpp"
#include "navfly/world.hpp"

namespace navfly {

class NoPathError : public std::runtime_error {
public:
    explicit NoPathError(const std::string& what, std::size_t leg = 0)
        : std::runtime_error(what), leg_(leg) {}
    /// 0-based index of the failing leg for multi-point plans.
    [[nodiscard]] std::size_t leg() const noexcept { return leg_; }

private:
    std::size_t leg_;
};

using Cell = std::array<int, 2>;

/// Grid path cost as straight/diagonal move counts. Costs compare exactly
/// because sqrt(2) is irrational.
struct GridCost {
    long straight{0};
    long diagonal{0};

    [[nodiscard]] double value() const noexcept;
    friend bool operator==(const GridCost&, const GridCost&) = default;
};

struct GridPath {
    std::vector<Cell> cells;
    GridCost cost;
};

/// 8-connected A* with the octile heuristic. Diagonal moves may not cut a
/// blocked corner. Returns nullopt when the goal is unreachable.
[[nodiscard]] std::optional<GridPath> astar(const OccupancyGrid& grid, Cell start, Cell goal);

/// Grows every occupied cell by `radius` cells (8-neighborhood).
[[nodiscard]] OccupancyGrid inflate(const OccupancyGrid& grid, int radius = 1);

struct PlannedPath {
    std::vector<Point2> waypoints;
    double length{0.0};
    GridCost grid_cost;  // cost of the cell path before smoothing
};

/// Removes intermediate waypoints while line of sight holds.
[[nodiscard]] std::vector<Point2> string_pull(const OccupancyGrid& grid, std::span<const Point2> points);

[[nodiscard]] double polyline_length(std::span<const Point2> points) noexcept;

/// Clearance from obstacles kept by smoothed segments away from their endpoints.
inline constexpr double kSmoothingMargin = 0.2;

/// Collision-free path from `start` to `goal`: A* on the inflated grid
/// (falling back to the raw grid when inflation seals an endpoint off),
/// then string pulling that keeps kSmoothingMargin of clearance.
[[nodiscard]] PlannedPath plan(const Point2& start, const Point2& goal, const WorldSpec& world);

/// Concatenation of pairwise plans visiting every point in order.
[[nodiscard]] PlannedPath plan_through(std::span<const Point2> points, const WorldSpec& world);

/// Largest distance from the current segment tolerated before re-aiming.
inline constexpr double kCrossTrackTolerance = 0.1;

/// Compiles a geometric path into discrete actions ending with STOP. Turns
/// round to the nearest multiple of `turn_step`; the heading is re-aimed
/// whenever the next forward step would leave the segment by more than
/// kCrossTrackTolerance.
[[nodiscard]] std::vector<Action> path_to_actions(const PlannedPath& path, const Pose& start_pose,
                                                  const ActionConfig& actions = {});

}  // namespace navfly
