#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace navfly {

/// A planar position in meters.
struct Point2 {
    double x{0.0};
    double y{0.0};

    friend bool operator==(const Point2&, const Point2&) = default;

    Point2 operator+(const Point2& o) const noexcept { return {x + o.x, y + o.y}; }
    Point2 operator-(const Point2& o) const noexcept { return {x - o.x, y - o.y}; }
    Point2 operator*(double s) const noexcept { return {x * s, y * s}; }

    [[nodiscard]] bool finite() const noexcept { return std::isfinite(x) && std::isfinite(y); }
};

[[nodiscard]] inline double distance(const Point2& a, const Point2& b) noexcept {
    return std::hypot(a.x - b.x, a.y - b.y);
}

enum class TrajectoryKind { oracle, executed };

/// Ordered sequence of positions. Oracle trajectories hold reference points
/// and may not repeat a point consecutively; executed trajectories may (a
/// stalled or turning agent).
class Trajectory {
public:
    Trajectory(std::vector<Point2> points, TrajectoryKind kind);

    [[nodiscard]] std::span<const Point2> points() const noexcept { return points_; }
    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
    [[nodiscard]] const Point2& operator[](std::size_t i) const noexcept { return points_[i]; }
    [[nodiscard]] const Point2& front() const noexcept { return points_.front(); }
    [[nodiscard]] const Point2& back() const noexcept { return points_.back(); }
    [[nodiscard]] TrajectoryKind kind() const noexcept { return kind_; }

    /// Sum of consecutive point distances.
    [[nodiscard]] double length() const noexcept;

    friend bool operator==(const Trajectory&, const Trajectory&) = default;

private:
    std::vector<Point2> points_;
    TrajectoryKind kind_;
};

/// Drops consecutive duplicates so the result is a valid oracle trajectory.
[[nodiscard]] Trajectory make_oracle(std::span<const Point2> points);

struct InterpolatedPath {
    std::vector<Point2> samples;
    double spacing{0.0};
    // 0-based index of the original segment each sample came from. A shared
    // vertex belongs to the earlier segment.
    std::vector<std::size_t> source_segment;
};

/// Evenly resamples every segment so consecutive samples are at most
/// `spacing` apart. Original vertices are kept.
[[nodiscard]] InterpolatedPath interpolate(const Trajectory& traj, double spacing);

struct PathProjection {
    double distance{0.0};
    Point2 foot;
    std::size_t segment_index{1};  // 1-based
    std::size_t sample_index{0};
};

/// Nearest sample of `path` to `p`. Ties resolve to the earliest sample.
[[nodiscard]] PathProjection point_to_path(const Point2& p, const InterpolatedPath& path);

struct DeviationReport {
    std::size_t deviation_index{1};  // 1-based timestep t
    double distance{0.0};            // h_t
    Point2 foot;                     // P_t
    std::size_t segment_index{1};    // k: foot lies on G_k -> G_{k+1}
    std::vector<double> per_step_distances;  // h_1 .. h_t
};

inline constexpr double kDefaultSpacing = 0.05;
inline constexpr double kDefaultThreshold = 1.0;

/// First timestep whose distance to the interpolated oracle exceeds
/// `threshold` while every earlier timestep stays within it.
[[nodiscard]] std::optional<DeviationReport> detect_deviation(const Trajectory& executed,
                                                              const Trajectory& oracle,
                                                              double threshold = kDefaultThreshold,
                                                              double spacing = kDefaultSpacing);

/// Exact distance from `p` to segment [a, b].
[[nodiscard]] double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) noexcept;

/// Wraps an angle into [0, 2pi).
[[nodiscard]] double wrap_two_pi(double angle) noexcept;
/// Wraps an angle into (-pi, pi].
[[nodiscard]] double wrap_pi(double angle) noexcept;

}  // namespace navfly
