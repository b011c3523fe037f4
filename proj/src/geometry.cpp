#include "navfly/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace navfly {

Trajectory::Trajectory(std::vector<Point2> points, TrajectoryKind kind)
    : points_(std::move(points)), kind_(kind) {
    if (points_.empty()) {
        throw std::invalid_argument("trajectory must contain at least one point");
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!points_[i].finite()) {
            throw std::invalid_argument("trajectory point is not finite");
        }
        if (kind_ == TrajectoryKind::oracle && i > 0 && points_[i] == points_[i - 1]) {
            throw std::invalid_argument("oracle trajectory repeats a point consecutively");
        }
    }
}

double Trajectory::length() const noexcept {
    double total = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) {
        total += distance(points_[i - 1], points_[i]);
    }
    return total;
}

Trajectory make_oracle(std::span<const Point2> points) {
    std::vector<Point2> out;
    out.reserve(points.size());
    for (const auto& p : points) {
        if (out.empty() || !(out.back() == p)) out.push_back(p);
    }
    return Trajectory(std::move(out), TrajectoryKind::oracle);
}

InterpolatedPath interpolate(const Trajectory& traj, double spacing) {
    if (!(spacing > 0.0) || !std::isfinite(spacing)) {
        throw std::invalid_argument("interpolation spacing must be positive");
    }
    InterpolatedPath out;
    out.spacing = spacing;
    const auto pts = traj.points();
    out.samples.push_back(pts[0]);
    out.source_segment.push_back(0);
    for (std::size_t seg = 0; seg + 1 < pts.size(); ++seg) {
        const Point2 a = pts[seg];
        const Point2 b = pts[seg + 1];
        const double len = distance(a, b);
        // The small slack keeps exact multiples (5 m at 1 m) from gaining a
        // spurious extra subdivision through rounding.
        const auto pieces = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(len / spacing - 1e-9)));
        for (std::size_t j = 1; j < pieces; ++j) {
            const double f = static_cast<double>(j) / static_cast<double>(pieces);
            out.samples.push_back(a + (b - a) * f);
            out.source_segment.push_back(seg);
        }
        out.samples.push_back(b);
        out.source_segment.push_back(seg);
    }
    return out;
}

PathProjection point_to_path(const Point2& p, const InterpolatedPath& path) {
    if (path.samples.empty()) {
        throw std::invalid_argument("interpolated path is empty");
    }
    std::size_t best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < path.samples.size(); ++i) {
        const double dx = p.x - path.samples[i].x;
        const double dy = p.y - path.samples[i].y;
        const double sq = dx * dx + dy * dy;
        if (sq < best_sq) {
            best_sq = sq;
            best = i;
        }
    }
    return PathProjection{std::sqrt(best_sq), path.samples[best], path.source_segment[best] + 1, best};
}

std::optional<DeviationReport> detect_deviation(const Trajectory& executed, const Trajectory& oracle,
                                                double threshold, double spacing) {
    if (!(threshold > 0.0)) {
        throw std::invalid_argument("deviation threshold must be positive");
    }
    const InterpolatedPath path = interpolate(oracle, spacing);
    DeviationReport report;
    report.per_step_distances.reserve(executed.size());
    for (std::size_t i = 0; i < executed.size(); ++i) {
        const PathProjection proj = point_to_path(executed[i], path);
        report.per_step_distances.push_back(proj.distance);
        if (proj.distance > threshold) {
            report.deviation_index = i + 1;
            report.distance = proj.distance;
            report.foot = proj.foot;
            report.segment_index = proj.segment_index;
            return report;
        }
    }
    return std::nullopt;
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) noexcept {
    const Point2 ab = b - a;
    const double len_sq = ab.x * ab.x + ab.y * ab.y;
    if (len_sq == 0.0) return distance(p, a);
    const Point2 ap = p - a;
    const double t = std::clamp((ap.x * ab.x + ap.y * ab.y) / len_sq, 0.0, 1.0);
    return distance(p, a + ab * t);
}

double wrap_two_pi(double angle) noexcept {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(angle, two_pi);
    if (r < 0.0) r += two_pi;
    if (r >= two_pi) r = 0.0;
    return r;
}

double wrap_pi(double angle) noexcept {
    constexpr double pi = std::numbers::pi;
    double r = wrap_two_pi(angle);
    if (r > pi) r -= 2.0 * pi;
    return r;
}

}  // namespace navfly
