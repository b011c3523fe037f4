#include "navfly/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <tuple>

namespace navfly {

double GridCost::value() const noexcept {
    return static_cast<double>(straight) + std::numbers::sqrt2 * static_cast<double>(diagonal);
}

namespace {

double octile(Cell a, Cell b) noexcept {
    const int dx = std::abs(a[0] - b[0]);
    const int dy = std::abs(a[1] - b[1]);
    return (std::numbers::sqrt2 - 1.0) * std::min(dx, dy) + std::max(dx, dy);
}

constexpr std::array<Cell, 8> kMoves{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

}  // namespace

std::optional<GridPath> astar(const OccupancyGrid& grid, Cell start, Cell goal) {
    if (grid.blocked(start[0], start[1]) || grid.blocked(goal[0], goal[1])) return std::nullopt;
    const auto index = [&](Cell c) { return static_cast<std::size_t>(c[1]) * grid.width + c[0]; };
    const std::size_t n = grid.cells.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> g(n, inf);
    std::vector<GridCost> cost(n);
    std::vector<std::size_t> parent(n, n);
    std::vector<std::uint8_t> closed(n, 0);

    // (f, h, sequence, cell index); the sequence number makes pops deterministic.
    using Entry = std::tuple<double, double, std::uint64_t, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    std::uint64_t seq = 0;
    g[index(start)] = 0.0;
    open.emplace(octile(start, goal), octile(start, goal), seq++, index(start));

    while (!open.empty()) {
        const auto [f, h, s, cur] = open.top();
        open.pop();
        if (closed[cur]) continue;
        closed[cur] = 1;
        const Cell c{static_cast<int>(cur % grid.width), static_cast<int>(cur / grid.width)};
        if (c == goal) {
            GridPath path;
            path.cost = cost[cur];
            for (std::size_t at = cur; at != n; at = parent[at]) {
                path.cells.push_back({static_cast<int>(at % grid.width), static_cast<int>(at / grid.width)});
            }
            std::reverse(path.cells.begin(), path.cells.end());
            return path;
        }
        for (const auto& m : kMoves) {
            const Cell nb{c[0] + m[0], c[1] + m[1]};
            if (grid.blocked(nb[0], nb[1])) continue;
            const bool diag = m[0] != 0 && m[1] != 0;
            if (diag && (grid.blocked(c[0] + m[0], c[1]) || grid.blocked(c[0], c[1] + m[1]))) continue;
            const std::size_t ni = index(nb);
            if (closed[ni]) continue;
            const double step_cost = diag ? std::numbers::sqrt2 : 1.0;
            const double tentative = g[cur] + step_cost;
            if (tentative < g[ni]) {
                g[ni] = tentative;
                cost[ni] = cost[cur];
                (diag ? cost[ni].diagonal : cost[ni].straight) += 1;
                parent[ni] = cur;
                const double hn = octile(nb, goal);
                open.emplace(tentative + hn, hn, seq++, ni);
            }
        }
    }
    return std::nullopt;
}

OccupancyGrid inflate(const OccupancyGrid& grid, int radius) {
    OccupancyGrid out = grid;
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            if (grid.blocked(x, y)) continue;
            bool near = false;
            for (int dy = -radius; dy <= radius && !near; ++dy) {
                for (int dx = -radius; dx <= radius && !near; ++dx) {
                    // Outside the map is not an obstacle for inflation purposes;
                    // walls at the border are already represented as blocked.
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (grid.in_bounds(nx, ny) && grid.blocked(nx, ny)) near = true;
                }
            }
            if (near) out.set(x, y, true);
        }
    }
    return out;
}

double polyline_length(std::span<const Point2> points) noexcept {
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) total += distance(points[i - 1], points[i]);
    return total;
}

namespace {

// Distance from p to the nearest occupied cell or the map border.
double clearance_at(const OccupancyGrid& grid, const Point2& p, double cap) {
    const auto c = grid.cell_of(p);
    const int r = static_cast<int>(std::ceil(cap / grid.cell_size)) + 1;
    double best = cap;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const int x = c[0] + dx;
            const int y = c[1] + dy;
            if (!grid.blocked(x, y)) continue;
            const double lo_x = x * grid.cell_size, lo_y = y * grid.cell_size;
            const double ex = std::max({lo_x - p.x, 0.0, p.x - (lo_x + grid.cell_size)});
            const double ey = std::max({lo_y - p.y, 0.0, p.y - (lo_y + grid.cell_size)});
            best = std::min(best, std::hypot(ex, ey));
        }
    }
    return best;
}

bool keeps_margin(const OccupancyGrid& grid, const Point2& a, const Point2& b, double margin) {
    const double len = distance(a, b);
    const auto n = static_cast<int>(std::ceil(len / 0.05));
    for (int i = 1; i < n; ++i) {
        const double s = len * i / n;
        if (s < margin || len - s < margin) continue;
        const double t = s / len;
        if (clearance_at(grid, {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}, margin) < margin) return false;
    }
    return true;
}

std::vector<Point2> pull(const OccupancyGrid& sight, const OccupancyGrid& raw, std::span<const Point2> points,
                         double margin) {
    std::vector<Point2> out;
    if (points.empty()) return out;
    out.push_back(points.front());
    std::size_t i = 0;
    while (i + 1 < points.size()) {
        std::size_t j = points.size() - 1;
        while (j > i + 1 && !(segment_clear(sight, points[i], points[j]) &&
                              (margin <= 0.0 || keeps_margin(raw, points[i], points[j], margin)))) {
            --j;
        }
        out.push_back(points[j]);
        i = j;
    }
    return out;
}

}  // namespace

std::vector<Point2> string_pull(const OccupancyGrid& grid, std::span<const Point2> points) {
    return pull(grid, grid, points, 0.0);
}

PlannedPath plan(const Point2& start, const Point2& goal, const WorldSpec& world) {
    const OccupancyGrid& raw = world.grid;
    if (!raw.point_free(start) || !raw.point_free(goal)) {
        throw std::invalid_argument("plan endpoints must lie in free space");
    }
    PlannedPath out;
    if (start == goal) {
        out.waypoints = {start};
        return out;
    }
    const Cell s = raw.cell_of(start);
    const Cell g = raw.cell_of(goal);

    OccupancyGrid inflated = inflate(raw);
    inflated.set(s[0], s[1], false);
    inflated.set(g[0], g[1], false);
    const OccupancyGrid* used = &inflated;
    auto cells = astar(inflated, s, g);
    if (!cells) {
        used = &raw;
        cells = astar(raw, s, g);
    }
    if (!cells) throw NoPathError("no path between the requested points");

    std::vector<Point2> pts;
    pts.push_back(start);
    for (std::size_t i = 1; i + 1 < cells->cells.size(); ++i) {
        pts.push_back(raw.cell_center(cells->cells[i][0], cells->cells[i][1]));
    }
    pts.push_back(goal);
    out.waypoints = pull(*used, raw, pts, kSmoothingMargin);
    out.length = polyline_length(out.waypoints);
    out.grid_cost = cells->cost;
    return out;
}

PlannedPath plan_through(std::span<const Point2> points, const WorldSpec& world) {
    if (points.size() < 2) throw std::invalid_argument("plan_through needs at least two points");
    PlannedPath out;
    out.waypoints.push_back(points.front());
    for (std::size_t leg = 0; leg + 1 < points.size(); ++leg) {
        PlannedPath piece;
        try {
            piece = plan(points[leg], points[leg + 1], world);
        } catch (const NoPathError&) {
            throw NoPathError("no path for leg " + std::to_string(leg), leg);
        }
        for (std::size_t i = 1; i < piece.waypoints.size(); ++i) out.waypoints.push_back(piece.waypoints[i]);
        out.grid_cost.straight += piece.grid_cost.straight;
        out.grid_cost.diagonal += piece.grid_cost.diagonal;
    }
    out.length = polyline_length(out.waypoints);
    return out;
}

std::vector<Action> path_to_actions(const PlannedPath& path, const Pose& start_pose, const ActionConfig& cfg) {
    std::vector<Action> actions;
    Point2 pos = start_pose.position;
    double heading = start_pose.heading;
    for (std::size_t w = 1; w < path.waypoints.size(); ++w) {
        const Point2 from = path.waypoints[w - 1];
        const Point2 target = path.waypoints[w];
        const auto guard = static_cast<std::size_t>(4.0 * distance(pos, target) / cfg.forward_step) + 64;
        for (std::size_t it = 0; it < guard; ++it) {
            const double d = distance(pos, target);
            // Keep the current heading while it stays close to the segment.
            const Point2 straight{pos.x + cfg.forward_step * std::cos(heading),
                                  pos.y + cfg.forward_step * std::sin(heading)};
            const double bearing_error = std::abs(wrap_pi(std::atan2(target.y - pos.y, target.x - pos.x) - heading));
            if (bearing_error < std::numbers::pi / 2 && distance(straight, target) < d &&
                point_segment_distance(straight, from, target) <= kCrossTrackTolerance) {
                actions.push_back(Action::forward(cfg.forward_step));
                pos = straight;
                continue;
            }
            const double delta = wrap_pi(std::atan2(target.y - pos.y, target.x - pos.x) - heading);
            const auto turns = static_cast<int>(std::lround(std::abs(delta) / cfg.turn_step));
            const Action turn = delta > 0 ? Action::turn_left(cfg.turn_step) : Action::turn_right(cfg.turn_step);
            // Heading is advanced one turn at a time, exactly as the world does.
            double aimed = heading;
            const double signed_turn = delta > 0 ? cfg.turn_step : -cfg.turn_step;
            for (int k = 0; k < turns; ++k) aimed = wrap_two_pi(aimed + signed_turn);
            const Point2 next{pos.x + cfg.forward_step * std::cos(aimed), pos.y + cfg.forward_step * std::sin(aimed)};
            if (distance(next, target) >= d) break;
            for (int k = 0; k < turns; ++k) actions.push_back(turn);
            actions.push_back(Action::forward(cfg.forward_step));
            heading = aimed;
            pos = next;
        }
    }
    actions.push_back(Action::stop());
    return actions;
}

}  // namespace navfly
