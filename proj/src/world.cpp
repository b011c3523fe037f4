#include "navfly/world.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <sstream>

namespace navfly {

std::array<int, 2> OccupancyGrid::cell_of(const Point2& p) const noexcept {
    return {static_cast<int>(std::floor(p.x / cell_size)), static_cast<int>(std::floor(p.y / cell_size))};
}

bool OccupancyGrid::point_free(const Point2& p) const noexcept {
    if (!p.finite()) return false;
    const auto [cx, cy] = cell_of(p);
    return !blocked(cx, cy);
}

std::size_t OccupancyGrid::free_count() const noexcept {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{0}));
}

bool segment_clear(const OccupancyGrid& grid, const Point2& a, const Point2& b) {
    auto [ix, iy] = grid.cell_of(a);
    const auto [ex, ey] = grid.cell_of(b);
    if (grid.blocked(ix, iy) || grid.blocked(ex, ey)) return false;

    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double cs = grid.cell_size;
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
    const double delta_x = step_x != 0 ? cs / std::abs(dx) : inf;
    const double delta_y = step_y != 0 ? cs / std::abs(dy) : inf;
    double t_x = step_x > 0 ? ((ix + 1) * cs - a.x) / dx : (step_x < 0 ? (ix * cs - a.x) / dx : inf);
    double t_y = step_y > 0 ? ((iy + 1) * cs - a.y) / dy : (step_y < 0 ? (iy * cs - a.y) / dy : inf);

    const int guard = 2 * (std::abs(ex - ix) + std::abs(ey - iy)) + 4;
    for (int i = 0; i < guard && (ix != ex || iy != ey); ++i) {
        if (std::abs(t_x - t_y) < 1e-12) {
            if (t_x > 1.0) break;
            if (grid.blocked(ix + step_x, iy) || grid.blocked(ix, iy + step_y)) return false;
            ix += step_x;
            iy += step_y;
            t_x += delta_x;
            t_y += delta_y;
        } else if (t_x < t_y) {
            if (t_x > 1.0) break;
            ix += step_x;
            t_x += delta_x;
        } else {
            if (t_y > 1.0) break;
            iy += step_y;
            t_y += delta_y;
        }
        if (grid.blocked(ix, iy)) return false;
    }
    return true;
}

std::string Landmark::label() const {
    return std::string(kLandmarkColors[static_cast<std::size_t>(color)]) + " " +
           std::string(kLandmarkNames[static_cast<std::size_t>(name)]);
}

namespace {

// Keeps the largest 4-connected free component and fills every other free
// cell, so all free space is mutually reachable.
void keep_largest_component(OccupancyGrid& grid) {
    std::vector<int> label(grid.cells.size(), -1);
    std::vector<std::size_t> sizes;
    for (int y = 0; y < grid.height; ++y) {
        for (int x = 0; x < grid.width; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * grid.width + x;
            if (grid.cells[idx] != 0 || label[idx] >= 0) continue;
            const int id = static_cast<int>(sizes.size());
            std::size_t count = 0;
            std::deque<std::array<int, 2>> queue{{x, y}};
            label[idx] = id;
            while (!queue.empty()) {
                const auto [cx, cy] = queue.front();
                queue.pop_front();
                ++count;
                constexpr std::array<std::array<int, 2>, 4> dirs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
                for (const auto& d : dirs) {
                    const int nx = cx + d[0];
                    const int ny = cy + d[1];
                    if (grid.blocked(nx, ny)) continue;
                    const std::size_t n = static_cast<std::size_t>(ny) * grid.width + nx;
                    if (label[n] >= 0) continue;
                    label[n] = id;
                    queue.push_back({nx, ny});
                }
            }
            sizes.push_back(count);
        }
    }
    if (sizes.empty()) return;
    const auto keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (std::size_t i = 0; i < label.size(); ++i) {
        if (grid.cells[i] == 0 && label[i] != keep) grid.cells[i] = 1;
    }
}

bool neighborhood_free(const OccupancyGrid& grid, int cx, int cy) {
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            if (grid.blocked(cx + dx, cy + dy)) return false;
        }
    }
    return true;
}

}  // namespace

WorldSpec generate_world(std::uint64_t seed, const WorldParams& params) {
    if (params.obstacle_density < 0.0 || params.obstacle_density > 0.4) {
        throw std::invalid_argument("obstacle density must lie in [0, 0.4]");
    }
    if (params.landmark_count < 1) throw std::invalid_argument("landmark count must be at least 1");
    if (params.size < 3) throw std::invalid_argument("world size must be at least 3 cells");
    if (!(params.cell_size > 0.0)) throw std::invalid_argument("cell size must be positive");
    const std::size_t pairs = kLandmarkNames.size() * kLandmarkColors.size();
    if (static_cast<std::size_t>(params.landmark_count) > pairs) {
        throw std::invalid_argument("more landmarks requested than distinct (name, color) pairs");
    }

    Rng rng(mix_seed(seed, 0x776f726c64ull));
    WorldSpec world;
    world.id = "world-" + std::to_string(seed);
    OccupancyGrid& grid = world.grid;
    grid.width = params.size;
    grid.height = params.size;
    grid.cell_size = params.cell_size;
    grid.cells.assign(static_cast<std::size_t>(params.size) * params.size, 0);

    const auto total = static_cast<double>(grid.cells.size());
    const auto occupied_fraction = [&] {
        return 1.0 - static_cast<double>(grid.free_count()) / total;
    };
    for (int attempt = 0; attempt < 10000 && occupied_fraction() < params.obstacle_density; ++attempt) {
        int w = 0;
        int h = 0;
        if (rng.bernoulli(0.5)) {
            // wall segment
            const int len = 3 + static_cast<int>(rng.below(5));
            if (rng.bernoulli(0.5)) {
                w = len;
                h = 1;
            } else {
                w = 1;
                h = len;
            }
        } else {
            w = 1 + static_cast<int>(rng.below(3));
            h = 1 + static_cast<int>(rng.below(3));
        }
        const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.width)));
        const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.height)));
        for (int y = y0; y < std::min(grid.height, y0 + h); ++y) {
            for (int x = x0; x < std::min(grid.width, x0 + w); ++x) grid.set(x, y, true);
        }
        keep_largest_component(grid);
    }
    keep_largest_component(grid);

    std::vector<std::size_t> pair_ids(pairs);
    for (std::size_t i = 0; i < pairs; ++i) pair_ids[i] = i;
    shuffle(pair_ids, rng);

    constexpr double min_separation = 2.0;
    constexpr int tries_per_landmark = 2000;
    for (int id = 0; id < params.landmark_count; ++id) {
        bool placed = false;
        for (int pass = 0; pass < 2 && !placed; ++pass) {
            for (int t = 0; t < tries_per_landmark; ++t) {
                const int cx = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.width)));
                const int cy = static_cast<int>(rng.below(static_cast<std::uint64_t>(grid.height)));
                if (grid.blocked(cx, cy)) continue;
                // First pass wants open surroundings and spacing; the second
                // accepts any free cell not already used.
                if (pass == 0 && !neighborhood_free(grid, cx, cy)) continue;
                const Point2 pos = grid.cell_center(cx, cy);
                const double sep = pass == 0 ? min_separation : 1e-9;
                const bool crowded = std::any_of(world.landmarks.begin(), world.landmarks.end(),
                                                 [&](const Landmark& l) { return distance(l.position, pos) < sep; });
                if (crowded) continue;
                const std::size_t pair = pair_ids[static_cast<std::size_t>(id)];
                world.landmarks.push_back(Landmark{id, static_cast<int>(pair / kLandmarkColors.size()),
                                                   static_cast<int>(pair % kLandmarkColors.size()), pos});
                placed = true;
                break;
            }
        }
        if (!placed) {
            throw GenerationError("could not place landmark " + std::to_string(id) + " in world " + world.id);
        }
    }
    return world;
}

Action Action::of_type(ActionType t, const ActionConfig& cfg) {
    switch (t) {
        case ActionType::forward: return forward(cfg.forward_step);
        case ActionType::turn_left: return turn_left(cfg.turn_step);
        case ActionType::turn_right: return turn_right(cfg.turn_step);
        case ActionType::stop: break;
    }
    return stop();
}

StepResult step(const Pose& pose, const Action& action, const WorldSpec& world) {
    switch (action.type) {
        case ActionType::forward: {
            const Point2 next{pose.position.x + action.amount * std::cos(pose.heading),
                              pose.position.y + action.amount * std::sin(pose.heading)};
            if (!segment_clear(world.grid, pose.position, next)) return {pose, true};
            return {Pose{next, pose.heading}, false};
        }
        case ActionType::turn_left: return {Pose{pose.position, wrap_two_pi(pose.heading + action.amount)}, false};
        case ActionType::turn_right: return {Pose{pose.position, wrap_two_pi(pose.heading - action.amount)}, false};
        case ActionType::stop: break;
    }
    return {pose, false};
}

void RandomizationConfig::validate() const {
    if (!(visibility_range > 0.0)) throw std::invalid_argument("visibility range must be positive");
    if (bearing_jitter < 0.0) throw std::invalid_argument("bearing jitter must be non-negative");
    const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(landmark_dropout) || !prob(distance_bin_noise)) {
        throw std::invalid_argument("noise probabilities must lie in [0, 1]");
    }
}

int bearing_bin(double relative_bearing) noexcept {
    constexpr double width = 2.0 * std::numbers::pi / kBearingSectors;
    const double shifted = wrap_two_pi(relative_bearing + width / 2.0);
    const int bin = static_cast<int>(std::floor(shifted / width));
    return std::clamp(bin, 0, kBearingSectors - 1);
}

DistanceBin distance_bin(double meters) noexcept {
    if (meters < kNearLimit) return DistanceBin::near;
    if (meters < kMidLimit) return DistanceBin::mid;
    return DistanceBin::far;
}

double sector_center(int sector) noexcept {
    return wrap_pi(sector * 2.0 * std::numbers::pi / kBearingSectors);
}

Observation observe(const Pose& pose, const WorldSpec& world, const RandomizationConfig& cfg, Rng& rng,
                    int timestamp) {
    Observation obs;
    obs.timestamp = timestamp;
    for (const auto& lm : world.landmarks) {
        const double d = distance(pose.position, lm.position);
        if (d > cfg.visibility_range) continue;
        if (!segment_clear(world.grid, pose.position, lm.position)) continue;
        const double u_drop = rng.uniform();
        const double jitter = rng.normal(0.0, 1.0) * cfg.bearing_jitter;
        const double u_bin = rng.uniform();
        const double u_dir = rng.uniform();
        if (u_drop < cfg.landmark_dropout) continue;

        const double bearing = std::atan2(lm.position.y - pose.position.y, lm.position.x - pose.position.x);
        VisibleLandmark v;
        v.landmark_id = lm.id;
        v.name = lm.name;
        v.color = lm.color;
        v.bearing_bin = bearing_bin(bearing - pose.heading + jitter);
        int dbin = static_cast<int>(distance_bin(d));
        if (u_bin < cfg.distance_bin_noise) {
            if (dbin == 0) {
                dbin = 1;
            } else if (dbin == kDistanceBins - 1) {
                dbin -= 1;
            } else {
                dbin += u_dir < 0.5 ? -1 : 1;
            }
        }
        v.distance_bin = static_cast<DistanceBin>(dbin);
        obs.visible.push_back(v);
    }
    for (int s = 0; s < kBearingSectors; ++s) {
        const double dir = pose.heading + sector_center(s);
        const Point2 unit{std::cos(dir), std::sin(dir)};
        const Point2& p = pose.position;
        if (!segment_clear(world.grid, p, p + unit * kBlockedRange)) {
            obs.clearance[static_cast<std::size_t>(s)] = Clearance::blocked;
        } else if (!segment_clear(world.grid, p, p + unit * kCloseRange)) {
            obs.clearance[static_cast<std::size_t>(s)] = Clearance::close;
        } else {
            obs.clearance[static_cast<std::size_t>(s)] = Clearance::open;
        }
    }
    return obs;
}

std::string encode_rle(const std::vector<std::uint8_t>& cells) {
    std::ostringstream os;
    std::size_t i = 0;
    bool first = true;
    while (i < cells.size()) {
        std::size_t j = i;
        while (j < cells.size() && cells[j] == cells[i]) ++j;
        if (!first) os << ',';
        os << (j - i) << ':' << (cells[i] != 0 ? 1 : 0);
        first = false;
        i = j;
    }
    return os.str();
}

std::vector<std::uint8_t> decode_rle(std::string_view rle, std::size_t expected) {
    std::vector<std::uint8_t> cells;
    cells.reserve(expected);
    std::size_t pos = 0;
    while (pos < rle.size()) {
        const auto comma = rle.find(',', pos);
        const auto token = rle.substr(pos, comma == std::string_view::npos ? rle.size() - pos : comma - pos);
        const auto colon = token.find(':');
        if (colon == std::string_view::npos || colon + 2 != token.size()) {
            throw std::invalid_argument("malformed run-length token");
        }
        std::size_t count = 0;
        for (char c : token.substr(0, colon)) {
            if (c < '0' || c > '9') throw std::invalid_argument("malformed run-length count");
            count = count * 10 + static_cast<std::size_t>(c - '0');
        }
        const char bit = token[colon + 1];
        if (bit != '0' && bit != '1') throw std::invalid_argument("malformed run-length bit");
        if (cells.size() + count > expected) throw std::invalid_argument("run-length data exceeds grid size");
        cells.insert(cells.end(), count, bit == '1' ? 1 : 0);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    if (cells.size() != expected) throw std::invalid_argument("run-length data does not match grid size");
    return cells;
}

void to_json(nlohmann::json& j, const Point2& p) { j = nlohmann::json::array({p.x, p.y}); }

void from_json(const nlohmann::json& j, Point2& p) {
    p.x = j.at(0).get<double>();
    p.y = j.at(1).get<double>();
}

void to_json(nlohmann::json& j, const WorldSpec& w) {
    nlohmann::json lms = nlohmann::json::array();
    for (const auto& l : w.landmarks) {
        lms.push_back({{"id", l.id},
                       {"name", kLandmarkNames[static_cast<std::size_t>(l.name)]},
                       {"color", kLandmarkColors[static_cast<std::size_t>(l.color)]},
                       {"position", l.position}});
    }
    j = nlohmann::json{{"id", w.id},
                       {"width", w.grid.width},
                       {"height", w.grid.height},
                       {"cell_size", w.grid.cell_size},
                       {"bounds", {w.width_m(), w.height_m()}},
                       {"grid", encode_rle(w.grid.cells)},
                       {"landmarks", lms}};
}

namespace {
int index_of(std::span<const std::string_view> table, const std::string& value) {
    const auto it = std::find(table.begin(), table.end(), value);
    if (it == table.end()) throw std::invalid_argument("unknown vocabulary entry: " + value);
    return static_cast<int>(it - table.begin());
}
}  // namespace

void from_json(const nlohmann::json& j, WorldSpec& w) {
    w.id = j.at("id").get<std::string>();
    w.grid.width = j.at("width").get<int>();
    w.grid.height = j.at("height").get<int>();
    w.grid.cell_size = j.at("cell_size").get<double>();
    if (w.grid.width <= 0 || w.grid.height <= 0 || !(w.grid.cell_size > 0.0)) {
        throw std::invalid_argument("world grid dimensions must be positive");
    }
    w.grid.cells = decode_rle(j.at("grid").get<std::string>(),
                              static_cast<std::size_t>(w.grid.width) * static_cast<std::size_t>(w.grid.height));
    w.landmarks.clear();
    for (const auto& l : j.at("landmarks")) {
        Landmark lm;
        lm.id = l.at("id").get<int>();
        lm.name = index_of(kLandmarkNames, l.at("name").get<std::string>());
        lm.color = index_of(kLandmarkColors, l.at("color").get<std::string>());
        lm.position = l.at("position").get<Point2>();
        w.landmarks.push_back(lm);
    }
}

void to_json(nlohmann::json& j, const Observation& o) {
    nlohmann::json vis = nlohmann::json::array();
    for (const auto& v : o.visible) {
        vis.push_back({v.landmark_id, v.name, v.color, v.bearing_bin, static_cast<int>(v.distance_bin)});
    }
    nlohmann::json clr = nlohmann::json::array();
    for (auto c : o.clearance) clr.push_back(static_cast<int>(c));
    j = nlohmann::json{{"t", o.timestamp}, {"visible", vis}, {"clearance", clr}};
}

void from_json(const nlohmann::json& j, Observation& o) {
    o.timestamp = j.at("t").get<int>();
    o.visible.clear();
    for (const auto& v : j.at("visible")) {
        VisibleLandmark vl;
        vl.landmark_id = v.at(0).get<int>();
        vl.name = v.at(1).get<int>();
        vl.color = v.at(2).get<int>();
        vl.bearing_bin = v.at(3).get<int>();
        vl.distance_bin = static_cast<DistanceBin>(v.at(4).get<int>());
        o.visible.push_back(vl);
    }
    const auto& clr = j.at("clearance");
    for (std::size_t i = 0; i < o.clearance.size(); ++i) o.clearance[i] = static_cast<Clearance>(clr.at(i).get<int>());
}

void to_json(nlohmann::json& j, const Action& a) {
    j = nlohmann::json{{"type", kActionNames[static_cast<std::size_t>(a.type)]}, {"amount", a.amount}};
}

void from_json(const nlohmann::json& j, Action& a) {
    a.type = static_cast<ActionType>(index_of(kActionNames, j.at("type").get<std::string>()));
    a.amount = j.at("amount").get<double>();
}

void to_json(nlohmann::json& j, const Pose& p) {
    j = nlohmann::json{{"position", p.position}, {"heading", p.heading}};
}

void from_json(const nlohmann::json& j, Pose& p) {
    p.position = j.at("position").get<Point2>();
    p.heading = j.at("heading").get<double>();
}

void to_json(nlohmann::json& j, const RandomizationConfig& c) {
    j = nlohmann::json{{"visibility_range", c.visibility_range},
                       {"bearing_jitter", c.bearing_jitter},
                       {"landmark_dropout", c.landmark_dropout},
                       {"distance_bin_noise", c.distance_bin_noise},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, RandomizationConfig& c) {
    c.visibility_range = j.value("visibility_range", 6.0);
    c.bearing_jitter = j.value("bearing_jitter", 0.0);
    c.landmark_dropout = j.value("landmark_dropout", 0.0);
    c.distance_bin_noise = j.value("distance_bin_noise", 0.0);
    c.seed = j.value("seed", std::uint64_t{0});
}

}  // namespace navfly
