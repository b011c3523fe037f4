#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "navfly/geometry.hpp"
#include "navfly/rng.hpp"

namespace navfly {

inline constexpr std::array<std::string_view, 8> kLandmarkNames = {
    "door", "chair", "table", "sofa", "lamp", "plant", "bed", "shelf"};
inline constexpr std::array<std::string_view, 6> kLandmarkColors = {
    "red", "blue", "green", "yellow", "white", "black"};

inline constexpr int kBearingSectors = 8;
inline constexpr std::array<std::string_view, kBearingSectors> kSectorNames = {
    "ahead", "ahead-left", "left", "behind-left", "behind", "behind-right", "right", "ahead-right"};

enum class DistanceBin : int { near = 0, mid = 1, far = 2 };
inline constexpr int kDistanceBins = 3;
inline constexpr std::array<std::string_view, kDistanceBins> kDistanceBinNames = {"near", "mid", "far"};
inline constexpr double kNearLimit = 1.5;
inline constexpr double kMidLimit = 3.5;

// Free-space readout along each sector direction.
enum class Clearance : int { blocked = 0, close = 1, open = 2 };
inline constexpr int kClearanceBins = 3;
inline constexpr double kBlockedRange = 0.5;
inline constexpr double kCloseRange = 1.0;

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row-major occupancy bitmap. Cells outside the grid count as occupied.
struct OccupancyGrid {
    int width{0};
    int height{0};
    double cell_size{0.5};
    std::vector<std::uint8_t> cells;  // 1 = occupied

    [[nodiscard]] bool in_bounds(int cx, int cy) const noexcept {
        return cx >= 0 && cy >= 0 && cx < width && cy < height;
    }
    [[nodiscard]] bool blocked(int cx, int cy) const noexcept {
        return !in_bounds(cx, cy) || cells[static_cast<std::size_t>(cy) * width + cx] != 0;
    }
    void set(int cx, int cy, bool occupied) {
        cells[static_cast<std::size_t>(cy) * width + cx] = occupied ? 1 : 0;
    }
    [[nodiscard]] std::array<int, 2> cell_of(const Point2& p) const noexcept;
    [[nodiscard]] Point2 cell_center(int cx, int cy) const noexcept {
        return {(cx + 0.5) * cell_size, (cy + 0.5) * cell_size};
    }
    [[nodiscard]] bool point_free(const Point2& p) const noexcept;
    [[nodiscard]] std::size_t free_count() const noexcept;

    friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;
};

/// True when the straight segment a->b touches no occupied cell. Passing
/// exactly through a cell corner requires both side cells to be free.
[[nodiscard]] bool segment_clear(const OccupancyGrid& grid, const Point2& a, const Point2& b);

struct Landmark {
    int id{0};
    int name{0};   // index into kLandmarkNames
    int color{0};  // index into kLandmarkColors
    Point2 position;

    [[nodiscard]] std::string label() const;
    friend bool operator==(const Landmark&, const Landmark&) = default;
};

struct WorldSpec {
    std::string id;
    OccupancyGrid grid;
    std::vector<Landmark> landmarks;

    [[nodiscard]] double width_m() const noexcept { return grid.width * grid.cell_size; }
    [[nodiscard]] double height_m() const noexcept { return grid.height * grid.cell_size; }
    [[nodiscard]] const Landmark& landmark(int id) const { return landmarks.at(static_cast<std::size_t>(id)); }

    friend bool operator==(const WorldSpec&, const WorldSpec&) = default;
};

struct WorldParams {
    int size{24};  // cells per side
    double cell_size{0.5};
    double obstacle_density{0.12};
    int landmark_count{8};
};

/// Seeded random world with a single connected free region and landmarks
/// with distinct (name, color) pairs.
[[nodiscard]] WorldSpec generate_world(std::uint64_t seed, const WorldParams& params);

struct Pose {
    Point2 position;
    double heading{0.0};  // radians in [0, 2pi)

    friend bool operator==(const Pose&, const Pose&) = default;
};

// Enumerator order is the tie-break order used when decoding actions.
enum class ActionType : int { forward = 0, turn_left = 1, turn_right = 2, stop = 3 };
inline constexpr int kActionTypes = 4;
inline constexpr std::array<std::string_view, kActionTypes> kActionNames = {"FORWARD", "TURN_LEFT",
                                                                            "TURN_RIGHT", "STOP"};

struct ActionConfig {
    double forward_step{0.25};
    double turn_step{0.2617993877991494};  // 15 degrees
};

struct Action {
    ActionType type{ActionType::stop};
    double amount{0.0};  // meters for FORWARD, radians for turns

    static Action forward(double step) { return {ActionType::forward, step}; }
    static Action turn_left(double angle) { return {ActionType::turn_left, angle}; }
    static Action turn_right(double angle) { return {ActionType::turn_right, angle}; }
    static Action stop() { return {ActionType::stop, 0.0}; }
    static Action of_type(ActionType t, const ActionConfig& cfg);

    friend bool operator==(const Action&, const Action&) = default;
};

struct StepResult {
    Pose pose;
    bool collided{false};
};

/// Executes one action. A FORWARD whose swept segment touches an occupied
/// cell leaves the pose unchanged and reports a collision.
[[nodiscard]] StepResult step(const Pose& pose, const Action& action, const WorldSpec& world);

struct VisibleLandmark {
    int landmark_id{0};
    int name{0};
    int color{0};
    int bearing_bin{0};
    DistanceBin distance_bin{DistanceBin::near};

    friend bool operator==(const VisibleLandmark&, const VisibleLandmark&) = default;
};

struct Observation {
    int timestamp{0};
    std::vector<VisibleLandmark> visible;
    std::array<Clearance, kBearingSectors> clearance{};

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct RandomizationConfig {
    double visibility_range{6.0};
    double bearing_jitter{0.0};       // radians, std-dev
    double landmark_dropout{0.0};     // probability
    double distance_bin_noise{0.0};   // probability of shifting one bin
    std::uint64_t seed{0};

    void validate() const;
    [[nodiscard]] bool noise_free() const noexcept {
        return bearing_jitter == 0.0 && landmark_dropout == 0.0 && distance_bin_noise == 0.0;
    }
};

[[nodiscard]] int bearing_bin(double relative_bearing) noexcept;
[[nodiscard]] DistanceBin distance_bin(double meters) noexcept;
/// Bin center angle of a sector, in (-pi, pi].
[[nodiscard]] double sector_center(int sector) noexcept;

/// Symbolic observation from `pose`. Visibility needs range and line of
/// sight; noise is drawn from `rng` with a fixed number of draws per
/// in-range landmark.
[[nodiscard]] Observation observe(const Pose& pose, const WorldSpec& world,
                                  const RandomizationConfig& cfg, Rng& rng, int timestamp = 0);

void to_json(nlohmann::json& j, const WorldSpec& w);
void from_json(const nlohmann::json& j, WorldSpec& w);
void to_json(nlohmann::json& j, const Observation& o);
void from_json(const nlohmann::json& j, Observation& o);
void to_json(nlohmann::json& j, const Action& a);
void from_json(const nlohmann::json& j, Action& a);
void to_json(nlohmann::json& j, const Pose& p);
void from_json(const nlohmann::json& j, Pose& p);
void to_json(nlohmann::json& j, const Point2& p);
void from_json(const nlohmann::json& j, Point2& p);
void to_json(nlohmann::json& j, const RandomizationConfig& c);
void from_json(const nlohmann::json& j, RandomizationConfig& c);

/// Run-length encoding of the row-major bitmap: "count:bit,count:bit,...".
[[nodiscard]] std::string encode_rle(const std::vector<std::uint8_t>& cells);
[[nodiscard]] std::vector<std::uint8_t> decode_rle(std::string_view rle, std::size_t expected);

}  // namespace navfly
