#pragma once

#include <span>
#include <string>

#include "json.hpp"

#include "navfly/geometry.hpp"

namespace navfly {

inline constexpr double kSuccessRadius = 3.0;

struct EpisodeResult {
    Trajectory executed;
    Trajectory oracle;
    Point2 goal;
    double shortest_path_length{0.0};
    double actual_path_length{0.0};
    bool stopped{false};
};

struct MetricReport {
    double ne{0.0};
    int success{0};
    int oracle_success{0};
    double spl{0.0};
    double ndtw{0.0};

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Averages over a list of episode reports. SR, OS, SPL and nDTW are in
/// percent; NE stays in meters.
struct MetricSummary {
    std::size_t episodes{0};
    double ne{0.0};
    double sr{0.0};
    double os{0.0};
    double spl{0.0};
    double ndtw{0.0};

    friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

[[nodiscard]] double navigation_error(const Point2& final_position, const Point2& goal) noexcept;

/// 1 iff `ne` is strictly below `radius`.
[[nodiscard]] int success(double ne, double radius = kSuccessRadius);

/// 1 iff any executed position came strictly within `radius` of the goal.
[[nodiscard]] int oracle_success(const Trajectory& executed, const Point2& goal,
                                 double radius = kSuccessRadius);

/// success * shortest / max(shortest, actual).
[[nodiscard]] double spl(int success, double shortest, double actual);

/// Dynamic time warping cost with Euclidean point cost.
[[nodiscard]] double dtw(std::span<const Point2> a, std::span<const Point2> b);

/// exp(-DTW(executed, oracle) / (|oracle| * success_radius)).
[[nodiscard]] double ndtw(const Trajectory& executed, const Trajectory& oracle,
                          double success_radius = kSuccessRadius);

/// Computes every metric for one finished episode.
[[nodiscard]] MetricReport evaluate_episode(const EpisodeResult& episode,
                                            double radius = kSuccessRadius);

[[nodiscard]] MetricSummary aggregate(std::span<const MetricReport> results);

inline constexpr const char* kSummaryCsvHeader = "ne,sr,os,spl,ndtw";
[[nodiscard]] std::string summary_csv_row(const MetricSummary& summary);

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);
void to_json(nlohmann::json& j, const MetricSummary& s);
void from_json(const nlohmann::json& j, MetricSummary& s);

}  // namespace navfly
