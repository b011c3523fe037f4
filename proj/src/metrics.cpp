#include "navfly/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace navfly {

double navigation_error(const Point2& final_position, const Point2& goal) noexcept {
    return distance(final_position, goal);
}

int success(double ne, double radius) {
    if (ne < 0.0) throw std::invalid_argument("navigation error must be non-negative");
    return ne < radius ? 1 : 0;
}

int oracle_success(const Trajectory& executed, const Point2& goal, double radius) {
    for (const auto& p : executed.points()) {
        if (distance(p, goal) < radius) return 1;
    }
    return 0;
}

double spl(int success_flag, double shortest, double actual) {
    if (!(shortest > 0.0)) throw std::invalid_argument("shortest path length must be positive");
    if (actual < 0.0) throw std::invalid_argument("actual path length must be non-negative");
    if (success_flag == 0) return 0.0;
    return shortest / std::max(shortest, actual);
}

double dtw(std::span<const Point2> a, std::span<const Point2> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw needs non-empty sequences");
    const std::size_t m = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    // Two rolling rows of the (n+1) x (m+1) accumulated-cost table.
    std::vector<double> prev(m + 1, inf);
    std::vector<double> curr(m + 1, inf);
    prev[0] = 0.0;
    for (const auto& pa : a) {
        curr[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double cost = distance(pa, b[j - 1]);
            curr[j] = cost + std::min({prev[j], curr[j - 1], prev[j - 1]});
        }
        std::swap(prev, curr);
    }
    return prev[m];
}

double ndtw(const Trajectory& executed, const Trajectory& oracle, double success_radius) {
    if (!(success_radius > 0.0)) throw std::invalid_argument("success radius must be positive");
    const double cost = dtw(executed.points(), oracle.points());
    return std::exp(-cost / (static_cast<double>(oracle.size()) * success_radius));
}

MetricReport evaluate_episode(const EpisodeResult& episode, double radius) {
    MetricReport r;
    r.ne = navigation_error(episode.executed.back(), episode.goal);
    r.success = success(r.ne, radius);
    r.oracle_success = oracle_success(episode.executed, episode.goal, radius);
    r.spl = spl(r.success, episode.shortest_path_length, episode.actual_path_length);
    r.ndtw = ndtw(episode.executed, episode.oracle, radius);
    return r;
}

MetricSummary aggregate(std::span<const MetricReport> results) {
    if (results.empty()) throw std::invalid_argument("cannot aggregate an empty result list");
    // Integer counts keep SR/OS exactly permutation invariant; the float sums
    // are accumulated in sorted order for the same reason.
    std::vector<double> ne, spl_v, ndtw_v;
    long succ = 0, os = 0;
    for (const auto& r : results) {
        ne.push_back(r.ne);
        spl_v.push_back(r.spl);
        ndtw_v.push_back(r.ndtw);
        succ += r.success;
        os += r.oracle_success;
    }
    const auto sorted_mean = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const auto n = static_cast<double>(results.size());
    MetricSummary s;
    s.episodes = results.size();
    s.ne = sorted_mean(ne);
    s.sr = 100.0 * static_cast<double>(succ) / n;
    s.os = 100.0 * static_cast<double>(os) / n;
    s.spl = 100.0 * sorted_mean(spl_v);
    s.ndtw = 100.0 * sorted_mean(ndtw_v);
    return s;
}

std::string summary_csv_row(const MetricSummary& s) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << s.ne << ',' << std::setprecision(1) << s.sr << ','
       << s.os << ',' << s.spl << ',' << s.ndtw;
    return os.str();
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    j = nlohmann::json{{"ne", r.ne},
                       {"success", r.success},
                       {"oracle_success", r.oracle_success},
                       {"spl", r.spl},
                       {"ndtw", r.ndtw}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
    j.at("ne").get_to(r.ne);
    j.at("success").get_to(r.success);
    j.at("oracle_success").get_to(r.oracle_success);
    j.at("spl").get_to(r.spl);
    j.at("ndtw").get_to(r.ndtw);
}

void to_json(nlohmann::json& j, const MetricSummary& s) {
    j = nlohmann::json{{"episodes", s.episodes}, {"ne", s.ne},   {"sr", s.sr},
                       {"os", s.os},             {"spl", s.spl}, {"ndtw", s.ndtw}};
}

void from_json(const nlohmann::json& j, MetricSummary& s) {
    s.episodes = j.value("episodes", std::size_t{0});
    j.at("ne").get_to(s.ne);
    j.at("sr").get_to(s.sr);
    j.at("os").get_to(s.os);
    j.at("spl").get_to(s.spl);
    j.at("ndtw").get_to(s.ndtw);
}

}  // namespace navfly
