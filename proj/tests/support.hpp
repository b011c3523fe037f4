#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "navfly/rollout.hpp"
#include "navfly/world.hpp"

namespace testing {

// All-free world of `cells` x `cells`, landmarks given as (name, color, x, y).
struct LandmarkAt {
    int name;
    int color;
    double x;
    double y;
};

inline navfly::WorldSpec open_world(int cells, std::vector<LandmarkAt> landmarks = {}, double cell_size = 0.5) {
    navfly::WorldSpec w;
    w.id = "open";
    w.grid.width = cells;
    w.grid.height = cells;
    w.grid.cell_size = cell_size;
    w.grid.cells.assign(static_cast<std::size_t>(cells) * cells, 0);
    int id = 0;
    for (const auto& l : landmarks) w.landmarks.push_back({id++, l.name, l.color, {l.x, l.y}});
    return w;
}

// Fresh directory under the build tree, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("navfly_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
