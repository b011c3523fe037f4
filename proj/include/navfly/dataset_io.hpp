#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "navfly/datagen.hpp"
#include "navfly/geometry.hpp"
#include "navfly/policy.hpp"
#include "navfly/rollout.hpp"

namespace navfly {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a training call consumes.
struct Dataset {
    std::vector<TrainSample> samples;
    std::vector<PerceptionSample> perception;
    std::vector<InstructionSample> instructions;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct DatasetManifest {
    std::size_t oracle_samples{0};
    std::size_t correction_samples{0};
    std::size_t perception_samples{0};
    std::size_t instruction_samples{0};
    std::uint64_t seed{0};
    int source_iteration{0};  // 0 = original navigation data
    nlohmann::json extra = nlohmann::json::object();

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

[[nodiscard]] DatasetManifest describe(const Dataset& dataset, std::uint64_t seed, int source_iteration);

void to_json(nlohmann::json& j, const TrainSample& s);
void from_json(const nlohmann::json& j, TrainSample& s);
void to_json(nlohmann::json& j, const PerceptionSample& s);
void from_json(const nlohmann::json& j, PerceptionSample& s);
void to_json(nlohmann::json& j, const InstructionSample& s);
void from_json(const nlohmann::json& j, InstructionSample& s);
void to_json(nlohmann::json& j, const DeviationReport& r);
void from_json(const nlohmann::json& j, DeviationReport& r);
void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

/// One JSON object per line, tagged with `kind`: oracle_sample,
/// correction_sample, perception_sample or instruction_sample.
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
[[nodiscard]] Dataset read_dataset(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
[[nodiscard]] DatasetManifest read_manifest(const std::filesystem::path& path);

void write_episodes(const std::filesystem::path& path, const std::vector<EpisodeSpec>& episodes);
[[nodiscard]] std::vector<EpisodeSpec> read_episodes(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
[[nodiscard]] nlohmann::json read_json(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace navfly
