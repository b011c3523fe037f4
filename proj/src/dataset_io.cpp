#include "navfly/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace navfly {

namespace {

constexpr const char* kOracleKind = "oracle_sample";
constexpr const char* kCorrectionKind = "correction_sample";
constexpr const char* kPerceptionKind = "perception_sample";
constexpr const char* kInstructionKind = "instruction_sample";

std::string task_name(PerceptionTask t) { return t == PerceptionTask::caption ? "caption" : "qa"; }

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(nlohmann::json::parse(line));
        } catch (const std::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

}  // namespace

void to_json(nlohmann::json& j, const TrainSample& s) {
    std::vector<int> supervise(s.supervise.begin(), s.supervise.end());
    j = nlohmann::json{{"kind", s.kind == SampleKind::oracle ? kOracleKind : kCorrectionKind},
                       {"episode_id", s.episode_id},
                       {"instruction", s.instruction},
                       {"window", s.window},
                       {"history", s.history},
                       {"target", s.target},
                       {"supervise", supervise}};
}

void from_json(const nlohmann::json& j, TrainSample& s) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == kOracleKind) {
        s.kind = SampleKind::oracle;
    } else if (kind == kCorrectionKind) {
        s.kind = SampleKind::correction;
    } else {
        throw FormatError("not a training sample kind: " + kind);
    }
    j.at("episode_id").get_to(s.episode_id);
    j.at("instruction").get_to(s.instruction);
    j.at("window").get_to(s.window);
    j.at("history").get_to(s.history);
    j.at("target").get_to(s.target);
    const auto supervise = j.at("supervise").get<std::vector<int>>();
    s.supervise.assign(supervise.begin(), supervise.end());
    if (s.supervise.size() != s.target.size()) throw FormatError("supervise mask and target differ in length");
    if (s.target.empty() || s.target.size() > kChunkSize) throw FormatError("target chunk must hold 1 to 4 actions");
    if (s.window.size() > kWindowSize) throw FormatError("observation window longer than 16 frames");
}

void to_json(nlohmann::json& j, const PerceptionSample& s) {
    j = nlohmann::json{{"kind", kPerceptionKind}, {"episode_id", s.episode_id}, {"window", s.window},
                       {"task", task_name(s.task)},  {"prompt", s.prompt}};
    if (s.task == PerceptionTask::caption) {
        j["caption_tokens"] = s.caption_tokens;
    } else {
        j["category"] = kQaCategoryNames.at(static_cast<std::size_t>(s.category));
        j["answer"] = s.answer;
    }
}

void from_json(const nlohmann::json& j, PerceptionSample& s) {
    if (j.at("kind").get<std::string>() != kPerceptionKind) throw FormatError("not a perception sample");
    j.at("episode_id").get_to(s.episode_id);
    j.at("window").get_to(s.window);
    j.at("prompt").get_to(s.prompt);
    const auto task = j.at("task").get<std::string>();
    if (task == "caption") {
        s.task = PerceptionTask::caption;
        j.at("caption_tokens").get_to(s.caption_tokens);
        for (int t : s.caption_tokens) {
            if (t < 0 || static_cast<std::size_t>(t) >= caption_classes()) throw FormatError("caption token out of range");
        }
    } else if (task == "qa") {
        s.task = PerceptionTask::qa;
        const auto cat = j.at("category").get<std::string>();
        const auto it = std::find(kQaCategoryNames.begin(), kQaCategoryNames.end(), cat);
        if (it == kQaCategoryNames.end()) throw FormatError("unknown QA category " + cat);
        s.category = static_cast<QaCategory>(it - kQaCategoryNames.begin());
        j.at("answer").get_to(s.answer);
        if (s.answer < 0 || static_cast<std::size_t>(s.answer) >= answer_classes(s.category)) {
            throw FormatError("QA answer outside the category's answer set");
        }
    } else {
        throw FormatError("unknown perception task " + task);
    }
}

void to_json(nlohmann::json& j, const InstructionSample& s) {
    j = nlohmann::json{{"kind", kInstructionKind},
                       {"episode_id", s.episode_id},
                       {"observations", s.observations},
                       {"tokens", s.tokens}};
}

void from_json(const nlohmann::json& j, InstructionSample& s) {
    if (j.at("kind").get<std::string>() != kInstructionKind) throw FormatError("not an instruction sample");
    j.at("episode_id").get_to(s.episode_id);
    j.at("observations").get_to(s.observations);
    j.at("tokens").get_to(s.tokens);
    for (auto t : s.tokens) {
        if (t >= Vocabulary::size()) throw FormatError("instruction token outside the vocabulary");
    }
}

void to_json(nlohmann::json& j, const DeviationReport& r) {
    j = nlohmann::json{{"deviation_index", r.deviation_index},
                       {"distance", r.distance},
                       {"foot", r.foot},
                       {"segment_index", r.segment_index},
                       {"per_step_distances", r.per_step_distances}};
}

void from_json(const nlohmann::json& j, DeviationReport& r) {
    j.at("deviation_index").get_to(r.deviation_index);
    j.at("distance").get_to(r.distance);
    j.at("foot").get_to(r.foot);
    j.at("segment_index").get_to(r.segment_index);
    j.at("per_step_distances").get_to(r.per_step_distances);
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
    j = nlohmann::json{{"counts",
                        {{kOracleKind, m.oracle_samples},
                         {kCorrectionKind, m.correction_samples},
                         {kPerceptionKind, m.perception_samples},
                         {kInstructionKind, m.instruction_samples}}},
                       {"seed", m.seed},
                       {"source_iteration", m.source_iteration},
                       {"extra", m.extra}};
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
    const auto& c = j.at("counts");
    c.at(kOracleKind).get_to(m.oracle_samples);
    c.at(kCorrectionKind).get_to(m.correction_samples);
    c.at(kPerceptionKind).get_to(m.perception_samples);
    c.at(kInstructionKind).get_to(m.instruction_samples);
    j.at("seed").get_to(m.seed);
    j.at("source_iteration").get_to(m.source_iteration);
    m.extra = j.value("extra", nlohmann::json::object());
}

DatasetManifest describe(const Dataset& dataset, std::uint64_t seed, int source_iteration) {
    DatasetManifest m;
    for (const auto& s : dataset.samples) {
        (s.kind == SampleKind::oracle ? m.oracle_samples : m.correction_samples)++;
    }
    m.perception_samples = dataset.perception.size();
    m.instruction_samples = dataset.instructions.size();
    m.seed = seed;
    m.source_iteration = source_iteration;
    return m;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    std::ostringstream out;
    for (const auto& s : dataset.samples) out << nlohmann::json(s).dump() << '\n';
    for (const auto& s : dataset.perception) out << nlohmann::json(s).dump() << '\n';
    for (const auto& s : dataset.instructions) out << nlohmann::json(s).dump() << '\n';
    write_text_atomic(path, out.str());
}

Dataset read_dataset(const std::filesystem::path& path) {
    Dataset d;
    for_each_line(path, [&](const nlohmann::json& j) {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == kOracleKind || kind == kCorrectionKind) {
            d.samples.push_back(j.get<TrainSample>());
        } else if (kind == kPerceptionKind) {
            d.perception.push_back(j.get<PerceptionSample>());
        } else if (kind == kInstructionKind) {
            d.instructions.push_back(j.get<InstructionSample>());
        } else {
            throw FormatError("unknown record kind '" + kind + "'");
        }
    });
    return d;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    write_json(path, nlohmann::json(manifest));
}

DatasetManifest read_manifest(const std::filesystem::path& path) { return read_json(path).get<DatasetManifest>(); }

void write_episodes(const std::filesystem::path& path, const std::vector<EpisodeSpec>& episodes) {
    std::ostringstream out;
    for (const auto& e : episodes) out << nlohmann::json(e).dump() << '\n';
    write_text_atomic(path, out.str());
}

std::vector<EpisodeSpec> read_episodes(const std::filesystem::path& path) {
    std::vector<EpisodeSpec> out;
    for_each_line(path, [&](const nlohmann::json& j) { out.push_back(j.get<EpisodeSpec>()); });
    return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
    write_text_atomic(path, value.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace navfly
