#include "navfly/annotator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include <spdlog/spdlog.h>

#include "httplib.h"

namespace navfly {

namespace {

std::string label_of(const VisibleLandmark& v) {
    return std::string(kLandmarkColors.at(static_cast<std::size_t>(v.color))) + " " +
           std::string(kLandmarkNames.at(static_cast<std::size_t>(v.name)));
}

template <std::size_t N>
int index_in(const std::array<std::string_view, N>& names, std::string_view word) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == word) return static_cast<int>(i);
    }
    return -1;
}

std::string trimmed_lower(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    const auto first = out.find_first_not_of(" \t\r\n.?!");
    if (first == std::string::npos) return {};
    const auto last = out.find_last_not_of(" \t\r\n.?!");
    return out.substr(first, last - first + 1);
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

int compass_of(double heading) {
    const double step = std::numbers::pi / 4.0;
    return static_cast<int>(std::lround(wrap_two_pi(heading) / step)) % 8;
}

std::optional<int> env_int(const char* name) {
    const char* raw = std::getenv(name);
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    try {
        std::size_t used = 0;
        const int v = std::stoi(raw, &used);
        if (used != std::string_view(raw).size() || v < 0) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(std::string(name) + " must be a non-negative integer, got '" + raw + "'");
    }
}

}  // namespace

Annotation StubAnnotator::annotate(const Keyframe& keyframe, PromptKind kind) {
    std::vector<VisibleLandmark> visible = keyframe.observation.visible;
    std::stable_sort(visible.begin(), visible.end(), [](const VisibleLandmark& a, const VisibleLandmark& b) {
        if (a.distance_bin != b.distance_bin) return a.distance_bin < b.distance_bin;
        return a.landmark_id < b.landmark_id;
    });

    Annotation out;
    if (kind == PromptKind::caption) {
        if (visible.empty()) {
            out.caption = "no landmarks visible";
            return out;
        }
        out.caption = "i see";
        for (std::size_t i = 0; i < visible.size(); ++i) {
            out.caption += (i == 0 ? " the " : ", the ") + label_of(visible[i]) + " " +
                           std::string(kSectorNames.at(static_cast<std::size_t>(visible[i].bearing_bin)));
        }
        return out;
    }

    const QaPair facing{"which way is the robot facing?",
                        std::string(kCompassNames.at(static_cast<std::size_t>(compass_of(keyframe.heading))))};
    const auto where = [](const VisibleLandmark& v) {
        return QaPair{"where is the " + label_of(v) + "?",
                      std::string(kSectorNames.at(static_cast<std::size_t>(v.bearing_bin)))};
    };
    const auto name_unique = [&](int name) {
        return std::count_if(visible.begin(), visible.end(), [&](const auto& v) { return v.name == name; }) == 1;
    };
    const auto color = [](const VisibleLandmark& v) {
        return QaPair{"what color is the " + std::string(kLandmarkNames.at(static_cast<std::size_t>(v.name))) + "?",
                      std::string(kLandmarkColors.at(static_cast<std::size_t>(v.color)))};
    };

    // One question per category first, then further landmarks.
    std::vector<QaPair> pool;
    std::vector<bool> color_asked(visible.size(), false);
    if (!visible.empty()) {
        pool.push_back(where(visible.front()));
        for (std::size_t i = 0; i < visible.size(); ++i) {
            if (name_unique(visible[i].name)) {
                pool.push_back(color(visible[i]));
                color_asked[i] = true;
                break;
            }
        }
    }
    pool.push_back(facing);
    for (std::size_t i = 1; i < visible.size(); ++i) {
        pool.push_back(where(visible[i]));
        if (!color_asked[i] && name_unique(visible[i].name)) pool.push_back(color(visible[i]));
    }
    if (pool.size() > qa_per_keyframe_) pool.resize(qa_per_keyframe_);
    out.qa = std::move(pool);
    return out;
}

std::optional<HttpAnnotatorConfig> annotator_config_from_env() {
    const char* url = std::getenv("NAVFLY_ANNOTATOR_URL");
    if (url == nullptr || *url == '\0') return std::nullopt;
    HttpAnnotatorConfig cfg;
    cfg.url = url;
    if (const char* token = std::getenv("NAVFLY_ANNOTATOR_TOKEN")) cfg.token = token;
    if (auto v = env_int("NAVFLY_ANNOTATOR_TIMEOUT_MS")) cfg.timeout_ms = *v;
    if (auto v = env_int("NAVFLY_ANNOTATOR_RETRIES")) cfg.retries = *v;
    return cfg;
}

HttpAnnotator::HttpAnnotator(HttpAnnotatorConfig config) : config_(std::move(config)) {
    const auto scheme = config_.url.find("://");
    if (scheme == std::string::npos || config_.url.substr(0, scheme) != "http") {
        throw std::invalid_argument("annotator url must start with http://, got '" + config_.url + "'");
    }
    const auto slash = config_.url.find('/', scheme + 3);
    origin_ = config_.url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : config_.url.substr(slash);
    if (config_.timeout_ms <= 0) throw std::invalid_argument("annotator timeout must be positive");
    if (config_.retries < 0) throw std::invalid_argument("annotator retries must be non-negative");
}

Annotation HttpAnnotator::annotate(const Keyframe& keyframe, PromptKind kind) {
    const std::string body = annotation_request(keyframe, kind).dump();
    httplib::Client client(origin_);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
        } else if (res->status < 200 || res->status >= 300) {
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            try {
                return parse_annotation_response(nlohmann::json::parse(res->body), kind);
            } catch (const std::exception& e) {
                last_error = std::string("bad response: ") + e.what();
            }
        }
        spdlog::debug("annotator attempt {} failed: {}", attempt + 1, last_error);
    }
    throw AnnotatorError("annotator at " + config_.url + " failed after " + std::to_string(config_.retries + 1) +
                         " attempts: " + last_error);
}

nlohmann::json annotation_request(const Keyframe& keyframe, PromptKind kind) {
    return nlohmann::json{{"observation", keyframe.observation},
                          {"heading", keyframe.heading},
                          {"prompt_kind", kind == PromptKind::caption ? "caption" : "qa"}};
}

Annotation parse_annotation_response(const nlohmann::json& body, PromptKind kind) {
    Annotation out;
    if (!body.is_object()) throw AnnotatorError("annotator response is not a JSON object");
    if (kind == PromptKind::caption) {
        if (!body.contains("caption") || !body["caption"].is_string()) {
            throw AnnotatorError("annotator response lacks a string 'caption'");
        }
        out.caption = body["caption"].get<std::string>();
        return out;
    }
    if (!body.contains("qa_list") || !body["qa_list"].is_array()) {
        throw AnnotatorError("annotator response lacks a 'qa_list' array");
    }
    for (const auto& item : body["qa_list"]) {
        if (!item.is_object() || !item.contains("question") || !item.contains("answer") ||
            !item["question"].is_string() || !item["answer"].is_string()) {
            throw AnnotatorError("qa_list entries need string 'question' and 'answer'");
        }
        out.qa.push_back({item["question"].get<std::string>(), item["answer"].get<std::string>()});
    }
    return out;
}

std::vector<int> caption_tokens(std::string_view caption) {
    std::vector<int> out;
    for (const auto& word : split_words(caption)) {
        if (int n = index_in(kLandmarkNames, word); n >= 0) out.push_back(n);
        if (int c = index_in(kLandmarkColors, word); c >= 0) out.push_back(static_cast<int>(kLandmarkNames.size()) + c);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::optional<ParsedQa> parse_qa(const QaPair& qa) {
    const std::string q = trimmed_lower(qa.question);
    const std::string a = trimmed_lower(qa.answer);
    int answer = -1;
    QaCategory category{};
    if (starts_with(q, "where is")) {
        category = QaCategory::position;
        answer = index_in(kSectorNames, a);
    } else if (starts_with(q, "what color")) {
        category = QaCategory::color;
        answer = index_in(kLandmarkColors, a);
    } else if (starts_with(q, "which way")) {
        category = QaCategory::orientation;
        answer = index_in(kCompassNames, a);
    }
    if (answer < 0) return std::nullopt;
    return ParsedQa{category, answer};
}

}  // namespace navfly
