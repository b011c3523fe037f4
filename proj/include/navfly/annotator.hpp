#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "navfly/datagen.hpp"

namespace navfly {

enum class PromptKind { caption, qa };

struct QaPair {
    std::string question;
    std::string answer;
    friend bool operator==(const QaPair&, const QaPair&) = default;
};

struct Annotation {
    std::string caption;
    std::vector<QaPair> qa;
};

class AnnotatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Produces keyframe captions and question/answer pairs.
class Annotator {
public:
    virtual ~Annotator() = default;
    virtual Annotation annotate(const Keyframe& keyframe, PromptKind kind) = 0;
};

/// Reads the answers straight off the noise-free keyframe observation.
class StubAnnotator final : public Annotator {
public:
    explicit StubAnnotator(std::size_t qa_per_keyframe = 3) : qa_per_keyframe_(qa_per_keyframe) {}
    Annotation annotate(const Keyframe& keyframe, PromptKind kind) override;

private:
    std::size_t qa_per_keyframe_;
};

struct HttpAnnotatorConfig {
    std::string url;    // e.g. http://127.0.0.1:8080/annotate
    std::string token;  // sent as a bearer token when non-empty
    int timeout_ms{5000};
    int retries{2};
};

/// Reads NAVFLY_ANNOTATOR_URL, NAVFLY_ANNOTATOR_TOKEN,
/// NAVFLY_ANNOTATOR_TIMEOUT_MS and NAVFLY_ANNOTATOR_RETRIES. Returns nullopt
/// when no URL is set.
[[nodiscard]] std::optional<HttpAnnotatorConfig> annotator_config_from_env();

/// POSTs {observation, heading, prompt_kind} and expects {caption} or
/// {qa_list: [{question, answer}]}. Throws AnnotatorError once every retry
/// has failed.
class HttpAnnotator final : public Annotator {
public:
    explicit HttpAnnotator(HttpAnnotatorConfig config);
    Annotation annotate(const Keyframe& keyframe, PromptKind kind) override;

private:
    HttpAnnotatorConfig config_;
    std::string origin_;
    std::string path_;
};

[[nodiscard]] nlohmann::json annotation_request(const Keyframe& keyframe, PromptKind kind);
[[nodiscard]] Annotation parse_annotation_response(const nlohmann::json& body, PromptKind kind);

inline constexpr const char* kCaptionPrompt = "describe the potential navigation landmarks";

/// Landmark names and colors mentioned in a caption, as caption-token indices.
[[nodiscard]] std::vector<int> caption_tokens(std::string_view caption);

struct ParsedQa {
    QaCategory category;
    int answer;
};
/// Maps an annotator QA pair onto a category and answer class, or nullopt
/// when either side is outside the closed answer sets.
[[nodiscard]] std::optional<ParsedQa> parse_qa(const QaPair& qa);

}  // namespace navfly
