#include "navfly/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "navfly/rng.hpp"

namespace navfly {

namespace {

constexpr std::array<std::string_view, 10> kFunctionWords = {"go",   "forward", "turn", "left", "right",
                                                             "pass", "stop",    "at",   "the",  "and"};
constexpr std::string_view kOov = "<oov>";

std::vector<std::string> build_tokens() {
    std::vector<std::string> t;
    for (auto w : kFunctionWords) t.emplace_back(w);
    for (auto w : kLandmarkNames) t.emplace_back(w);
    for (auto w : kLandmarkColors) t.emplace_back(w);
    t.emplace_back(kOov);
    return t;
}

// Block weights applied after each block is scaled to unit L2 norm.
constexpr double kInstructionWeight = 0.5;
constexpr double kWindowWeight = 1.0;
constexpr double kActionWeight = 1.0;
constexpr double kTargetWeight = 1.5;
constexpr double kPassWeight = 0.75;
constexpr double kClearanceWeight = 1.0;

using Block = std::map<std::uint32_t, double>;

void put(Block& block, std::size_t index) { block[static_cast<std::uint32_t>(index)] = 1.0; }

void append_block(const Block& block, double weight, FeatureVector& out) {
    if (block.empty()) return;
    double norm = 0.0;
    for (const auto& [i, v] : block) norm += v * v;
    const double scale = weight / std::sqrt(norm);
    for (const auto& [i, v] : block) {
        out.index.push_back(i);
        out.value.push_back(v * scale);
    }
}

std::size_t sector_dist(int sector, DistanceBin bin) {
    return static_cast<std::size_t>(sector) * kDistanceBins + static_cast<std::size_t>(bin);
}

// Sector of an observed bearing bin after the agent turned by `net_turn`.
int rotate_sector(int sector, double net_turn) {
    return bearing_bin(sector_center(sector) - net_turn);
}

}  // namespace

const std::vector<std::string>& Vocabulary::tokens() {
    static const std::vector<std::string> t = build_tokens();
    return t;
}

std::size_t Vocabulary::oov() { return tokens().size() - 1; }

std::size_t Vocabulary::index_of(std::string_view token) {
    const auto& t = tokens();
    const auto it = std::find(t.begin(), t.end(), token);
    return it == t.end() ? oov() : static_cast<std::size_t>(it - t.begin());
}

bool Vocabulary::contains(std::string_view token) { return index_of(token) != oov(); }

std::vector<std::size_t> Vocabulary::tokenize(std::string_view text) {
    std::vector<std::size_t> out;
    for (const auto& w : split_words(text)) out.push_back(index_of(w));
    return out;
}

std::uint64_t Vocabulary::hash() {
    std::string joined;
    for (const auto& t : tokens()) {
        joined += t;
        joined += '\n';
    }
    return hash_string(joined);
}

std::size_t Vocabulary::name_token(int name) { return kFunctionWords.size() + static_cast<std::size_t>(name); }

std::size_t Vocabulary::color_token(int color) {
    return kFunctionWords.size() + kLandmarkNames.size() + static_cast<std::size_t>(color);
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isalpha(uc) || c == '-' || c == '<' || c == '>') {
            cur.push_back(static_cast<char>(std::tolower(uc)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

InstructionContext parse_instruction(std::string_view text) {
    InstructionContext ctx;
    const auto words = split_words(text);
    int pending_color = -1;
    for (const auto& w : words) {
        ctx.token_ids.push_back(Vocabulary::index_of(w));
        const auto color_it = std::find(kLandmarkColors.begin(), kLandmarkColors.end(), w);
        if (color_it != kLandmarkColors.end()) {
            pending_color = static_cast<int>(color_it - kLandmarkColors.begin());
            continue;
        }
        const auto name_it = std::find(kLandmarkNames.begin(), kLandmarkNames.end(), w);
        if (name_it != kLandmarkNames.end()) {
            ctx.mentions.push_back(Mention{pending_color, static_cast<int>(name_it - kLandmarkNames.begin())});
        }
        pending_color = -1;
    }
    std::sort(ctx.token_ids.begin(), ctx.token_ids.end());
    ctx.token_ids.erase(std::unique(ctx.token_ids.begin(), ctx.token_ids.end()), ctx.token_ids.end());
    return ctx;
}

std::vector<double> FeatureVector::dense() const {
    std::vector<double> d(dimension, 0.0);
    for (std::size_t i = 0; i < index.size(); ++i) d[index[i]] = value[i];
    return d;
}

FeatureVector featurize(const InstructionContext& instruction, std::span<const Observation> observations,
                        std::span<const Action> recent_actions, std::size_t slot) {
    FeatureVector out;
    out.dimension = FeatureLayout::dimension();

    Block instr;
    for (auto t : instruction.token_ids) put(instr, FeatureLayout::instruction_offset() + t);
    append_block(instr, kInstructionWeight, out);

    const std::size_t frames = std::min(observations.size(), kWindowSize);
    const auto frame = [&](std::size_t lag) -> const Observation& {
        return observations[observations.size() - 1 - lag];
    };

    Block window;
    for (std::size_t lag = 0; lag < frames; ++lag) {
        const std::size_t base = FeatureLayout::window_offset() + lag * FeatureLayout::kPerFrame;
        for (const auto& v : frame(lag).visible) {
            const std::size_t s = base + static_cast<std::size_t>(v.bearing_bin) * FeatureLayout::kPerSector;
            put(window, s + static_cast<std::size_t>(v.name));
            put(window, s + kLandmarkNames.size() + static_cast<std::size_t>(v.color));
            put(window, s + kLandmarkNames.size() + kLandmarkColors.size() + static_cast<std::size_t>(v.distance_bin));
        }
    }
    append_block(window, kWindowWeight, out);

    Block acts;
    const std::size_t n_recent = std::min(recent_actions.size(), kChunkSize);
    for (std::size_t lag = 0; lag < n_recent; ++lag) {
        const auto& a = recent_actions[recent_actions.size() - 1 - lag];
        put(acts, FeatureLayout::action_offset() + lag * kActionTypes + static_cast<std::size_t>(a.type));
    }
    put(acts, FeatureLayout::action_offset() + kChunkSize * kActionTypes + std::min(slot, kChunkSize - 1));
    append_block(acts, kActionWeight, out);

    if (frames > 0) {
        double net_turn = 0.0;
        const std::size_t since = std::min(slot, recent_actions.size());
        for (std::size_t i = recent_actions.size() - since; i < recent_actions.size(); ++i) {
            const auto& a = recent_actions[i];
            if (a.type == ActionType::turn_left) net_turn += a.amount;
            if (a.type == ActionType::turn_right) net_turn -= a.amount;
        }

        const Mention* target = instruction.target();
        Block tgt;
        const std::size_t cur_off = FeatureLayout::target_offset();
        const std::size_t mem_off = cur_off + FeatureLayout::kSectorDist + 1;
        if (target != nullptr) {
            bool seen_now = false;
            for (const auto& v : frame(0).visible) {
                if (!target->matches(v.name, v.color)) continue;
                put(tgt, cur_off + sector_dist(rotate_sector(v.bearing_bin, net_turn), v.distance_bin));
                seen_now = true;
            }
            if (!seen_now) put(tgt, cur_off + FeatureLayout::kSectorDist);

            bool remembered = false;
            for (std::size_t lag = 1; lag < frames && !remembered; ++lag) {
                for (const auto& v : frame(lag).visible) {
                    if (!target->matches(v.name, v.color)) continue;
                    put(tgt, mem_off + sector_dist(v.bearing_bin, v.distance_bin));
                    const std::size_t bucket = lag <= 3 ? 0 : (lag <= 7 ? 1 : 2);
                    put(tgt, mem_off + FeatureLayout::kSectorDist + bucket);
                    remembered = true;
                    break;
                }
            }
            if (!remembered) put(tgt, mem_off + FeatureLayout::kSectorDist + 3);
        }
        append_block(tgt, kTargetWeight, out);

        Block pass;
        if (instruction.mentions.size() > 1) {
            bool any = false;
            for (std::size_t m = 0; m + 1 < instruction.mentions.size(); ++m) {
                for (const auto& v : frame(0).visible) {
                    if (!instruction.mentions[m].matches(v.name, v.color)) continue;
                    put(pass, FeatureLayout::pass_offset() +
                                  sector_dist(rotate_sector(v.bearing_bin, net_turn), v.distance_bin));
                    any = true;
                }
            }
            if (!any) put(pass, FeatureLayout::pass_offset() + FeatureLayout::kSectorDist);
        }
        append_block(pass, kPassWeight, out);

        Block clear;
        // Rotating by whole sectors: the sector an observed direction falls in
        // after the net turn.
        for (int s = 0; s < kBearingSectors; ++s) {
            const int rotated = rotate_sector(s, net_turn);
            put(clear, FeatureLayout::clearance_offset() + static_cast<std::size_t>(rotated) * kClearanceBins +
                           static_cast<std::size_t>(frame(0).clearance[static_cast<std::size_t>(s)]));
        }
        append_block(clear, kClearanceWeight, out);
    }

    out.index.push_back(static_cast<std::uint32_t>(FeatureLayout::bias_index()));
    out.value.push_back(1.0);
    return out;
}

FeatureVector featurize(std::string_view instruction, std::span<const Observation> observations,
                        std::span<const Action> recent_actions, std::size_t slot) {
    return featurize(parse_instruction(instruction), observations, recent_actions, slot);
}

std::vector<Observation> subsample_episode(std::span<const Observation> observations) {
    if (observations.size() <= kWindowSize) return {observations.begin(), observations.end()};
    std::vector<Observation> out;
    out.reserve(kWindowSize);
    const double stride = static_cast<double>(observations.size() - 1) / static_cast<double>(kWindowSize - 1);
    for (std::size_t i = 0; i < kWindowSize; ++i) {
        out.push_back(observations[static_cast<std::size_t>(std::lround(stride * static_cast<double>(i)))]);
    }
    return out;
}

}  // namespace navfly
