#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "navfly/world.hpp"

namespace navfly {

inline constexpr std::size_t kWindowSize = 16;
inline constexpr std::size_t kChunkSize = 4;

/// Closed token vocabulary shared by instructions, the instruction head and
/// questions. Unknown words map to the OOV slot.
class Vocabulary {
public:
    static const std::vector<std::string>& tokens();
    static std::size_t size() { return tokens().size(); }
    static std::size_t oov();
    /// Index of `token`, or the OOV index.
    static std::size_t index_of(std::string_view token);
    static bool contains(std::string_view token);
    static std::vector<std::size_t> tokenize(std::string_view text);
    /// FNV-1a over the token list; stored in checkpoints.
    static std::uint64_t hash();
    /// Vocabulary index of a landmark name / color token.
    static std::size_t name_token(int name);
    static std::size_t color_token(int color);
};

/// Lower-cases and splits on anything that is not a letter or a dash.
[[nodiscard]] std::vector<std::string> split_words(std::string_view text);

/// A landmark reference in text: optional color, then a name.
struct Mention {
    int color{-1};  // -1 when unspecified
    int name{0};

    [[nodiscard]] bool matches(int lm_name, int lm_color) const noexcept {
        return name == lm_name && (color < 0 || color == lm_color);
    }
    friend bool operator==(const Mention&, const Mention&) = default;
};

/// Parsed instruction: token multi-hot plus landmark mentions. The last
/// mention is the target; earlier ones are waypoints to pass.
struct InstructionContext {
    std::vector<std::size_t> token_ids;  // unique, sorted
    std::vector<Mention> mentions;

    [[nodiscard]] const Mention* target() const noexcept {
        return mentions.empty() ? nullptr : &mentions.back();
    }
};

[[nodiscard]] InstructionContext parse_instruction(std::string_view text);

/// Sparse view of the fixed-width feature vector.
struct FeatureVector {
    std::size_t dimension{0};
    std::vector<std::uint32_t> index;  // strictly increasing
    std::vector<double> value;

    [[nodiscard]] std::vector<double> dense() const;
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Layout of the feature blocks.
struct FeatureLayout {
    static constexpr std::size_t kPerSector =
        kLandmarkNames.size() + kLandmarkColors.size() + static_cast<std::size_t>(kDistanceBins);
    static constexpr std::size_t kPerFrame = kBearingSectors * kPerSector;
    static constexpr std::size_t kSectorDist = kBearingSectors * kDistanceBins;

    static std::size_t instruction_offset() { return 0; }
    static std::size_t window_offset() { return Vocabulary::size(); }
    static std::size_t action_offset() { return window_offset() + kWindowSize * kPerFrame; }
    static constexpr std::size_t kActionBlock = kChunkSize * kActionTypes + kChunkSize;
    static std::size_t target_offset() { return action_offset() + kActionBlock; }
    // current (sector x dist, not visible) + memory (sector x dist, 3 lag buckets, never)
    static constexpr std::size_t kTargetBlock = (kSectorDist + 1) + (kSectorDist + 3 + 1);
    static std::size_t pass_offset() { return target_offset() + kTargetBlock; }
    static constexpr std::size_t kPassBlock = kSectorDist + 1;
    static std::size_t clearance_offset() { return pass_offset() + kPassBlock; }
    static constexpr std::size_t kClearanceBlock = kBearingSectors * kClearanceBins;
    static std::size_t bias_index() { return clearance_offset() + kClearanceBlock; }
    static std::size_t dimension() { return bias_index() + 1; }
};

/// Encodes instruction, the most recent observations (the last element is
/// the current frame; at most 16 are used) and the most recent actions (at
/// most 4). `slot` counts actions taken since the current frame; target and
/// clearance features are rotated by the net turn of those actions.
[[nodiscard]] FeatureVector featurize(const InstructionContext& instruction,
                                      std::span<const Observation> observations,
                                      std::span<const Action> recent_actions, std::size_t slot = 0);

[[nodiscard]] FeatureVector featurize(std::string_view instruction, std::span<const Observation> observations,
                                      std::span<const Action> recent_actions, std::size_t slot = 0);

/// Picks 16 frames spread evenly over a whole episode (all of them when
/// there are fewer).
[[nodiscard]] std::vector<Observation> subsample_episode(std::span<const Observation> observations);

}  // namespace navfly
