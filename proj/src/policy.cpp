#include "navfly/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "navfly/rng.hpp"

namespace navfly {

std::size_t answer_classes(QaCategory category) noexcept {
    switch (category) {
        case QaCategory::position: return kBearingSectors;
        case QaCategory::color: return kLandmarkColors.size();
        case QaCategory::orientation: return kCompassNames.size();
    }
    return 0;
}

std::size_t caption_classes() noexcept { return kLandmarkNames.size() + kLandmarkColors.size(); }

namespace {

bool is_sigmoid(HeadId id) noexcept { return id == HeadId::caption || id == HeadId::instruction; }

HeadId qa_head(QaCategory c) noexcept {
    switch (c) {
        case QaCategory::position: return HeadId::position;
        case QaCategory::color: return HeadId::color;
        case QaCategory::orientation: return HeadId::orientation;
    }
    return HeadId::position;
}

std::size_t head_outputs(HeadId id) {
    switch (id) {
        case HeadId::action: return kActionTypes;
        case HeadId::caption: return caption_classes();
        case HeadId::position: return answer_classes(QaCategory::position);
        case HeadId::color: return answer_classes(QaCategory::color);
        case HeadId::orientation: return answer_classes(QaCategory::orientation);
        case HeadId::instruction: return Vocabulary::size();
    }
    return 0;
}

double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

double softplus(double z) noexcept { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

std::vector<double> softmax(std::span<const double> z) {
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        s += p[i];
    }
    for (auto& v : p) v /= s;
    return p;
}

// dLoss/dlogits for one example.
std::vector<double> logit_gradient(const Example& ex, std::span<const double> z) {
    std::vector<double> g;
    if (is_sigmoid(ex.head)) {
        g.resize(z.size());
        const double scale = 1.0 / static_cast<double>(z.size());
        for (std::size_t k = 0; k < z.size(); ++k) g[k] = (sigmoid(z[k]) - ex.targets[k]) * scale;
    } else {
        g = softmax(z);
        g[static_cast<std::size_t>(ex.label)] -= 1.0;
    }
    return g;
}

void sgd_step(PolicyModel& model, const Example& ex, double lr) {
    const std::size_t H = model.hidden();
    const std::vector<double> h = model.project(ex.features);
    const std::vector<double> z = model.logits(ex.head, ex.features);
    const std::vector<double> gz = logit_gradient(ex, z);
    Head& head = model.head_mut(ex.head);

    std::vector<double> gh(H, 0.0);
    for (std::size_t k = 0; k < head.outputs; ++k) {
        const double* row = &head.weights[k * H];
        for (std::size_t j = 0; j < H; ++j) gh[j] += row[j] * gz[k];
    }
    for (std::size_t k = 0; k < head.outputs; ++k) {
        double* row = &head.weights[k * H];
        for (std::size_t j = 0; j < H; ++j) row[j] -= lr * gz[k] * h[j];
        head.bias[k] -= lr * gz[k];
    }
    auto shared = model.shared_mut();
    for (std::size_t a = 0; a < ex.features.index.size(); ++a) {
        double* row = &shared[static_cast<std::size_t>(ex.features.index[a]) * H];
        const double xv = ex.features.value[a];
        for (std::size_t j = 0; j < H; ++j) row[j] -= lr * xv * gh[j];
    }
}

InstructionContext empty_instruction() { return InstructionContext{}; }

}  // namespace

PolicyModel PolicyModel::initialize(std::uint64_t seed, const ModelHyper& hyper) {
    if (hyper.hidden == 0) throw std::invalid_argument("hidden width must be positive");
    PolicyModel m;
    m.input_dim_ = FeatureLayout::dimension();
    m.hidden_ = hyper.hidden;
    m.shared_.resize(m.input_dim_ * m.hidden_);
    Rng rng(mix_seed(seed, 0x6d6f64656cull));
    for (auto& w : m.shared_) w = rng.normal(0.0, hyper.init_scale);
    for (int i = 0; i < kHeadCount; ++i) {
        Head& h = m.heads_[static_cast<std::size_t>(i)];
        h.outputs = head_outputs(static_cast<HeadId>(i));
        h.weights.assign(h.outputs * m.hidden_, 0.0);
        h.bias.assign(h.outputs, 0.0);
    }
    return m;
}

std::vector<double> PolicyModel::project(const FeatureVector& x) const {
    std::vector<double> h(hidden_, 0.0);
    for (std::size_t a = 0; a < x.index.size(); ++a) {
        const double* row = &shared_[static_cast<std::size_t>(x.index[a]) * hidden_];
        const double xv = x.value[a];
        for (std::size_t j = 0; j < hidden_; ++j) h[j] += xv * row[j];
    }
    return h;
}

std::vector<double> PolicyModel::logits(HeadId id, const FeatureVector& x) const {
    const Head& head = this->head(id);
    const std::vector<double> h = project(x);
    std::vector<double> z(head.outputs);
    for (std::size_t k = 0; k < head.outputs; ++k) {
        double s = head.bias[k];
        const double* row = &head.weights[k * hidden_];
        for (std::size_t j = 0; j < hidden_; ++j) s += row[j] * h[j];
        z[k] = s;
    }
    return z;
}

ActionType predict_action(const PolicyModel& model, const FeatureVector& x) {
    const auto z = model.logits(HeadId::action, x);
    // max_element returns the first maximum, which is the tie-break order.
    return static_cast<ActionType>(std::max_element(z.begin(), z.end()) - z.begin());
}

ActionChunk predict_chunk(const PolicyModel& model, const InstructionContext& instruction,
                          std::span<const Observation> window, std::span<const Action> history,
                          const ActionConfig& actions) {
    std::vector<Action> recent(history.begin(), history.end());
    ActionChunk chunk;
    for (std::size_t slot = 0; slot < kChunkSize; ++slot) {
        const auto x = featurize(instruction, window, recent, slot);
        const Action a = Action::of_type(predict_action(model, x), actions);
        chunk.push_back(a);
        if (a.type == ActionType::stop) break;
        recent.push_back(a);
    }
    return chunk;
}

std::vector<std::size_t> generate_instruction(const PolicyModel& model,
                                              std::span<const Observation> episode_observations) {
    const auto frames = subsample_episode(episode_observations);
    const auto z = model.logits(HeadId::instruction, featurize(empty_instruction(), frames, {}, 0));
    std::vector<std::size_t> tokens;
    for (std::size_t k = 0; k < z.size(); ++k) {
        if (z[k] > 0.0) tokens.push_back(k);
    }
    return tokens;
}

std::vector<int> predict_caption(const PolicyModel& model, std::span<const Observation> window) {
    const auto z = model.logits(HeadId::caption, featurize(empty_instruction(), window, {}, 0));
    std::vector<int> out;
    for (std::size_t k = 0; k < z.size(); ++k) {
        if (z[k] > 0.0) out.push_back(static_cast<int>(k));
    }
    return out;
}

int predict_answer(const PolicyModel& model, QaCategory category, std::string_view question,
                   std::span<const Observation> window) {
    const auto z = model.logits(qa_head(category), featurize(question, window, {}, 0));
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<Example> action_examples(const TrainSample& sample) {
    std::vector<Example> out;
    const InstructionContext ctx = parse_instruction(sample.instruction);
    std::vector<Action> recent(sample.history.begin(), sample.history.end());
    for (std::size_t slot = 0; slot < sample.target.size() && slot < kChunkSize; ++slot) {
        if (slot < sample.supervise.size() && sample.supervise[slot]) {
            Example ex;
            ex.head = HeadId::action;
            ex.features = featurize(ctx, sample.window, recent, slot);
            ex.label = static_cast<int>(sample.target[slot].type);
            out.push_back(std::move(ex));
        }
        recent.push_back(sample.target[slot]);
    }
    return out;
}

Example perception_example(const PerceptionSample& sample) {
    Example ex;
    if (sample.task == PerceptionTask::caption) {
        ex.head = HeadId::caption;
        ex.features = featurize(empty_instruction(), sample.window, {}, 0);
        ex.targets.assign(caption_classes(), 0.0);
        for (int t : sample.caption_tokens) ex.targets.at(static_cast<std::size_t>(t)) = 1.0;
    } else {
        ex.head = qa_head(sample.category);
        ex.features = featurize(sample.prompt, sample.window, {}, 0);
        ex.label = sample.answer;
        if (sample.answer < 0 || static_cast<std::size_t>(sample.answer) >= answer_classes(sample.category)) {
            throw std::invalid_argument("QA answer outside its category's answer set");
        }
    }
    return ex;
}

Example instruction_example(const InstructionSample& sample) {
    Example ex;
    ex.head = HeadId::instruction;
    ex.features = featurize(empty_instruction(), sample.observations, {}, 0);
    ex.targets.assign(Vocabulary::size(), 0.0);
    for (auto t : sample.tokens) ex.targets.at(t) = 1.0;
    return ex;
}

double example_loss(const PolicyModel& model, const Example& ex) {
    const auto z = model.logits(ex.head, ex.features);
    if (is_sigmoid(ex.head)) {
        double loss = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) loss += softplus(z[k]) - ex.targets[k] * z[k];
        return loss / static_cast<double>(z.size());
    }
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s) - z[static_cast<std::size_t>(ex.label)];
}

namespace {
Gradient zero_gradient(const PolicyModel& model) {
    Gradient g;
    g.shared.assign(model.shared().size(), 0.0);
    for (int i = 0; i < kHeadCount; ++i) {
        const Head& h = model.head(static_cast<HeadId>(i));
        g.heads[static_cast<std::size_t>(i)] = Head{h.outputs, std::vector<double>(h.weights.size(), 0.0),
                                                    std::vector<double>(h.bias.size(), 0.0)};
    }
    return g;
}

void accumulate_gradient(const PolicyModel& model, const Example& ex, Gradient& g) {
    const std::size_t H = model.hidden();
    const auto h = model.project(ex.features);
    const auto z = model.logits(ex.head, ex.features);
    const auto gz = logit_gradient(ex, z);
    const Head& head = model.head(ex.head);
    Head& gh_head = g.heads[static_cast<std::size_t>(ex.head)];
    std::vector<double> gh(H, 0.0);
    for (std::size_t k = 0; k < head.outputs; ++k) {
        for (std::size_t j = 0; j < H; ++j) {
            gh[j] += head.weights[k * H + j] * gz[k];
            gh_head.weights[k * H + j] += gz[k] * h[j];
        }
        gh_head.bias[k] += gz[k];
    }
    for (std::size_t a = 0; a < ex.features.index.size(); ++a) {
        const std::size_t row = static_cast<std::size_t>(ex.features.index[a]) * H;
        for (std::size_t j = 0; j < H; ++j) g.shared[row + j] += ex.features.value[a] * gh[j];
    }
}
}  // namespace

Gradient example_gradient(const PolicyModel& model, const Example& ex) {
    Gradient g = zero_gradient(model);
    accumulate_gradient(model, ex, g);
    return g;
}

Gradient sample_gradient(const PolicyModel& model, const TrainSample& sample) {
    Gradient g = zero_gradient(model);
    for (const auto& ex : action_examples(sample)) accumulate_gradient(model, ex, g);
    return g;
}

PolicyModel train(const PolicyModel& model, std::span<const TrainSample> samples,
                  std::span<const PerceptionSample> perception, std::span<const InstructionSample> instructions,
                  const TrainOptions& options) {
    if (samples.empty() && perception.empty() && instructions.empty()) {
        throw std::invalid_argument("training needs a non-empty dataset");
    }
    if (model.input_dim() != FeatureLayout::dimension()) {
        throw std::invalid_argument("model was not initialized for this feature layout");
    }
    if (options.epochs < 0 || !(options.learning_rate > 0.0)) {
        throw std::invalid_argument("epochs must be non-negative and the learning rate positive");
    }
    std::vector<Example> examples;
    for (const auto& s : samples) {
        auto ex = action_examples(s);
        std::move(ex.begin(), ex.end(), std::back_inserter(examples));
    }
    for (const auto& p : perception) examples.push_back(perception_example(p));
    for (const auto& i : instructions) examples.push_back(instruction_example(i));

    PolicyModel out = model;
    std::vector<std::size_t> order(examples.size());
    for (int e = 0; e < options.epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(mix_seed(options.seed, static_cast<std::uint64_t>(options.first_epoch + e)));
        shuffle(order, rng);
        for (auto idx : order) sgd_step(out, examples[idx], options.learning_rate);
    }
    out.set_version(model.version() + 1);
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, format version, vocabulary hash, model version, shapes,
// little-endian float64 weights, then an FNV-1a checksum of everything before.

namespace {

constexpr std::array<char, 8> kMagic = {'N', 'A', 'V', 'F', 'L', 'Y', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
public:
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::span<const char> s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
    std::string& bytes() { return bytes_; }

private:
    std::string bytes_;
};

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint is truncated");
    }
    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_{0};
};

}  // namespace

void save_model(const PolicyModel& model, const std::filesystem::path& path) {
    Writer w;
    w.raw(kMagic);
    w.u32(kFormatVersion);
    w.u64(Vocabulary::hash());
    w.u64(model.version());
    w.u64(model.input_dim());
    w.u64(model.hidden());
    for (double v : model.shared()) w.f64(v);
    for (int i = 0; i < kHeadCount; ++i) {
        const Head& h = model.head(static_cast<HeadId>(i));
        w.u64(h.outputs);
        for (double v : h.weights) w.f64(v);
        for (double v : h.bias) w.f64(v);
    }
    w.u64(hash_string(w.bytes()));
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

PolicyModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < kMagic.size() + 4 + 8 * 5) throw CheckpointError("checkpoint is truncated");
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw CheckpointError("not a checkpoint file (bad magic)");
    }
    const std::string_view body(bytes.data(), bytes.size() - 8);
    Reader tail(std::string_view(bytes).substr(bytes.size() - 8));
    if (tail.u64() != hash_string(body)) throw CheckpointError("checkpoint checksum mismatch");

    Reader r(body);
    r.raw(kMagic.size());
    if (r.u32() != kFormatVersion) throw CheckpointError("unsupported checkpoint format version");
    if (r.u64() != Vocabulary::hash()) throw CheckpointError("checkpoint vocabulary does not match");
    const std::uint64_t version = r.u64();
    const std::uint64_t input_dim = r.u64();
    const std::uint64_t hidden = r.u64();
    if (input_dim != FeatureLayout::dimension() || hidden == 0 || hidden > 4096) {
        throw CheckpointError("checkpoint shapes do not match the feature layout");
    }
    PolicyModel m = PolicyModel::initialize(0, ModelHyper{hidden, 0.0});
    m.set_version(version);
    if (r.remaining() / 8 < input_dim * hidden) throw CheckpointError("checkpoint is truncated");
    for (auto& v : m.shared_mut()) v = r.f64();
    for (int i = 0; i < kHeadCount; ++i) {
        Head& h = m.head_mut(static_cast<HeadId>(i));
        if (r.u64() != h.outputs) throw CheckpointError("checkpoint head shape mismatch");
        for (auto& v : h.weights) v = r.f64();
        for (auto& v : h.bias) v = r.f64();
    }
    if (r.remaining() != 0) throw CheckpointError("checkpoint has trailing bytes");
    return m;
}

ActionChunk ModelPolicy::act(const PolicyInput& input) {
    return predict_chunk(*model_, input.instruction, input.window, input.recent_actions, actions_);
}

ActionChunk ScriptedPolicy::act(const PolicyInput&) {
    ActionChunk chunk;
    while (chunk.size() < kChunkSize) {
        if (next_ >= script_.size()) {
            chunk.push_back(Action::stop());
            break;
        }
        chunk.push_back(script_[next_++]);
        if (chunk.back().type == ActionType::stop) break;
    }
    return chunk;
}

}  // namespace navfly
