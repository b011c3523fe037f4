#include "navfly/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

#include "toml.hpp"

namespace navfly {

namespace {

// Reads one section, rejecting keys that no reader asked for.
class Section {
public:
    Section(const toml::table* table, std::string name, const std::string& source)
        : table_(table), name_(std::move(name)), source_(source) {}

    template <typename T>
    void integer(std::string_view key, T& out, long long min = 0) {
        const toml::node* n = find(key);
        if (n == nullptr) return;
        const auto v = n->as_integer();
        if (v == nullptr) fail(key, "expected an integer");
        const long long value = v->get();
        if (value < min) fail(key, "must be at least " + std::to_string(min));
        if (static_cast<unsigned long long>(value) > static_cast<unsigned long long>(std::numeric_limits<T>::max())) {
            fail(key, "out of range");
        }
        out = static_cast<T>(value);
    }

    void number(std::string_view key, double& out) {
        const toml::node* n = find(key);
        if (n == nullptr) return;
        if (const auto f = n->as_floating_point()) {
            out = f->get();
        } else if (const auto i = n->as_integer()) {
            out = static_cast<double>(i->get());
        } else {
            fail(key, "expected a number");
        }
        if (std::isnan(out)) fail(key, "must not be nan");
    }

    void boolean(std::string_view key, bool& out) {
        const toml::node* n = find(key);
        if (n == nullptr) return;
        const auto b = n->as_boolean();
        if (b == nullptr) fail(key, "expected true or false");
        out = b->get();
    }

    void string(std::string_view key, std::string& out) {
        const toml::node* n = find(key);
        if (n == nullptr) return;
        const auto s = n->as_string();
        if (s == nullptr) fail(key, "expected a string");
        out = s->get();
    }

    // Keys that are neither read nor listed as sub-tables are errors.
    void finish(std::initializer_list<std::string_view> tables = {}) const {
        if (table_ == nullptr) return;
        for (auto&& [key, node] : *table_) {
            const std::string_view k = key.str();
            bool known = std::find(seen_.begin(), seen_.end(), k) != seen_.end();
            for (auto t : tables) {
                if (k != t) continue;
                if (!node.is_table()) throw ConfigError(source_ + ": '" + qualified(k) + "' must be a table");
                known = true;
            }
            if (!known) throw ConfigError(source_ + ": unknown key '" + qualified(k) + "'");
        }
    }

private:
    const toml::node* find(std::string_view key) {
        seen_.emplace_back(key);
        return table_ == nullptr ? nullptr : table_->get(key);
    }

    std::string qualified(std::string_view key) const {
        return name_.empty() ? std::string(key) : name_ + "." + std::string(key);
    }

    [[noreturn]] void fail(std::string_view key, const std::string& what) const {
        throw ConfigError(source_ + ": " + qualified(key) + ": " + what);
    }

    const toml::table* table_;
    std::string name_;
    const std::string& source_;
    std::vector<std::string> seen_;
};

const toml::table* subtable(const toml::table& root, std::string_view name, const std::string& source) {
    const toml::node* n = root.get(name);
    if (n == nullptr) return nullptr;
    if (!n->is_table()) throw ConfigError(source + ": '" + std::string(name) + "' must be a table");
    return n->as_table();
}

std::int64_t as_toml_int(std::uint64_t v) {
    if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        throw ConfigError("value " + std::to_string(v) + " does not fit a TOML integer");
    }
    return static_cast<std::int64_t>(v);
}

}  // namespace

RunConfig::RunConfig() {
    flywheel.training.epochs = 10;
    flywheel.training.learning_rate = 0.01;
}

void RunConfig::resolve() {
    if (seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        throw ConfigError("seed must fit a signed 64-bit integer");
    }
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
    benchmark.seed = seed;
    noise.seed = seed;
    train.seed = seed;
    train.first_epoch = 0;
    flywheel.seed = seed;
    flywheel.jobs = jobs;
    flywheel.randomization = noise;
    flywheel.training.seed = seed;
    flywheel.training.first_epoch = 0;
    benchmark.episodes.actions = flywheel.rollout.actions;
    try {
        noise.validate();
        flywheel.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (train.epochs < 1) throw ConfigError("train.epochs must be at least 1");
    if (!(train.learning_rate > 0)) throw ConfigError("train.learning_rate must be positive");
    if (hyper.hidden == 0) throw ConfigError("model.hidden must be at least 1");
    if (benchmark.world.size < 4) throw ConfigError("world.size must be at least 4");
    if (!(benchmark.world.cell_size > 0)) throw ConfigError("world.cell_size must be positive");
    if (benchmark.world.obstacle_density < 0 || benchmark.world.obstacle_density >= 1) {
        throw ConfigError("world.obstacle_density must be in [0, 1)");
    }
    if (benchmark.world.landmark_count < 1) throw ConfigError("world.landmarks must be at least 1");
    if (benchmark.train_worlds == 0 || benchmark.validation_worlds == 0) {
        throw ConfigError("benchmark needs at least one world per split");
    }
    if (benchmark.train_episodes == 0 || benchmark.validation_episodes == 0) {
        throw ConfigError("benchmark needs at least one episode per split");
    }
    if (benchmark.episodes.min_path_length > benchmark.episodes.max_path_length) {
        throw ConfigError("benchmark.min_path_length exceeds max_path_length");
    }
}

EvalOptions RunConfig::eval_options() const { return EvalOptions{noise, flywheel.rollout, jobs}; }

RunConfig parse_run_config(std::string_view toml_text, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(toml_text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
            << e.description();
        throw ConfigError(msg.str());
    }

    RunConfig c;
    Section top(&root, "", source);
    top.integer("seed", c.seed);
    top.integer("jobs", c.jobs, 1);
    top.finish({"world", "benchmark", "noise", "model", "train", "rollout", "flywheel", "paths"});

    Section world(subtable(root, "world", source), "world", source);
    world.integer("size", c.benchmark.world.size, 4);
    world.number("cell_size", c.benchmark.world.cell_size);
    world.number("obstacle_density", c.benchmark.world.obstacle_density);
    world.integer("landmarks", c.benchmark.world.landmark_count, 1);
    world.finish();

    Section bench(subtable(root, "benchmark", source), "benchmark", source);
    bench.integer("train_worlds", c.benchmark.train_worlds, 1);
    bench.integer("validation_worlds", c.benchmark.validation_worlds, 1);
    bench.integer("train_episodes", c.benchmark.train_episodes, 1);
    bench.integer("validation_episodes", c.benchmark.validation_episodes, 1);
    bench.number("min_path_length", c.benchmark.episodes.min_path_length);
    bench.number("max_path_length", c.benchmark.episodes.max_path_length);
    bench.finish();

    Section noise(subtable(root, "noise", source), "noise", source);
    noise.number("visibility_range", c.noise.visibility_range);
    noise.number("bearing_jitter", c.noise.bearing_jitter);
    noise.number("landmark_dropout", c.noise.landmark_dropout);
    noise.number("distance_bin_noise", c.noise.distance_bin_noise);
    noise.finish();

    Section model(subtable(root, "model", source), "model", source);
    model.integer("hidden", c.hyper.hidden, 1);
    model.number("init_scale", c.hyper.init_scale);
    model.finish();

    Section train(subtable(root, "train", source), "train", source);
    train.integer("epochs", c.train.epochs, 1);
    train.number("learning_rate", c.train.learning_rate);
    train.finish();

    Section roll(subtable(root, "rollout", source), "rollout", source);
    roll.integer("max_steps", c.flywheel.rollout.max_steps, 1);
    roll.finish();

    auto& f = c.flywheel;
    Section fly(subtable(root, "flywheel", source), "flywheel", source);
    fly.integer("iterations", f.iterations, 1);
    fly.number("threshold_s", f.threshold);
    fly.number("spacing", f.spacing);
    fly.boolean("stop_on_drop", f.stop_on_drop);
    fly.integer("epochs", f.training.epochs, 1);
    fly.number("learning_rate", f.training.learning_rate);
    fly.integer("keyframe_offset", f.keyframe_offset, 1);
    fly.integer("qa_per_keyframe", f.perception.qa_per_keyframe);
    fly.boolean("include_correction_samples", f.mix.include_correction_samples);
    fly.boolean("include_perception", f.mix.include_perception);
    fly.boolean("sample_half", f.mix.sample_half);
    fly.boolean("oracle_remix", f.mix.oracle_remix);
    fly.boolean("failed_only", f.failed_only);
    fly.finish();

    Section paths(subtable(root, "paths", source), "paths", source);
    paths.string("data", c.data_dir);
    paths.string("model", c.model_path);
    paths.finish();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), path.string());
}

std::string to_toml(const RunConfig& c) {
    const auto& b = c.benchmark;
    const auto& f = c.flywheel;
    const auto count = [](std::size_t v) { return as_toml_int(v); };
    toml::table root{
        {"seed", as_toml_int(c.seed)},
        {"jobs", count(c.jobs)},
        {"world", toml::table{{"size", b.world.size},
                              {"cell_size", b.world.cell_size},
                              {"obstacle_density", b.world.obstacle_density},
                              {"landmarks", b.world.landmark_count}}},
        {"benchmark", toml::table{{"train_worlds", count(b.train_worlds)},
                                  {"validation_worlds", count(b.validation_worlds)},
                                  {"train_episodes", count(b.train_episodes)},
                                  {"validation_episodes", count(b.validation_episodes)},
                                  {"min_path_length", b.episodes.min_path_length},
                                  {"max_path_length", b.episodes.max_path_length}}},
        {"noise", toml::table{{"visibility_range", c.noise.visibility_range},
                              {"bearing_jitter", c.noise.bearing_jitter},
                              {"landmark_dropout", c.noise.landmark_dropout},
                              {"distance_bin_noise", c.noise.distance_bin_noise}}},
        {"model", toml::table{{"hidden", count(c.hyper.hidden)}, {"init_scale", c.hyper.init_scale}}},
        {"train", toml::table{{"epochs", c.train.epochs}, {"learning_rate", c.train.learning_rate}}},
        {"rollout", toml::table{{"max_steps", f.rollout.max_steps}}},
        {"flywheel", toml::table{{"iterations", f.iterations},
                                 {"threshold_s", f.threshold},
                                 {"spacing", f.spacing},
                                 {"stop_on_drop", f.stop_on_drop},
                                 {"epochs", f.training.epochs},
                                 {"learning_rate", f.training.learning_rate},
                                 {"keyframe_offset", count(f.keyframe_offset)},
                                 {"qa_per_keyframe", count(f.perception.qa_per_keyframe)},
                                 {"include_correction_samples", f.mix.include_correction_samples},
                                 {"include_perception", f.mix.include_perception},
                                 {"sample_half", f.mix.sample_half},
                                 {"oracle_remix", f.mix.oracle_remix},
                                 {"failed_only", f.failed_only}}},
        {"paths", toml::table{{"data", c.data_dir}, {"model", c.model_path}}},
    };
    std::ostringstream out;
    out << root << '\n';
    return out.str();
}

}  // namespace navfly
