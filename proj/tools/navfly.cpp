#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "navfly/annotator.hpp"
#include "navfly/config.hpp"
#include "navfly/dataset_io.hpp"
#include "navfly/flywheel.hpp"
#include "navfly/report.hpp"

namespace fs = std::filesystem;
using namespace navfly;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Bad flags, bad config or missing inputs; raised before anything is written.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::string config;
    std::uint64_t seed{0};
    std::size_t jobs{1};
    double threshold{0};
    double spacing{0};
    int iterations{0};
    std::string out_dir;
    bool json_errors{false};
    std::string log_level{"info"};

    CLI::Option* seed_opt{nullptr};
    CLI::Option* jobs_opt{nullptr};
    CLI::Option* threshold_opt{nullptr};
    CLI::Option* spacing_opt{nullptr};
    CLI::Option* iterations_opt{nullptr};
};

struct Inputs {
    std::string data;
    std::string model;
    std::string run;
    std::string policy;
    std::string split{"validation"};
    std::string dataset;
    std::string init;
    std::size_t index{0};
};

int report_error(bool json, int code, std::string_view kind, const std::string& message) {
    if (json) {
        nlohmann::json j{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}};
        std::cerr << j.dump() << '\n';
    } else {
        std::cerr << "navfly: " << kind << " error: " << message << '\n';
    }
    return code;
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

void require_file(const fs::path& path, std::string_view what) {
    if (!fs::is_regular_file(path)) throw UsageError("missing " + std::string(what) + ": " + path.string());
}

void require_dir(const fs::path& path, std::string_view what) {
    if (!fs::is_directory(path)) throw UsageError("missing " + std::string(what) + ": " + path.string());
}

fs::path require_out_dir(const Globals& g) {
    if (g.out_dir.empty()) throw UsageError("--out-dir is required");
    const fs::path out(g.out_dir);
    if (fs::exists(out) && !fs::is_directory(out)) throw UsageError("--out-dir is not a directory: " + g.out_dir);
    return out;
}

// `fallback` is read when --config is absent, e.g. a run's echoed config.
RunConfig resolve_config(const Globals& g, const fs::path& fallback = {}) {
    RunConfig c;
    if (!g.config.empty()) {
        require_file(g.config, "config file");
        c = load_run_config(g.config);
    } else if (!fallback.empty() && fs::is_regular_file(fallback)) {
        c = load_run_config(fallback);
    }
    if (g.seed_opt->count() > 0) c.seed = g.seed;
    if (g.jobs_opt->count() > 0) c.jobs = g.jobs;
    if (g.threshold_opt->count() > 0) c.flywheel.threshold = g.threshold;
    if (g.spacing_opt->count() > 0) c.flywheel.spacing = g.spacing;
    if (g.iterations_opt->count() > 0) c.flywheel.iterations = g.iterations;
    c.resolve();
    return c;
}

void check_benchmark_dir(const fs::path& dir) {
    require_dir(dir, "data directory");
    require_file(dir / "worlds.json", "world file");
    require_file(dir / "train.jsonl", "train episode file");
    require_file(dir / "validation.jsonl", "validation episode file");
}

// Loads `data` when given, otherwise regenerates the benchmark from config.
Benchmark obtain_benchmark(RunConfig& cfg, const std::string& data) {
    if (!data.empty()) cfg.data_dir = absolute(data);
    if (cfg.data_dir.empty()) {
        spdlog::info("generating benchmark (seed {})", cfg.seed);
        return make_benchmark(cfg.benchmark);
    }
    check_benchmark_dir(cfg.data_dir);
    return load_benchmark(cfg.data_dir);
}

void echo_config(const fs::path& out, const RunConfig& cfg) { write_text_atomic(out / "config.toml", to_toml(cfg)); }

std::unique_ptr<Annotator> make_annotator() {
    if (auto http = annotator_config_from_env()) {
        spdlog::info("using remote annotator at {}", http->url);
        return std::make_unique<HttpAnnotator>(*http);
    }
    return std::make_unique<StubAnnotator>();
}

FlywheelRunRecord read_run(const fs::path& run_dir) {
    require_dir(run_dir, "run directory");
    require_file(run_dir / "run.json", "run record");
    return read_json(run_dir / "run.json").get<FlywheelRunRecord>();
}

fs::path best_checkpoint(const fs::path& run_dir, const FlywheelRunRecord& run) {
    const int best = run.best_iteration;
    if (best < 0 || best > static_cast<int>(run.iterations.size())) {
        throw FormatError("run record names iteration " + std::to_string(best) + " as best");
    }
    const std::string rel =
        best == 0 ? "iter_0/model.ckpt" : run.iterations[static_cast<std::size_t>(best - 1)].checkpoint;
    if (rel.empty()) throw FormatError("run record has no checkpoint for iteration " + std::to_string(best));
    return run_dir / rel;
}

int cmd_world(const Globals& g, const Inputs& in) {
    RunConfig cfg = resolve_config(g);
    const fs::path out = require_out_dir(g);
    const std::uint64_t world_seed = mix_seed(mix_seed(cfg.seed, 1), in.index);
    const WorldSpec world = generate_world(world_seed, cfg.benchmark.world);
    fs::create_directories(out);
    write_json(out / "world.json", nlohmann::json(world));
    echo_config(out, cfg);
    std::cout << "world " << world.id << ": " << world.grid.width << "x" << world.grid.height << " cells, "
              << world.landmarks.size() << " landmarks -> " << (out / "world.json").string() << '\n';
    return kExitOk;
}

int cmd_data(const Globals& g, const Inputs&) {
    RunConfig cfg = resolve_config(g);
    const fs::path out = require_out_dir(g);
    const Benchmark bench = make_benchmark(cfg.benchmark);
    const Dataset dataset = flatten(build_oracle_pool(bench, cfg.noise, cfg.jobs));
    DatasetManifest manifest = describe(dataset, cfg.seed, 0);
    manifest.extra = {{"worlds", bench.worlds.size()},
                      {"train_episodes", bench.train.size()},
                      {"validation_episodes", bench.validation.size()}};
    fs::create_directories(out);
    save_benchmark(out, bench);
    write_dataset(out / "dataset.jsonl", dataset);
    write_manifest(out / "manifest.json", manifest);
    echo_config(out, cfg);
    std::cout << bench.worlds.size() << " worlds, " << bench.train.size() << " train / " << bench.validation.size()
              << " validation episodes, " << dataset.samples.size() << " action samples -> " << out.string() << '\n';
    return kExitOk;
}

int cmd_train(const Globals& g, const Inputs& in) {
    RunConfig cfg = resolve_config(g);
    const fs::path out = require_out_dir(g);
    if (!in.dataset.empty()) require_file(in.dataset, "dataset file");
    if (!in.init.empty()) require_file(in.init, "initial checkpoint");

    Dataset dataset;
    std::string source;
    if (!in.dataset.empty()) {
        dataset = read_dataset(in.dataset);
        source = absolute(in.dataset);
    } else {
        const std::string data = in.data.empty() ? cfg.data_dir : in.data;
        if (!data.empty() && fs::is_regular_file(fs::path(data) / "dataset.jsonl")) {
            check_benchmark_dir(data);
            cfg.data_dir = absolute(data);
            dataset = read_dataset(fs::path(data) / "dataset.jsonl");
            source = (fs::path(cfg.data_dir) / "dataset.jsonl").string();
        } else {
            const Benchmark bench = obtain_benchmark(cfg, data);
            dataset = flatten(build_oracle_pool(bench, cfg.noise, cfg.jobs));
            source = cfg.data_dir.empty() ? "generated" : cfg.data_dir;
        }
    }
    if (dataset.samples.empty()) throw UsageError("dataset has no action samples");

    const PolicyModel start = in.init.empty() ? PolicyModel::initialize(cfg.train.seed, cfg.hyper) : load_model(in.init);
    const auto t0 = std::chrono::steady_clock::now();
    const PolicyModel model = train(start, dataset.samples, dataset.perception, dataset.instructions, cfg.train);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(out);
    save_model(model, out / "model.ckpt");
    write_json(out / "train.json", {{"dataset", source},
                                    {"init", absolute(in.init)},
                                    {"action_samples", dataset.samples.size()},
                                    {"perception_samples", dataset.perception.size()},
                                    {"instruction_samples", dataset.instructions.size()},
                                    {"epochs", cfg.train.epochs},
                                    {"learning_rate", cfg.train.learning_rate},
                                    {"version", model.version()},
                                    {"seconds", seconds}});
    echo_config(out, cfg);
    std::cout << "trained on " << dataset.samples.size() << " action samples in " << seconds << " s -> "
              << (out / "model.ckpt").string() << '\n';
    return kExitOk;
}

int cmd_eval(const Globals& g, const Inputs& in) {
    RunConfig cfg = resolve_config(g, in.run.empty() ? fs::path() : fs::path(in.run) / "config.toml");
    const fs::path out = require_out_dir(g);
    const int sources = !in.model.empty() + !in.run.empty() + !in.policy.empty();
    if (sources > 1) throw UsageError("give only one of --model, --run and --policy");
    if (in.split != "train" && in.split != "validation" && in.split != "both") {
        throw UsageError("--split must be train, validation or both");
    }

    std::string model_path = in.model;
    std::string data = in.data;
    std::string label;
    if (!in.run.empty()) {
        const FlywheelRunRecord run = read_run(in.run);
        model_path = best_checkpoint(in.run, run).string();
        if (data.empty()) data = (fs::path(in.run) / "benchmark").string();
        label = "run:" + std::to_string(run.best_iteration);
    }
    if (sources == 0 && !cfg.model_path.empty()) model_path = cfg.model_path;
    if (model_path.empty() && in.policy.empty()) throw UsageError("eval needs --model, --run or --policy");
    if (!in.policy.empty() && in.policy != "scripted" && in.policy != "stop") {
        throw UsageError("--policy must be scripted or stop");
    }
    if (!model_path.empty()) require_file(model_path, "checkpoint");
    Benchmark bench = obtain_benchmark(cfg, data);

    PolicyFactory factory;
    if (in.policy == "scripted") {
        label = "scripted";
        factory = [](const EpisodeSpec& ep) -> std::unique_ptr<Policy> {
            return std::make_unique<ScriptedPolicy>(ep.oracle_actions);
        };
    } else if (in.policy == "stop") {
        label = "stop";
        factory = [](const EpisodeSpec&) -> std::unique_ptr<Policy> { return std::make_unique<StopPolicy>(); };
    } else {
        cfg.model_path = absolute(model_path);
        if (label.empty()) label = "model";
        auto model = std::make_shared<const PolicyModel>(load_model(model_path));
        const ActionConfig actions = cfg.flywheel.rollout.actions;
        factory = [model, actions](const EpisodeSpec&) -> std::unique_ptr<Policy> {
            return std::make_unique<ModelPolicy>(model, actions);
        };
    }

    std::vector<std::pair<std::string, const std::vector<EpisodeSpec>*>> splits;
    if (in.split != "validation") splits.emplace_back("train", &bench.train);
    if (in.split != "train") splits.emplace_back("validation", &bench.validation);

    std::ostringstream csv;
    csv << "split,policy,episodes," << kSummaryCsvHeader << '\n';
    nlohmann::json report{{"policy", label}, {"splits", nlohmann::json::object()}};
    for (const auto& [name, episodes] : splits) {
        const SplitEvaluation eval = evaluate_split(factory, *episodes, bench, cfg.eval_options());
        csv << name << ',' << label << ',' << eval.summary.episodes << ',' << summary_csv_row(eval.summary) << '\n';
        nlohmann::json eps = nlohmann::json::array();
        for (const auto& e : eval.episodes) {
            nlohmann::json row{{"id", e.episode_id},
                               {"metrics", e.rollout.metrics},
                               {"steps", e.rollout.actions.size()},
                               {"stopped", e.rollout.stopped},
                               {"collisions", e.rollout.collisions}};
            if (e.rollout.failure) row["failure"] = *e.rollout.failure;
            eps.push_back(std::move(row));
        }
        report["splits"][name] = {{"summary", eval.summary}, {"failures", eval.failures}, {"episodes", eps}};
    }

    fs::create_directories(out);
    write_text_atomic(out / "eval.csv", csv.str());
    write_json(out / "eval.json", report);
    echo_config(out, cfg);
    std::cout << csv.str();
    return kExitOk;
}

int cmd_flywheel(const Globals& g, const Inputs& in) {
    RunConfig cfg = resolve_config(g);
    const fs::path out = require_out_dir(g);
    const std::string model_path = in.model.empty() ? cfg.model_path : in.model;
    if (!model_path.empty()) require_file(model_path, "base checkpoint");
    const Benchmark bench = obtain_benchmark(cfg, in.data);
    auto annotator = make_annotator();

    PolicyModel base;
    if (!model_path.empty()) {
        cfg.model_path = absolute(model_path);
        base = load_model(model_path);
    } else {
        spdlog::info("training base model: {} epochs at lr {}", cfg.train.epochs, cfg.train.learning_rate);
        base = train_base(bench, cfg.noise, cfg.train, cfg.hyper, cfg.jobs);
    }

    fs::create_directories(out);
    echo_config(out, cfg);
    save_benchmark(out / "benchmark", bench);
    FlywheelConfig fc = cfg.flywheel;
    fc.out_dir = out;
    const FlywheelResult result = run_flywheel(base, bench, fc, *annotator);

    std::cout << "baseline validation SR " << result.record.baseline.sr << '\n';
    for (const auto& it : result.record.iterations) {
        std::cout << "iteration " << it.iteration << ": " << it.deviations << " deviations, "
                  << it.sampled_corrections << " sampled corrections, validation SR " << it.validation.sr << '\n';
    }
    std::cout << "best iteration " << result.record.best_iteration
              << (result.record.stopped_early ? " (stopped on drop)" : "") << " -> " << out.string() << '\n';
    return kExitOk;
}

int cmd_report(const Globals& g, const Inputs& in) {
    if (in.run.empty()) throw UsageError("report needs --run");
    const FlywheelRunRecord run = read_run(in.run);
    const fs::path out = g.out_dir.empty() ? fs::path(in.run) : require_out_dir(g);
    fs::create_directories(out);
    write_text_atomic(out / "report.csv", report_csv(run));
    write_text_atomic(out / "report.svg", report_svg(run));
    std::cout << report_csv(run);
    return kExitOk;
}

void setup_logging(const std::string& level) {
    auto logger = spdlog::stderr_color_mt("navfly");
    spdlog::set_default_logger(logger);
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && level != "off") throw UsageError("unknown log level '" + level + "'");
    spdlog::set_level(lvl);
}

}  // namespace

int main(int argc, char** argv) {
    Globals g;
    Inputs in;
    for (int i = 1; i < argc; ++i) {
        if (std::string_view(argv[i]) == "--json-errors") g.json_errors = true;
    }

    CLI::App app{"navfly: self-correcting navigation flywheel on a toy grid world"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", g.config, "TOML run configuration");
    g.seed_opt = app.add_option("--seed", g.seed, "master seed");
    g.jobs_opt = app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
    g.threshold_opt = app.add_option("--threshold-s", g.threshold, "deviation threshold S in meters");
    g.spacing_opt = app.add_option("--spacing", g.spacing, "oracle interpolation spacing in meters");
    g.iterations_opt = app.add_option("--iterations", g.iterations, "flywheel iterations");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_flag("--json-errors", g.json_errors, "print errors as JSON on stderr");
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");

    auto* world = app.add_subcommand("world", "generate one world as JSON");
    world->add_option("--index", in.index, "world index within the training split");
    auto* data = app.add_subcommand("data", "generate worlds, episodes and the navigation dataset");
    auto* train_cmd = app.add_subcommand("train", "train a model on a navigation dataset");
    train_cmd->add_option("--data", in.data, "benchmark directory from `data`");
    train_cmd->add_option("--dataset", in.dataset, "dataset JSONL to train on");
    train_cmd->add_option("--init", in.init, "checkpoint to continue training from");
    auto* eval = app.add_subcommand("eval", "evaluate a policy on a split");
    eval->add_option("--data", in.data, "benchmark directory");
    eval->add_option("--model", in.model, "checkpoint to evaluate");
    eval->add_option("--run", in.run, "flywheel run directory; evaluates its best checkpoint");
    eval->add_option("--policy", in.policy, "built-in policy: scripted or stop");
    eval->add_option("--split", in.split, "train, validation or both");
    auto* fly = app.add_subcommand("flywheel", "run the self-correction flywheel");
    fly->add_option("--data", in.data, "benchmark directory");
    fly->add_option("--model", in.model, "base checkpoint (trained from config when absent)");
    auto* report = app.add_subcommand("report", "CSV table and SVG chart for a flywheel run");
    report->add_option("--run", in.run, "flywheel run directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error(g.json_errors, kExitUsage, "usage", e.what());
    }

    try {
        setup_logging(g.log_level);
        if (world->parsed()) return cmd_world(g, in);
        if (data->parsed()) return cmd_data(g, in);
        if (train_cmd->parsed()) return cmd_train(g, in);
        if (eval->parsed()) return cmd_eval(g, in);
        if (fly->parsed()) return cmd_flywheel(g, in);
        if (report->parsed()) return cmd_report(g, in);
        return report_error(g.json_errors, kExitUsage, "usage", "no subcommand");
    } catch (const UsageError& e) {
        return report_error(g.json_errors, kExitUsage, "usage", e.what());
    } catch (const ConfigError& e) {
        return report_error(g.json_errors, kExitUsage, "config", e.what());
    } catch (const std::exception& e) {
        return report_error(g.json_errors, kExitRuntime, "runtime", e.what());
    }
}
