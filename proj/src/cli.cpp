#include "qdren/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>

#include "qdren/babi.hpp"
#include "qdren/checkpoint.hpp"
#include "qdren/config_io.hpp"
#include "qdren/errors.hpp"
#include "qdren/model_gradcheck.hpp"
#include "qdren/synth.hpp"
#include "qdren/training.hpp"

namespace qdren::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::array<std::string_view, 3> kSplitNames = {"train", "valid", "test"};

std::size_t split_index(const std::string& name) {
    for (std::size_t i = 0; i < kSplitNames.size(); ++i) {
        if (kSplitNames[i] == name) return i;
    }
    throw UsageError("unknown split '" + name + "'");
}

fs::path split_file(const fs::path& dir, std::size_t index) {
    return dir / (std::string(kSplitNames[index]) + ".txt");
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path.string() + "' for writing");
    body(f);
    if (!f) throw Error("failed writing '" + path.string() + "'");
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::string fmt(double v, int precision = 6) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

// ---- run configuration ---------------------------------------------------

/// Settings outside ModelConfig that a config file may carry.
struct RunSettings {
    std::string data;
    std::string out;
    std::optional<std::size_t> patience;
    std::size_t max_epochs = 200;
    std::size_t threads = 0;
    std::size_t vocab_max = 50000;

    std::size_t patience_for(const ModelConfig& c) const {
        // Cloze-style runs stop sooner, as on the large corpus.
        return patience.value_or(c.input_style == InputStyle::windows ? 20 : 50);
    }
};

std::size_t unsigned_value(const std::string& key, const json& v) {
    if (!v.is_number_unsigned()) throw ConfigError("invalid value for '" + key + "': " + v.dump());
    return v.get<std::size_t>();
}

bool apply_run_key(RunSettings& r, const std::string& key, const json& v) {
    if (key == "data" || key == "out") {
        if (!v.is_string()) throw ConfigError("invalid value for '" + key + "': " + v.dump());
        (key == "data" ? r.data : r.out) = v.get<std::string>();
    } else if (key == "patience") {
        r.patience = unsigned_value(key, v);
    } else if (key == "max_epochs") {
        r.max_epochs = unsigned_value(key, v);
    } else if (key == "threads") {
        r.threads = unsigned_value(key, v);
    } else if (key == "vocab_max") {
        r.vocab_max = unsigned_value(key, v);
    } else {
        return false;
    }
    return true;
}

json run_to_json(const ModelConfig& c, const RunSettings& r) {
    json j = config_to_json(c);
    j["data"] = r.data;
    j["out"] = r.out;
    j["patience"] = r.patience_for(c);
    j["max_epochs"] = r.max_epochs;
    j["threads"] = r.threads;
    j["vocab_max"] = r.vocab_max;
    return j;
}

/// Model and run flags shared by the commands that train.
class RunFlags {
public:
    explicit RunFlags(CLI::App& app, bool with_data = true) {
        app.add_option("--config", config_path_, "flat JSON config file; flags override it");
        if (with_data) {
            str(app, "--data", "data", "directory holding train.txt, valid.txt, test.txt");
            str(app, "--out", "out", "output directory");
        }
        uns(app, "--dim", "dim", "embedding / memory size d");
        uns(app, "--blocks", "blocks", "number of memory blocks z");
        str(app, "--mode", "mode", "gate: ren or qdren");
        str(app, "--style", "input_style", "input: sentences or windows");
        uns(app, "--window", "window", "window size b (odd)");
        str(app, "--phi-cell", "phi_cell", "cell activation");
        str(app, "--phi-out", "phi_out", "output activation");
        dbl(app, "--lr", "lr", "learning rate");
        dbl(app, "--l2", "l2", "L2 weight");
        dbl(app, "--dropout", "dropout", "dropout rate on the pooled memory");
        dbl(app, "--clip", "clip_norm", "global gradient-norm clip");
        str(app, "--optimizer", "optimizer", "adam or rmsprop");
        uns(app, "--batch", "batch", "batch size");
        uns(app, "--seed", "seed", "run seed");
        uns(app, "--patience", "patience", "epochs without validation improvement before stopping");
        uns(app, "--max-epochs", "max_epochs", "epoch limit");
        uns(app, "--threads", "threads", "evaluation threads (0: QDREN_THREADS or all cores)");
    }

    std::pair<ModelConfig, RunSettings> resolve() const {
        ModelConfig config;
        RunSettings run;
        auto apply = [&](const std::string& key, const json& v) {
            if (!apply_config_key(config, key, v) && !apply_run_key(run, key, v)) {
                throw ConfigError("unknown config key '" + key + "'");
            }
        };
        if (!config_path_.empty()) {
            std::ifstream f(config_path_);
            if (!f) throw ConfigError("cannot read config '" + config_path_ + "'");
            json j;
            try {
                j = json::parse(f);
            } catch (const json::exception& e) {
                throw ConfigError("config '" + config_path_ + "' is not valid JSON: " + e.what());
            }
            if (!j.is_object()) throw ConfigError("config must be a JSON object");
            for (const auto& [key, v] : j.items()) apply(key, v);
        }
        for (const auto& o : overrides_) {
            if (o.option->count() > 0) apply(o.key, o.value());
        }
        config.validate();
        return {config, run};
    }

private:
    struct Override {
        std::string key;
        CLI::Option* option;
        std::function<json()> value;
    };

    void str(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
        auto v = std::make_shared<std::string>();
        overrides_.push_back({key, app.add_option(flag, *v, help), [v] { return json(*v); }});
    }
    void uns(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
        auto v = std::make_shared<std::uint64_t>();
        overrides_.push_back({key, app.add_option(flag, *v, help), [v] { return json(*v); }});
    }
    void dbl(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
        auto v = std::make_shared<double>();
        overrides_.push_back({key, app.add_option(flag, *v, help), [v] { return json(*v); }});
    }

    std::string config_path_;
    std::vector<Override> overrides_;
};

RawSplits load_splits(const RunSettings& run) {
    if (run.data.empty()) throw ConfigError("no data directory given (--data or \"data\" in the config)");
    const fs::path dir(run.data);
    RawSplits s;
    for (std::size_t i = 0; i < 3; ++i) {
        const fs::path p = split_file(dir, i);
        if (!fs::exists(p)) {
            if (i == 2) continue;  // test is optional for training
            throw Error("missing data file '" + p.string() + "'");
        }
        auto stories = parse_babi_file(p);
        (i == 0 ? s.train : i == 1 ? s.valid : s.test) = std::move(stories);
    }
    return s;
}

fs::path require_out(const RunSettings& run) {
    if (run.out.empty()) throw ConfigError("no output directory given (--out or \"out\" in the config)");
    fs::create_directories(run.out);
    return run.out;
}

void write_resolved(const fs::path& dir, const json& j) {
    write_file(dir / "resolved_config.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

TrainOptions train_options(const ModelConfig& c, const RunSettings& run) {
    TrainOptions o;
    o.patience = run.patience_for(c);
    o.max_epochs = run.max_epochs;
    o.threads = run.threads;
    return o;
}

/// Stories for eval/gates: a split of a data directory or a single file.
std::vector<RawStory> load_stories(const std::string& data, const std::string& file, const std::string& split) {
    if (!file.empty()) return parse_babi_file(file);
    if (data.empty()) throw UsageError("give --data with --split, or --file");
    const fs::path p = split_file(data, split_index(split));
    if (!fs::exists(p)) throw Error("missing data file '" + p.string() + "'");
    return parse_babi_file(p);
}

/// Every answer and candidate must be a token the checkpoint was trained on.
void check_vocabulary(std::span<const RawStory> stories, const Vocabulary& vocab) {
    for (std::size_t i = 0; i < stories.size(); ++i) {
        auto check = [&](const std::string& tok, const char* what) {
            if (!vocab.find(tok)) {
                throw EncodingError("vocabulary mismatch: " + std::string(what) + " '" + tok + "' of story " +
                                    std::to_string(i) + " is unknown to the checkpoint");
            }
        };
        check(stories[i].answer, "answer");
        for (const auto& c : stories[i].candidates) check(c, "candidate");
    }
}

// ---- commands ------------------------------------------------------------

struct GenArgs {
    std::string task;
    std::size_t n = 1000;
    std::optional<std::size_t> n_valid, n_test, entities;
    std::size_t locations = 6, story_len = 6, window = 5;
    std::uint64_t seed = 1;
    std::string out = "data";
    bool force = false;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
    SynthSpec spec;
    spec.task = parse_synth_task(a.task);
    spec.seed = a.seed;
    spec.n_train = a.n;
    spec.n_valid = a.n_valid.value_or(a.n / 5);
    spec.n_test = a.n_test.value_or(a.n / 5);
    spec.entities = a.entities.value_or(spec.task == SynthTask::single_fact ? 5 : 8);
    spec.locations = a.locations;
    spec.story_len = a.story_len;
    spec.window = a.window;
    if (spec.task == SynthTask::entity_cloze && (spec.window == 0 || spec.window % 2 == 0)) {
        throw UsageError("--window must be odd and positive");
    }

    const fs::path dir(a.out);
    if (!a.force) {
        for (std::size_t i = 0; i < 3; ++i) {
            if (fs::exists(split_file(dir, i))) {
                throw Error("refusing to overwrite '" + split_file(dir, i).string() + "' (use --force)");
            }
        }
    }
    const RawSplits splits = generate_splits(spec);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& stories = i == 0 ? splits.train : i == 1 ? splits.valid : splits.test;
        const auto header = provenance_header(spec, i);
        write_file(split_file(dir, i), [&](std::ostream& o) { write_babi(o, stories, header); });
        out << "wrote " << split_file(dir, i).string() << " (" << stories.size() << " stories)\n";
    }
    json resolved{{"task", std::string(to_string(spec.task))},
                  {"generator", std::string(kGeneratorVersion)},
                  {"seed", spec.seed},
                  {"n_train", spec.n_train},
                  {"n_valid", spec.n_valid},
                  {"n_test", spec.n_test},
                  {"entities", spec.entities}};
    if (spec.task == SynthTask::single_fact) {
        resolved["locations"] = spec.locations;
        resolved["story_len"] = spec.story_len;
    } else {
        resolved["window"] = spec.window;
    }
    write_resolved(dir, resolved);
    return kOk;
}

int cmd_train(const RunFlags& flags, std::ostream& out) {
    const auto [config, run] = flags.resolve();
    const RawSplits splits = load_splits(run);
    const fs::path dir = require_out(run);
    write_resolved(dir, run_to_json(config, run));

    const TaskData data = prepare_task(splits, config, run.vocab_max);
    TrainOptions options = train_options(config, run);
    options.on_epoch = [&out](const EpochRecord& e) {
        out << "epoch " << e.epoch << " train_loss " << fmt(e.train_loss) << " val_loss " << fmt(e.val_loss)
            << " val_acc " << fmt(e.val_acc) << " (" << fmt(e.seconds, 3) << "s)\n"
            << std::flush;
    };
    const TrainResult result = train(config, data, options);

    save_checkpoint(result.model, data.vocab, dir / "model");
    write_file(dir / "report.csv", [&](std::ostream& o) { result.report.write_csv(o); });
    out << "best epoch " << result.report.best_epoch << " val_acc " << fmt(result.report.best_val_acc) << " ("
        << result.report.stop_reason << ")\n";
    if (!data.test.empty()) {
        const auto test = evaluate(result.model, data.test, run.threads);
        out << "test accuracy " << fmt(test.accuracy) << " error " << fmt(test.error) << '\n';
    }
    out << "checkpoint " << manifest_path(dir / "model").string() << '\n';
    return kOk;
}

struct EvalArgs {
    std::string checkpoint, data, file, split = "test", predictions;
    std::size_t threads = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const auto stories = load_stories(a.data, a.file, a.split);
    if (stories.empty()) throw Error("no stories to evaluate");
    check_vocabulary(stories, ckpt.vocab);
    const auto inputs = prepare_split(stories, ckpt.model.config, ckpt.model.dims, ckpt.vocab);
    const EvalResult r = evaluate(ckpt.model, inputs, a.threads);
    out << "accuracy " << fmt(r.accuracy, 9) << '\n'
        << "error " << fmt(r.error, 9) << '\n'
        << "correct " << r.correct << '/' << r.total << '\n';
    if (!a.predictions.empty()) {
        write_file(a.predictions, [&](std::ostream& o) {
            o << "story,prediction,answer,correct\n";
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                o << i << ',' << ckpt.vocab.token(r.predictions[i]) << ',' << ckpt.vocab.token(inputs[i].answer) << ','
                  << (r.predictions[i] == inputs[i].answer ? 1 : 0) << '\n';
            }
        });
    }
    return kOk;
}

struct GatesArgs {
    std::string checkpoint, data, file, split = "test", out;
    std::size_t story = 0;
};

void write_gate_csv(std::ostream& o, const GateTrace& trace) {
    o << "block,step,sentence,gate\n";
    const std::size_t blocks = trace.gates.rows();
    const std::size_t steps = trace.gates.cols();
    for (std::size_t b = 0; b < blocks; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            o << b << ',' << t << ',' << csv_quote(trace.sentence_labels.at(t)) << ','
              << std::setprecision(9) << trace.gates(b, t) << '\n';
        }
    }
}

int cmd_gates(const GatesArgs& a, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const auto stories = load_stories(a.data, a.file, a.split);
    if (a.story >= stories.size()) {
        throw Error("story " + std::to_string(a.story) + " out of range (" + std::to_string(stories.size()) +
                    " stories)");
    }
    check_vocabulary(std::span(&stories[a.story], 1), ckpt.vocab);
    const auto input =
        prepare_split(std::span(&stories[a.story], 1), ckpt.model.config, ckpt.model.dims, ckpt.vocab).front();
    const GateTrace trace = gate_trace(ckpt.model, input, ckpt.vocab);
    if (a.out.empty()) {
        write_gate_csv(out, trace);
    } else {
        write_file(a.out, [&](std::ostream& o) { write_gate_csv(o, trace); });
        out << "wrote " << a.out << " (" << trace.gates.size() << " rows)\n";
    }
    return kOk;
}

struct GradcheckArgs {
    std::string mode = "both", style = "both", phi = "both";
    std::size_t dim = 8, blocks = 4, sentences = 3;
    double epsilon = 1e-3;
    std::uint64_t seed = 1;
    bool inject_error = false;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
    if (a.dim == 0 || a.dim > kGradcheckMaxDim) {
        throw UsageError("--dim must be in [1, " + std::to_string(kGradcheckMaxDim) + "]");
    }
    if (a.blocks == 0 || a.blocks > kGradcheckMaxBlocks) {
        throw UsageError("--blocks must be in [1, " + std::to_string(kGradcheckMaxBlocks) + "]");
    }
    ModelGradcheckSpec base;
    base.dim = a.dim;
    base.blocks = a.blocks;
    base.sentences = a.sentences;
    base.epsilon = a.epsilon;
    base.seed = a.seed;

    auto keep = [](const std::string& choice, std::string_view value) { return choice == "both" || choice == value; };
    std::function<void(std::vector<std::vector<double>>&)> tamper;
    if (a.inject_error) {
        tamper = [](std::vector<std::vector<double>>& g) {
            for (auto& p : g) {
                for (double& v : p) v = v * 1.5 + 0.01;
            }
        };
    }

    bool ok = true;
    double worst = 0.0;
    std::string worst_line;
    for (const auto& spec : gradcheck_matrix(base)) {
        const std::string_view phi = spec.phi == ops::Activation::sigmoid ? "sigmoid" : "prelu";
        if (!keep(a.mode, to_string(spec.mode)) || !keep(a.style, to_string(spec.style)) || !keep(a.phi, phi)) {
            continue;
        }
        const auto r = model_gradcheck(spec, tamper);
        const std::string label =
            std::string(to_string(spec.mode)) + " " + std::string(to_string(spec.style)) + " " + std::string(phi);
        for (const auto& g : r.report.groups) {
            if (g.coordinates == 0) continue;
            out << label << "  " << std::left << std::setw(14) << g.name << std::right << " max_rel_error "
                << fmt(g.max_rel_error, 3) << '\n';
        }
        out << label << "  overall max_rel_error " << fmt(r.report.max_rel_error, 3) << '\n';
        if (!r.passed()) ok = false;
        if (r.report.max_rel_error >= worst) {
            worst = r.report.max_rel_error;
            worst_line = label + " " + r.report.worst_param + "[" + std::to_string(r.report.worst_index) +
                         "] analytic " + fmt(r.report.worst_analytic, 9) + " numeric " +
                         fmt(r.report.worst_numeric, 9);
        }
    }
    if (worst_line.empty()) throw UsageError("no gradcheck case matches the given filters");
    if (!ok) {
        err << "gradcheck FAILED: max relative error " << fmt(worst, 3) << " >= " << kGradcheckTolerance
            << "; worst coordinate: " << worst_line << '\n';
        return kCheckFailed;
    }
    out << "gradcheck passed: max relative error " << fmt(worst, 3) << " < " << kGradcheckTolerance << '\n';
    return kOk;
}

struct SearchArgs {
    std::size_t budget = 10, subsample = 0;
    std::vector<double> lr, l2, dropout;
    std::vector<std::size_t> blocks, window, batch;
    std::vector<std::string> optimizer;
};

int cmd_search(const RunFlags& flags, const SearchArgs& a, std::ostream& out) {
    const auto [config, run] = flags.resolve();
    const RawSplits splits = load_splits(run);
    const fs::path dir = require_out(run);
    json resolved = run_to_json(config, run);
    write_resolved(dir, resolved);

    SearchSpace space;
    if (!a.lr.empty()) space.lr = a.lr;
    if (!a.l2.empty()) space.l2 = a.l2;
    if (!a.dropout.empty()) space.dropout = a.dropout;
    if (!a.blocks.empty()) space.blocks = a.blocks;
    if (!a.window.empty()) space.window = a.window;
    if (!a.batch.empty()) space.batch = a.batch;
    for (const auto& o : a.optimizer) space.optimizer.push_back(parse_optimizer(o));

    const auto trials =
        random_search(space, config, splits, a.budget, a.subsample, config.seed, train_options(config, run), run.vocab_max);
    write_file(dir / "trials.csv", [&](std::ostream& o) {
        o << "rank,trial,val_acc,val_loss,best_epoch,lr,blocks,l2,dropout,window,optimizer,batch,seed\n";
        for (std::size_t i = 0; i < trials.size(); ++i) {
            const auto& t = trials[i];
            o << i + 1 << ',' << t.index << ',' << fmt(t.val_acc, 9) << ',' << fmt(t.val_loss, 9) << ','
              << t.best_epoch << ',' << t.config.lr << ',' << t.config.blocks << ',' << t.config.l2 << ','
              << t.config.dropout << ',' << t.config.window << ',' << to_string(t.config.optimizer) << ','
              << t.config.batch_size << ',' << t.config.seed << '\n';
        }
    });
    const auto& best = trials.front();
    out << "best trial " << best.index << " val_acc " << fmt(best.val_acc) << " lr " << best.config.lr << " blocks "
        << best.config.blocks << " l2 " << best.config.l2 << " dropout " << best.config.dropout << '\n'
        << "wrote " << (dir / "trials.csv").string() << '\n';
    return kOk;
}

int cmd_compare(const RunFlags& flags, const std::vector<std::uint64_t>& seeds, std::ostream& out) {
    const auto [config, run] = flags.resolve();
    if (seeds.size() < 3) throw UsageError("--seeds needs at least 3 values");
    const RawSplits splits = load_splits(run);
    const fs::path dir = require_out(run);
    json resolved = run_to_json(config, run);
    resolved.erase("mode");
    write_resolved(dir, resolved);

    const auto report = compare_modes(splits, config, seeds, train_options(config, run), GateMode::ren,
                                      GateMode::qdren, run.vocab_max);
    write_file(dir / "compare.csv", [&](std::ostream& o) {
        o << "seed,ren_acc,qdren_acc,delta\n";
        for (const auto& r : report.rows) {
            o << r.seed << ',' << fmt(r.first_acc, 9) << ',' << fmt(r.second_acc, 9) << ',' << fmt(r.delta, 9) << '\n';
        }
    });
    for (const auto& r : report.rows) {
        out << "seed " << r.seed << " ren " << fmt(r.first_acc) << " qdren " << fmt(r.second_acc) << " delta "
            << fmt(r.delta) << '\n';
    }
    out << "mean delta " << fmt(report.mean_delta) << ", qdren wins " << report.second_wins << '/' << report.rows.size()
        << '\n';
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Recurrent entity networks with question-dependent gating"};
    app.name("qdren");
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset in the bAbI layout");
    gen_cmd->add_option("--task", gen.task, "single-fact or entity-cloze")
        ->required()
        ->check(CLI::IsMember({"single-fact", "entity-cloze"}));
    gen_cmd->add_option("--n", gen.n, "training stories");
    gen_cmd->add_option("--n-valid", gen.n_valid, "validation stories (default n/5)");
    gen_cmd->add_option("--n-test", gen.n_test, "test stories (default n/5)");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_option("--entities", gen.entities, "entities (default 5 single-fact, 8 entity-cloze)");
    gen_cmd->add_option("--locations", gen.locations, "single-fact locations");
    gen_cmd->add_option("--story-len", gen.story_len, "single-fact facts per story");
    gen_cmd->add_option("--window", gen.window, "entity-cloze window size (provenance)");
    gen_cmd->add_option("--out", gen.out, "output directory");
    gen_cmd->add_flag("--force", gen.force, "overwrite existing files");

    auto* train_cmd = app.add_subcommand("train", "train a model; writes checkpoint, report.csv, resolved config");
    RunFlags train_flags(*train_cmd);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint prefix or manifest")->required();
    eval_cmd->add_option("--data", ev.data, "data directory");
    eval_cmd->add_option("--file", ev.file, "a single bAbI-layout file instead of --data");
    eval_cmd->add_option("--split", ev.split, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));
    eval_cmd->add_option("--predictions", ev.predictions, "write per-story predictions CSV");
    eval_cmd->add_option("--threads", ev.threads, "evaluation threads");

    GatesArgs gates;
    auto* gates_cmd = app.add_subcommand("gates", "gate activations of one story as CSV");
    gates_cmd->add_option("--checkpoint", gates.checkpoint, "checkpoint prefix or manifest")->required();
    gates_cmd->add_option("--data", gates.data, "data directory");
    gates_cmd->add_option("--file", gates.file, "a single bAbI-layout file instead of --data");
    gates_cmd->add_option("--split", gates.split, "train, valid or test")
        ->check(CLI::IsMember({"train", "valid", "test"}));
    gates_cmd->add_option("--story", gates.story, "story index within the split");
    gates_cmd->add_option("--out", gates.out, "CSV path (default stdout)");

    GradcheckArgs gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
    gc_cmd->add_option("--mode", gc.mode, "ren, qdren or both")->check(CLI::IsMember({"ren", "qdren", "both"}));
    gc_cmd->add_option("--style", gc.style, "sentences, windows or both")
        ->check(CLI::IsMember({"sentences", "windows", "both"}));
    gc_cmd->add_option("--phi", gc.phi, "sigmoid, prelu or both")->check(CLI::IsMember({"sigmoid", "prelu", "both"}));
    gc_cmd->add_option("--dim", gc.dim, "d (at most 8)");
    gc_cmd->add_option("--blocks", gc.blocks, "z (at most 4)");
    gc_cmd->add_option("--sentences", gc.sentences, "story length");
    gc_cmd->add_option("--epsilon", gc.epsilon, "finite-difference step");
    gc_cmd->add_option("--seed", gc.seed, "parameter seed");
    gc_cmd->add_flag("--inject-error", gc.inject_error, "corrupt one analytic gradient (harness self-test)");

    SearchArgs search;
    auto* search_cmd = app.add_subcommand("search", "random hyperparameter search");
    RunFlags search_flags(*search_cmd);
    search_cmd->add_option("--budget", search.budget, "number of trials")->check(CLI::PositiveNumber);
    search_cmd->add_option("--subsample", search.subsample, "training stories per trial (0: all)");
    search_cmd->add_option("--grid-lr", search.lr, "learning rates")->delimiter(',');
    search_cmd->add_option("--grid-blocks", search.blocks, "block counts")->delimiter(',');
    search_cmd->add_option("--grid-l2", search.l2, "L2 weights")->delimiter(',');
    search_cmd->add_option("--grid-dropout", search.dropout, "dropout rates")->delimiter(',');
    search_cmd->add_option("--grid-window", search.window, "window sizes")->delimiter(',');
    search_cmd->add_option("--grid-optimizer", search.optimizer, "optimizers")->delimiter(',');
    search_cmd->add_option("--grid-batch", search.batch, "batch sizes")->delimiter(',');

    std::vector<std::uint64_t> seeds{1, 2, 3};
    auto* compare_cmd = app.add_subcommand("compare", "train REN and QDREN on the same data and seeds");
    RunFlags compare_flags(*compare_cmd);
    compare_cmd->add_option("--seeds", seeds, "comma-separated seeds (at least 3)")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
        return kUsageError;
    }

    try {
        if (*gen_cmd) return cmd_gen(gen, out);
        if (*train_cmd) return cmd_train(train_flags, out);
        if (*eval_cmd) return cmd_eval(ev, out);
        if (*gates_cmd) return cmd_gates(gates, out);
        if (*gc_cmd) return cmd_gradcheck(gc, out, err);
        if (*search_cmd) return cmd_search(search_flags, search, out);
        if (*compare_cmd) return cmd_compare(compare_flags, seeds, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    return kUsageError;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"qdren"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace qdren::cli
