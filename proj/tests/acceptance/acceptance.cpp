// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "qdren/checkpoint.hpp"
#include "qdren/cli.hpp"
#include "qdren/memory_cell.hpp"
#include "qdren/model_gradcheck.hpp"
#include "qdren/optim.hpp"
#include "qdren/output_head.hpp"
#include "qdren/synth.hpp"
#include "qdren/training.hpp"

using namespace qdren;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kC1MaxSeconds = 60.0;
constexpr double kC2MaxSeconds = 30.0;
constexpr double kUnitNormTol = 1e-5;
constexpr double kSoftmaxTol = 1e-6;
constexpr double kC3MinAccuracy = 0.95;
constexpr std::size_t kC3MaxEpochs = 200;
constexpr double kC3MaxSeconds = 600.0;
constexpr double kC4MinMeanDelta = 0.05;
constexpr std::size_t kC4MinWins = 2;
constexpr std::size_t kC5MinStories = 50;
constexpr double kC5MinRatio = 2.0;
constexpr double kC6MaxLoss = 0.05;
constexpr std::size_t kC6MaxEpochs = 500;
constexpr double kC6MaxSeconds = 120.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << o.detail << std::endl;
    if (!o.pass) ++failures;
}

void run_criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
    try {
        report(id, name, body());
    } catch (const std::exception& e) {
        report(id, name, {false, std::string("exception: ") + e.what()});
    }
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

int cli(const std::vector<std::string>& args, std::string* captured = nullptr) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::cerr << err.str();
    if (captured) *captured = out.str();
    return code;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// ---- criterion 1 ----------------------------------------------------------

Outcome gradient_oracle() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string worst_combo;
    std::size_t combos = 0;
    for (const auto& spec : gradcheck_matrix()) {
        const auto r = model_gradcheck(spec);
        ++combos;
        if (r.report.max_rel_error >= worst) {
            worst = r.report.max_rel_error;
            worst_combo = std::string(to_string(spec.mode)) + "/" + std::string(to_string(spec.style)) + "/" +
                          std::string(ops::to_string(spec.phi));
        }
    }
    const double secs = seconds_since(t0);
    const ModelGradcheckSpec base;
    const bool ok = combos == 8 && worst < kGradcheckTolerance && secs < kC1MaxSeconds && base.dim == 8 &&
                    base.blocks == 4 && base.sentences == 3 && base.epsilon == 1e-3;
    std::ostringstream d;
    d << combos << " configurations, max rel error " << std::scientific << std::setprecision(2) << worst << " ("
      << worst_combo << ") < " << kGradcheckTolerance << ", " << std::fixed << std::setprecision(2) << secs << " s < "
      << kC1MaxSeconds << " s";
    return {ok, d.str()};
}

// ---- criterion 2 ----------------------------------------------------------

Tensor random_tensor(Shape shape, Rng& rng, double bound) {
    Tensor t(shape);
    for (float& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

Outcome invariant_suite() {
    const auto t0 = Clock::now();
    Rng rng(2024);
    std::vector<std::string> failed;

    // Unit-norm memories after every step.
    double norm_dev = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t z = 1 + rng.below(10), d = 2 + rng.below(16);
        CellParams p;
        p.U = random_tensor({d, d}, rng, 1.0);
        p.V = random_tensor({d, d}, rng, 1.0);
        p.W = random_tensor({d, d}, rng, 1.0);
        p.keys = random_tensor({z, d}, rng, 1.0);
        p.mode = trial % 2 ? GateMode::ren : GateMode::qdren;
        p.phi = trial % 3 ? ops::Activation::prelu : ops::Activation::sigmoid;
        MemoryState state{p.keys};
        const Tensor q = random_tensor({d}, rng, 2.0);
        for (int t = 0; t < 10; ++t) {
            state = step(state, random_tensor({d}, rng, 2.0), q, p).state;
            for (std::size_t i = 0; i < z; ++i) {
                double sq = 0.0;
                for (float v : state.hiddens.row(i)) sq += static_cast<double>(v) * v;
                norm_dev = std::max(norm_dev, std::abs(std::sqrt(sq) - 1.0));
            }
        }
    }
    if (norm_dev > kUnitNormTol) failed.push_back("unit norm");

    // Attention and softmax normalisation.
    double mass_dev = 0.0;
    Tape tape;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t z = 1 + rng.below(30), d = 1 + rng.below(20);
        const Tensor p = attention(random_tensor({d}, rng, 3.0), random_tensor({z, d}, rng, 3.0));
        double total = 0.0;
        for (float v : p.data()) total += v;
        mass_dev = std::max(mass_dev, std::abs(total - 1.0));
        const Tensor s = ops::softmax(tape.constant(random_tensor({z}, rng, 30.0))).value();
        total = 0.0;
        for (float v : s.data()) total += v;
        mass_dev = std::max(mass_dev, std::abs(total - 1.0));
    }
    if (mass_dev > kSoftmaxTol) failed.push_back("softmax normalisation");

    // REN and QDREN coincide bit-for-bit when q = 0.
    bool identical = true;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t z = 1 + rng.below(8), d = 2 + rng.below(12);
        CellParams ren;
        ren.U = random_tensor({d, d}, rng, 0.5);
        ren.V = random_tensor({d, d}, rng, 0.5);
        ren.W = random_tensor({d, d}, rng, 0.5);
        ren.keys = random_tensor({z, d}, rng, 0.5);
        ren.mode = GateMode::ren;
        CellParams qd = ren;
        qd.mode = GateMode::qdren;
        std::vector<Tensor> sentences;
        for (int t = 0; t < 6; ++t) sentences.push_back(random_tensor({d}, rng, 1.0));
        const Tensor zero(Shape{d});
        const auto a = run_story({ren.keys}, std::span<const Tensor>(sentences), zero, ren);
        const auto b = run_story({qd.keys}, std::span<const Tensor>(sentences), zero, qd);
        identical = identical && a.state.hiddens == b.state.hiddens && a.trace.gates == b.trace.gates;
    }
    if (!identical) failed.push_back("REN/QDREN at q=0");

    // Clipping bounds the global norm.
    bool clipped = true;
    for (int trial = 0; trial < 100; ++trial) {
        ParamSet params;
        params.add("a", random_tensor({3, 4}, rng, 1.0));
        params.add("b", random_tensor({5}, rng, 1.0));
        Gradients g(params);
        const double scale = rng.uniform(0.0, 100.0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = random_tensor(params[i].shape(), rng, scale);
        const double max_norm = rng.uniform(0.1, 40.0);
        const double before = g.global_norm();
        clip_gradients(g, max_norm);
        const double after = g.global_norm();
        clipped = clipped && after <= max_norm * (1.0 + 1e-5) && (before > max_norm || after == before);
    }
    if (!clipped) failed.push_back("clip bound");

    // Checkpoint round trip.
    ModelConfig c;
    c.dim = 16;
    c.blocks = 6;
    SynthSpec spec;
    spec.n_train = 30;
    spec.n_valid = 5;
    spec.n_test = 5;
    const TaskData data = prepare_task(generate_splits(spec), c);
    const Model m = make_model(c, data.dims);
    const fs::path dir = fs::temp_directory_path() / "qdren_acceptance_c2";
    fs::remove_all(dir);
    fs::create_directories(dir);
    save_checkpoint(m, data.vocab, dir / "m");
    const Checkpoint back = load_checkpoint(dir / "m");
    save_checkpoint(back.model, back.vocab, dir / "m2");
    const bool round_trip = back.model.params == m.params && back.vocab == data.vocab &&
                            slurp(weights_path(dir / "m")) == slurp(weights_path(dir / "m2"));
    fs::remove_all(dir);
    if (!round_trip) failed.push_back("checkpoint round trip");

    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << "max |norm-1| " << std::scientific << std::setprecision(1) << norm_dev << " <= " << kUnitNormTol
      << ", max |mass-1| " << mass_dev << " <= " << kSoftmaxTol << ", q=0 bit-equal " << (identical ? "yes" : "no")
      << ", clip bound " << (clipped ? "held" : "violated") << ", checkpoint " << (round_trip ? "bit-exact" : "differs")
      << ", " << std::fixed << std::setprecision(2) << secs << " s < " << kC2MaxSeconds << " s";
    if (!failed.empty()) {
        d << "; failed:";
        for (const auto& f : failed) d << ' ' << f;
    }
    return {failed.empty() && secs < kC2MaxSeconds, d.str()};
}

// ---- criteria 3 and 5 -------------------------------------------------------

struct TaskOneRun {
    fs::path dir;
    bool ready = false;
};

/// Reads the report CSV: number of epochs and best validation accuracy.
std::pair<std::size_t, double> read_report(const fs::path& csv) {
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    std::size_t epochs = 0;
    double best = 0.0;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> cols;
        while (std::getline(row, field, ',')) cols.push_back(field);
        ++epochs;
        best = std::max(best, std::stod(cols.at(3)));
    }
    return {epochs, best};
}

std::vector<std::string> train_args(const fs::path& data, const fs::path& out, const std::string& mode) {
    // d=32, z=10, lr 0.001, no L2, dropout 0.5.
    return {"train", "--data",    data.string(), "--out",     out.string(), "--mode",       mode,  "--dim",
            "32",    "--blocks",  "10",          "--lr",      "0.001",      "--l2",         "0",   "--dropout",
            "0.5",   "--batch",   "32",          "--patience", "50",        "--max-epochs", "200", "--seed",
            "1",     "--threads", "1"};
}

Outcome task_one(TaskOneRun& run) {
    const fs::path data = run.dir / "data";
    if (cli({"gen", "--task", "single-fact", "--n", "1000", "--n-valid", "200", "--n-test", "200", "--entities", "5",
             "--locations", "6", "--seed", "7", "--out", data.string(), "--force"}) != 0) {
        return {false, "gen failed"};
    }
    const auto t0 = Clock::now();
    if (cli(train_args(data, run.dir / "qdren", "qdren")) != 0) return {false, "train failed"};
    const double secs = seconds_since(t0);
    run.ready = true;

    const auto [epochs, best_val] = read_report(run.dir / "qdren" / "report.csv");
    const Checkpoint ckpt = load_checkpoint(run.dir / "qdren" / "model");
    const auto valid = parse_babi_file(data / "valid.txt");
    const auto test = parse_babi_file(data / "test.txt");
    const auto val_in = prepare_split(valid, ckpt.model.config, ckpt.model.dims, ckpt.vocab);
    const auto test_in = prepare_split(test, ckpt.model.config, ckpt.model.dims, ckpt.vocab);
    const double val_acc = evaluate(ckpt.model, val_in, 1).accuracy;
    const double test_acc = evaluate(ckpt.model, test_in, 1).accuracy;

    const bool ok = val_acc >= kC3MinAccuracy && test_acc >= kC3MinAccuracy && epochs <= kC3MaxEpochs &&
                    secs < kC3MaxSeconds && val_acc == best_val;
    std::ostringstream d;
    d << "QDREN val acc " << fmt(val_acc) << ", test acc " << fmt(test_acc) << " (>= " << kC3MinAccuracy << "), "
      << epochs << " epochs run (<= " << kC3MaxEpochs << "), " << fmt(secs, 1) << " s < " << kC3MaxSeconds << " s";
    return {ok, d.str()};
}

/// Block-averaged gate on sentences naming the questioned person versus the rest.
double gate_ratio(const Checkpoint& ckpt, const std::vector<RawStory>& stories) {
    double on = 0.0, off = 0.0;
    std::size_t n_on = 0, n_off = 0;
    for (const auto& s : stories) {
        const std::string& who = s.question.at(2);
        const ModelInput in = prepare_split(std::span(&s, 1), ckpt.model.config, ckpt.model.dims, ckpt.vocab).front();
        const Tensor gates = predict_story(ckpt.model, in).gates;
        for (std::size_t t = 0; t < s.sentences.size(); ++t) {
            double g = 0.0;
            for (std::size_t b = 0; b < gates.rows(); ++b) g += gates(b, t);
            g /= static_cast<double>(gates.rows());
            const auto& sentence = s.sentences[t];
            if (std::find(sentence.begin(), sentence.end(), who) != sentence.end()) {
                on += g;
                ++n_on;
            } else {
                off += g;
                ++n_off;
            }
        }
    }
    return (on / static_cast<double>(n_on)) / (off / static_cast<double>(n_off));
}

Outcome gate_focus(const TaskOneRun& run) {
    if (!run.ready) return {false, "needs the trained QDREN model from criterion 3"};
    const fs::path data = run.dir / "data";
    if (cli(train_args(data, run.dir / "ren", "ren")) != 0) return {false, "REN training failed"};
    const auto held_out = parse_babi_file(data / "test.txt");
    const double qdren_ratio = gate_ratio(load_checkpoint(run.dir / "qdren" / "model"), held_out);
    const double ren_ratio = gate_ratio(load_checkpoint(run.dir / "ren" / "model"), held_out);
    const bool ok = held_out.size() >= kC5MinStories && qdren_ratio >= kC5MinRatio && qdren_ratio > ren_ratio;
    std::ostringstream d;
    d << held_out.size() << " held-out stories, QDREN entity/other gate ratio " << fmt(qdren_ratio, 2)
      << " (>= " << kC5MinRatio << "), REN ratio " << fmt(ren_ratio, 2) << " (QDREN > REN)";
    return {ok, d.str()};
}

// ---- criterion 4 ----------------------------------------------------------

Outcome question_dependence() {
    SynthSpec spec;
    spec.task = SynthTask::entity_cloze;
    spec.seed = 101;
    spec.n_train = 1000;
    spec.n_valid = 200;
    spec.n_test = 200;
    spec.entities = 8;
    spec.window = 5;
    const RawSplits splits = generate_splits(spec);

    ModelConfig c;
    c.input_style = InputStyle::windows;
    c.window = 5;
    c.dim = 32;
    c.blocks = 10;
    c.lr = 0.01;
    c.optimizer = OptimizerKind::rmsprop;
    c.batch_size = 64;
    c.dropout = 0.5;
    c.l2 = 1e-4;
    TrainOptions o;
    o.patience = 20;
    o.max_epochs = 150;
    o.threads = 1;
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const auto t0 = Clock::now();
    const CompareReport r = compare_modes(splits, c, seeds, o);
    const double secs = seconds_since(t0);

    std::ostringstream d;
    for (const auto& row : r.rows) {
        d << "seed " << row.seed << " REN " << fmt(row.first_acc, 3) << " QDREN " << fmt(row.second_acc, 3) << "; ";
    }
    d << "mean delta " << fmt(r.mean_delta, 3) << " (>= " << kC4MinMeanDelta << "), QDREN wins " << r.second_wins << "/"
      << r.rows.size() << " (>= " << kC4MinWins << "), " << fmt(secs, 1) << " s";
    return {r.rows.size() == 3 && r.mean_delta >= kC4MinMeanDelta && r.second_wins >= kC4MinWins, d.str()};
}

// ---- criterion 6 ----------------------------------------------------------

Outcome overfit_probe() {
    SynthSpec spec;
    spec.seed = 3;
    spec.n_train = 10;
    spec.n_valid = 10;
    spec.n_test = 1;
    const RawSplits splits = generate_splits(spec);
    const RawSplits probe{splits.train, splits.train, {}};
    std::ostringstream d;
    bool ok = true;
    const auto t0 = Clock::now();
    for (GateMode mode : {GateMode::ren, GateMode::qdren}) {
        ModelConfig c;
        c.dim = 32;
        c.blocks = 10;
        c.mode = mode;
        const TaskData data = prepare_task(probe, c);
        TrainOptions o;
        o.patience = kC6MaxEpochs;
        o.max_epochs = kC6MaxEpochs;
        o.threads = 1;
        o.target_train_loss = kC6MaxLoss;
        const auto r = train(c, data, o);
        const double loss = r.report.epochs.back().train_loss;
        ok = ok && loss < kC6MaxLoss;
        d << to_string(mode) << " train loss " << fmt(loss) << " after " << r.report.epochs.size() << " epochs; ";
    }
    const double secs = seconds_since(t0);
    d << "(< " << kC6MaxLoss << " within " << kC6MaxEpochs << " epochs), " << fmt(secs, 1) << " s < " << kC6MaxSeconds
      << " s";
    return {ok && secs < kC6MaxSeconds, d.str()};
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    TaskOneRun task1{fs::temp_directory_path() / "qdren_acceptance_task1"};
    fs::remove_all(task1.dir);
    fs::create_directories(task1.dir);

    run_criterion(1, "gradient oracle", gradient_oracle);
    run_criterion(2, "invariant suite", invariant_suite);
    run_criterion(3, "single-fact task", [&] { return task_one(task1); });
    run_criterion(4, "question-dependence ablation", question_dependence);
    run_criterion(5, "gate focus", [&] { return gate_focus(task1); });
    run_criterion(6, "overfit probe", overfit_probe);

    fs::remove_all(task1.dir);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << " in "
              << fmt(seconds_since(t0), 1) << " s" << std::endl;
    return failures == 0 ? 0 : 1;
}
