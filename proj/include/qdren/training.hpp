#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdren/babi.hpp"
#include "qdren/model.hpp"
#include "qdren/vocab.hpp"

namespace qdren {

/// Vocabulary, model dimensions and prepared inputs for one configuration.
struct TaskData {
    Vocabulary vocab;
    ModelDims dims;
    std::vector<ModelInput> train;
    std::vector<ModelInput> valid;
    std::vector<ModelInput> test;
};

/// Builds the vocabulary from the training split, the answer rows (every
/// candidate/answer token when stories carry candidates, else the whole
/// vocabulary) and mask lengths covering all splits.
TaskData prepare_task(const RawSplits& splits, const ModelConfig& config, std::size_t vocab_max = 50000);

/// Prepares stories against an existing model's vocabulary and dims.
std::vector<ModelInput> prepare_split(std::span<const RawStory> stories, const ModelConfig& config,
                                      const ModelDims& dims, const Vocabulary& vocab);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
    std::string stop_reason;

    /// "epoch,train_loss,val_loss,val_acc" then one line per epoch.
    void write_csv(std::ostream& out) const;
};

struct TrainOptions {
    std::size_t patience = 50;
    std::size_t max_epochs = 200;
    /// Evaluation parallelism; 0 reads QDREN_THREADS, else hardware threads.
    std::size_t threads = 0;
    /// Stop once an epoch's mean training loss falls below this.
    std::optional<double> target_train_loss;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    Model model;  // parameters of the best validation epoch
    TrainReport report;
};

/// Mini-batch training: per batch, forward, loss, backward, mean over the
/// batch, clip, optimizer step. Keeps the parameters of the best validation
/// accuracy and stops after `patience` epochs without improvement. Throws
/// NumericError on a non-finite loss or gradient.
TrainResult train(const ModelConfig& config, const TaskData& data, const TrainOptions& options = {});

struct EvalResult {
    double accuracy = 0.0;
    double error = 1.0;
    double loss = 0.0;  // mean cross-entropy
    std::size_t correct = 0;
    std::size_t total = 0;
    std::vector<TokenId> predictions;
};

EvalResult evaluate(const Model& model, std::span<const ModelInput> split, std::size_t threads = 0);

/// Worker count for evaluation: `requested` if non-zero, else QDREN_THREADS,
/// else the hardware concurrency.
std::size_t resolve_threads(std::size_t requested);

struct SearchSpace {
    std::vector<double> lr{0.01, 0.001, 0.0001};
    std::vector<std::size_t> blocks{20, 30, 40, 50};
    std::vector<double> l2{0.0, 0.001, 0.0001};
    std::vector<double> dropout{0.3, 0.5, 0.7};
    std::vector<std::size_t> window{};
    std::vector<OptimizerKind> optimizer{};
    std::vector<std::size_t> batch{};

    void validate() const;
};

struct Trial {
    std::size_t index = 0;
    ModelConfig config;
    double val_acc = 0.0;
    double val_loss = 0.0;
    std::size_t best_epoch = 0;
};

/// `budget` independent uniform draws from `space` (with replacement) on top
/// of `base`, each trained on the first `subsample` training stories and
/// validated on the full validation split. Sorted by validation accuracy,
/// ties by trial index.
std::vector<Trial> random_search(const SearchSpace& space, const ModelConfig& base, const RawSplits& splits,
                                 std::size_t budget, std::size_t subsample, std::uint64_t seed,
                                 const TrainOptions& options = {}, std::size_t vocab_max = 50000);

struct CompareRow {
    std::uint64_t seed = 0;
    double first_acc = 0.0;
    double second_acc = 0.0;
    double delta = 0.0;  // second - first
};

struct CompareReport {
    GateMode first = GateMode::ren;
    GateMode second = GateMode::qdren;
    std::vector<CompareRow> rows;
    double mean_delta = 0.0;
    std::size_t second_wins = 0;
};

/// Trains both modes on identical data and seeds and compares test accuracy.
CompareReport compare_modes(const RawSplits& splits, const ModelConfig& shared, std::span<const std::uint64_t> seeds,
                            const TrainOptions& options = {}, GateMode first = GateMode::ren,
                            GateMode second = GateMode::qdren, std::size_t vocab_max = 50000);

}  // namespace qdren
