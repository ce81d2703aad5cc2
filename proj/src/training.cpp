#include "qdren/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace qdren {

namespace {

std::vector<Story> encode_all(std::span<const RawStory> raw, const Vocabulary& vocab) {
    std::vector<Story> out;
    out.reserve(raw.size());
    for (const auto& r : raw) out.push_back(encode_story(r, vocab));
    return out;
}

/// Runs fn(i) for i in [0, n) over up to `threads` workers.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

TaskData prepare_task(const RawSplits& splits, const ModelConfig& config, std::size_t vocab_max) {
    config.validate();
    TaskData data;
    data.vocab = build_vocab(std::span<const RawStory>(splits.train), vocab_max);
    const auto train = encode_all(splits.train, data.vocab);
    const auto valid = encode_all(splits.valid, data.vocab);
    const auto test = encode_all(splits.test, data.vocab);

    data.dims.vocab_size = data.vocab.size();
    bool has_candidates = false;
    std::set<TokenId> answers;
    for (const auto* split : {&train, &valid, &test}) {
        for (const auto& s : *split) {
            has_candidates = has_candidates || !s.candidates.empty();
            answers.insert(s.answer);
            answers.insert(s.candidates.begin(), s.candidates.end());
        }
    }
    if (has_candidates) {
        data.dims.answer_ids.assign(answers.begin(), answers.end());
    } else {
        data.dims.answer_ids.resize(data.vocab.size());
        std::iota(data.dims.answer_ids.begin(), data.dims.answer_ids.end(), TokenId{0});
    }

    auto prepare = [&](const std::vector<Story>& stories) {
        std::vector<ModelInput> out;
        out.reserve(stories.size());
        for (const auto& s : stories) out.push_back(prepare_input(s, config, data.dims, data.vocab));
        return out;
    };
    data.train = prepare(train);
    data.valid = prepare(valid);
    data.test = prepare(test);
    for (const auto* split : {&data.train, &data.valid, &data.test}) fit_lengths(data.dims, *split);
    return data;
}

std::vector<ModelInput> prepare_split(std::span<const RawStory> stories, const ModelConfig& config,
                                      const ModelDims& dims, const Vocabulary& vocab) {
    std::vector<ModelInput> out;
    out.reserve(stories.size());
    for (const auto& raw : stories) out.push_back(prepare_input(encode_story(raw, vocab), config, dims, vocab));
    return out;
}

void TrainReport::write_csv(std::ostream& out) const {
    out << "epoch,train_loss,val_loss,val_acc\n";
    for (const auto& e : epochs) {
        std::ostringstream line;
        line.precision(9);
        line << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_acc;
        out << line.str() << '\n';
    }
}

std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("QDREN_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

EvalResult evaluate(const Model& model, std::span<const ModelInput> split, std::size_t threads) {
    EvalResult result;
    result.total = split.size();
    result.predictions.assign(split.size(), kUnkId);
    if (split.empty()) return result;
    std::vector<double> losses(split.size());
    parallel_for(split.size(), resolve_threads(threads), [&](std::size_t i) {
        const auto p = predict_story(model, split[i]);
        result.predictions[i] = p.token;
        losses[i] = p.cross_entropy;
    });
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (result.predictions[i] == split[i].answer) ++result.correct;
    }
    result.accuracy = static_cast<double>(result.correct) / static_cast<double>(result.total);
    result.error = 1.0 - result.accuracy;
    result.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(split.size());
    return result;
}

TrainResult train(const ModelConfig& config, const TaskData& data, const TrainOptions& options) {
    config.validate();
    if (data.train.empty()) throw ArgumentError("training split is empty");
    if (data.valid.empty()) throw ArgumentError("validation split is empty");

    TrainResult result{make_model(config, data.dims), {}};
    Model& model = result.model;
    const Rng root(config.seed);
    Rng shuffle_rng = root.split(2);
    Rng dropout_rng = root.split(3);
    Optimizer optimizer(config.optimizer, model.params);
    const auto layout = ParamLayout::of(model.params);

    ParamSet best = model.params;
    double best_acc = -1.0;
    std::size_t since_best = 0;
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    Gradients grads(model.params);

    for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            grads.zero();
            for (std::size_t k = begin; k < end; ++k) {
                const auto& input = data.train[order[k]];
                Tape tape;
                auto pass = forward(tape, model.params, config, input, config.dropout, &dropout_rng);
                auto loss = forward_loss(pass, config, input);
                const double value = loss.value().item();
                if (!std::isfinite(value)) {
                    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(batch_index) + " (gradient norm so far " +
                                       std::to_string(grads.global_norm()) + ")");
                }
                tape.backward(loss, grads);
                loss_sum += value;
            }
            grads.scale(1.0f / static_cast<float>(end - begin));
            for (float& g : grads[layout.embedding].row(kPadId)) g = 0.0f;
            if (!grads.all_finite()) {
                throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index) + " (norm " + std::to_string(grads.global_norm()) +
                                   ")");
            }
            clip_gradients(grads, config.clip_norm);
            optimizer.step(model.params, grads, config.lr);
        }

        const EvalResult val = evaluate(model, data.valid, options.threads);
        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = loss_sum / static_cast<double>(order.size());
        record.val_loss = val.loss;
        record.val_acc = val.accuracy;
        record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.report.epochs.push_back(record);
        if (options.on_epoch) options.on_epoch(record);

        if (val.accuracy > best_acc) {
            best_acc = val.accuracy;
            best = model.params;
            result.report.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (options.target_train_loss && record.train_loss < *options.target_train_loss) {
            result.report.stop_reason = "training loss below target";
            break;
        }
        if (since_best >= options.patience) {
            result.report.stop_reason = "no validation improvement for " + std::to_string(options.patience) +
                                        " epochs";
            break;
        }
    }
    if (result.report.stop_reason.empty()) result.report.stop_reason = "reached max epochs";
    result.report.best_val_acc = best_acc;
    model.params = std::move(best);
    return result;
}

void SearchSpace::validate() const {
    if (lr.empty() || blocks.empty() || l2.empty() || dropout.empty()) {
        throw ArgumentError("search space lists must not be empty");
    }
}

std::vector<Trial> random_search(const SearchSpace& space, const ModelConfig& base, const RawSplits& splits,
                                 std::size_t budget, std::size_t subsample, std::uint64_t seed,
                                 const TrainOptions& options, std::size_t vocab_max) {
    if (budget == 0) throw ArgumentError("search budget must be at least 1");
    space.validate();
    const Rng root(seed);
    std::vector<Trial> trials(budget);
    for (std::size_t t = 0; t < budget; ++t) {
        Rng r = root.split(t);
        auto pick = [&r](const auto& list) { return list[r.below(list.size())]; };
        ModelConfig c = base;
        c.lr = pick(space.lr);
        c.blocks = pick(space.blocks);
        c.l2 = pick(space.l2);
        c.dropout = pick(space.dropout);
        if (!space.window.empty()) c.window = pick(space.window);
        if (!space.optimizer.empty()) c.optimizer = pick(space.optimizer);
        if (!space.batch.empty()) c.batch_size = pick(space.batch);
        c.seed = r.next();
        trials[t].index = t;
        trials[t].config = c;
    }

    RawSplits sub = splits;
    if (subsample > 0 && subsample < sub.train.size()) sub.train.resize(subsample);

    const std::size_t workers = std::min(resolve_threads(options.threads), budget);
    TrainOptions inner = options;
    inner.threads = workers > 1 ? 1 : options.threads;
    inner.on_epoch = nullptr;
    parallel_for(budget, workers, [&](std::size_t t) {
        const TaskData data = prepare_task(sub, trials[t].config, vocab_max);
        auto run = train(trials[t].config, data, inner);
        const auto val = evaluate(run.model, data.valid, inner.threads);
        trials[t].val_acc = val.accuracy;
        trials[t].val_loss = val.loss;
        trials[t].best_epoch = run.report.best_epoch;
    });
    std::stable_sort(trials.begin(), trials.end(),
                     [](const Trial& a, const Trial& b) { return a.val_acc > b.val_acc; });
    return trials;
}

CompareReport compare_modes(const RawSplits& splits, const ModelConfig& shared, std::span<const std::uint64_t> seeds,
                            const TrainOptions& options, GateMode first, GateMode second, std::size_t vocab_max) {
    if (seeds.size() < 3) throw ArgumentError("compare_modes needs at least 3 seeds");
    if (splits.test.empty()) throw ArgumentError("compare_modes needs a test split");
    const TaskData data = prepare_task(splits, shared, vocab_max);
    CompareReport report;
    report.first = first;
    report.second = second;
    for (std::uint64_t seed : seeds) {
        CompareRow row;
        row.seed = seed;
        for (int which = 0; which < 2; ++which) {
            ModelConfig c = shared;
            c.seed = seed;
            c.mode = which == 0 ? first : second;
            const auto run = train(c, data, options);
            const double acc = evaluate(run.model, data.test, options.threads).accuracy;
            (which == 0 ? row.first_acc : row.second_acc) = acc;
        }
        row.delta = row.second_acc - row.first_acc;
        if (row.second_acc > row.first_acc) ++report.second_wins;
        report.mean_delta += row.delta;
        report.rows.push_back(row);
    }
    report.mean_delta /= static_cast<double>(report.rows.size());
    return report;
}

}  // namespace qdren
