#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdren/ops.hpp"

namespace qdren {

/// REN gates on sentence/memory/key only; QDREN adds the sentence-question
/// term to the gate.
enum class GateMode { ren, qdren };

std::string_view to_string(GateMode mode);
GateMode parse_gate_mode(std::string_view name);

/// Guard added to the norm in the reset step.
inline constexpr double kResetEpsilon = 1e-6;

/// Tape handles for the shared cell parameters. Blocks are rows: keys and
/// hiddens are [z x d] matrices, and U, V, W act on each row.
template <typename T>
struct CellVars {
    BasicVar<T> U;
    BasicVar<T> V;
    BasicVar<T> W;
    BasicVar<T> keys;
    ops::Activation phi = ops::Activation::sigmoid;
    std::optional<BasicVar<T>> slope;
    GateMode mode = GateMode::qdren;
};

/// Story-invariant products, computed once per story.
template <typename T>
struct CellCache {
    BasicVar<T> U_t;       // U^T
    BasicVar<T> key_proj;  // K V^T, row i = V k_i
};

template <typename T>
CellCache<T> make_cell_cache(const CellVars<T>& cell) {
    return {ops::transpose(cell.U), ops::matmul(cell.keys, ops::transpose(cell.V))};
}

/// g_i = sigmoid(s.h_i + s.k_i [+ s.q]) for every block -> [z].
template <typename T>
BasicVar<T> gate_values(const BasicVar<T>& hiddens, const BasicVar<T>& keys, const BasicVar<T>& s,
                        const BasicVar<T>& q, GateMode mode) {
    auto logits = ops::add(ops::matvec(hiddens, s), ops::matvec(keys, s));
    if (mode == GateMode::qdren) logits = ops::add_scalar(logits, ops::dot(s, q));
    return ops::sigmoid(logits);
}

/// phi(U h_i + V k_i + W s) for every block -> [z x d].
template <typename T>
BasicVar<T> candidate_values(const CellVars<T>& cell, const CellCache<T>& cache, const BasicVar<T>& hiddens,
                             const BasicVar<T>& s) {
    auto pre = ops::add_row(ops::add(ops::matmul(hiddens, cache.U_t), cache.key_proj), ops::matvec(cell.W, s));
    return ops::activation(cell.phi, pre, cell.slope);
}

/// h_i <- (h_i + g_i * cand_i) / (|h_i + g_i * cand_i| + eps).
template <typename T>
BasicVar<T> apply_update(const BasicVar<T>& hiddens, const BasicVar<T>& gates, const BasicVar<T>& candidates) {
    auto updated = ops::add(hiddens, ops::scale_rows(candidates, gates));
    return ops::normalize_rows(updated, static_cast<T>(kResetEpsilon));
}

template <typename T>
struct CellStep {
    BasicVar<T> hiddens;
    BasicVar<T> gates;
};

template <typename T>
CellStep<T> cell_step(const CellVars<T>& cell, const CellCache<T>& cache, const BasicVar<T>& hiddens,
                      const BasicVar<T>& s, const BasicVar<T>& q) {
    auto gates = gate_values(hiddens, cell.keys, s, q, cell.mode);
    auto cand = candidate_values(cell, cache, hiddens, s);
    return {apply_update(hiddens, gates, cand), gates};
}

template <typename T>
struct CellRun {
    BasicVar<T> hiddens;
    BasicTensor<T> trace;  // [z x t], column t = gates at step t
};

/// Folds cell_step over the sentence vectors in order.
template <typename T>
CellRun<T> run_cell(const CellVars<T>& cell, const BasicVar<T>& initial, std::span<const BasicVar<T>> sentences,
                    const BasicVar<T>& q) {
    if (sentences.empty()) throw ArgumentError("run_story: a story needs at least one sentence");
    const auto cache = make_cell_cache(cell);
    const std::size_t z = initial.value().rows();
    BasicTensor<T> trace(Shape{z, sentences.size()});
    BasicVar<T> h = initial;
    for (std::size_t t = 0; t < sentences.size(); ++t) {
        auto step = cell_step(cell, cache, h, sentences[t], q);
        const auto& g = step.gates.value();
        for (std::size_t i = 0; i < z; ++i) trace(i, t) = g[i];
        h = step.hiddens;
    }
    return {h, std::move(trace)};
}

// Value-level API over the same code path, for inspection and tests.

struct CellParams {
    Tensor U;
    Tensor V;
    Tensor W;
    Tensor keys;  // [z x d]
    ops::Activation phi = ops::Activation::sigmoid;
    float slope = 0.25f;
    GateMode mode = GateMode::qdren;
};

struct MemoryState {
    Tensor hiddens;  // [z x d]
};

struct GateTrace {
    Tensor gates;  // [z x t]
    std::vector<std::string> sentence_labels;
    std::string question;
};

/// Gate of a single block.
float gate(const Tensor& s, const Tensor& h, const Tensor& key, const Tensor& q, GateMode mode);

/// Candidate memory of a single block.
Tensor candidate(const Tensor& h, const Tensor& key, const Tensor& s, const CellParams& params);

/// New-memory plus reset for given gates [z] and candidates [z x d].
MemoryState apply_update(const MemoryState& state, const Tensor& gates, const Tensor& candidates);

struct StepOutput {
    MemoryState state;
    Tensor gates;  // [z]
};

StepOutput step(const MemoryState& state, const Tensor& s, const Tensor& q, const CellParams& params);

struct StoryOutput {
    MemoryState state;
    GateTrace trace;
};

StoryOutput run_story(const MemoryState& initial, std::span<const Tensor> sentences, const Tensor& q,
                      const CellParams& params);

}  // namespace qdren
