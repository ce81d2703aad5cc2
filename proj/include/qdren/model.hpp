#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdren/encoding.hpp"
#include "qdren/memory_cell.hpp"
#include "qdren/ops.hpp"
#include "qdren/optim.hpp"
#include "qdren/output_head.hpp"
#include "qdren/params.hpp"
#include "qdren/rng.hpp"
#include "qdren/vocab.hpp"

namespace qdren {

/// How a story becomes memory steps: one step per sentence, or one step per
/// entity-marker window of `window` tokens.
enum class InputStyle { sentences, windows };

std::string_view to_string(InputStyle style);
InputStyle parse_input_style(std::string_view name);

struct ModelConfig {
    std::size_t dim = 100;
    std::size_t blocks = 20;
    GateMode mode = GateMode::qdren;
    InputStyle input_style = InputStyle::sentences;
    std::size_t window = 5;
    ops::Activation phi_cell = ops::Activation::prelu;
    /// Unset means prelu for sentences and sigmoid for windows.
    std::optional<ops::Activation> phi_out;
    double l2 = 0.0;
    bool l2_embedding = false;
    double dropout = 0.0;
    double lr = 0.001;
    double clip_norm = 40.0;
    std::size_t batch_size = 32;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::uint64_t seed = 1;

    ops::Activation output_activation() const;
    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

struct ModelDims {
    std::size_t vocab_size = 0;
    std::size_t max_sentence_len = 0;
    std::size_t max_question_len = 0;
    std::vector<TokenId> answer_ids;  // vocabulary id of each row of R, ascending
};

namespace param_names {
inline constexpr std::string_view embedding = "embedding";
inline constexpr std::string_view sentence_mask = "sentence_mask";
inline constexpr std::string_view question_mask = "question_mask";
inline constexpr std::string_view U = "U";
inline constexpr std::string_view V = "V";
inline constexpr std::string_view W = "W";
inline constexpr std::string_view keys = "keys";
inline constexpr std::string_view R = "R";
inline constexpr std::string_view H = "H";
inline constexpr std::string_view cell_slope = "cell_slope";
inline constexpr std::string_view output_slope = "output_slope";
}  // namespace param_names

/// Indices of the named parameters inside a parameter set.
struct ParamLayout {
    std::size_t embedding, sentence_mask, question_mask, U, V, W, keys, R, H;
    std::optional<std::size_t> cell_slope, output_slope;

    template <typename T>
    static ParamLayout of(const BasicParamSet<T>& p) {
        namespace n = param_names;
        ParamLayout l{};
        l.embedding = p.index_of(std::string(n::embedding));
        l.sentence_mask = p.index_of(std::string(n::sentence_mask));
        l.question_mask = p.index_of(std::string(n::question_mask));
        l.U = p.index_of(std::string(n::U));
        l.V = p.index_of(std::string(n::V));
        l.W = p.index_of(std::string(n::W));
        l.keys = p.index_of(std::string(n::keys));
        l.R = p.index_of(std::string(n::R));
        l.H = p.index_of(std::string(n::H));
        l.cell_slope = p.find(std::string(n::cell_slope));
        l.output_slope = p.find(std::string(n::output_slope));
        return l;
    }
};

/// E, U, V, W, keys, R, H ~ U(-0.1, 0.1); masks all ones; PAD row of E zero;
/// PReLU slopes 0.25.
ParamSet init_params(const ModelConfig& config, const ModelDims& dims, Rng& rng);

struct Model {
    ModelConfig config;
    ModelDims dims;
    ParamSet params;
};

/// Initialises parameters from config.seed.
Model make_model(const ModelConfig& config, const ModelDims& dims);

/// A story as the network consumes it.
struct ModelInput {
    std::vector<std::vector<TokenId>> steps;  // sentences, or windows
    std::vector<TokenId> question;
    std::vector<std::size_t> candidate_rows;  // rows of R scored; empty = all rows
    std::size_t target = 0;                   // index of the answer among the scored rows
    TokenId answer = kUnkId;
};

/// Builds memory steps per the configured input style. Throws EncodingError
/// when the answer has no row in R or a story has nothing to read.
ModelInput prepare_input(const Story& story, const ModelConfig& config, const ModelDims& dims,
                         const Vocabulary& vocab);

/// Vocabulary id behind logit `index` of `input`.
TokenId logit_token(const ModelDims& dims, const ModelInput& input, std::size_t index);

template <typename T>
struct ForwardPass {
    BasicVar<T> logits;
    BasicVar<T> question;
    BasicVar<T> hiddens;
    BasicTensor<T> trace;  // gates [z x steps]
    std::vector<BasicVar<T>> regularized;
};

/// Input encoder -> dynamic memory -> output module. `dropout` is applied to
/// the pooled memory vector and needs `rng` when positive.
template <typename T>
ForwardPass<T> forward(BasicTape<T>& tape, const BasicParamSet<T>& params, const ModelConfig& config,
                       const ModelInput& input, double dropout_rate = 0.0, Rng* rng = nullptr) {
    const auto layout = ParamLayout::of(params);
    auto E = tape.parameter(params, layout.embedding);
    auto sentence_mask = tape.parameter(params, layout.sentence_mask);
    auto question_mask = tape.parameter(params, layout.question_mask);

    CellVars<T> cell;
    cell.U = tape.parameter(params, layout.U);
    cell.V = tape.parameter(params, layout.V);
    cell.W = tape.parameter(params, layout.W);
    cell.keys = tape.parameter(params, layout.keys);
    cell.phi = config.phi_cell;
    cell.mode = config.mode;
    if (config.phi_cell == ops::Activation::prelu) {
        if (!layout.cell_slope) throw ArgumentError("prelu cell activation needs a cell_slope parameter");
        cell.slope = tape.parameter(params, *layout.cell_slope);
    }

    std::vector<BasicVar<T>> sentences;
    sentences.reserve(input.steps.size());
    for (const auto& step : input.steps) sentences.push_back(encode_sentence(E, sentence_mask, std::span(step)));
    auto q = encode_question(E, question_mask, std::span(input.question));

    // Memories start at their keys.
    auto run = run_cell(cell, cell.keys, std::span<const BasicVar<T>>(sentences), q);

    auto p = attention(q, run.hiddens);
    auto u = pool(p, run.hiddens);
    if (dropout_rate > 0.0) {
        if (!rng) throw ArgumentError("dropout needs a random generator");
        u = dropout(u, dropout_rate, *rng);
    }

    auto H = tape.parameter(params, layout.H);
    auto R = tape.parameter(params, layout.R);
    auto scored = input.candidate_rows.empty() ? R : ops::gather_rows(R, std::span(input.candidate_rows));
    const auto phi_out = config.output_activation();
    std::optional<BasicVar<T>> out_slope;
    if (phi_out == ops::Activation::prelu) {
        if (!layout.output_slope) throw ArgumentError("prelu output activation needs an output_slope parameter");
        out_slope = tape.parameter(params, *layout.output_slope);
    }
    auto logits = predict(q, u, H, scored, phi_out, out_slope);

    ForwardPass<T> pass{logits, q, run.hiddens, std::move(run.trace), {}};
    pass.regularized = {cell.U, cell.V, cell.W, H, R, cell.keys, sentence_mask, question_mask};
    if (config.l2_embedding) pass.regularized.push_back(E);
    return pass;
}

/// Cross-entropy of the pass against input.target plus config.l2 times the
/// squared norms of the regularised parameters.
template <typename T>
BasicVar<T> forward_loss(const ForwardPass<T>& pass, const ModelConfig& config, const ModelInput& input) {
    return objective(pass.logits, input.target, std::span<const BasicVar<T>>(pass.regularized),
                     static_cast<T>(config.l2));
}

struct Prediction {
    Tensor logits;
    std::size_t index = 0;  // argmax; ties go to the lowest vocabulary id
    TokenId token = kUnkId;
    double cross_entropy = 0.0;
    Tensor gates;
};

/// Deterministic evaluation-mode pass (no dropout).
Prediction predict_story(const Model& model, const ModelInput& input);

/// Gate activations for one story, labelled with the step and question text.
GateTrace gate_trace(const Model& model, const ModelInput& input, const Vocabulary& vocab);

/// Longest sentence / question the dims must accommodate for these stories.
void fit_lengths(ModelDims& dims, std::span<const ModelInput> inputs);

}  // namespace qdren
