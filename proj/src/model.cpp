#include "qdren/model.hpp"

#include <algorithm>
#include <string>

namespace qdren {

std::string_view to_string(InputStyle style) { return style == InputStyle::sentences ? "sentences" : "windows"; }

InputStyle parse_input_style(std::string_view name) {
    if (name == "sentences" || name == "sent") return InputStyle::sentences;
    if (name == "windows" || name == "wind") return InputStyle::windows;
    throw ArgumentError("unknown input style '" + std::string(name) + "'");
}

ops::Activation ModelConfig::output_activation() const {
    if (phi_out) return *phi_out;
    return input_style == InputStyle::windows ? ops::Activation::sigmoid : ops::Activation::prelu;
}

void ModelConfig::validate() const {
    if (dim == 0) throw ConfigError("dim must be positive");
    if (blocks == 0) throw ConfigError("blocks must be positive");
    if (input_style == InputStyle::windows && (window == 0 || window % 2 == 0)) {
        throw ConfigError("window must be odd and positive, got " + std::to_string(window));
    }
    if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
    if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
    if (batch_size == 0) throw ConfigError("batch must be positive");
}

namespace {

Tensor uniform_tensor(Shape shape, Rng& rng, double bound) {
    Tensor t(std::move(shape));
    for (float& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
    return t;
}

std::string join_tokens(const std::vector<TokenId>& ids, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += ids[i] < vocab.size() ? vocab.token(ids[i]) : std::string(kUnkToken);
    }
    return out;
}

}  // namespace

ParamSet init_params(const ModelConfig& config, const ModelDims& dims, Rng& rng) {
    config.validate();
    if (dims.vocab_size < 3) throw ConfigError("vocabulary must hold at least one token besides PAD and UNK");
    if (dims.max_sentence_len == 0 || dims.max_question_len == 0) throw ConfigError("mask lengths must be positive");
    if (dims.answer_ids.size() < 2) throw ConfigError("at least two answer classes are required");
    constexpr double bound = 0.1;
    const std::size_t d = config.dim;
    using namespace param_names;

    ParamSet p;
    Tensor E = uniform_tensor({dims.vocab_size, d}, rng, bound);
    for (float& v : E.row(kPadId)) v = 0.0f;
    p.add(std::string(embedding), std::move(E));
    p.add(std::string(sentence_mask), Tensor({dims.max_sentence_len, d}, 1.0f));
    p.add(std::string(question_mask), Tensor({dims.max_question_len, d}, 1.0f));
    p.add(std::string(param_names::U), uniform_tensor({d, d}, rng, bound));
    p.add(std::string(param_names::V), uniform_tensor({d, d}, rng, bound));
    p.add(std::string(param_names::W), uniform_tensor({d, d}, rng, bound));
    p.add(std::string(keys), uniform_tensor({config.blocks, d}, rng, bound));
    p.add(std::string(param_names::R), uniform_tensor({dims.answer_ids.size(), d}, rng, bound));
    p.add(std::string(param_names::H), uniform_tensor({d, d}, rng, bound));
    if (config.phi_cell == ops::Activation::prelu) p.add(std::string(cell_slope), Tensor::scalar(0.25f));
    if (config.output_activation() == ops::Activation::prelu) p.add(std::string(output_slope), Tensor::scalar(0.25f));
    return p;
}

Model make_model(const ModelConfig& config, const ModelDims& dims) {
    Rng rng = Rng(config.seed).split(1);
    return {config, dims, init_params(config, dims, rng)};
}

ModelInput prepare_input(const Story& story, const ModelConfig& config, const ModelDims& dims,
                         const Vocabulary& vocab) {
    auto row_of = [&](TokenId id) -> std::size_t {
        auto it = std::lower_bound(dims.answer_ids.begin(), dims.answer_ids.end(), id);
        if (it == dims.answer_ids.end() || *it != id) {
            throw EncodingError("token '" + (id < vocab.size() ? vocab.token(id) : std::to_string(id)) +
                                "' is not in the model's answer vocabulary");
        }
        return static_cast<std::size_t>(it - dims.answer_ids.begin());
    };

    ModelInput in;
    in.answer = story.answer;
    const std::size_t answer_row = row_of(story.answer);
    if (story.candidates.empty()) {
        in.target = answer_row;
    } else {
        for (TokenId c : story.candidates) in.candidate_rows.push_back(row_of(c));
        std::sort(in.candidate_rows.begin(), in.candidate_rows.end());
        in.candidate_rows.erase(std::unique(in.candidate_rows.begin(), in.candidate_rows.end()),
                                in.candidate_rows.end());
        auto it = std::find(in.candidate_rows.begin(), in.candidate_rows.end(), answer_row);
        if (it == in.candidate_rows.end()) throw FormatError("answer is not among the candidates");
        in.target = static_cast<std::size_t>(it - in.candidate_rows.begin());
    }

    if (config.input_style == InputStyle::sentences) {
        in.steps = story.sentences;
        in.question = story.question;
    } else {
        std::vector<TokenId> text;
        for (const auto& s : story.sentences) text.insert(text.end(), s.begin(), s.end());
        std::vector<std::size_t> positions;
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (vocab.is_entity(text[i])) positions.push_back(i);
        }
        in.steps = build_windows(std::span<const TokenId>(text), std::span<const std::size_t>(positions),
                                 config.window, kPadId);
        const auto placeholder = vocab.find(kPlaceholderToken);
        if (!placeholder) throw FormatError("vocabulary has no @placeholder token");
        in.question =
            build_question_window(std::span<const TokenId>(story.question), *placeholder, config.window, kPadId);
    }
    if (in.steps.empty()) {
        throw EncodingError(config.input_style == InputStyle::windows ? "story has no entity markers to window"
                                                                      : "story has no sentences");
    }
    return in;
}

TokenId logit_token(const ModelDims& dims, const ModelInput& input, std::size_t index) {
    const std::size_t row = input.candidate_rows.empty() ? index : input.candidate_rows.at(index);
    return dims.answer_ids.at(row);
}

Prediction predict_story(const Model& model, const ModelInput& input) {
    Tape tape;
    auto pass = forward(tape, model.params, model.config, input);
    Prediction out;
    out.logits = pass.logits.value();
    const auto values = out.logits.data();
    out.index = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
    out.token = logit_token(model.dims, input, out.index);
    out.cross_entropy = ops::cross_entropy(pass.logits, input.target).value().item();
    out.gates = std::move(pass.trace);
    return out;
}

GateTrace gate_trace(const Model& model, const ModelInput& input, const Vocabulary& vocab) {
    Tape tape;
    auto pass = forward(tape, model.params, model.config, input);
    GateTrace trace{std::move(pass.trace), {}, join_tokens(input.question, vocab)};
    for (const auto& step : input.steps) trace.sentence_labels.push_back(join_tokens(step, vocab));
    return trace;
}

void fit_lengths(ModelDims& dims, std::span<const ModelInput> inputs) {
    for (const auto& in : inputs) {
        for (const auto& s : in.steps) dims.max_sentence_len = std::max(dims.max_sentence_len, s.size());
        dims.max_question_len = std::max(dims.max_question_len, in.question.size());
    }
    dims.max_sentence_len = std::max<std::size_t>(dims.max_sentence_len, 1);
    dims.max_question_len = std::max<std::size_t>(dims.max_question_len, 1);
}

}  // namespace qdren
