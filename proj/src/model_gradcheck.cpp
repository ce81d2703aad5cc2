#include "qdren/model_gradcheck.hpp"

#include <string>

namespace qdren {

namespace {

constexpr std::size_t kVocab = 12;
constexpr std::size_t kSentenceLen = 4;
constexpr std::size_t kQuestionLen = 3;

struct Fixture {
    ModelConfig config;
    ModelDims dims;
    ModelInput input;
    ParamSet params;
    std::size_t draws = 0;
    double kink_distance = 0.0;
};

Fixture make_fixture(const ModelGradcheckSpec& spec) {
    if (spec.dim == 0 || spec.dim > kGradcheckMaxDim) {
        throw UsageError("gradcheck needs 1 <= dim <= " + std::to_string(kGradcheckMaxDim) + ", got " +
                         std::to_string(spec.dim));
    }
    if (spec.blocks == 0 || spec.blocks > kGradcheckMaxBlocks) {
        throw UsageError("gradcheck needs 1 <= blocks <= " + std::to_string(kGradcheckMaxBlocks) + ", got " +
                         std::to_string(spec.blocks));
    }
    if (spec.sentences == 0) throw UsageError("gradcheck needs at least one sentence");

    Fixture f;
    f.config.dim = spec.dim;
    f.config.blocks = spec.blocks;
    f.config.mode = spec.mode;
    f.config.input_style = spec.style;
    f.config.window = spec.window;
    f.config.phi_cell = spec.phi;
    f.config.phi_out = spec.phi;
    f.config.l2 = spec.l2;
    f.config.seed = spec.seed;
    f.config.validate();

    Rng rng = Rng(spec.seed).split(7);
    auto token = [&rng] { return TokenId{2} + rng.below(kVocab - 2); };
    const std::size_t step_len = spec.style == InputStyle::windows ? spec.window : kSentenceLen;
    for (std::size_t s = 0; s < spec.sentences; ++s) {
        std::vector<TokenId> step;
        // Trailing PAD in the first step exercises the frozen row.
        for (std::size_t i = 0; i < step_len; ++i) step.push_back(s == 0 && i + 1 == step_len ? kPadId : token());
        f.input.steps.push_back(std::move(step));
    }
    const std::size_t q_len = spec.style == InputStyle::windows ? spec.window : kQuestionLen;
    for (std::size_t i = 0; i < q_len; ++i) f.input.question.push_back(token());

    f.dims.vocab_size = kVocab;
    f.dims.max_sentence_len = step_len;
    f.dims.max_question_len = q_len;
    if (spec.style == InputStyle::windows) {
        // Candidate restriction over a subset of answer rows.
        f.dims.answer_ids = {2, 3, 4, 5, 6};
        f.input.candidate_rows = {0, 2, 3};
        f.input.target = 1;
    } else {
        for (TokenId id = 0; id < kVocab; ++id) f.dims.answer_ids.push_back(id);
        f.input.target = 4;
    }
    f.input.answer = f.dims.answer_ids[f.input.candidate_rows.empty() ? f.input.target
                                                                       : f.input.candidate_rows[f.input.target]];

    constexpr std::size_t kMaxDraws = 256;
    for (std::size_t draw = 0; draw < kMaxDraws; ++draw) {
        Rng prng = rng.split(draw);
        f.params = init_params(f.config, f.dims, prng);
        for (auto name : {param_names::embedding, param_names::U, param_names::V, param_names::W, param_names::keys,
                          param_names::R, param_names::H}) {
            for (float& v : f.params.at(std::string(name)).data()) {
                v = static_cast<float>(prng.uniform(-spec.init_scale, spec.init_scale));
            }
        }
        for (float& v : f.params.at(std::string(param_names::embedding)).row(kPadId)) v = 0.0f;
        // Masks start at ones; move them off that point so their gradients are generic.
        for (auto name : {param_names::sentence_mask, param_names::question_mask}) {
            for (float& v : f.params.at(std::string(name)).data()) v = static_cast<float>(prng.uniform(0.5, 1.5));
        }
        f.draws = draw + 1;
        const auto params = f.params.cast<double>();
        BasicTape<double> tape;
        forward(tape, params, f.config, f.input);
        f.kink_distance = tape.min_kink_distance();
        if (f.kink_distance >= spec.kink_margin) return f;
    }
    throw NumericError("gradcheck: no parameter draw kept PReLU inputs " + std::to_string(spec.kink_margin) +
                       " away from zero");
    return f;
}

template <typename T>
ModelGradcheckResult run(const ModelGradcheckSpec& spec, std::function<void(std::vector<std::vector<double>>&)> tamper) {
    const Fixture f = make_fixture(spec);
    BasicParamSet<T> params = f.params.template cast<T>();
    const std::size_t embedding = params.index_of(std::string(param_names::embedding));
    const std::size_t d = f.config.dim;

    GradCheckOptions options;
    options.epsilon = spec.epsilon;
    options.skip = [embedding, d](std::size_t p, std::size_t coord) { return p == embedding && coord < d * (kPadId + 1); };
    options.tamper = std::move(tamper);
    LossBuilder<T> build = [&f](BasicTape<T>& tape, const BasicParamSet<T>& p) {
        auto pass = forward(tape, p, f.config, f.input);
        return forward_loss(pass, f.config, f.input);
    };
    return {spec, finite_diff_check(build, params, options), f.draws, f.kink_distance};
}

}  // namespace

ModelGradcheckResult model_gradcheck(const ModelGradcheckSpec& spec,
                                     std::function<void(std::vector<std::vector<double>>&)> tamper) {
    return run<double>(spec, std::move(tamper));
}

ModelGradcheckResult model_gradcheck_float(const ModelGradcheckSpec& spec) { return run<float>(spec, {}); }

std::vector<ModelGradcheckSpec> gradcheck_matrix(const ModelGradcheckSpec& base) {
    std::vector<ModelGradcheckSpec> out;
    for (GateMode mode : {GateMode::ren, GateMode::qdren}) {
        for (InputStyle style : {InputStyle::sentences, InputStyle::windows}) {
            for (ops::Activation phi : {ops::Activation::sigmoid, ops::Activation::prelu}) {
                ModelGradcheckSpec s = base;
                s.mode = mode;
                s.style = style;
                s.phi = phi;
                out.push_back(s);
            }
        }
    }
    return out;
}

}  // namespace qdren
