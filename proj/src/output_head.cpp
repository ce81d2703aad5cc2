#include "qdren/output_head.hpp"

namespace qdren {

Tensor attention(const Tensor& q, const Tensor& hiddens) {
    Tape tape;
    return attention(tape.constant(q), tape.constant(hiddens)).value();
}

Tensor pool(const Tensor& p, const Tensor& hiddens) {
    Tape tape;
    return pool(tape.constant(p), tape.constant(hiddens)).value();
}

Tensor predict(const Tensor& q, const Tensor& u, const OutputParams& params) {
    Tape tape;
    std::optional<Var> slope;
    if (params.phi == ops::Activation::prelu) slope = tape.constant(Tensor::scalar(params.slope));
    return predict(tape.constant(q), tape.constant(u), tape.constant(params.H), tape.constant(params.R), params.phi,
                   slope)
        .value();
}

float loss(const Tensor& logits, std::size_t target, std::span<const Tensor> regularized, float lambda) {
    Tape tape;
    std::vector<Var> reg;
    for (const auto& t : regularized) reg.push_back(tape.constant(t));
    return objective(tape.constant(logits), target, std::span<const Var>(reg), lambda).value().item();
}

}  // namespace qdren
