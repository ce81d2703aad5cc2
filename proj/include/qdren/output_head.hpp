#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qdren/ops.hpp"
#include "qdren/rng.hpp"

namespace qdren {

/// p_i = softmax_i(q . h_i) over the rows of hiddens [z x d].
template <typename T>
BasicVar<T> attention(const BasicVar<T>& q, const BasicVar<T>& hiddens) {
    return ops::softmax(ops::matvec(hiddens, q));
}

/// u = sum_j p_j h_j.
template <typename T>
BasicVar<T> pool(const BasicVar<T>& p, const BasicVar<T>& hiddens) {
    return ops::matvec(ops::transpose(hiddens), p);
}

/// Inverted dropout: zero each coordinate with probability `rate`, scale the
/// survivors by 1 / (1 - rate). Identity when rate is 0.
template <typename T>
BasicVar<T> dropout(const BasicVar<T>& x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw ArgumentError("dropout rate must be below 1");
    BasicTensor<T> mask(x.value().shape());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    for (T& m : mask.data()) m = rng.bernoulli(rate) ? T{0} : keep_scale;
    return ops::mul(x, x.tape().constant(std::move(mask)));
}

/// logits = R phi(q + H u); R holds one row per answer class.
template <typename T>
BasicVar<T> predict(const BasicVar<T>& q, const BasicVar<T>& u, const BasicVar<T>& H, const BasicVar<T>& R,
                    ops::Activation phi, std::optional<BasicVar<T>> slope = std::nullopt) {
    auto hidden = ops::activation(phi, ops::add(q, ops::matvec(H, u)), slope);
    return ops::matvec(R, hidden);
}

/// Cross-entropy plus lambda times the summed squared L2 norms.
template <typename T>
BasicVar<T> objective(const BasicVar<T>& logits, std::size_t target, std::span<const BasicVar<T>> regularized,
                      T lambda) {
    if (lambda < T{0}) throw ArgumentError("L2 coefficient must be non-negative");
    auto loss = ops::cross_entropy(logits, target);
    if (lambda == T{0} || regularized.empty()) return loss;
    auto penalty = ops::sum_squares(regularized[0]);
    for (std::size_t i = 1; i < regularized.size(); ++i) penalty = ops::add(penalty, ops::sum_squares(regularized[i]));
    return ops::add(loss, ops::scale(penalty, lambda));
}

struct OutputParams {
    Tensor R;  // [C x d]
    Tensor H;  // [d x d]
    ops::Activation phi = ops::Activation::prelu;
    float slope = 0.25f;
};

Tensor attention(const Tensor& q, const Tensor& hiddens);
Tensor pool(const Tensor& p, const Tensor& hiddens);
Tensor predict(const Tensor& q, const Tensor& u, const OutputParams& params);
float loss(const Tensor& logits, std::size_t target, std::span<const Tensor> regularized, float lambda);

}  // namespace qdren
