#include "qdren/optim.hpp"

#include <cmath>
#include <string>

namespace qdren {

double clip_gradients(Gradients& grads, double max_norm) {
    if (!(max_norm > 0.0)) throw ArgumentError("clip_gradients: max_norm must be positive");
    const double norm = grads.global_norm();
    if (norm > max_norm) grads.scale(static_cast<float>(max_norm / norm));
    return norm;
}

AdamState::AdamState(const ParamSet& params) {
    for (const auto& e : params.entries()) {
        first_moment.emplace_back(e.value.shape());
        second_moment.emplace_back(e.value.shape());
    }
}

void adam_step(AdamState& state, ParamSet& params, const Gradients& grads, double lr) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
        throw DimensionError("adam_step: gradient map does not match parameter set");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    const float b1 = static_cast<float>(state.beta1);
    const float b2 = static_cast<float>(state.beta2);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p].data();
        auto g = grads[p].data();
        auto m = state.first_moment[p].data();
        auto v = state.second_moment[p].data();
        if (g.size() != w.size()) throw DimensionError("adam_step: shape mismatch for '" + params.name(p) + "'");
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0f - b1) * g[i];
            v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            w[i] -= static_cast<float>(lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
        }
    }
}

RmsPropState::RmsPropState(const ParamSet& params) {
    for (const auto& e : params.entries()) mean_square.emplace_back(e.value.shape());
}

void rmsprop_step(RmsPropState& state, ParamSet& params, const Gradients& grads, double lr) {
    if (grads.size() != params.size() || state.mean_square.size() != params.size()) {
        throw DimensionError("rmsprop_step: gradient map does not match parameter set");
    }
    ++state.step;
    const float rho = static_cast<float>(state.decay);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p].data();
        auto g = grads[p].data();
        auto ms = state.mean_square[p].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            ms[i] = rho * ms[i] + (1.0f - rho) * g[i] * g[i];
            w[i] -= static_cast<float>(lr * g[i] / (std::sqrt(static_cast<double>(ms[i])) + state.epsilon));
        }
    }
}

std::string_view to_string(OptimizerKind kind) {
    return kind == OptimizerKind::adam ? "adam" : "rmsprop";
}

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "adam" || name == "Adam") return OptimizerKind::adam;
    if (name == "rmsprop" || name == "RMSProp") return OptimizerKind::rmsprop;
    throw ArgumentError("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(OptimizerKind kind, const ParamSet& params) : kind_(kind), adam_(params), rmsprop_(params) {}

void Optimizer::step(ParamSet& params, const Gradients& grads, double lr) {
    if (kind_ == OptimizerKind::adam) {
        adam_step(adam_, params, grads, lr);
    } else {
        rmsprop_step(rmsprop_, params, grads, lr);
    }
}

}  // namespace qdren
