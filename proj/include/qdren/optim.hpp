#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "qdren/params.hpp"

namespace qdren {

/// Rescales every gradient by max_norm / g when the global L2 norm g exceeds
/// max_norm. Returns the norm measured before clipping.
double clip_gradients(Gradients& grads, double max_norm);

struct AdamState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit AdamState(const ParamSet& params);
};

/// Bias-corrected Adam update of every parameter in place.
void adam_step(AdamState& state, ParamSet& params, const Gradients& grads, double lr);

struct RmsPropState {
    std::vector<Tensor> mean_square;
    std::uint64_t step = 0;
    double decay = 0.9;
    double epsilon = 1e-8;

    explicit RmsPropState(const ParamSet& params);
};

void rmsprop_step(RmsPropState& state, ParamSet& params, const Gradients& grads, double lr);

enum class OptimizerKind { adam, rmsprop };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

/// Owns the state of whichever optimizer a run selected.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, const ParamSet& params);

    void step(ParamSet& params, const Gradients& grads, double lr);
    OptimizerKind kind() const noexcept { return kind_; }

private:
    OptimizerKind kind_;
    AdamState adam_;
    RmsPropState rmsprop_;
};

}  // namespace qdren
