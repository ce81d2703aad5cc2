#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "qdren/gradcheck.hpp"
#include "qdren/ops.hpp"
#include "qdren/rng.hpp"

namespace testutil {

using qdren::BasicParamSet;
using qdren::BasicTape;
using qdren::BasicTensor;
using qdren::BasicVar;

inline BasicTensor<double> random_tensor(qdren::Shape shape, qdren::Rng& rng, double lo = -1.0, double hi = 1.0) {
    BasicTensor<double> t(std::move(shape));
    for (double& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

/// Gradient check of an op: loss = sum_i w_i * op(inputs)_i with fixed random w.
inline double op_gradcheck(std::vector<BasicTensor<double>> inputs,
                           const std::function<BasicVar<double>(BasicTape<double>&, std::vector<BasicVar<double>>&)>& op,
                           std::uint64_t seed = 3) {
    BasicParamSet<double> params;
    for (std::size_t i = 0; i < inputs.size(); ++i) params.add("x" + std::to_string(i), inputs[i]);
    std::optional<BasicTensor<double>> weights;
    qdren::Rng rng(seed);
    qdren::LossBuilder<double> build = [&](BasicTape<double>& tape, const BasicParamSet<double>& p) {
        std::vector<BasicVar<double>> vars;
        for (std::size_t i = 0; i < p.size(); ++i) vars.push_back(tape.parameter(p, i));
        auto out = op(tape, vars);
        if (!weights) weights = random_tensor(out.value().shape(), rng);
        return qdren::ops::sum(qdren::ops::mul(out, tape.constant(*weights)));
    };
    qdren::GradCheckOptions options;
    options.epsilon = 1e-5;
    return qdren::finite_diff_check(build, params, options).max_rel_error;
}

}  // namespace testutil
