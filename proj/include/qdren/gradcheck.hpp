#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "qdren/tape.hpp"

namespace qdren {

struct GradCheckGroup {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::vector<GradCheckGroup> groups;
};

template <typename T>
using LossBuilder = std::function<BasicVar<T>(BasicTape<T>&, const BasicParamSet<T>&)>;

struct GradCheckOptions {
    double epsilon = 1e-3;
    /// Coordinates for which this returns true are skipped (frozen entries).
    std::function<bool(std::size_t param, std::size_t coord)> skip;
    /// Applied to the analytic gradients before comparison; a test hook.
    std::function<void(std::vector<std::vector<double>>&)> tamper;
};

/// Relative error |a - n| / max(1e-8, |a| + |n|).
inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Compares reverse-mode gradients of `build` against central differences
/// (f(p + eps) - f(p - eps)) / 2 eps over every coordinate of every parameter.
template <typename T>
GradCheckReport finite_diff_check(const LossBuilder<T>& build, BasicParamSet<T>& params,
                                  const GradCheckOptions& options = {}) {
    if (!(options.epsilon > 0.0)) throw ArgumentError("finite_diff_check: epsilon must be positive");

    auto evaluate = [&]() -> double {
        BasicTape<T> tape;
        const double v = static_cast<double>(build(tape, params).value().item());
        if (!std::isfinite(v)) throw NumericError("finite_diff_check: loss is not finite");
        return v;
    };

    std::vector<std::vector<double>> analytic(params.size());
    {
        BasicTape<T> tape;
        auto loss = build(tape, params);
        if (!std::isfinite(static_cast<double>(loss.value().item()))) {
            throw NumericError("finite_diff_check: loss is not finite");
        }
        BasicGradients<T> grads(params);
        tape.backward(loss, grads);
        for (std::size_t p = 0; p < params.size(); ++p) {
            analytic[p].assign(grads[p].data().begin(), grads[p].data().end());
        }
    }
    if (options.tamper) options.tamper(analytic);

    GradCheckReport report;
    const T eps = static_cast<T>(options.epsilon);
    for (std::size_t p = 0; p < params.size(); ++p) {
        GradCheckGroup group{params.name(p), 0.0, 0};
        auto data = params[p].data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (options.skip && options.skip(p, i)) continue;
            const T saved = data[i];
            data[i] = saved + eps;
            const double plus = evaluate();
            data[i] = saved - eps;
            const double minus = evaluate();
            data[i] = saved;
            // Divide by the step actually taken after rounding.
            const double step = static_cast<double>(saved + eps) - static_cast<double>(saved - eps);
            const double numeric = (plus - minus) / step;
            const double err = relative_error(analytic[p][i], numeric);
            ++group.coordinates;
            group.max_rel_error = std::max(group.max_rel_error, err);
            if (report.worst_param.empty() || err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_param = params.name(p);
                report.worst_index = i;
                report.worst_analytic = analytic[p][i];
                report.worst_numeric = numeric;
            }
        }
        report.groups.push_back(group);
    }
    return report;
}

}  // namespace qdren
