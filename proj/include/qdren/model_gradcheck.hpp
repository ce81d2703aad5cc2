#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "qdren/gradcheck.hpp"
#include "qdren/model.hpp"

namespace qdren {

inline constexpr double kGradcheckTolerance = 1e-3;
inline constexpr std::size_t kGradcheckMaxDim = 8;
inline constexpr std::size_t kGradcheckMaxBlocks = 4;

/// A tiny random model and story for checking the full network's gradients.
struct ModelGradcheckSpec {
    GateMode mode = GateMode::qdren;
    InputStyle style = InputStyle::sentences;
    ops::Activation phi = ops::Activation::prelu;  // used at both the cell and the output
    std::size_t dim = 8;
    std::size_t blocks = 4;
    std::size_t sentences = 3;
    std::size_t window = 3;
    double epsilon = 1e-3;
    double l2 = 0.01;
    /// Weights are redrawn from U(-init_scale, init_scale) so pre-activations
    /// sit away from the PReLU kink relative to epsilon.
    double init_scale = 0.5;
    /// Parameter draws are rejected until every PReLU input is at least this
    /// far from zero, so no central difference straddles the kink.
    double kink_margin = 0.02;
    std::uint64_t seed = 1;
};

struct ModelGradcheckResult {
    ModelGradcheckSpec spec;
    GradCheckReport report;
    std::size_t draws = 1;             // parameter draws until the margin held
    double kink_distance = 0.0;        // smallest |PReLU input| of the accepted draw
    bool passed(double tolerance = kGradcheckTolerance) const { return report.max_rel_error < tolerance; }
};

/// Runs the check in double precision over every parameter coordinate except
/// the pinned PAD embedding row. Throws UsageError when dim or blocks exceed
/// the small-config limits.
ModelGradcheckResult model_gradcheck(const ModelGradcheckSpec& spec,
                                     std::function<void(std::vector<std::vector<double>>&)> tamper = {});

/// Same check with the float32 instantiation used for training.
ModelGradcheckResult model_gradcheck_float(const ModelGradcheckSpec& spec);

/// Every combination of gate mode, input style and activation in {sigmoid,
/// prelu} on top of `base`.
std::vector<ModelGradcheckSpec> gradcheck_matrix(const ModelGradcheckSpec& base = {});

}  // namespace qdren
