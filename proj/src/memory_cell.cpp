#include "qdren/memory_cell.hpp"

#include <string>

namespace qdren {

std::string_view to_string(GateMode mode) { return mode == GateMode::ren ? "ren" : "qdren"; }

GateMode parse_gate_mode(std::string_view name) {
    if (name == "ren" || name == "REN") return GateMode::ren;
    if (name == "qdren" || name == "QDREN") return GateMode::qdren;
    throw ArgumentError("unknown mode '" + std::string(name) + "'");
}

namespace {


CellVars<float> bind(Tape& tape, const CellParams& p) {
    CellVars<float> c;
    c.U = tape.constant(p.U);
    c.V = tape.constant(p.V);
    c.W = tape.constant(p.W);
    c.keys = tape.constant(p.keys);
    c.phi = p.phi;
    if (p.phi == ops::Activation::prelu) c.slope = tape.constant(Tensor::scalar(p.slope));
    c.mode = p.mode;
    return c;
}

Tensor as_row(const Tensor& v) { return v.reshaped(Shape{1, v.size()}); }

}  // namespace

float gate(const Tensor& s, const Tensor& h, const Tensor& key, const Tensor& q, GateMode mode) {
    Tape tape;
    auto g = gate_values(tape.constant(as_row(h)), tape.constant(as_row(key)), tape.constant(s), tape.constant(q), mode);
    return g.value()[0];
}

Tensor candidate(const Tensor& h, const Tensor& key, const Tensor& s, const CellParams& params) {
    Tape tape;
    CellParams single = params;
    single.keys = as_row(key);
    auto cell = bind(tape, single);
    auto cache = make_cell_cache(cell);
    auto out = candidate_values(cell, cache, tape.constant(as_row(h)), tape.constant(s));
    return out.value().reshaped(Shape{h.size()});
}

MemoryState apply_update(const MemoryState& state, const Tensor& gates, const Tensor& candidates) {
    Tape tape;
    auto h = apply_update(tape.constant(state.hiddens), tape.constant(gates), tape.constant(candidates));
    return {h.value()};
}

StepOutput step(const MemoryState& state, const Tensor& s, const Tensor& q, const CellParams& params) {
    Tape tape;
    auto cell = bind(tape, params);
    auto cache = make_cell_cache(cell);
    auto out = cell_step(cell, cache, tape.constant(state.hiddens), tape.constant(s), tape.constant(q));
    return {{out.hiddens.value()}, out.gates.value()};
}

StoryOutput run_story(const MemoryState& initial, std::span<const Tensor> sentences, const Tensor& q,
                      const CellParams& params) {
    Tape tape;
    auto cell = bind(tape, params);
    std::vector<Var> s;
    s.reserve(sentences.size());
    for (const auto& t : sentences) s.push_back(tape.constant(t));
    auto run = run_cell(cell, tape.constant(initial.hiddens), std::span<const Var>(s), tape.constant(q));
    StoryOutput out{{run.hiddens.value()}, {run.trace, {}, {}}};
    for (std::size_t t = 0; t < sentences.size(); ++t) out.trace.sentence_labels.push_back(std::to_string(t));
    return out;
}

}  // namespace qdren
