#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <limits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qdren/params.hpp"
#include "qdren/tensor.hpp"

namespace qdren {

template <typename T>
class BasicTape;

/// Handle to a value recorded on a tape.
template <typename T>
class BasicVar {
public:
    BasicVar() = default;
    BasicVar(BasicTape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

    BasicTape<T>& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }
    const BasicTensor<T>& value() const { return tape_->value(*this); }
    const Shape& shape() const { return value().shape(); }

private:
    BasicTape<T>* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Reverse-mode gradient tape. Operations append nodes in execution order;
/// backward() walks them in exact reverse order. A tape belongs to one thread.
template <typename T>
class BasicTape {
public:
    using Tensor = BasicTensor<T>;
    using Var = BasicVar<T>;

    class BackwardContext {
    public:
        const Tensor& grad_out() const { return *grad_out_; }
        const Tensor& out() const { return tape_->nodes_[node_].get(); }
        const Tensor& in(std::size_t k) const { return tape_->nodes_[tape_->nodes_[node_].inputs[k]].get(); }
        bool needs(std::size_t k) const { return tape_->nodes_[tape_->nodes_[node_].inputs[k]].requires_grad; }
        /// Gradient slot of input k, zero-initialised on first touch.
        Tensor& grad_in(std::size_t k) { return tape_->grad_slot(tape_->nodes_[node_].inputs[k]); }

    private:
        friend class BasicTape;
        BasicTape* tape_ = nullptr;
        std::size_t node_ = 0;
        const Tensor* grad_out_ = nullptr;
    };

    using BackwardFn = std::function<void(BackwardContext&)>;

    BasicTape() = default;
    BasicTape(const BasicTape&) = delete;
    BasicTape& operator=(const BasicTape&) = delete;

    Var constant(Tensor value) {
        Node n;
        n.owned = std::move(value);
        nodes_.push_back(std::move(n));
        return Var(this, nodes_.size() - 1);
    }

    /// Leaf bound to params[index]. The parameter must outlive the tape and
    /// stay unmodified while the tape is in use. Repeated calls return the
    /// same node, so multi-step use accumulates into one gradient.
    Var parameter(const BasicParamSet<T>& params, std::size_t index) {
        if (bound_params_ && bound_params_ != &params) {
            throw UsageError("a tape can only bind parameters from one parameter set");
        }
        bound_params_ = &params;
        if (auto it = param_nodes_.find(index); it != param_nodes_.end()) return Var(this, it->second);
        Node n;
        n.external = &params[index];
        n.param_index = index;
        n.is_param = true;
        n.requires_grad = true;
        nodes_.push_back(std::move(n));
        param_nodes_.emplace(index, nodes_.size() - 1);
        return Var(this, nodes_.size() - 1);
    }

    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
        Node n;
        n.owned = std::move(value);
        for (const Var& v : inputs) {
            if (&v.tape() != this) throw UsageError("operands recorded on different tapes");
            n.inputs.push_back(v.id());
            n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
        }
        if (n.requires_grad) n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return Var(this, nodes_.size() - 1);
    }

    const Tensor& value(const Var& v) const { return nodes_[v.id()].get(); }
    bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Smallest |input| seen by a piecewise-linear activation on this tape.
    double min_kink_distance() const noexcept { return min_kink_; }
    void note_kink_distance(double d) noexcept { min_kink_ = std::min(min_kink_, d); }

    /// Accumulates d(loss)/d(param) into `into` for every bound parameter.
    /// `visit`, when given, is called with each node id as it is processed.
    void backward(const Var& loss, BasicGradients<T>& into,
                  const std::function<void(std::size_t)>& visit = {}) {
        if (&loss.tape() != this) throw UsageError("loss was not recorded on this tape");
        if (value(loss).size() != 1) {
            throw UsageError("backward requires a scalar loss, got " + shape_to_string(value(loss).shape()));
        }
        grads_.assign(nodes_.size(), Tensor{});
        has_grad_.assign(nodes_.size(), false);
        grad_slot(loss.id())[0] = T{1};
        for (std::size_t i = loss.id() + 1; i-- > 0;) {
            if (visit) visit(i);
            if (!has_grad_[i]) continue;
            Node& n = nodes_[i];
            if (n.is_param) {
                auto dst = into[n.param_index].data();
                auto src = grads_[i].data();
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
            } else if (n.backward) {
                BackwardContext ctx;
                ctx.tape_ = this;
                ctx.node_ = i;
                ctx.grad_out_ = &grads_[i];
                n.backward(ctx);
            }
        }
        grads_.clear();
        has_grad_.clear();
    }

    BasicGradients<T> backward(const Var& loss) {
        if (!bound_params_) throw UsageError("no parameters bound to this tape");
        BasicGradients<T> g(*bound_params_);
        backward(loss, g);
        return g;
    }

private:
    struct Node {
        Tensor owned;
        const Tensor* external = nullptr;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        std::size_t param_index = 0;
        bool is_param = false;
        bool requires_grad = false;

        const Tensor& get() const { return external ? *external : owned; }
    };

    Tensor& grad_slot(std::size_t id) {
        if (!has_grad_[id]) {
            grads_[id] = Tensor(nodes_[id].get().shape());
            has_grad_[id] = true;
        }
        return grads_[id];
    }

    std::deque<Node> nodes_;
    std::unordered_map<std::size_t, std::size_t> param_nodes_;
    const BasicParamSet<T>* bound_params_ = nullptr;
    std::vector<Tensor> grads_;
    std::vector<bool> has_grad_;
    double min_kink_ = std::numeric_limits<double>::infinity();
};

using Tape = BasicTape<float>;
using Var = BasicVar<float>;

}  // namespace qdren
