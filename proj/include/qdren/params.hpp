#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qdren/tensor.hpp"

namespace qdren {

/// Ordered, named collection of trainable tensors. A parameter's identity is
/// its index; names are unique.
template <typename T>
class BasicParamSet {
public:
    struct Entry {
        std::string name;
        BasicTensor<T> value;
    };

    std::size_t add(std::string name, BasicTensor<T> value) {
        if (find(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
        entries_.push_back({std::move(name), std::move(value)});
        return entries_.size() - 1;
    }

    std::optional<std::size_t> find(const std::string& name) const {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].name == name) return i;
        }
        return std::nullopt;
    }

    std::size_t index_of(const std::string& name) const {
        auto idx = find(name);
        if (!idx) throw ArgumentError("unknown parameter '" + name + "'");
        return *idx;
    }

    BasicTensor<T>& operator[](std::size_t i) { return entries_[i].value; }
    const BasicTensor<T>& operator[](std::size_t i) const { return entries_[i].value; }
    BasicTensor<T>& at(const std::string& name) { return entries_[index_of(name)].value; }
    const BasicTensor<T>& at(const std::string& name) const { return entries_[index_of(name)].value; }
    const std::string& name(std::size_t i) const { return entries_[i].name; }

    std::size_t size() const noexcept { return entries_.size(); }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    template <typename U>
    BasicParamSet<U> cast() const {
        BasicParamSet<U> out;
        for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
        return out;
    }

    bool all_finite() const {
        for (const auto& e : entries_) {
            if (!e.value.all_finite()) return false;
        }
        return true;
    }

    friend bool operator==(const BasicParamSet& a, const BasicParamSet& b) {
        if (a.entries_.size() != b.entries_.size()) return false;
        for (std::size_t i = 0; i < a.entries_.size(); ++i) {
            if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value)) return false;
        }
        return true;
    }

private:
    std::vector<Entry> entries_;
};

/// Gradient map aligned index-for-index with a parameter set.
template <typename T>
class BasicGradients {
public:
    BasicGradients() = default;

    explicit BasicGradients(const BasicParamSet<T>& params) {
        grads_.reserve(params.size());
        for (const auto& e : params.entries()) grads_.emplace_back(e.value.shape());
    }

    BasicTensor<T>& operator[](std::size_t i) { return grads_[i]; }
    const BasicTensor<T>& operator[](std::size_t i) const { return grads_[i]; }
    std::size_t size() const noexcept { return grads_.size(); }

    void zero() {
        for (auto& g : grads_) g.fill(T{0});
    }

    void scale(T factor) {
        for (auto& g : grads_) {
            for (T& v : g.data()) v *= factor;
        }
    }

    void accumulate(const BasicGradients& other) {
        for (std::size_t i = 0; i < grads_.size(); ++i) {
            auto dst = grads_[i].data();
            auto src = other.grads_[i].data();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }

    double global_norm() const {
        double acc = 0.0;
        for (const auto& g : grads_) acc += squared_norm(g);
        return std::sqrt(acc);
    }

    bool all_finite() const {
        for (const auto& g : grads_) {
            if (!g.all_finite()) return false;
        }
        return true;
    }

private:
    std::vector<BasicTensor<T>> grads_;
};

using ParamSet = BasicParamSet<float>;
using Gradients = BasicGradients<float>;

}  // namespace qdren
