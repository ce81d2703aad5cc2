#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdren/tape.hpp"

// Differentiable operations. Every function records one node on the tape of
// its operands and returns its handle. Rank-1 tensors are vectors, rank-2
// tensors row-major matrices; a scalar is the one-element vector.
namespace qdren::ops {

enum class Activation { sigmoid, relu, prelu, tanh, identity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

namespace detail {

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                             shape_to_string(b.shape()));
    }
}

template <typename T>
void require_rank(const BasicTensor<T>& a, std::size_t rank, const char* op) {
    if (a.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_to_string(a.shape()));
    }
}

template <typename T>
T sigmoid(T x) {
    if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
    T e = std::exp(x);
    return e / (T{1} + e);
}

template <typename T>
void add_into(BasicTensor<T>& dst, const BasicTensor<T>& src) {
    auto d = dst.data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace detail

template <typename T>
BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    detail::require_same_shape(av, bv, "add");
    BasicTensor<T> out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return a.tape().record(std::move(out), {a, b}, [](auto& ctx) {
        if (ctx.needs(0)) detail::add_into(ctx.grad_in(0), ctx.grad_out());
        if (ctx.needs(1)) detail::add_into(ctx.grad_in(1), ctx.grad_out());
    });
}

template <typename T>
BasicVar<T> sub(const BasicVar<T>& a, const BasicVar<T>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    detail::require_same_shape(av, bv, "sub");
    BasicTensor<T> out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return a.tape().record(std::move(out), {a, b}, [](auto& ctx) {
        if (ctx.needs(0)) detail::add_into(ctx.grad_in(0), ctx.grad_out());
        if (ctx.needs(1)) {
            auto& g = ctx.grad_in(1);
            const auto& go = ctx.grad_out();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= go[i];
        }
    });
}

template <typename T>
BasicVar<T> mul(const BasicVar<T>& a, const BasicVar<T>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    detail::require_same_shape(av, bv, "mul");
    BasicTensor<T> out(av.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return a.tape().record(std::move(out), {a, b}, [](auto& ctx) {
        const auto& go = ctx.grad_out();
        if (ctx.needs(0)) {
            auto& g = ctx.grad_in(0);
            const auto& bv = ctx.in(1);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * bv[i];
        }
        if (ctx.needs(1)) {
            auto& g = ctx.grad_in(1);
            const auto& av = ctx.in(0);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * av[i];
        }
    });
}

enum class Elementwise { add, mul, sub };

template <typename T>
BasicVar<T> elementwise(Elementwise op, const BasicVar<T>& a, const BasicVar<T>& b) {
    switch (op) {
        case Elementwise::add: return add(a, b);
        case Elementwise::mul: return mul(a, b);
        case Elementwise::sub: return sub(a, b);
    }
    throw ArgumentError("unknown elementwise op");
}

/// x * c for a constant c.
template <typename T>
BasicVar<T> scale(const BasicVar<T>& x, T c) {
    const auto& xv = x.value();
    BasicTensor<T> out(xv.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * c;
    return x.tape().record(std::move(out), {x}, [c](auto& ctx) {
        auto& g = ctx.grad_in(0);
        const auto& go = ctx.grad_out();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * c;
    });
}

template <typename T>
BasicVar<T> matmul(const BasicVar<T>& a, const BasicVar<T>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    detail::require_rank(av, 2, "matmul");
    detail::require_rank(bv, 2, "matmul");
    if (av.cols() != bv.rows()) {
        throw DimensionError("matmul: inner extents differ " + shape_to_string(av.shape()) + " vs " +
                             shape_to_string(bv.shape()));
    }
    const std::size_t m = av.rows(), n = av.cols(), p = bv.cols();
    BasicTensor<T> out(Shape{m, p});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            const T aik = av(i, k);
            for (std::size_t j = 0; j < p; ++j) out(i, j) += aik * bv(k, j);
        }
    }
    return a.tape().record(std::move(out), {a, b}, [m, n, p](auto& ctx) {
        const auto& go = ctx.grad_out();
        if (ctx.needs(0)) {
            // dA = dC * B^T
            auto& ga = ctx.grad_in(0);
            const auto& bv = ctx.in(1);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t k = 0; k < n; ++k) {
                    T acc{0};
                    for (std::size_t j = 0; j < p; ++j) acc += go(i, j) * bv(k, j);
                    ga(i, k) += acc;
                }
            }
        }
        if (ctx.needs(1)) {
            // dB = A^T * dC
            auto& gb = ctx.grad_in(1);
            const auto& av = ctx.in(0);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t k = 0; k < n; ++k) {
                    const T aik = av(i, k);
                    for (std::size_t j = 0; j < p; ++j) gb(k, j) += aik * go(i, j);
                }
            }
        }
    });
}

/// A[m x n] * x[n] -> [m]
template <typename T>
BasicVar<T> matvec(const BasicVar<T>& a, const BasicVar<T>& x) {
    const auto& av = a.value();
    const auto& xv = x.value();
    detail::require_rank(av, 2, "matvec");
    detail::require_rank(xv, 1, "matvec");
    if (av.cols() != xv.size()) {
        throw DimensionError("matvec: inner extents differ " + shape_to_string(av.shape()) + " vs " +
                             shape_to_string(xv.shape()));
    }
    const std::size_t m = av.rows(), n = av.cols();
    BasicTensor<T> out(Shape{m});
    for (std::size_t i = 0; i < m; ++i) {
        T acc{0};
        for (std::size_t k = 0; k < n; ++k) acc += av(i, k) * xv[k];
        out[i] = acc;
    }
    return a.tape().record(std::move(out), {a, x}, [m, n](auto& ctx) {
        const auto& go = ctx.grad_out();
        if (ctx.needs(0)) {
            auto& ga = ctx.grad_in(0);
            const auto& xv = ctx.in(1);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t k = 0; k < n; ++k) ga(i, k) += go[i] * xv[k];
            }
        }
        if (ctx.needs(1)) {
            auto& gx = ctx.grad_in(1);
            const auto& av = ctx.in(0);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t k = 0; k < n; ++k) gx[k] += av(i, k) * go[i];
            }
        }
    });
}

template <typename T>
BasicVar<T> transpose(const BasicVar<T>& a) {
    const auto& av = a.value();
    detail::require_rank(av, 2, "transpose");
    const std::size_t m = av.rows(), n = av.cols();
    BasicTensor<T> out(Shape{n, m});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out(j, i) = av(i, j);
    }
    return a.tape().record(std::move(out), {a}, [m, n](auto& ctx) {
        auto& g = ctx.grad_in(0);
        const auto& go = ctx.grad_out();
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) g(i, j) += go(j, i);
        }
    });
}

/// Inner product of two equal-length vectors -> scalar.
template <typename T>
BasicVar<T> dot(const BasicVar<T>& a, const BasicVar<T>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    detail::require_same_shape(av, bv, "dot");
    T acc{0};
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
    return a.tape().record(BasicTensor<T>::scalar(acc), {a, b}, [](auto& ctx) {
        const T go = ctx.grad_out()[0];
        if (ctx.needs(0)) {
            auto& g = ctx.grad_in(0);
            const auto& bv = ctx.in(1);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * bv[i];
        }
        if (ctx.needs(1)) {
            auto& g = ctx.grad_in(1);
            const auto& av = ctx.in(0);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * av[i];
        }
    });
}

/// x + s broadcast, s a scalar.
template <typename T>
BasicVar<T> add_scalar(const BasicVar<T>& x, const BasicVar<T>& s) {
    const auto& xv = x.value();
    if (s.value().size() != 1) throw DimensionError("add_scalar: second operand must be a scalar");
    const T sv = s.value()[0];
    BasicTensor<T> out(xv.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + sv;
    return x.tape().record(std::move(out), {x, s}, [](auto& ctx) {
        const auto& go = ctx.grad_out();
        if (ctx.needs(0)) detail::add_into(ctx.grad_in(0), go);
        if (ctx.needs(1)) {
            T acc{0};
            for (std::size_t i = 0; i < go.size(); ++i) acc += go[i];
            ctx.grad_in(1)[0] += acc;
        }
    });
}

/// M[r x c] + v[c] added to every row.
template <typename T>
BasicVar<T> add_row(const BasicVar<T>& m, const BasicVar<T>& v) {
    const auto& mv = m.value();
    const auto& vv = v.value();
    detail::require_rank(mv, 2, "add_row");
    if (vv.rank() != 1 || vv.size() != mv.cols()) {
        throw DimensionError("add_row: " + shape_to_string(mv.shape()) + " vs " + shape_to_string(vv.shape()));
    }
    const std::size_t r = mv.rows(), c = mv.cols();
    BasicTensor<T> out(mv.shape());
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out(i, j) = mv(i, j) + vv[j];
    }
    return m.tape().record(std::move(out), {m, v}, [r, c](auto& ctx) {
        const auto& go = ctx.grad_out();
        if (ctx.needs(0)) detail::add_into(ctx.grad_in(0), go);
        if (ctx.needs(1)) {
            auto& g = ctx.grad_in(1);
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) g[j] += go(i, j);
            }
        }
    });
}

/// Row i of M[r x c] multiplied by g[i].
template <typename T>
BasicVar<T> scale_rows(const BasicVar<T>& m, const BasicVar<T>& g) {
    const auto& mv = m.value();
    const auto& gv = g.value();
    detail::require_rank(mv, 2, "scale_rows");
    if (gv.rank() != 1 || gv.size() != mv.rows()) {
        throw DimensionError("scale_rows: " + shape_to_string(mv.shape()) + " vs " + shape_to_string(gv.shape()));
    }
    const std::size_t r = mv.rows(), c = mv.cols();
    BasicTensor<T> out(mv.shape());
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out(i, j) = mv(i, j) * gv[i];
    }
    return m.tape().record(std::move(out), {m, g}, [r, c](auto& ctx) {
        const auto& go = ctx.grad_out();
        if (ctx.needs(0)) {
            auto& gm = ctx.grad_in(0);
            const auto& gv = ctx.in(1);
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) gm(i, j) += go(i, j) * gv[i];
            }
        }
        if (ctx.needs(1)) {
            auto& gg = ctx.grad_in(1);
            const auto& mv = ctx.in(0);
            for (std::size_t i = 0; i < r; ++i) {
                T acc{0};
                for (std::size_t j = 0; j < c; ++j) acc += go(i, j) * mv(i, j);
                gg[i] += acc;
            }
        }
    });
}

/// Pointwise activation. `slope` must be a scalar var iff kind == prelu.
template <typename T>
BasicVar<T> activation(Activation kind, const BasicVar<T>& x, std::optional<BasicVar<T>> slope = std::nullopt) {
    if ((kind == Activation::prelu) != slope.has_value()) {
        throw ArgumentError("activation: a slope is required for prelu and only for prelu");
    }
    const auto& xv = x.value();
    BasicTensor<T> out(xv.shape());
    if (kind == Activation::prelu || kind == Activation::relu) {
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < xv.size(); ++i) nearest = std::min(nearest, std::abs(static_cast<double>(xv[i])));
        x.tape().note_kink_distance(nearest);
    }
    switch (kind) {
        case Activation::sigmoid:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::sigmoid(xv[i]);
            return x.tape().record(std::move(out), {x}, [](auto& ctx) {
                auto& g = ctx.grad_in(0);
                const auto& y = ctx.out();
                const auto& go = ctx.grad_out();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * y[i] * (T{1} - y[i]);
            });
        case Activation::tanh:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
            return x.tape().record(std::move(out), {x}, [](auto& ctx) {
                auto& g = ctx.grad_in(0);
                const auto& y = ctx.out();
                const auto& go = ctx.grad_out();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i] * (T{1} - y[i] * y[i]);
            });
        case Activation::relu:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T{0} ? xv[i] : T{0};
            return x.tape().record(std::move(out), {x}, [](auto& ctx) {
                auto& g = ctx.grad_in(0);
                const auto& xv = ctx.in(0);
                const auto& go = ctx.grad_out();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (xv[i] > T{0}) g[i] += go[i];
                }
            });
        case Activation::identity:
            out = xv;
            return x.tape().record(std::move(out), {x}, [](auto& ctx) {
                detail::add_into(ctx.grad_in(0), ctx.grad_out());
            });
        case Activation::prelu: {
            const auto& sv = slope->value();
            if (sv.size() != 1) throw DimensionError("activation: prelu slope must be a scalar");
            const T a = sv[0];
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T{0} ? xv[i] : a * xv[i];
            return x.tape().record(std::move(out), {x, *slope}, [](auto& ctx) {
                const auto& xv = ctx.in(0);
                const auto& go = ctx.grad_out();
                if (ctx.needs(0)) {
                    auto& g = ctx.grad_in(0);
                    const T a = ctx.in(1)[0];
                    for (std::size_t i = 0; i < g.size(); ++i) g[i] += xv[i] > T{0} ? go[i] : a * go[i];
                }
                if (ctx.needs(1)) {
                    T acc{0};
                    for (std::size_t i = 0; i < xv.size(); ++i) {
                        if (!(xv[i] > T{0})) acc += go[i] * xv[i];
                    }
                    ctx.grad_in(1)[0] += acc;
                }
            });
        }
    }
    throw ArgumentError("unknown activation");
}

template <typename T>
BasicVar<T> sigmoid(const BasicVar<T>& x) {
    return activation(Activation::sigmoid, x);
}

/// Max-subtracted softmax over a vector.
template <typename T>
BasicTensor<T> softmax_values(const BasicTensor<T>& x) {
    if (x.rank() != 1) throw DimensionError("softmax: expected a vector, got " + shape_to_string(x.shape()));
    BasicTensor<T> out(x.shape());
    const T mx = *std::max_element(x.data().begin(), x.data().end());
    T total{0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - mx);
        total += out[i];
    }
    for (T& v : out.data()) v /= total;
    return out;
}

template <typename T>
BasicVar<T> softmax(const BasicVar<T>& x) {
    BasicTensor<T> out = softmax_values(x.value());
    return x.tape().record(std::move(out), {x}, [](auto& ctx) {
        const auto& y = ctx.out();
        const auto& go = ctx.grad_out();
        T inner{0};
        for (std::size_t i = 0; i < y.size(); ++i) inner += go[i] * y[i];
        auto& g = ctx.grad_in(0);
        for (std::size_t i = 0; i < y.size(); ++i) g[i] += y[i] * (go[i] - inner);
    });
}

/// -log softmax(logits)[target] as a scalar.
template <typename T>
BasicVar<T> cross_entropy(const BasicVar<T>& logits, std::size_t target) {
    const auto& lv = logits.value();
    if (lv.rank() != 1) throw DimensionError("cross_entropy: logits must be a vector");
    if (target >= lv.size()) {
        throw ArgumentError("cross_entropy: target index " + std::to_string(target) + " out of range for " +
                            std::to_string(lv.size()) + " classes");
    }
    const T mx = *std::max_element(lv.data().begin(), lv.data().end());
    T total{0};
    for (T v : lv.data()) total += std::exp(v - mx);
    const T loss = std::log(total) + mx - lv[target];
    return logits.tape().record(BasicTensor<T>::scalar(loss), {logits}, [target](auto& ctx) {
        const T go = ctx.grad_out()[0];
        BasicTensor<T> p = softmax_values(ctx.in(0));
        auto& g = ctx.grad_in(0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * (p[i] - (i == target ? T{1} : T{0}));
    });
}

/// Each row divided by (its L2 norm + eps).
template <typename T>
BasicVar<T> normalize_rows(const BasicVar<T>& m, T eps) {
    const auto& mv = m.value();
    detail::require_rank(mv, 2, "normalize_rows");
    const std::size_t r = mv.rows(), c = mv.cols();
    BasicTensor<T> out(mv.shape());
    std::vector<T> norms(r);
    for (std::size_t i = 0; i < r; ++i) {
        T acc{0};
        for (std::size_t j = 0; j < c; ++j) acc += mv(i, j) * mv(i, j);
        norms[i] = std::sqrt(acc);
        const T denom = norms[i] + eps;
        for (std::size_t j = 0; j < c; ++j) out(i, j) = mv(i, j) / denom;
    }
    return m.tape().record(std::move(out), {m}, [r, c, eps, norms = std::move(norms)](auto& ctx) {
        const auto& go = ctx.grad_out();
        const auto& mv = ctx.in(0);
        auto& g = ctx.grad_in(0);
        for (std::size_t i = 0; i < r; ++i) {
            const T n = norms[i];
            const T denom = n + eps;
            T inner{0};
            for (std::size_t j = 0; j < c; ++j) inner += go(i, j) * mv(i, j);
            // d(m/(|m|+eps))/dm applied to go: go/D - (go.m) m / (|m| D^2)
            const T coeff = n > T{0} ? inner / (n * denom * denom) : T{0};
            for (std::size_t j = 0; j < c; ++j) g(i, j) += go(i, j) / denom - coeff * mv(i, j);
        }
    });
}

/// Rows of M selected by index, in order -> [ids.size() x cols].
template <typename T>
BasicVar<T> gather_rows(const BasicVar<T>& m, std::span<const std::size_t> ids) {
    const auto& mv = m.value();
    detail::require_rank(mv, 2, "gather_rows");
    if (ids.empty()) throw DimensionError("gather_rows: empty index list");
    const std::size_t c = mv.cols();
    BasicTensor<T> out(Shape{ids.size(), c});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= mv.rows()) {
            throw ArgumentError("gather_rows: row " + std::to_string(ids[i]) + " out of range for " +
                                shape_to_string(mv.shape()));
        }
        std::copy_n(mv.row(ids[i]).begin(), c, out.row(i).begin());
    }
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    return m.tape().record(std::move(out), {m}, [c, idx = std::move(idx)](auto& ctx) {
        const auto& go = ctx.grad_out();
        auto& g = ctx.grad_in(0);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < c; ++j) g(idx[i], j) += go(i, j);
        }
    });
}

/// Rows [begin, begin + count) of M.
template <typename T>
BasicVar<T> slice_rows(const BasicVar<T>& m, std::size_t begin, std::size_t count) {
    const auto& mv = m.value();
    detail::require_rank(mv, 2, "slice_rows");
    if (count == 0 || begin + count > mv.rows()) {
        throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                             ") out of range for " + shape_to_string(mv.shape()));
    }
    const std::size_t c = mv.cols();
    BasicTensor<T> out(Shape{count, c});
    std::copy_n(mv.data().begin() + begin * c, count * c, out.data().begin());
    return m.tape().record(std::move(out), {m}, [begin, count, c](auto& ctx) {
        const auto& go = ctx.grad_out();
        auto g = ctx.grad_in(0).data().subspan(begin * c, count * c);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += go[i];
    });
}

/// Column sums of M[r x c] -> [c].
template <typename T>
BasicVar<T> sum_rows(const BasicVar<T>& m) {
    const auto& mv = m.value();
    detail::require_rank(mv, 2, "sum_rows");
    const std::size_t r = mv.rows(), c = mv.cols();
    BasicTensor<T> out(Shape{c});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j] += mv(i, j);
    }
    return m.tape().record(std::move(out), {m}, [r, c](auto& ctx) {
        const auto& go = ctx.grad_out();
        auto& g = ctx.grad_in(0);
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) g(i, j) += go[j];
        }
    });
}

template <typename T>
BasicVar<T> sum(const BasicVar<T>& x) {
    T acc{0};
    for (T v : x.value().data()) acc += v;
    return x.tape().record(BasicTensor<T>::scalar(acc), {x}, [](auto& ctx) {
        const T go = ctx.grad_out()[0];
        for (T& v : ctx.grad_in(0).data()) v += go;
    });
}

/// Squared L2 norm -> scalar.
template <typename T>
BasicVar<T> sum_squares(const BasicVar<T>& x) {
    T acc{0};
    for (T v : x.value().data()) acc += v * v;
    return x.tape().record(BasicTensor<T>::scalar(acc), {x}, [](auto& ctx) {
        const T go = ctx.grad_out()[0];
        const auto& xv = ctx.in(0);
        auto& g = ctx.grad_in(0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += T{2} * go * xv[i];
    });
}

}  // namespace qdren::ops
