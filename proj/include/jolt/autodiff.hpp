#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "jolt/error.hpp"
#include "jolt/mask.hpp"

namespace jolt::ad {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kProbClamp = 1e-7;

namespace detail {

inline thread_local int no_grad_depth = 0;

template <class T>
struct Node {
    Mat<T> value;
    Mat<T> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    Mat<T>& grad_ref() {
        if (grad.size() == 0) grad = Mat<T>::Zero(value.rows(), value.cols());
        return grad;
    }
};

}  // namespace detail

/// Suspends graph recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() { ++detail::no_grad_depth; }
    ~NoGradGuard() { --detail::no_grad_depth; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() noexcept { return detail::no_grad_depth == 0; }

/// Rank-2 dense tensor handle; copies share the underlying node.
/// A 1 x 1 tensor serves as a scalar.
template <class T>
class Tensor {
public:
    using Node = detail::Node<T>;

    Tensor() = default;

    static Tensor constant(Mat<T> value) { return Tensor(std::move(value), false); }
    static Tensor parameter(Mat<T> value) { return Tensor(std::move(value), true); }
    static Tensor scalar(T v) { return constant(Mat<T>::Constant(1, 1, v)); }

    bool defined() const noexcept { return node_ != nullptr; }
    std::size_t rows() const noexcept { return static_cast<std::size_t>(node_->value.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(node_->value.cols()); }
    std::vector<std::size_t> shape() const { return {rows(), cols()}; }
    bool requires_grad() const noexcept { return node_->requires_grad; }

    const Mat<T>& value() const noexcept { return node_->value; }
    Mat<T>& mutable_value() noexcept { return node_->value; }
    T item() const { return node_->value(0, 0); }

    /// Gradient accumulator; zeros when nothing has flowed in yet.
    const Mat<T>& grad() const { return node_->grad_ref(); }
    Mat<T>& mutable_grad() { return node_->grad_ref(); }
    void zero_grad() {
        if (node_->grad.size()) node_->grad.setZero();
    }

    /// Internal: builds an op output; records the backward rule only when a parent needs it.
    static Tensor make(Mat<T> value, std::vector<Tensor> parents, std::function<void(Node&)> backward) {
        Tensor out(std::move(value), false);
        if (!grad_enabled()) return out;
        bool any = false;
        for (const auto& p : parents) any = any || p.requires_grad();
        if (!any) return out;
        out.node_->requires_grad = true;
        for (auto& p : parents) out.node_->parents.push_back(p.node_);
        out.node_->backward = std::move(backward);
        return out;
    }

    const std::shared_ptr<Node>& node() const noexcept { return node_; }

private:
    Tensor(Mat<T> value, bool requires_grad) : node_(std::make_shared<Node>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    std::shared_ptr<Node> node_;
};

namespace detail {

inline void check(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

inline std::string dims(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

template <class T>
void accumulate(const std::shared_ptr<Node<T>>& n, const Mat<T>& g) {
    if (n->requires_grad) n->grad_ref() += g;
}

}  // namespace detail

/// Runs reverse-mode accumulation from a 1 x 1 loss.
template <class T>
void backward(const Tensor<T>& loss) {
    detail::check(loss.rows() == 1 && loss.cols() == 1, "backward needs a scalar loss");
    if (!loss.requires_grad()) return;
    using NodeT = detail::Node<T>;
    std::vector<NodeT*> order;
    std::unordered_set<NodeT*> seen;
    std::vector<std::pair<NodeT*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            NodeT* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    loss.node()->grad_ref().setOnes();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT* n = *it;
        if (n->backward && n->grad.size()) n->backward(*n);
    }
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check(a.cols() == b.rows(), "matmul " + detail::dims(a.rows(), a.cols()) + " by " + detail::dims(b.rows(), b.cols()));
    Mat<T> v = a.value() * b.value();
    return Tensor<T>::make(std::move(v), {a, b}, [an = a.node(), bn = b.node()](detail::Node<T>& o) {
        if (an->requires_grad) an->grad_ref().noalias() += o.grad * bn->value.transpose();
        if (bn->requires_grad) bn->grad_ref().noalias() += an->value.transpose() * o.grad;
    });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "add shapes differ");
    Mat<T> v = a.value() + b.value();
    return Tensor<T>::make(std::move(v), {a, b}, [an = a.node(), bn = b.node()](detail::Node<T>& o) {
        detail::accumulate(an, o.grad);
        detail::accumulate(bn, o.grad);
    });
}

/// Elementwise product.
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "mul shapes differ");
    Mat<T> v = a.value().cwiseProduct(b.value());
    return Tensor<T>::make(std::move(v), {a, b}, [an = a.node(), bn = b.node()](detail::Node<T>& o) {
        if (an->requires_grad) an->grad_ref() += o.grad.cwiseProduct(bn->value);
        if (bn->requires_grad) bn->grad_ref() += o.grad.cwiseProduct(an->value);
    });
}

/// Sum of all entries as a 1 x 1 tensor.
template <class T>
Tensor<T> sum(const Tensor<T>& a) {
    return Tensor<T>::make(Mat<T>::Constant(1, 1, a.value().sum()), {a},
                           [an = a.node()](detail::Node<T>& o) { an->grad_ref().array() += o.grad(0, 0); });
}

/// Adds a 1 x c bias row to every row of a.
template <class T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& bias) {
    detail::check(bias.rows() == 1 && bias.cols() == a.cols(), "bias row must be 1x" + std::to_string(a.cols()));
    Mat<T> v = a.value().rowwise() + bias.value().row(0);
    return Tensor<T>::make(std::move(v), {a, bias}, [an = a.node(), bn = bias.node()](detail::Node<T>& o) {
        detail::accumulate(an, o.grad);
        if (bn->requires_grad) bn->grad_ref() += o.grad.colwise().sum();
    });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Mat<T> v = a.value() * s;
    return Tensor<T>::make(std::move(v), {a}, [an = a.node(), s](detail::Node<T>& o) { detail::accumulate<T>(an, o.grad * s); });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
    Mat<T> v = a.value().transpose();
    return Tensor<T>::make(std::move(v), {a},
                           [an = a.node()](detail::Node<T>& o) { detail::accumulate<T>(an, o.grad.transpose()); });
}

/// Concatenates along axis 0 (rows) or 1 (columns).
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    detail::check(!parts.empty(), "concat of nothing");
    detail::check(axis == 0 || axis == 1, "axis must be 0 or 1");
    std::size_t total = 0;
    for (const auto& p : parts) {
        detail::check(axis == 0 ? p.cols() == parts[0].cols() : p.rows() == parts[0].rows(), "concat extents differ");
        total += axis == 0 ? p.rows() : p.cols();
    }
    const auto r = static_cast<Eigen::Index>(axis == 0 ? total : parts[0].rows());
    const auto c = static_cast<Eigen::Index>(axis == 1 ? total : parts[0].cols());
    Mat<T> v(r, c);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        const auto& pv = p.value();
        if (axis == 0) {
            v.middleRows(at, pv.rows()) = pv;
            at += pv.rows();
        } else {
            v.middleCols(at, pv.cols()) = pv;
            at += pv.cols();
        }
    }
    std::vector<std::shared_ptr<detail::Node<T>>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return Tensor<T>::make(std::move(v), parts, [nodes, axis](detail::Node<T>& o) {
        Eigen::Index at = 0;
        for (const auto& n : nodes) {
            const auto len = axis == 0 ? n->value.rows() : n->value.cols();
            if (n->requires_grad) {
                if (axis == 0) {
                    n->grad_ref() += o.grad.middleRows(at, len);
                } else {
                    n->grad_ref() += o.grad.middleCols(at, len);
                }
            }
            at += len;
        }
    });
}

/// Half-open [begin, end) along axis 0 (rows) or 1 (columns).
template <class T>
Tensor<T> slice(const Tensor<T>& a, int axis, std::size_t begin, std::size_t end) {
    detail::check(axis == 0 || axis == 1, "axis must be 0 or 1");
    detail::check(begin <= end && end <= (axis == 0 ? a.rows() : a.cols()), "slice out of range");
    const auto b = static_cast<Eigen::Index>(begin), len = static_cast<Eigen::Index>(end - begin);
    Mat<T> v = axis == 0 ? Mat<T>(a.value().middleRows(b, len)) : Mat<T>(a.value().middleCols(b, len));
    return Tensor<T>::make(std::move(v), {a}, [an = a.node(), axis, b, len](detail::Node<T>& o) {
        if (axis == 0) {
            an->grad_ref().middleRows(b, len) += o.grad;
        } else {
            an->grad_ref().middleCols(b, len) += o.grad;
        }
    });
}

/// Row lookup: out.row(k) = a.row(index[k]). Serves embeddings and row selection.
template <class T, class Index>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<Index>& index) {
    Mat<T> v(static_cast<Eigen::Index>(index.size()), a.value().cols());
    std::vector<Eigen::Index> idx;
    idx.reserve(index.size());
    for (std::size_t k = 0; k < index.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(index[k]);
        detail::check(i >= 0 && i < a.value().rows(), "row index " + std::to_string(i) + " out of range");
        v.row(static_cast<Eigen::Index>(k)) = a.value().row(i);
        idx.push_back(i);
    }
    return Tensor<T>::make(std::move(v), {a}, [an = a.node(), idx = std::move(idx)](detail::Node<T>& o) {
        auto& g = an->grad_ref();
        for (std::size_t k = 0; k < idx.size(); ++k) g.row(idx[k]) += o.grad.row(static_cast<Eigen::Index>(k));
    });
}

/// Row-wise softmax over visible entries only; hidden entries are exactly 0.
/// Throws EmptyRow when some row has nothing visible.
template <class T>
Tensor<T> masked_softmax(const Tensor<T>& scores, const AttentionMask& mask) {
    detail::check(scores.rows() == mask.size() && scores.cols() == mask.size(), "scores and mask shapes differ");
    const auto n = static_cast<Eigen::Index>(mask.size());
    const Mat<T>& s = scores.value();
    Mat<T> p = Mat<T>::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::uint8_t* vis = mask.row(static_cast<std::size_t>(i));
        T mx = -std::numeric_limits<T>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (vis[j]) mx = std::max(mx, s(i, j));
        }
        if (mx == -std::numeric_limits<T>::infinity()) throw Error(ErrorCode::EmptyRow, "row " + std::to_string(i) + " sees no token");
        T z = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (vis[j]) {
                p(i, j) = std::exp(s(i, j) - mx);
                z += p(i, j);
            }
        }
        p.row(i) /= z;
    }
    Mat<T> kept = p;
    return Tensor<T>::make(std::move(p), {scores}, [sn = scores.node(), kept = std::move(kept)](detail::Node<T>& o) {
        const Mat<T> pg = kept.cwiseProduct(o.grad);
        const Eigen::Matrix<T, Eigen::Dynamic, 1> dot = pg.rowwise().sum();
        sn->grad_ref() += pg - kept.cwiseProduct(dot.replicate(1, kept.cols()));
    });
}

/// Row-wise normalization to zero mean and unit variance, then gain * x + bias.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps = T(1e-5)) {
    detail::check(gain.rows() == 1 && gain.cols() == x.cols() && bias.rows() == 1 && bias.cols() == x.cols(),
                  "layer_norm gain/bias must be 1x" + std::to_string(x.cols()));
    const auto c = static_cast<T>(x.cols());
    const Mat<T>& xv = x.value();
    Mat<T> xhat(xv.rows(), xv.cols());
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(xv.rows());
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
        const T mean = xv.row(i).sum() / c;
        const T var = (xv.row(i).array() - mean).square().sum() / c;
        inv_std(i) = T(1) / std::sqrt(var + eps);
        xhat.row(i) = (xv.row(i).array() - mean) * inv_std(i);
    }
    Mat<T> v = (xhat.array().rowwise() * gain.value().row(0).array()).matrix().rowwise() + bias.value().row(0);
    return Tensor<T>::make(
        std::move(v), {x, gain, bias},
        [xn = x.node(), gn = gain.node(), bn = bias.node(), xhat = std::move(xhat), inv_std = std::move(inv_std), c](detail::Node<T>& o) {
            if (gn->requires_grad) gn->grad_ref() += o.grad.cwiseProduct(xhat).colwise().sum();
            if (bn->requires_grad) bn->grad_ref() += o.grad.colwise().sum();
            if (!xn->requires_grad) return;
            const Mat<T> dxhat = o.grad.array().rowwise() * gn->value.row(0).array();
            auto& g = xn->grad_ref();
            for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                const T mean_d = dxhat.row(i).sum() / c;
                const T mean_dx = dxhat.row(i).dot(xhat.row(i)) / c;
                g.row(i).array() += inv_std(i) * (dxhat.row(i).array() - mean_d - xhat.row(i).array() * mean_dx);
            }
        });
}

/// tanh-approximated GELU.
template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
    const T k = T(0.7978845608028654);  // sqrt(2 / pi)
    const T a = T(0.044715);
    const Mat<T>& xv = x.value();
    Mat<T> t = ((xv.array() + a * xv.array().cube()) * k).tanh().matrix();
    Mat<T> v = (T(0.5) * xv.array() * (T(1) + t.array())).matrix();
    return Tensor<T>::make(std::move(v), {x}, [xn = x.node(), t = std::move(t), k, a](detail::Node<T>& o) {
        const auto& xa = xn->value.array();
        const auto dt = (T(1) - t.array().square()) * k * (T(1) + T(3) * a * xa.square());
        const Mat<T> d = (T(0.5) * (T(1) + t.array()) + T(0.5) * xa * dt).matrix();
        xn->grad_ref() += o.grad.cwiseProduct(d);
    });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Mat<T> v = (T(1) / (T(1) + (-x.value().array()).exp())).matrix();
    Mat<T> kept = v;
    return Tensor<T>::make(std::move(v), {x}, [xn = x.node(), kept = std::move(kept)](detail::Node<T>& o) {
        xn->grad_ref() += (o.grad.array() * kept.array() * (T(1) - kept.array())).matrix();
    });
}

/// Mean binary cross-entropy over all entries of p against 0/1 labels.
/// p is clamped to [1e-7, 1 - 1e-7]; the gradient is evaluated at the clamped value.
template <class T>
Tensor<T> bce_loss(const Tensor<T>& p, const std::vector<int>& y) {
    detail::check(static_cast<std::size_t>(p.value().size()) == y.size() && !y.empty(), "bce_loss needs one label per probability");
    const T lo = T(kProbClamp), hi = T(1) - T(kProbClamp);
    const auto n = static_cast<T>(y.size());
    T sum = 0;
    Mat<T> dp(p.rows(), p.cols());
    for (Eigen::Index k = 0; k < p.value().size(); ++k) {
        const T q = std::clamp(p.value().data()[k], lo, hi);
        const bool pos = y[static_cast<std::size_t>(k)] != 0;
        sum -= pos ? std::log(q) : std::log(T(1) - q);
        dp.data()[k] = (pos ? -T(1) / q : T(1) / (T(1) - q)) / n;
    }
    return Tensor<T>::make(Mat<T>::Constant(1, 1, sum / n), {p}, [pn = p.node(), dp = std::move(dp)](detail::Node<T>& o) {
        pn->grad_ref() += dp * o.grad(0, 0);
    });
}

/// Mean over rows of -log softmax(logits.row(k))[target[k]].
template <class T, class Id>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<Id>& target) {
    detail::check(logits.rows() == target.size() && !target.empty(), "cross_entropy needs one target per row");
    const Mat<T>& l = logits.value();
    Mat<T> soft(l.rows(), l.cols());
    T sum = 0;
    for (Eigen::Index k = 0; k < l.rows(); ++k) {
        const auto t = static_cast<Eigen::Index>(target[static_cast<std::size_t>(k)]);
        detail::check(t >= 0 && t < l.cols(), "target id out of range");
        const T mx = l.row(k).maxCoeff();
        soft.row(k) = (l.row(k).array() - mx).exp();
        const T z = soft.row(k).sum();
        soft.row(k) /= z;
        sum -= l(k, t) - mx - std::log(z);
    }
    const auto n = static_cast<T>(target.size());
    std::vector<Eigen::Index> tgt(target.begin(), target.end());
    return Tensor<T>::make(Mat<T>::Constant(1, 1, sum / n), {logits},
                           [ln = logits.node(), soft = std::move(soft), tgt = std::move(tgt), n](detail::Node<T>& o) {
                               Mat<T> d = soft;
                               for (std::size_t k = 0; k < tgt.size(); ++k) d(static_cast<Eigen::Index>(k), tgt[k]) -= T(1);
                               ln->grad_ref() += d * (o.grad(0, 0) / n);
                           });
}

/// Global L2 norm of all gradients, rescaled to max_norm when above it. Returns the pre-clip norm.
template <class T>
T clip_grad_norm(std::vector<Tensor<T>>& params, T max_norm) {
    T sq = 0;
    for (auto& p : params) sq += p.grad().squaredNorm();
    const T norm = std::sqrt(sq);
    if (norm > max_norm) {
        const T s = max_norm / (norm + T(1e-6));
        for (auto& p : params) p.mutable_grad() *= s;
    }
    return norm;
}

struct AdamWConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

/// First and second moments per parameter, plus the step count.
template <class T>
struct AdamWState {
    std::vector<Mat<T>> m, v;
    long step = 0;
};

/// Decoupled weight decay (p *= 1 - lr * wd) followed by the bias-corrected Adam update.
template <class T>
void adamw_step(std::vector<Tensor<T>>& params, AdamWState<T>& state, const AdamWConfig& cfg) {
    if (state.m.empty()) {
        for (auto& p : params) {
            state.m.push_back(Mat<T>::Zero(p.rows(), p.cols()));
            state.v.push_back(Mat<T>::Zero(p.rows(), p.cols()));
        }
    }
    detail::check(state.m.size() == params.size(), "optimizer state does not match parameter list");
    ++state.step;
    const T lr = T(cfg.lr), b1 = T(cfg.beta1), b2 = T(cfg.beta2), eps = T(cfg.eps);
    const T c1 = T(1) - std::pow(b1, T(state.step));
    const T c2 = T(1) - std::pow(b2, T(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& w = params[k].mutable_value();
        const auto& g = params[k].grad();
        w *= T(1) - lr * T(cfg.weight_decay);
        state.m[k] = b1 * state.m[k] + (T(1) - b1) * g;
        state.v[k] = b2 * state.v[k] + (T(1) - b2) * g.cwiseAbs2();
        w.array() -= lr * (state.m[k].array() / c1) / ((state.v[k].array() / c2).sqrt() + eps);
    }
}

}  // namespace jolt::ad
