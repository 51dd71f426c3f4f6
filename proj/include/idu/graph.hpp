#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "idu/kernels.hpp"
#include "idu/tensor.hpp"

namespace idu::core {

enum class Mode { train, infer };

/// Running batch-norm statistics; owned by the caller (model parameters),
/// updated in place by train-mode forward passes.
template <class T>
struct BnStats {
    std::vector<T> mean;
    std::vector<T> var;
};

/// Reverse-mode autodiff over an explicit op tape. Nodes are appended in
/// topological order by construction; backward walks the tape in reverse.
/// Tensors are immutable once a node is recorded. Every forward op checks
/// its output for NaN/Inf and throws NumericError instead of propagating.
template <class T>
class GraphT {
public:
    using Id = int;
    using BackwardFn = std::function<void(GraphT&, Id)>;

    Id leaf(TensorT<T> value, bool requires_grad = false) {
        return push("leaf", std::move(value), {}, nullptr, requires_grad);
    }

    const TensorT<T>& val(Id id) const { return nodes_[check(id)].value; }

    const TensorT<T>& grad(Id id) const {
        const Id i = check(id);
        if (grads_[i].data.empty()) throw UsageError("graph: no gradient at node " + std::to_string(id));
        return grads_[i];
    }

    bool has_grad(Id id) const { return !grads_[check(id)].data.empty(); }
    size_t node_count() const { return nodes_.size(); }
    const std::vector<Id>& inputs(Id id) const { return nodes_[check(id)].inputs; }

    /// Label prepended to numeric-error messages, e.g. "block 3".
    void set_context(std::string ctx) { ctx_ = std::move(ctx); }

    // ---- ops ---------------------------------------------------------------

    Id matmul(Id a, Id b) {
        const auto& A = val(a);
        const auto& B = val(b);
        if (A.rank() != 2 || B.rank() != 2) throw ShapeError("matmul: rank-2 tensors required");
        if (A.cols() != B.rows())
            throw ShapeError("matmul: inner dims disagree " + A.shape_str() + " x " + B.shape_str());
        const int m = A.rows(), k = A.cols(), n = B.cols();
        TensorT<T> out({m, n});
        k_matmul(A.data.data(), B.data.data(), out.data.data(), m, k, n);
        return push("matmul", std::move(out), {a, b}, [m, k, n](GraphT& g, Id self) {
            const auto [a2, b2] = g.inputs2(self);
            const T* dc = g.grads_[self].data.data();
            if (g.needs_grad(a2)) {
                TensorT<T> da({m, k});
                k_matmul_nt(dc, g.val(b2).data.data(), da.data.data(), m, n, k);
                g.accumulate(a2, da);
            }
            if (g.needs_grad(b2)) {
                TensorT<T> db({k, n});
                k_matmul_tn(g.val(a2).data.data(), dc, db.data.data(), k, m, n);
                g.accumulate(b2, db);
            }
        });
    }

    /// y = x * W^T + b with x:[B x in], W:[out x in], b:[out].
    Id linear(Id x, Id w, Id b) {
        const auto& X = val(x);
        const auto& W = val(w);
        const auto& Bv = val(b);
        if (X.rank() != 2 || W.rank() != 2 || Bv.rank() != 1) throw ShapeError("linear: bad ranks");
        if (X.cols() != W.cols() || W.rows() != Bv.dims[0])
            throw ShapeError("linear: shape mismatch x" + X.shape_str() + " W" + W.shape_str());
        const int rows = X.rows(), in = X.cols(), out_w = W.rows();
        TensorT<T> out({rows, out_w});
        k_matmul_nt(X.data.data(), W.data.data(), out.data.data(), rows, in, out_w);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < out_w; ++c) out.at(r, c) += Bv.data[c];
        return push("linear", std::move(out), {x, w, b}, [rows, in, out_w](GraphT& g, Id self) {
            const auto& ins = g.nodes_[self].inputs;
            const Id x2 = ins[0], w2 = ins[1], b2 = ins[2];
            const T* dy = g.grads_[self].data.data();
            if (g.needs_grad(x2)) {
                TensorT<T> dx({rows, in});
                k_matmul(dy, g.val(w2).data.data(), dx.data.data(), rows, out_w, in);
                g.accumulate(x2, dx);
            }
            if (g.needs_grad(w2)) {
                TensorT<T> dw({out_w, in});
                k_matmul_tn(dy, g.val(x2).data.data(), dw.data.data(), out_w, rows, in);
                g.accumulate(w2, dw);
            }
            if (g.needs_grad(b2)) {
                TensorT<T> db({out_w});
                for (int c = 0; c < out_w; ++c) {
                    double acc = 0.0;
                    for (int r = 0; r < rows; ++r) acc += static_cast<double>(dy[static_cast<size_t>(r) * out_w + c]);
                    db.data[c] = static_cast<T>(acc);
                }
                g.accumulate(b2, db);
            }
        });
    }

    Id relu(Id x) {
        const auto& X = val(x);
        TensorT<T> out(X.dims);
        k_relu(X.data.data(), out.data.data(), X.size());
        return push("relu", std::move(out), {x}, [](GraphT& g, Id self) {
            const Id x2 = g.nodes_[self].inputs[0];
            if (!g.needs_grad(x2)) return;
            const auto& X2 = g.val(x2);
            TensorT<T> dx(X2.dims);
            const T* dy = g.grads_[self].data.data();
            for (size_t i = 0; i < dx.size(); ++i) dx.data[i] = X2.data[i] > T(0) ? dy[i] : T(0);
            g.accumulate(x2, dx);
        });
    }

    Id add(Id a, Id b) {
        const auto& A = val(a);
        const auto& B = val(b);
        if (!A.same_shape(B)) throw ShapeError("add: shape mismatch");
        TensorT<T> out(A.dims);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] = A.data[i] + B.data[i];
        return push("add", std::move(out), {a, b}, [](GraphT& g, Id self) {
            for (Id in : g.nodes_[self].inputs)
                if (g.needs_grad(in)) g.accumulate(in, g.grads_[self]);
        });
    }

    /// Batch normalization over rows of x:[B x d]. Train mode normalizes with
    /// batch statistics and updates `stats` by exponential moving average
    /// (running variance uses the unbiased batch estimate); infer mode uses
    /// `stats` as fixed constants.
    Id batchnorm1d(Id x, Id gamma, Id beta, T eps, Mode mode, BnStats<T>* stats, T momentum = T(0.1)) {
        const auto& X = val(x);
        if (X.rank() != 2) throw ShapeError("batchnorm1d: rank-2 input required");
        const int rows = X.rows(), d = X.cols();
        const auto& G = val(gamma);
        const auto& Be = val(beta);
        if (G.size() != static_cast<size_t>(d) || Be.size() != static_cast<size_t>(d))
            throw ShapeError("batchnorm1d: gamma/beta width mismatch");
        if (mode == Mode::train && rows < 2)
            throw ConfigError("batchnorm1d: train mode requires batch size >= 2, got " + std::to_string(rows));
        if (!stats) throw UsageError("batchnorm1d: running stats required");
        if (stats->mean.size() != static_cast<size_t>(d) || stats->var.size() != static_cast<size_t>(d))
            throw ShapeError("batchnorm1d: running stats width mismatch");

        std::vector<T> inv_std(d);
        TensorT<T> xhat({rows, d});
        if (mode == Mode::train) {
            std::vector<double> mu(d), var(d);
            k_col_mean_var(X.data.data(), rows, d, mu.data(), var.data());
            for (int c = 0; c < d; ++c) inv_std[c] = static_cast<T>(1.0 / std::sqrt(var[c] + static_cast<double>(eps)));
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < d; ++c)
                    xhat.at(r, c) = static_cast<T>((static_cast<double>(X.at(r, c)) - mu[c]) * static_cast<double>(inv_std[c]));
            const double unbias = rows > 1 ? static_cast<double>(rows) / (rows - 1) : 1.0;
            for (int c = 0; c < d; ++c) {
                stats->mean[c] = static_cast<T>((1.0 - momentum) * stats->mean[c] + momentum * mu[c]);
                stats->var[c] = static_cast<T>((1.0 - momentum) * stats->var[c] + momentum * var[c] * unbias);
            }
        } else {
            for (int c = 0; c < d; ++c) inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(stats->var[c]) + static_cast<double>(eps)));
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < d; ++c) xhat.at(r, c) = (X.at(r, c) - stats->mean[c]) * inv_std[c];
        }
        TensorT<T> out({rows, d});
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < d; ++c) out.at(r, c) = G.data[c] * xhat.at(r, c) + Be.data[c];

        const bool batch_stats = mode == Mode::train;
        return push("batchnorm1d", std::move(out), {x, gamma, beta},
                    [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std), batch_stats](GraphT& g, Id self) {
            const auto& ins = g.nodes_[self].inputs;
            const Id x2 = ins[0], g2 = ins[1], b2 = ins[2];
            const T* dy = g.grads_[self].data.data();
            if (g.needs_grad(g2)) {
                TensorT<T> dg({d});
                for (int c = 0; c < d; ++c) {
                    double acc = 0.0;
                    for (int r = 0; r < rows; ++r)
                        acc += static_cast<double>(dy[static_cast<size_t>(r) * d + c]) * static_cast<double>(xhat.at(r, c));
                    dg.data[c] = static_cast<T>(acc);
                }
                g.accumulate(g2, dg);
            }
            if (g.needs_grad(b2)) {
                TensorT<T> db({d});
                for (int c = 0; c < d; ++c) {
                    double acc = 0.0;
                    for (int r = 0; r < rows; ++r) acc += static_cast<double>(dy[static_cast<size_t>(r) * d + c]);
                    db.data[c] = static_cast<T>(acc);
                }
                g.accumulate(b2, db);
            }
            if (!g.needs_grad(x2)) return;
            const auto& gam = g.val(g2);
            TensorT<T> dx({rows, d});
            if (batch_stats) {
                // dx = inv_std/B * (B*dxh - sum(dxh) - xhat * sum(dxh*xhat)), per column
                for (int c = 0; c < d; ++c) {
                    double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                    for (int r = 0; r < rows; ++r) {
                        const double dxh = static_cast<double>(dy[static_cast<size_t>(r) * d + c]) * static_cast<double>(gam.data[c]);
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * static_cast<double>(xhat.at(r, c));
                    }
                    const double s = static_cast<double>(inv_std[c]) / rows;
                    for (int r = 0; r < rows; ++r) {
                        const double dxh = static_cast<double>(dy[static_cast<size_t>(r) * d + c]) * static_cast<double>(gam.data[c]);
                        dx.at(r, c) = static_cast<T>(s * (rows * dxh - sum_dxh - static_cast<double>(xhat.at(r, c)) * sum_dxh_xh));
                    }
                }
            } else {
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < d; ++c) dx.at(r, c) = dy[static_cast<size_t>(r) * d + c] * gam.data[c] * inv_std[c];
            }
            g.accumulate(x2, dx);
        });
    }

    /// softmax(Q K^T / sqrt(dk)) V with Q,K,V:[t x dk].
    Id scaled_dot_attention(Id q, Id k, Id v) {
        const auto& Q = val(q);
        const auto& K = val(k);
        const auto& V = val(v);
        if (Q.rank() != 2 || !Q.same_shape(K) || !Q.same_shape(V))
            throw ShapeError("scaled_dot_attention: Q,K,V must share shape [t x dk]");
        const int t = Q.rows(), dk = Q.cols();
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));
        TensorT<T> scores({t, t});
        k_matmul_nt(Q.data.data(), K.data.data(), scores.data.data(), t, dk, t);
        for (auto& s : scores.data) s *= scale;
        TensorT<T> weights({t, t});
        k_softmax_rows(scores.data.data(), weights.data.data(), t, t);
        TensorT<T> out({t, dk});
        k_matmul(weights.data.data(), V.data.data(), out.data.data(), t, t, dk);
        return push("scaled_dot_attention", std::move(out), {q, k, v},
                    [t, dk, scale, P = std::move(weights)](GraphT& g, Id self) {
            const auto& ins = g.nodes_[self].inputs;
            const Id q2 = ins[0], k2 = ins[1], v2 = ins[2];
            const T* da = g.grads_[self].data.data();
            // dP = dA V^T ; dV = P^T dA
            TensorT<T> dp({t, t});
            k_matmul_nt(da, g.val(v2).data.data(), dp.data.data(), t, dk, t);
            if (g.needs_grad(v2)) {
                TensorT<T> dv({t, dk});
                k_matmul_tn(P.data.data(), da, dv.data.data(), t, t, dk);
                g.accumulate(v2, dv);
            }
            // softmax backward per row, then scale into dS
            TensorT<T> ds({t, t});
            for (int r = 0; r < t; ++r) {
                double dot = 0.0;
                for (int c = 0; c < t; ++c) dot += static_cast<double>(dp.at(r, c)) * static_cast<double>(P.at(r, c));
                for (int c = 0; c < t; ++c)
                    ds.at(r, c) = static_cast<T>((static_cast<double>(dp.at(r, c)) - dot) * static_cast<double>(P.at(r, c)) * static_cast<double>(scale));
            }
            if (g.needs_grad(q2)) {
                TensorT<T> dq({t, dk});
                k_matmul(ds.data.data(), g.val(k2).data.data(), dq.data.data(), t, t, dk);
                g.accumulate(q2, dq);
            }
            if (g.needs_grad(k2)) {
                TensorT<T> dkk({t, dk});
                k_matmul_tn(ds.data.data(), g.val(q2).data.data(), dkk.data.data(), t, t, dk);
                g.accumulate(k2, dkk);
            }
        });
    }

    Id softmax_rows(Id x) {
        const auto& X = val(x);
        if (X.rank() != 2) throw ShapeError("softmax_rows: rank-2 input required");
        TensorT<T> out(X.dims);
        k_softmax_rows(X.data.data(), out.data.data(), X.rows(), X.cols());
        return push("softmax_rows", std::move(out), {x}, [](GraphT& g, Id self) {
            const Id x2 = g.nodes_[self].inputs[0];
            if (!g.needs_grad(x2)) return;
            const auto& Y = g.val(self);
            const T* dy = g.grads_[self].data.data();
            TensorT<T> dx(Y.dims);
            const int rows = Y.rows(), cols = Y.cols();
            for (int r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (int c = 0; c < cols; ++c)
                    dot += static_cast<double>(dy[static_cast<size_t>(r) * cols + c]) * static_cast<double>(Y.at(r, c));
                for (int c = 0; c < cols; ++c)
                    dx.at(r, c) = static_cast<T>((static_cast<double>(dy[static_cast<size_t>(r) * cols + c]) - dot) * static_cast<double>(Y.at(r, c)));
            }
            g.accumulate(x2, dx);
        });
    }

    /// Concatenates rank-2 tensors along columns, left to right.
    Id concat_cols(std::span<const Id> parts) {
        if (parts.empty()) throw ShapeError("concat_cols: no inputs");
        const int rows = val(parts[0]).rows();
        int total = 0;
        for (Id p : parts) {
            const auto& P = val(p);
            if (P.rank() != 2 || P.rows() != rows) throw ShapeError("concat_cols: row mismatch");
            total += P.cols();
        }
        TensorT<T> out({rows, total});
        std::vector<int> offsets;
        int off = 0;
        for (Id p : parts) {
            const auto& P = val(p);
            offsets.push_back(off);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < P.cols(); ++c) out.at(r, off + c) = P.at(r, c);
            off += P.cols();
        }
        return push("concat_cols", std::move(out), {parts.begin(), parts.end()},
                    [rows, offsets = std::move(offsets)](GraphT& g, Id self) {
            const auto& ins = g.nodes_[self].inputs;
            const auto& dy = g.grads_[self];
            for (size_t i = 0; i < ins.size(); ++i) {
                if (!g.needs_grad(ins[i])) continue;
                const auto& P = g.val(ins[i]);
                TensorT<T> dp(P.dims);
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < P.cols(); ++c) dp.at(r, c) = dy.at(r, offsets[i] + c);
                g.accumulate(ins[i], dp);
            }
        });
    }

    Id concat_cols(std::initializer_list<Id> parts) {
        return concat_cols(std::span<const Id>(parts.begin(), parts.size()));
    }

    /// Inverted dropout: train mode zeroes each unit with probability `rate`
    /// and scales survivors by 1/(1-rate); infer mode is the identity.
    Id dropout(Id x, double rate, Mode mode, Rng& rng) {
        if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0,1)");
        if (mode == Mode::infer || rate == 0.0) return x;
        const auto& X = val(x);
        const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
        std::vector<uint8_t> keep(X.size());
        for (auto& b : keep) b = rng.uniform() >= rate ? 1 : 0;
        TensorT<T> out(X.dims);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] = keep[i] ? X.data[i] * keep_scale : T(0);
        return push("dropout", std::move(out), {x}, [keep = std::move(keep), keep_scale](GraphT& g, Id self) {
            const Id x2 = g.nodes_[self].inputs[0];
            if (!g.needs_grad(x2)) return;
            const auto& dy = g.grads_[self];
            TensorT<T> dx(dy.dims);
            for (size_t i = 0; i < dx.size(); ++i) dx.data[i] = keep[i] ? dy.data[i] * keep_scale : T(0);
            g.accumulate(x2, dx);
        });
    }

    /// Categorical cross entropy of probabilities against fixed one-hot
    /// targets: -mean_b sum_c y log(p + 1e-12). Scalar output.
    Id cross_entropy(Id probs, const TensorT<T>& y_onehot) {
        const auto& P = val(probs);
        if (!P.same_shape(y_onehot)) throw ShapeError("cross_entropy: probs/targets shape mismatch");
        const int rows = P.rows(), cols = P.cols();
        double loss = 0.0;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                if (y_onehot.at(r, c) != T(0))
                    loss -= static_cast<double>(y_onehot.at(r, c)) * std::log(static_cast<double>(P.at(r, c)) + 1e-12);
        TensorT<T> out({1}, {static_cast<T>(loss / rows)});
        return push("cross_entropy", std::move(out), {probs}, [y = y_onehot, rows, cols](GraphT& g, Id self) {
            const Id p2 = g.nodes_[self].inputs[0];
            if (!g.needs_grad(p2)) return;
            const T upstream = g.grads_[self].data[0];
            const auto& P2 = g.val(p2);
            TensorT<T> dp({rows, cols});
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c)
                    if (y.at(r, c) != T(0))
                        dp.at(r, c) = static_cast<T>(-static_cast<double>(upstream) * static_cast<double>(y.at(r, c)) /
                                                     (rows * (static_cast<double>(P2.at(r, c)) + 1e-12)));
            g.accumulate(p2, dp);
        });
    }

    /// Scalar sum of x weighted elementwise by a fixed tensor.
    Id weighted_sum(Id x, const TensorT<T>& w) {
        const auto& X = val(x);
        if (!X.same_shape(w)) throw ShapeError("weighted_sum: shape mismatch");
        double acc = 0.0;
        for (size_t i = 0; i < X.size(); ++i) acc += static_cast<double>(X.data[i]) * static_cast<double>(w.data[i]);
        TensorT<T> out({1}, {static_cast<T>(acc)});
        return push("weighted_sum", std::move(out), {x}, [w](GraphT& g, Id self) {
            const Id x2 = g.nodes_[self].inputs[0];
            if (!g.needs_grad(x2)) return;
            const T up = g.grads_[self].data[0];
            TensorT<T> dx(w.dims);
            for (size_t i = 0; i < dx.size(); ++i) dx.data[i] = up * w.data[i];
            g.accumulate(x2, dx);
        });
    }

    Id sum(Id x) {
        const auto& X = val(x);
        double acc = 0.0;
        for (auto v : X.data) acc += static_cast<double>(v);
        TensorT<T> out({1}, {static_cast<T>(acc)});
        return push("sum", std::move(out), {x}, [](GraphT& g, Id self) {
            const Id x2 = g.nodes_[self].inputs[0];
            if (!g.needs_grad(x2)) return;
            const T up = g.grads_[self].data[0];
            TensorT<T> dx(g.val(x2).dims);
            for (auto& v : dx.data) v = up;
            g.accumulate(x2, dx);
        });
    }

    /// Extension point for fused ops (the model's attend). The backward
    /// closure reads grad(self) and accumulates into the inputs.
    Id custom(const std::string& name, std::vector<Id> inputs, TensorT<T> out, BackwardFn backward_fn) {
        return push(name.c_str(), std::move(out), std::move(inputs), std::move(backward_fn));
    }

    // ---- backward ------------------------------------------------------------

    void backward(Id loss) {
        const Id l = check(loss);
        if (val(l).size() != 1) throw UsageError("backward: loss must be scalar, got " + val(l).shape_str());
        if (ran_backward_) throw UsageError("backward: already run on this graph");
        ran_backward_ = true;
        grads_[l] = TensorT<T>({1}, {T(1)});
        for (Id id = l; id >= 0; --id) {
            if (grads_[id].data.empty()) continue;
            if (nodes_[id].backward_fn) nodes_[id].backward_fn(*this, id);
        }
    }

    bool needs_grad(Id id) const { return nodes_[check(id)].needs_grad; }

    void accumulate(Id id, const TensorT<T>& g) {
        const Id i = check(id);
        if (!nodes_[i].needs_grad) return;
        if (!g.same_shape(nodes_[i].value)) throw ShapeError("accumulate: gradient shape mismatch");
        if (grads_[i].data.empty()) {
            grads_[i] = g;
        } else {
            for (size_t j = 0; j < g.size(); ++j) grads_[i].data[j] += g.data[j];
        }
    }

private:
    struct Node {
        const char* op;
        TensorT<T> value;
        std::vector<Id> inputs;
        BackwardFn backward_fn;
        bool needs_grad = false;
    };

    Id push(const char* op, TensorT<T> value, std::vector<Id> inputs, BackwardFn fn, bool leaf_grad = false) {
        bool needs = leaf_grad;
        for (Id in : inputs) needs = needs || nodes_[check(in)].needs_grad;
        if (std::string_view(op) != "leaf") {
            if (ctx_.empty()) {
                value.ensure_finite(op);
            } else {
                try {
                    value.ensure_finite(op);
                } catch (const NumericError& e) {
                    throw NumericError(ctx_ + ": " + e.what());
                }
            }
        }
        nodes_.push_back(Node{op, std::move(value), std::move(inputs), needs ? std::move(fn) : nullptr, needs});
        grads_.emplace_back();
        return static_cast<Id>(nodes_.size() - 1);
    }

    std::pair<Id, Id> inputs2(Id self) const {
        const auto& in = nodes_[self].inputs;
        return {in[0], in[1]};
    }

    Id check(Id id) const {
        if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
            throw UsageError("graph: invalid node id " + std::to_string(id));
        return id;
    }

    std::vector<Node> nodes_;
    std::vector<TensorT<T>> grads_;
    std::string ctx_;
    bool ran_backward_ = false;
};

using Graph = GraphT<float>;

}  // namespace idu::core
