#pragma once

#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "idu/graph.hpp"

namespace idu::model {

constexpr float kBnEps = 1e-5f;

struct ModelConfig {
    int input_dim = 0;
    std::vector<int> widths = {512, 512, 256, 128, 64, 32, 16};
    int attn_dim = 16;  // d_k
    int group = 1;      // token group size g
    double dropout = 0.2;
    int n_classes = 0;
    uint64_t seed = 0;

    int depth() const { return static_cast<int>(widths.size()); }

    /// Input width of block l (0-based): d0 + sum of earlier block widths.
    int block_input_width(int l) const {
        int w = input_dim;
        for (int j = 0; j < l; ++j) w += widths[j];
        return w;
    }

    int head_width() const { return block_input_width(depth()); }

    void validate() const {
        if (input_dim < 1) throw ConfigError("model: input_dim must be positive");
        if (widths.empty()) throw ConfigError("model: widths must be non-empty");
        for (int w : widths)
            if (w < 1) throw ConfigError("model: block widths must be positive");
        if (attn_dim < 1) throw ConfigError("model: attn_dim must be >= 1");
        if (group < 1) throw ConfigError("model: group must be >= 1");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0,1)");
        if (n_classes < 2) throw ConfigError("model: need at least 2 classes");
    }

    /// Closed-form learnable parameter count (running stats excluded).
    long learnable_params() const {
        long count = 2L * input_dim;  // input batchnorm gamma/beta
        const long attn = static_cast<long>(attn_dim) * group + attn_dim  // embed U, c
                          + 3L * attn_dim * attn_dim                      // Wq, Wk, Wv
                          + attn_dim;                                     // projection p
        for (int l = 0; l < depth(); ++l) {
            const long in_w = block_input_width(l);
            count += 2L * in_w;                 // block batchnorm
            count += static_cast<long>(widths[l]) * in_w + widths[l];
            count += attn;
        }
        count += static_cast<long>(n_classes) * head_width() + n_classes;
        return count;
    }
};

template <class T>
struct AttentionParamsT {
    core::TensorT<T> embed;       // U [d_k x g]
    core::TensorT<T> embed_bias;  // c [d_k]
    core::TensorT<T> wq, wk, wv;  // [d_k x d_k]
    core::TensorT<T> proj;        // p [d_k]
};

template <class T>
struct BlockParamsT {
    core::TensorT<T> bn_gamma, bn_beta;
    core::BnStats<T> bn_stats;
    core::TensorT<T> weight;  // [w_l x in_l]
    core::TensorT<T> bias;    // [w_l]
    AttentionParamsT<T> attn;
};

template <class T>
struct ModelParamsT {
    ModelConfig config;
    core::TensorT<T> in_gamma, in_beta;
    core::BnStats<T> in_stats;
    std::vector<BlockParamsT<T>> blocks;
    core::TensorT<T> head_weight, head_bias;

    /// Seeded initialization; draw order is the canonical visit order.
    static ModelParamsT init(const ModelConfig& cfg) {
        cfg.validate();
        Rng rng(cfg.seed);
        auto gauss_tensor = [&rng](std::vector<int> dims, double stddev) {
            core::TensorT<T> t(std::move(dims));
            for (auto& v : t.data) v = static_cast<T>(rng.gauss() * stddev);
            return t;
        };
        ModelParamsT p;
        p.config = cfg;
        p.in_gamma = core::TensorT<T>::full({cfg.input_dim}, T(1));
        p.in_beta = core::TensorT<T>::zeros({cfg.input_dim});
        p.in_stats = {std::vector<T>(cfg.input_dim, T(0)), std::vector<T>(cfg.input_dim, T(1))};
        const int dk = cfg.attn_dim;
        for (int l = 0; l < cfg.depth(); ++l) {
            const int in_w = cfg.block_input_width(l);
            const int out_w = cfg.widths[l];
            BlockParamsT<T> b;
            b.bn_gamma = core::TensorT<T>::full({in_w}, T(1));
            b.bn_beta = core::TensorT<T>::zeros({in_w});
            b.bn_stats = {std::vector<T>(in_w, T(0)), std::vector<T>(in_w, T(1))};
            b.weight = gauss_tensor({out_w, in_w}, std::sqrt(2.0 / in_w));
            b.bias = core::TensorT<T>::zeros({out_w});
            b.attn.embed = gauss_tensor({dk, cfg.group}, std::sqrt(2.0 / (cfg.group + dk)));
            b.attn.embed_bias = core::TensorT<T>::zeros({dk});
            b.attn.wq = gauss_tensor({dk, dk}, std::sqrt(1.0 / dk));
            b.attn.wk = gauss_tensor({dk, dk}, std::sqrt(1.0 / dk));
            b.attn.wv = gauss_tensor({dk, dk}, std::sqrt(1.0 / dk));
            b.attn.proj = gauss_tensor({dk}, std::sqrt(1.0 / dk));
            p.blocks.push_back(std::move(b));
        }
        p.head_weight = gauss_tensor({cfg.n_classes, cfg.head_width()}, std::sqrt(2.0 / cfg.head_width()));
        p.head_bias = core::TensorT<T>::zeros({cfg.n_classes});
        return p;
    }

    /// Visits every stored tensor in canonical order. Running statistics are
    /// visited with learnable=false; the visit order defines the checkpoint
    /// tensor order.
    template <class Fn>
    void visit(Fn&& fn) {
        fn("in.gamma", in_gamma, true);
        fn("in.beta", in_beta, true);
        for (size_t l = 0; l < blocks.size(); ++l) {
            const std::string prefix = "block" + std::to_string(l) + ".";
            auto& b = blocks[l];
            fn(prefix + "bn.gamma", b.bn_gamma, true);
            fn(prefix + "bn.beta", b.bn_beta, true);
            fn(prefix + "w", b.weight, true);
            fn(prefix + "b", b.bias, true);
            fn(prefix + "attn.embed", b.attn.embed, true);
            fn(prefix + "attn.embed_bias", b.attn.embed_bias, true);
            fn(prefix + "attn.wq", b.attn.wq, true);
            fn(prefix + "attn.wk", b.attn.wk, true);
            fn(prefix + "attn.wv", b.attn.wv, true);
            fn(prefix + "attn.proj", b.attn.proj, true);
        }
        fn("head.w", head_weight, true);
        fn("head.b", head_bias, true);
        // running statistics last, as plain tensors
        stats_tensor_ = core::TensorT<T>({config.input_dim}, in_stats.mean);
        fn("in.run_mean", stats_tensor_, false);
        in_stats.mean = stats_tensor_.data;
        stats_tensor_ = core::TensorT<T>({config.input_dim}, in_stats.var);
        fn("in.run_var", stats_tensor_, false);
        in_stats.var = stats_tensor_.data;
        for (size_t l = 0; l < blocks.size(); ++l) {
            const std::string prefix = "block" + std::to_string(l) + ".";
            const int in_w = config.block_input_width(static_cast<int>(l));
            stats_tensor_ = core::TensorT<T>({in_w}, blocks[l].bn_stats.mean);
            fn(prefix + "bn.run_mean", stats_tensor_, false);
            blocks[l].bn_stats.mean = stats_tensor_.data;
            stats_tensor_ = core::TensorT<T>({in_w}, blocks[l].bn_stats.var);
            fn(prefix + "bn.run_var", stats_tensor_, false);
            blocks[l].bn_stats.var = stats_tensor_.data;
        }
    }

    /// Number of tensors the checkpoint stores: 12 per block + 6 shared.
    long tensor_count() const { return 6 + 12L * static_cast<long>(blocks.size()); }

    /// Validates every tensor shape against the config.
    void shape_audit() const {
        config.validate();
        auto expect = [](const core::TensorT<T>& t, std::vector<int> dims, const std::string& name) {
            if (t.dims != dims)
                throw ShapeError("shape audit: " + name + " is " + t.shape_str() + ", expected " +
                                 core::TensorT<T>(std::move(dims)).shape_str());
        };
        expect(in_gamma, {config.input_dim}, "in.gamma");
        expect(in_beta, {config.input_dim}, "in.beta");
        if (static_cast<int>(blocks.size()) != config.depth())
            throw ShapeError("shape audit: block count mismatch");
        const int dk = config.attn_dim;
        for (int l = 0; l < config.depth(); ++l) {
            const int in_w = config.block_input_width(l);
            const auto& b = blocks[l];
            const std::string at = "block" + std::to_string(l);
            expect(b.bn_gamma, {in_w}, at + ".bn.gamma");
            expect(b.bn_beta, {in_w}, at + ".bn.beta");
            expect(b.weight, {config.widths[l], in_w}, at + ".w");
            expect(b.bias, {config.widths[l]}, at + ".b");
            expect(b.attn.embed, {dk, config.group}, at + ".attn.embed");
            expect(b.attn.embed_bias, {dk}, at + ".attn.embed_bias");
            expect(b.attn.wq, {dk, dk}, at + ".attn.wq");
            expect(b.attn.wk, {dk, dk}, at + ".attn.wk");
            expect(b.attn.wv, {dk, dk}, at + ".attn.wv");
            expect(b.attn.proj, {dk}, at + ".attn.proj");
            if (b.bn_stats.mean.size() != static_cast<size_t>(in_w) ||
                b.bn_stats.var.size() != static_cast<size_t>(in_w))
                throw ShapeError("shape audit: " + at + " running stats width mismatch");
        }
        expect(head_weight, {config.n_classes, config.head_width()}, "head.w");
        expect(head_bias, {config.n_classes}, "head.b");
        if (in_stats.mean.size() != static_cast<size_t>(config.input_dim) ||
            in_stats.var.size() != static_cast<size_t>(config.input_dim))
            throw ShapeError("shape audit: input running stats width mismatch");
    }

private:
    core::TensorT<T> stats_tensor_;  // scratch for visiting running stats
};

using ModelParams = ModelParamsT<float>;
using AttentionParams = AttentionParamsT<float>;

// ---------------------------------------------------------------------------
// attend: per-sample tokenized self-attention with a residual-sized output.
//
// Each row of h (width w, zero-padded to t*g) becomes t tokens of size g.
// Tokens embed to d_k via e_i = U token_i + c; Q = E Wq, K = E Wk, V = E Wv;
// A = softmax(Q K^T / sqrt(d_k)) V; token i contributes the scalar A_i . p
// broadcast to its g positions; padding is sliced off.
// ---------------------------------------------------------------------------

template <class T>
struct AttendIds {
    using Id = typename core::GraphT<T>::Id;
    Id embed, embed_bias, wq, wk, wv, proj;
};

template <class T>
typename core::GraphT<T>::Id attend(core::GraphT<T>& g, typename core::GraphT<T>::Id h,
                                    const AttendIds<T>& ids, int dk, int group) {
    using Id = typename core::GraphT<T>::Id;
    const auto& H = g.val(h);
    if (H.rank() != 2) throw ShapeError("attend: rank-2 input required");
    if (dk < 1 || group < 1) throw ShapeError("attend: dk and group must be >= 1");
    const int B = H.rows(), w = H.cols();
    const int t = (w + group - 1) / group;
    const auto& U = g.val(ids.embed);
    const auto& c = g.val(ids.embed_bias);
    const auto& Wq = g.val(ids.wq);
    const auto& Wk = g.val(ids.wk);
    const auto& Wv = g.val(ids.wv);
    const auto& p = g.val(ids.proj);
    if (U.dims != std::vector<int>{dk, group} || c.dims != std::vector<int>{dk} ||
        Wq.dims != std::vector<int>{dk, dk} || Wk.dims != std::vector<int>{dk, dk} ||
        Wv.dims != std::vector<int>{dk, dk} || p.dims != std::vector<int>{dk})
        throw ShapeError("attend: attention parameter shapes do not match dk/group");

    // per-sample saved context: E,Q,K,V [t x dk] each, P [t x t], A [t x dk]
    const size_t per_mat = static_cast<size_t>(t) * dk;
    const size_t t_sq = static_cast<size_t>(t) * t;
    const size_t tok_n = static_cast<size_t>(t) * group;
    const size_t per_sample = 5 * per_mat + t_sq;
    std::vector<T> ctx(static_cast<size_t>(B) * per_sample);
    // scratch (tokens, scores) preallocated outside the parallel region
    const size_t fwd_scratch = tok_n + t_sq;
    std::vector<T> scratch(static_cast<size_t>(B) * fwd_scratch);
    core::TensorT<T> out({B, w});
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));

#pragma omp parallel for schedule(static) if (core::parallel_enabled())
    for (int b = 0; b < B; ++b) {
        T* tok = scratch.data() + static_cast<size_t>(b) * fwd_scratch;
        T* scores = tok + tok_n;
        std::fill(tok, tok + tok_n, T(0));
        const T* hrow = H.data.data() + static_cast<size_t>(b) * w;
        for (int i = 0; i < w; ++i) tok[i] = hrow[i];
        T* E = ctx.data() + static_cast<size_t>(b) * per_sample;
        T* Q = E + per_mat;
        T* K = Q + per_mat;
        T* V = K + per_mat;
        T* A = V + per_mat;
        T* P = A + per_mat;
        core::serial::matmul_nt(tok, U.data.data(), E, t, group, dk);
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < dk; ++j) E[static_cast<size_t>(i) * dk + j] += c.data[j];
        core::serial::matmul(E, Wq.data.data(), Q, t, dk, dk);
        core::serial::matmul(E, Wk.data.data(), K, t, dk, dk);
        core::serial::matmul(E, Wv.data.data(), V, t, dk, dk);
        core::serial::matmul_nt(Q, K, scores, t, dk, t);
        for (size_t i = 0; i < t_sq; ++i) scores[i] *= scale;
        core::serial::softmax_rows(scores, P, t, t);
        core::serial::matmul(P, V, A, t, t, dk);
        T* orow = out.data.data() + static_cast<size_t>(b) * w;
        for (int i = 0; i < t; ++i) {
            double s = 0.0;
            for (int j = 0; j < dk; ++j)
                s += static_cast<double>(A[static_cast<size_t>(i) * dk + j]) * static_cast<double>(p.data[j]);
            for (int j = 0; j < group; ++j) {
                const int pos = i * group + j;
                if (pos < w) orow[pos] = static_cast<T>(s);
            }
        }
    }

    std::vector<Id> inputs = {h, ids.embed, ids.embed_bias, ids.wq, ids.wk, ids.wv, ids.proj};
    return g.custom("attend", std::move(inputs), std::move(out),
                    [B, w, t, dk, group, scale, per_mat, per_sample,
                     ctx = std::move(ctx)](core::GraphT<T>& gr, Id self) {
        const auto& ins_vec = gr.inputs(self);
        const Id h2 = ins_vec[0], embed = ins_vec[1], embed_bias = ins_vec[2];
        const Id wq = ins_vec[3], wk = ins_vec[4], wv = ins_vec[5], proj = ins_vec[6];
        const auto& dy = gr.grad(self);
        const auto& H2 = gr.val(h2);
        const auto& U2 = gr.val(embed);
        const auto& Wq2 = gr.val(wq);
        const auto& Wk2 = gr.val(wk);
        const auto& Wv2 = gr.val(wv);
        const auto& p2 = gr.val(proj);

        core::TensorT<T> dh({B, w});
        // per-sample parameter gradients, reduced serially afterwards
        const size_t pg_u = static_cast<size_t>(dk) * group;
        const size_t pg_mat = static_cast<size_t>(dk) * dk;
        const size_t pg_per = pg_u + dk + 3 * pg_mat + dk;  // dU, dc, dWq, dWk, dWv, dp
        std::vector<T> pg(static_cast<size_t>(B) * pg_per, T(0));
        // per-sample temporaries: ds, dA, dP, dS, dV, dQ, dK, dE, tmp, tok, dtok
        const size_t t_sq = static_cast<size_t>(t) * t;
        const size_t tok_n = static_cast<size_t>(t) * group;
        const size_t tmp_per = static_cast<size_t>(t) + 6 * per_mat + 2 * t_sq + 2 * tok_n;
        std::vector<T> tmp_buf(static_cast<size_t>(B) * tmp_per);

#pragma omp parallel for schedule(static) if (core::parallel_enabled())
        for (int b = 0; b < B; ++b) {
            const T* E = ctx.data() + static_cast<size_t>(b) * per_sample;
            const T* Q = E + per_mat;
            const T* K = Q + per_mat;
            const T* V = K + per_mat;
            const T* A = V + per_mat;
            const T* P = A + per_mat;
            T* dU = pg.data() + static_cast<size_t>(b) * pg_per;
            T* dc = dU + pg_u;
            T* dWq = dc + dk;
            T* dWk = dWq + pg_mat;
            T* dWv = dWk + pg_mat;
            T* dp = dWv + pg_mat;

            T* ds = tmp_buf.data() + static_cast<size_t>(b) * tmp_per;
            T* dA = ds + t;
            T* dP = dA + per_mat;
            T* dS = dP + t_sq;
            T* dV = dS + t_sq;
            T* dQ = dV + per_mat;
            T* dK = dQ + per_mat;
            T* dE = dK + per_mat;
            T* tmp = dE + per_mat;
            T* tok = tmp + per_mat;
            T* dtok = tok + tok_n;

            // token-level upstream: ds_i = sum over the group positions
            std::fill(ds, ds + t, T(0));
            const T* dyrow = dy.data.data() + static_cast<size_t>(b) * w;
            for (int pos = 0; pos < w; ++pos) ds[pos / group] += dyrow[pos];

            // dA = ds p^T ; dp += A^T ds
            for (int i = 0; i < t; ++i)
                for (int j = 0; j < dk; ++j) dA[static_cast<size_t>(i) * dk + j] = ds[i] * p2.data[j];
            for (int j = 0; j < dk; ++j) {
                double acc = 0.0;
                for (int i = 0; i < t; ++i)
                    acc += static_cast<double>(A[static_cast<size_t>(i) * dk + j]) * static_cast<double>(ds[i]);
                dp[j] = static_cast<T>(acc);
            }

            // attention backward
            core::serial::matmul_nt(dA, V, dP, t, dk, t);
            core::serial::matmul_tn(P, dA, dV, t, t, dk);
            for (int r = 0; r < t; ++r) {
                double dot = 0.0;
                for (int cidx = 0; cidx < t; ++cidx)
                    dot += static_cast<double>(dP[static_cast<size_t>(r) * t + cidx]) *
                           static_cast<double>(P[static_cast<size_t>(r) * t + cidx]);
                for (int cidx = 0; cidx < t; ++cidx)
                    dS[static_cast<size_t>(r) * t + cidx] =
                        static_cast<T>((static_cast<double>(dP[static_cast<size_t>(r) * t + cidx]) - dot) *
                                       static_cast<double>(P[static_cast<size_t>(r) * t + cidx]) *
                                       static_cast<double>(scale));
            }
            core::serial::matmul(dS, K, dQ, t, t, dk);
            core::serial::matmul_tn(dS, Q, dK, t, t, dk);

            // through the projections into E
            core::serial::matmul_tn(E, dQ, dWq, dk, t, dk);
            core::serial::matmul_tn(E, dK, dWk, dk, t, dk);
            core::serial::matmul_tn(E, dV, dWv, dk, t, dk);
            core::serial::matmul_nt(dQ, Wq2.data.data(), dE, t, dk, dk);
            core::serial::matmul_nt(dK, Wk2.data.data(), tmp, t, dk, dk);
            for (size_t i = 0; i < per_mat; ++i) dE[i] += tmp[i];
            core::serial::matmul_nt(dV, Wv2.data.data(), tmp, t, dk, dk);
            for (size_t i = 0; i < per_mat; ++i) dE[i] += tmp[i];

            // embedding backward
            std::fill(tok, tok + tok_n, T(0));
            const T* hrow = H2.data.data() + static_cast<size_t>(b) * w;
            for (int i = 0; i < w; ++i) tok[i] = hrow[i];
            core::serial::matmul_tn(dE, tok, dU, dk, t, group);
            for (int j = 0; j < dk; ++j) {
                double acc = 0.0;
                for (int i = 0; i < t; ++i) acc += static_cast<double>(dE[static_cast<size_t>(i) * dk + j]);
                dc[j] = static_cast<T>(acc);
            }
            core::serial::matmul(dE, U2.data.data(), dtok, t, dk, group);
            T* dhrow = dh.data.data() + static_cast<size_t>(b) * w;
            for (int pos = 0; pos < w; ++pos) dhrow[pos] = dtok[pos];
        }

        if (gr.needs_grad(h2)) gr.accumulate(h2, dh);
        // deterministic reduction over samples, in sample order
        auto reduce_param = [&](Id id, size_t offset, std::vector<int> dims) {
            if (!gr.needs_grad(id)) return;
            core::TensorT<T> acc(std::move(dims));
            for (int b = 0; b < B; ++b) {
                const T* src = pg.data() + static_cast<size_t>(b) * pg_per + offset;
                for (size_t i = 0; i < acc.size(); ++i) acc.data[i] += src[i];
            }
            gr.accumulate(id, acc);
        };
        reduce_param(embed, 0, {dk, group});
        reduce_param(embed_bias, pg_u, {dk});
        reduce_param(wq, pg_u + dk, {dk, dk});
        reduce_param(wk, pg_u + dk + pg_mat, {dk, dk});
        reduce_param(wv, pg_u + dk + 2 * pg_mat, {dk, dk});
        reduce_param(proj, pg_u + dk + 3 * pg_mat, {dk});
    });
}

// ---------------------------------------------------------------------------
// Forward pass: input batchnorm, densely connected blocks with attention
// residuals, cross-layer aggregation, softmax head.
// ---------------------------------------------------------------------------

template <class T>
struct ForwardHandles {
    using Id = typename core::GraphT<T>::Id;
    Id probs = -1;
    std::vector<std::pair<std::string, Id>> param_ids;  // learnable leaves, visit order
};

template <class T>
ForwardHandles<T> build_forward(core::GraphT<T>& g, ModelParamsT<T>& params, const core::TensorT<T>& X,
                                core::Mode mode, Rng* dropout_rng = nullptr) {
    using Id = typename core::GraphT<T>::Id;
    const ModelConfig& cfg = params.config;
    cfg.validate();
    if (X.rank() != 2 || X.cols() != cfg.input_dim)
        throw ShapeError("forward: input width " + std::to_string(X.rank() == 2 ? X.cols() : -1) +
                         " does not match model input_dim " + std::to_string(cfg.input_dim));
    if (mode == core::Mode::train && cfg.dropout > 0.0 && !dropout_rng)
        throw UsageError("forward: train mode with dropout needs an rng");

    ForwardHandles<T> handles;
    auto leaf = [&](const std::string& name, core::TensorT<T>& t) {
        Id id = g.leaf(t, true);
        handles.param_ids.emplace_back(name, id);
        return id;
    };

    const Id x = g.leaf(X, false);
    g.set_context("input batchnorm");
    const Id in_gamma = leaf("in.gamma", params.in_gamma);
    const Id in_beta = leaf("in.beta", params.in_beta);
    const Id z0 = g.batchnorm1d(x, in_gamma, in_beta, static_cast<T>(kBnEps), mode, &params.in_stats);

    std::vector<Id> parts = {z0};
    for (int l = 0; l < cfg.depth(); ++l) {
        g.set_context("block " + std::to_string(l));
        auto& b = params.blocks[l];
        const std::string prefix = "block" + std::to_string(l) + ".";
        const Id bn_gamma = leaf(prefix + "bn.gamma", b.bn_gamma);
        const Id bn_beta = leaf(prefix + "bn.beta", b.bn_beta);
        const Id weight = leaf(prefix + "w", b.weight);
        const Id bias = leaf(prefix + "b", b.bias);
        AttendIds<T> attn_ids{leaf(prefix + "attn.embed", b.attn.embed),
                              leaf(prefix + "attn.embed_bias", b.attn.embed_bias),
                              leaf(prefix + "attn.wq", b.attn.wq),
                              leaf(prefix + "attn.wk", b.attn.wk),
                              leaf(prefix + "attn.wv", b.attn.wv),
                              leaf(prefix + "attn.proj", b.attn.proj)};

        const Id x_l = parts.size() == 1 ? parts[0]
                                         : g.concat_cols(std::span<const Id>(parts.data(), parts.size()));
        // composite order: batchnorm, relu, fully-connected
        const Id h_l = g.linear(g.relu(g.batchnorm1d(x_l, bn_gamma, bn_beta, static_cast<T>(kBnEps), mode,
                                                     &b.bn_stats)),
                                weight, bias);
        const Id a_l = attend(g, h_l, attn_ids, cfg.attn_dim, cfg.group);
        Id o_l = g.add(a_l, h_l);
        if (mode == core::Mode::train && cfg.dropout > 0.0)
            o_l = g.dropout(o_l, cfg.dropout, mode, *dropout_rng);
        parts.push_back(o_l);
    }

    g.set_context("head");
    const Id head_w = leaf("head.w", params.head_weight);
    const Id head_b = leaf("head.b", params.head_bias);
    const Id z_final = g.concat_cols(std::span<const Id>(parts.data(), parts.size()));
    handles.probs = g.softmax_rows(g.linear(z_final, head_w, head_b));
    g.set_context("");
    return handles;
}

/// Inference convenience: probabilities for a batch, running stats untouched.
template <class T>
core::TensorT<T> forward_infer(ModelParamsT<T>& params, const core::TensorT<T>& X) {
    core::GraphT<T> g;
    return g.val(build_forward(g, params, X, core::Mode::infer).probs);
}

}  // namespace idu::model
