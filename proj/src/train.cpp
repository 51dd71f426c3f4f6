#include "idu/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace idu::model {

namespace {

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long step = 0;
};

double wall_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

TrainResult train(ModelParams& params, const prep::EncodedDataset& data, const TrainConfig& cfg,
                  std::ostream* log) {
    cfg.validate();
    params.shape_audit();
    if (data.rows() < 2) throw DataError("train: need at least 2 rows");
    if (data.width() != params.config.input_dim)
        throw ShapeError("train: dataset width " + std::to_string(data.width()) +
                         " does not match model input_dim " + std::to_string(params.config.input_dim));
    if (data.n_classes() != params.config.n_classes)
        throw ShapeError("train: class count mismatch");

    const long N = data.rows();
    const int d = data.width();
    const int C = data.n_classes();

    // flat views over the learnable tensors, in visit order
    std::vector<core::Tensor*> learnable;
    params.visit([&](const std::string&, core::Tensor& t, bool is_learnable) {
        if (is_learnable) learnable.push_back(&t);
    });
    AdamState adam;
    adam.m.resize(learnable.size());
    adam.v.resize(learnable.size());
    for (size_t i = 0; i < learnable.size(); ++i) {
        adam.m[i].assign(learnable[i]->size(), 0.0);
        adam.v[i].assign(learnable[i]->size(), 0.0);
    }

    Rng rng(cfg.seed);
    TrainResult result;
    ModelParams snapshot = params;  // last completed epoch (initial state before epoch 1)

    std::vector<long> order(N);
    for (long i = 0; i < N; ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double t0 = wall_seconds();
        rng.shuffle(order);
        double loss_sum = 0.0;
        long loss_rows = 0, correct = 0;

        try {
            for (long start = 0; start < N; start += cfg.batch_size) {
                const long stop = std::min(N, start + cfg.batch_size);
                const int B = static_cast<int>(stop - start);
                if (B < 2) {
                    result.dropped_rows += B;
                    continue;
                }
                core::Tensor X({B, d});
                core::Tensor Y({B, C});
                for (int r = 0; r < B; ++r) {
                    const long row = order[start + r];
                    std::copy_n(data.X.data.data() + row * d, d, X.data.data() + static_cast<size_t>(r) * d);
                    std::copy_n(data.Y.data.data() + row * C, C, Y.data.data() + static_cast<size_t>(r) * C);
                }

                core::Graph g;
                auto handles = build_forward(g, params, X, core::Mode::train, &rng);
                if (result.steps == 0) {
                    // leaf order must match the visit order the optimizer state uses
                    size_t li = 0;
                    params.visit([&](const std::string& name, core::Tensor&, bool is_learnable) {
                        if (!is_learnable) return;
                        if (li >= handles.param_ids.size() || handles.param_ids[li].first != name)
                            throw UsageError("train: parameter order mismatch at " + name);
                        ++li;
                    });
                }
                const auto loss_id = g.cross_entropy(handles.probs, Y);
                const double batch_loss = g.val(loss_id).data[0];
                g.backward(loss_id);

                // train accuracy from this step's probabilities
                const auto& probs = g.val(handles.probs);
                for (int r = 0; r < B; ++r) {
                    int argmax = 0;
                    for (int c = 1; c < C; ++c)
                        if (probs.at(r, c) > probs.at(r, argmax)) argmax = c;
                    correct += argmax == data.labels[order[start + r]];
                }
                loss_sum += batch_loss * B;
                loss_rows += B;

                // gather gradients (absent gradient means exactly zero)
                std::vector<const core::Tensor*> grads(learnable.size(), nullptr);
                for (size_t i = 0; i < learnable.size(); ++i) {
                    const auto id = handles.param_ids[i].second;
                    if (g.has_grad(id)) grads[i] = &g.grad(id);
                }

                double norm_sq = 0.0;
                for (const auto* gt : grads)
                    if (gt)
                        for (float v : gt->data) norm_sq += static_cast<double>(v) * v;
                const double norm = std::sqrt(norm_sq);
                const double clip_scale =
                    (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

                adam.step += 1;
                const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.step));
                const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.step));
                for (size_t i = 0; i < learnable.size(); ++i) {
                    if (!grads[i]) continue;
                    auto& m = adam.m[i];
                    auto& v = adam.v[i];
                    auto& w = learnable[i]->data;
                    const auto& gd = grads[i]->data;
                    for (size_t j = 0; j < w.size(); ++j) {
                        const double gj = static_cast<double>(gd[j]) * clip_scale;
                        m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
                        v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
                        const double update =
                            cfg.lr * (m[j] / bias1) / (std::sqrt(v[j] / bias2) + 1e-8);
                        w[j] -= static_cast<float>(update);
                    }
                }
                result.steps += 1;
            }
        } catch (const NumericError& e) {
            params = snapshot;  // retain the last finite checkpoint
            throw NumericError(std::string("train aborted in epoch ") + std::to_string(epoch + 1) + ": " +
                               e.what() + " (parameters rolled back to last completed epoch)");
        }

        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.loss = loss_rows ? loss_sum / loss_rows : 0.0;
        stats.train_accuracy = loss_rows ? static_cast<double>(correct) / loss_rows : 0.0;
        stats.wall_s = wall_seconds() - t0;
        result.history.push_back(stats);
        if (log)
            (*log) << "epoch " << stats.epoch << "/" << cfg.epochs << "  loss " << stats.loss
                   << "  acc " << stats.train_accuracy << "  (" << stats.wall_s << "s)\n";
        snapshot = params;
    }
    return result;
}

void write_history_csv(const std::string& path, const TrainResult& result,
                       const std::string& config_digest) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write history: " + path);
    out << "# config=" << config_digest << "\n";
    out << "epoch,loss,train_accuracy,wall_s\n";
    for (const auto& e : result.history)
        out << e.epoch << "," << e.loss << "," << e.train_accuracy << "," << e.wall_s << "\n";
}

}  // namespace idu::model
