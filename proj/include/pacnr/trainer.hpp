#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "network.hpp"
#include "rng.hpp"

namespace pacnr {

enum class Optimizer { Sgd, Adam };

inline std::string to_string(Optimizer o) { return o == Optimizer::Sgd ? "sgd" : "adam"; }

inline Optimizer parse_optimizer(const std::string& s) {
    if (s == "sgd") return Optimizer::Sgd;
    if (s == "adam") return Optimizer::Adam;
    throw Error("unknown optimizer '" + s + "' (expected sgd or adam)");
}

struct TrainConfig {
    Optimizer optimizer = Optimizer::Sgd;
    double learning_rate = 0.1;
    std::size_t batch_size = 64;
    double stop_fraction = 0.99;
    double stop_margin = 10.0;
    std::size_t max_epochs = 2000;
    std::uint64_t seed = 1;

    /// Settings used for very deep nets (D ≥ 20): Adam at 1e-5 until 0.95 of the data is classified.
    static TrainConfig deep_adam() {
        TrainConfig c;
        c.optimizer = Optimizer::Adam;
        c.learning_rate = 1e-5;
        c.stop_fraction = 0.95;
        return c;
    }

    void validate(std::size_t n) const {
        if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
        if (batch_size == 0) throw Error("batch_size must be positive");
        if (batch_size > n)
            throw Error("batch_size " + std::to_string(batch_size) + " exceeds dataset size " + std::to_string(n));
        if (!(stop_fraction > 0.0 && stop_fraction <= 1.0)) throw Error("stop_fraction must lie in (0, 1]");
        if (!(stop_margin >= 0.0)) throw Error("stop_margin must be nonnegative");
    }
};

struct TrainResult {
    MlpParams params;
    std::size_t epochs_run = 0;
    double final_margin_accuracy = 0.0;
    bool converged = false;
};

inline double margin_accuracy(const MlpParams& p, const std::vector<LabeledExample>& data, double gamma) {
    if (data.empty()) throw Error("margin_accuracy: empty data");
    if (gamma < 0.0) throw Error("margin_accuracy: gamma must be nonnegative");
    detail::FastPass fp;
    fp.bind(p.weights);
    std::size_t ok = 0;
    for (const auto& e : data)
        if (margin_of(fp.run(p.weights, e.x), e.y) >= gamma) ++ok;
    return static_cast<double>(ok) / static_cast<double>(data.size());
}

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t t = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;

    static AdamState for_weights(const std::vector<Matrix>& w) {
        AdamState s;
        s.m = zeros_like(w);
        s.v = zeros_like(w);
        return s;
    }
};

/// One bias-corrected Adam update applied to `weights` in place.
inline void adam_step(AdamState& s, std::vector<Matrix>& weights, const std::vector<Matrix>& grads, double lr) {
    if (grads.size() != weights.size() || s.m.size() != weights.size())
        throw DimensionError("adam_step: state, weights and gradients disagree in layer count");
    ++s.t;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    for (std::size_t l = 0; l < weights.size(); ++l) {
        auto& w = weights[l].data();
        auto& m = s.m[l].data();
        auto& v = s.v[l].data();
        const auto& g = grads[l].data();
        if (g.size() != w.size()) throw DimensionError("adam_step: gradient shape mismatch in layer " + std::to_string(l + 1));
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.eps);
        }
    }
}

inline void sgd_step(std::vector<Matrix>& weights, const std::vector<Matrix>& grads, double lr) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        auto& w = weights[l].data();
        const auto& g = grads[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    }
}

/// Called after each epoch with (epoch, mean training loss, margin accuracy).
using EpochCallback = std::function<void(std::size_t, double, double)>;

inline TrainResult train(MlpParams params, const std::vector<LabeledExample>& data, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
    if (data.empty()) throw Error("train: empty data");
    cfg.validate(data.size());
    RngStream rng(cfg.seed, 0x7261696e);
    AdamState adam = AdamState::for_weights(params.weights);

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<const LabeledExample*> batch;
    batch.reserve(cfg.batch_size);

    TrainResult res;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle(order, rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            batch.clear();
            for (std::size_t i = start; i < std::min(start + cfg.batch_size, order.size()); ++i) batch.push_back(&data[order[i]]);
            LossGrad lg = cross_entropy_grad(params, batch);
            if (!std::isfinite(lg.loss)) throw DivergenceError(epoch, cfg.learning_rate, "non-finite cross-entropy loss");
            loss_sum += lg.loss * static_cast<double>(batch.size());
            if (cfg.optimizer == Optimizer::Sgd)
                sgd_step(params.weights, lg.grads, cfg.learning_rate);
            else
                adam_step(adam, params.weights, lg.grads, cfg.learning_rate);
        }
        for (const Matrix& w : params.weights)
            if (!all_finite(w)) throw DivergenceError(epoch, cfg.learning_rate, "non-finite weights");
        res.epochs_run = epoch;
        res.final_margin_accuracy = margin_accuracy(params, data, cfg.stop_margin);
        if (on_epoch) on_epoch(epoch, loss_sum / static_cast<double>(data.size()), res.final_margin_accuracy);
        if (res.final_margin_accuracy >= cfg.stop_fraction) {
            res.converged = true;
            break;
        }
    }
    if (cfg.max_epochs == 0) res.final_margin_accuracy = margin_accuracy(params, data, cfg.stop_margin);
    res.params = std::move(params);
    return res;
}

}  // namespace pacnr
