#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace pacnr {

struct LabeledExample {
    Vector x;
    std::size_t y = 0;
};

enum class InitScheme { InvSqrtFanin, InvFourthRootFanin };

inline std::string to_string(InitScheme s) { return s == InitScheme::InvSqrtFanin ? "inv-sqrt-fanin" : "inv-fourth-root-fanin"; }

inline InitScheme parse_init_scheme(const std::string& s) {
    if (s == "inv-sqrt-fanin") return InitScheme::InvSqrtFanin;
    if (s == "inv-fourth-root-fanin") return InitScheme::InvFourthRootFanin;
    throw Error("unknown init scheme '" + s + "' (expected inv-sqrt-fanin or inv-fourth-root-fanin)");
}

/// Bias-free ReLU network f(x) = W_D φ(… φ(W_1 x)) together with its initialization Z.
/// weights[d-1] holds W_d, of shape dims[d] × dims[d-1].
class MlpParams {
public:
    MlpParams() = default;
    MlpParams(std::vector<std::size_t> dims, std::vector<Matrix> weights, std::vector<Matrix> init)
        : weights(std::move(weights)), dims_(std::move(dims)), init_(std::move(init)) {
        validate();
    }

    std::size_t depth() const { return weights.size(); }
    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t input_dim() const { return dims_.front(); }
    std::size_t num_classes() const { return dims_.back(); }
    /// Hidden width H (dims[1]).
    std::size_t width() const { return dims_[1]; }

    const Matrix& W(std::size_t d) const { return weights.at(d - 1); }
    const Matrix& Z(std::size_t d) const { return init_.at(d - 1); }
    const std::vector<Matrix>& init() const { return init_; }

    std::vector<Matrix> weights;

private:
    void validate() const {
        if (dims_.size() < 3) throw DimensionError("network needs depth >= 2");
        if (weights.size() != dims_.size() - 1 || init_.size() != weights.size())
            throw DimensionError("network: weight count does not match dims");
        for (std::size_t d = 0; d < weights.size(); ++d) {
            for (const Matrix* m : {&weights[d], &init_[d]}) {
                if (m->rows() != dims_[d + 1] || m->cols() != dims_[d])
                    throw DimensionError("network: layer " + std::to_string(d + 1) + " has shape " + shape_of(*m) +
                                         ", expected " + std::to_string(dims_[d + 1]) + "x" + std::to_string(dims_[d]));
            }
        }
    }

    std::vector<std::size_t> dims_;
    std::vector<Matrix> init_;
};

inline std::vector<std::size_t> mlp_dims(std::size_t input_dim, std::size_t width, std::size_t depth,
                                         std::size_t classes) {
    if (depth < 2) throw DimensionError("depth must be >= 2");
    std::vector<std::size_t> dims{input_dim};
    for (std::size_t d = 1; d < depth; ++d) dims.push_back(width);
    dims.push_back(classes);
    return dims;
}

inline MlpParams init_network(const std::vector<std::size_t>& dims, InitScheme scheme, RngStream& rng) {
    if (dims.size() < 3) throw DimensionError("init_network: need at least input, one hidden and output dims");
    for (std::size_t v : dims)
        if (v == 0) throw DimensionError("init_network: zero dimension");
    std::vector<Matrix> w;
    for (std::size_t d = 1; d < dims.size(); ++d) {
        const double fan_in = static_cast<double>(dims[d - 1]);
        const double sd = scheme == InitScheme::InvSqrtFanin ? 1.0 / std::sqrt(fan_in) : std::pow(fan_in, -0.25);
        w.push_back(sample_gaussian_matrix(dims[d], dims[d - 1], sd, rng));
    }
    std::vector<Matrix> z = w;
    return MlpParams(dims, std::move(w), std::move(z));
}

/// f[d] for d = 0..D (f[0] = x), h[d] for d = 0..D-1 (h[0] = x), mask[d] for d = 0..D-1 (mask[0] all ones).
struct ForwardTrace {
    std::vector<Vector> f;
    std::vector<Vector> h;
    std::vector<std::vector<std::uint8_t>> mask;

    std::size_t depth() const { return f.size() - 1; }
    const Vector& x() const { return f.front(); }
    const Vector& logits() const { return f.back(); }
};

inline void apply_relu(const Vector& f, Vector& h, std::vector<std::uint8_t>& m) {
    h.resize(f.size());
    m.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        m[i] = f[i] > 0.0 ? 1 : 0;
        h[i] = m[i] ? f[i] : 0.0;
    }
}

/// Forward pass through explicit weights. With `pinned` set, hidden activations use those masks instead of
/// recomputing them from the signs (frozen-activation network).
inline ForwardTrace forward_weights(const std::vector<Matrix>& w, const Vector& x, const ForwardTrace* pinned = nullptr) {
    const std::size_t D = w.size();
    if (w.empty() || w.front().cols() != x.size())
        throw DimensionError("forward: input of dim " + std::to_string(x.size()) + " for first layer " +
                             (w.empty() ? std::string("<none>") : shape_of(w.front())));
    ForwardTrace t;
    t.f.resize(D + 1);
    t.h.resize(D);
    t.mask.resize(D);
    t.f[0] = x;
    t.h[0] = x;
    t.mask[0].assign(x.size(), 1);
    for (std::size_t d = 1; d <= D; ++d) {
        t.f[d] = matvec(w[d - 1], t.h[d - 1]);
        if (d == D) break;
        if (pinned) {
            t.mask[d] = pinned->mask.at(d);
            t.h[d].resize(t.f[d].size());
            for (std::size_t i = 0; i < t.f[d].size(); ++i) t.h[d][i] = t.mask[d][i] ? t.f[d][i] : 0.0;
        } else {
            apply_relu(t.f[d], t.h[d], t.mask[d]);
        }
    }
    return t;
}

inline ForwardTrace forward(const MlpParams& p, const Vector& x) { return forward_weights(p.weights, x); }

inline double margin_of(const Vector& logits, std::size_t y) {
    if (logits.size() < 2) throw Error("margin: need at least two classes");
    if (y >= logits.size()) throw Error("margin: label " + std::to_string(y) + " out of range");
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logits.size(); ++j)
        if (j != y) best = std::max(best, logits[j]);
    return logits[y] - best;
}

inline double margin(const ForwardTrace& t, std::size_t y) { return margin_of(t.logits(), y); }

/// 0 iff margin ≥ gamma.
inline int margin_loss(const ForwardTrace& t, std::size_t y, double gamma) {
    if (gamma < 0.0) throw Error("margin_loss: gamma must be nonnegative");
    return margin(t, y) >= gamma ? 0 : 1;
}

/// Numerically stable softmax cross-entropy; writes softmax into `p`.
inline double softmax_xent(const Vector& logits, std::size_t y, Vector& p) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    p.resize(logits.size());
    double s = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        p[j] = std::exp(logits[j] - mx);
        s += p[j];
    }
    for (double& v : p) v /= s;
    return -(logits[y] - mx - std::log(s));
}

struct LossGrad {
    double loss = 0.0;
    std::vector<Matrix> grads;
};

inline std::vector<Matrix> zeros_like(const std::vector<Matrix>& w) {
    std::vector<Matrix> g;
    g.reserve(w.size());
    for (const Matrix& m : w) g.emplace_back(m.rows(), m.cols());
    return g;
}

namespace detail {

/// Scratch space for the training hot path. The first layer is applied through its transpose and only the
/// nonzero input coordinates, which for image data skips most of the largest matrix.
struct FastPass {
    Matrix w1t;  // N x H
    std::vector<std::size_t> nz;
    std::vector<Vector> f, h;  // f[d], h[d] as in ForwardTrace, h[0] unused

    void bind(const std::vector<Matrix>& w) {
        w1t = transpose(w.front());
        f.resize(w.size() + 1);
        h.resize(w.size());
    }

    const Vector& run(const std::vector<Matrix>& w, const Vector& x) {
        const std::size_t D = w.size(), H1 = w1t.cols();
        if (x.size() != w1t.rows())
            throw DimensionError("forward: input of dim " + std::to_string(x.size()) + " for first layer " + shape_of(w.front()));
        nz.clear();
        for (std::size_t j = 0; j < x.size(); ++j)
            if (x[j] != 0.0) nz.push_back(j);
        Vector& f1 = f[1];
        f1.assign(H1, 0.0);
        for (std::size_t j : nz) {
            const double xj = x[j];
            const double* r = w1t.row(j);
            for (std::size_t i = 0; i < H1; ++i) f1[i] += xj * r[i];
        }
        for (std::size_t d = 1; d < D; ++d) {
            h[d].resize(f[d].size());
            for (std::size_t i = 0; i < f[d].size(); ++i) h[d][i] = f[d][i] > 0.0 ? f[d][i] : 0.0;
            f[d + 1] = matvec(w[d], h[d]);
        }
        return f[D];
    }
};

}  // namespace detail

/// Mean softmax cross-entropy and its gradient over the selected examples.
inline LossGrad cross_entropy_grad(const MlpParams& p, std::span<const LabeledExample* const> batch) {
    if (batch.empty()) throw Error("cross_entropy_grad: empty batch");
    const std::size_t D = p.depth();
    LossGrad out;
    out.grads = zeros_like(p.weights);
    detail::FastPass fp;
    fp.bind(p.weights);
    Matrix g1t(p.input_dim(), p.width());
    Vector prob, delta, back;
    for (const LabeledExample* ex : batch) {
        out.loss += softmax_xent(fp.run(p.weights, ex->x), ex->y, prob);
        delta = prob;
        delta[ex->y] -= 1.0;
        for (std::size_t d = D; d >= 2; --d) {
            Matrix& g = out.grads[d - 1];
            const Vector& in = fp.h[d - 1];
            for (std::size_t r = 0; r < g.rows(); ++r) {
                const double s = delta[r];
                if (s == 0.0) continue;
                double* gr = g.row(r);
                for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += s * in[c];
            }
            back = matvec_t(p.W(d), delta);
            for (std::size_t i = 0; i < back.size(); ++i)
                if (!(fp.f[d - 1][i] > 0.0)) back[i] = 0.0;
            delta.swap(back);
        }
        for (std::size_t j : fp.nz) {
            const double xj = ex->x[j];
            double* gr = g1t.row(j);
            for (std::size_t i = 0; i < delta.size(); ++i) gr[i] += xj * delta[i];
        }
    }
    out.grads[0] = transpose(g1t);
    const double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    for (Matrix& g : out.grads) g *= inv;
    return out;
}

inline LossGrad cross_entropy_grad(const MlpParams& p, const std::vector<LabeledExample>& batch) {
    std::vector<const LabeledExample*> ptrs;
    ptrs.reserve(batch.size());
    for (const auto& e : batch) ptrs.push_back(&e);
    return cross_entropy_grad(p, ptrs);
}

inline std::vector<Matrix> grad_cross_entropy(const MlpParams& p, const std::vector<LabeledExample>& batch) {
    return cross_entropy_grad(p, batch).grads;
}

inline double cross_entropy(const MlpParams& p, const std::vector<LabeledExample>& batch) {
    if (batch.empty()) throw Error("cross_entropy: empty batch");
    Vector prob;
    double s = 0.0;
    for (const auto& e : batch) s += softmax_xent(forward(p, e.x).logits(), e.y, prob);
    return s / static_cast<double>(batch.size());
}

}  // namespace pacnr
