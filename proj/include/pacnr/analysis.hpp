#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "data.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "network.hpp"

namespace pacnr {

/// Values indexed by layer pairs 1 ≤ from < to ≤ D, stored by increasing `to`.
template <class T>
class PairTable {
public:
    PairTable() = default;
    explicit PairTable(std::size_t depth, T fill = T{}) : depth_(depth), data_(depth * (depth - 1) / 2, fill) {}

    std::size_t depth() const { return depth_; }
    std::size_t size() const { return data_.size(); }

    T& at(std::size_t from, std::size_t to) { return data_[index(from, to)]; }
    const T& at(std::size_t from, std::size_t to) const { return data_[index(from, to)]; }

    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    bool operator==(const PairTable&) const = default;

    static std::size_t index_of(std::size_t from, std::size_t to) { return (to - 1) * (to - 2) / 2 + (from - 1); }

private:
    std::size_t index(std::size_t from, std::size_t to) const {
        if (from < 1 || from >= to || to > depth_)
            throw Error("layer pair (" + std::to_string(from) + "->" + std::to_string(to) + ") outside 1 <= d' < d <= " +
                        std::to_string(depth_));
        return index_of(from, to);
    }

    std::size_t depth_ = 0;
    std::vector<T> data_;
};

/// Calls fn(from, to) for every pair 1 ≤ from < to ≤ D in storage order.
template <class Fn>
void for_each_pair(std::size_t D, Fn&& fn) {
    for (std::size_t to = 2; to <= D; ++to)
        for (std::size_t from = 1; from < to; ++from) fn(from, to);
}

struct InterlayerJacobian {
    std::size_t from = 0;
    std::size_t to = 0;
    Matrix matrix;
};

/// W_d · M_{d-1} · prev, i.e. one more layer of the running product.
inline Matrix extend_jacobian(const Matrix& w, const std::vector<std::uint8_t>& mask, const Matrix& prev) {
    Matrix out(w.rows(), prev.cols());
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const double* wr = w.row(r);
        double* o = out.row(r);
        for (std::size_t k = 0; k < w.cols(); ++k) {
            if (!mask[k]) continue;
            const double s = wr[k];
            if (s == 0.0) continue;
            const double* pr = prev.row(k);
            for (std::size_t j = 0; j < prev.cols(); ++j) o[j] += s * pr[j];
        }
    }
    return out;
}

/// J^{from→d} for d = from..D under the masks of `trace`. Element 0 is the identity.
inline std::vector<Matrix> jacobians_from(const std::vector<Matrix>& w, const ForwardTrace& trace, std::size_t from) {
    const std::size_t D = w.size();
    if (from > D) throw Error("jacobian: from-layer " + std::to_string(from) + " exceeds depth " + std::to_string(D));
    const std::size_t n = from == 0 ? w[0].cols() : w[from - 1].rows();
    std::vector<Matrix> out;
    out.reserve(D - from + 1);
    out.push_back(Matrix::identity(n));
    for (std::size_t d = from + 1; d <= D; ++d) out.push_back(extend_jacobian(w[d - 1], trace.mask[d - 1], out.back()));
    return out;
}

inline InterlayerJacobian jacobian(const MlpParams& p, const ForwardTrace& trace, std::size_t d_from, std::size_t d_to) {
    if (d_from > d_to || d_to > p.depth())
        throw Error("jacobian: need 0 <= d_from <= d_to <= " + std::to_string(p.depth()) + ", got " + std::to_string(d_from) +
                    " and " + std::to_string(d_to));
    const std::size_t n = d_from == 0 ? p.input_dim() : p.dims()[d_from];
    Matrix j = Matrix::identity(n);
    for (std::size_t d = d_from + 1; d <= d_to; ++d) j = extend_jacobian(p.W(d), trace.mask[d - 1], j);
    return {d_from, d_to, std::move(j)};
}

struct InputProperties {
    std::vector<std::size_t> dims;
    Vector layer_l2;                         // ‖h^d‖ for d = 0..D-1
    Vector min_preact;                       // min_h |f^d_h| for d = 1..D-1, at index d-1
    std::vector<Vector> sorted_abs_preacts;  // ascending |f^d| for d = 1..D-1, at index d-1
    PairTable<double> jac_row_l2;
    PairTable<double> jac_spec;
    double margin_value = 0.0;
    std::size_t spectral_unconverged = 0;

    std::size_t depth() const { return dims.size() - 1; }
};

/// Everything measured for one input: trace, Jacobians J^{d'→d} for 1 ≤ d' ≤ d ≤ D, their Frobenius
/// norms and the derived InputProperties.
struct InputAnalysis {
    ForwardTrace trace;
    std::vector<std::vector<Matrix>> jac;  // jac[d'-1][d-d'] = J^{d'→d}
    PairTable<double> jac_fro;
    PairTable<Vector> spec_vectors;         // right singular vectors, reusable as power-iteration starts
    InputProperties props;

    const Matrix& J(std::size_t from, std::size_t to) const { return jac.at(from - 1).at(to - from); }
};

inline constexpr std::uint64_t kSpectralSeed = 0x5bec7a1;

struct AnalysisOptions {
    double spectral_tol = 1e-10;
    std::size_t spectral_max_iters = 1000;
    const PairTable<Vector>* warm_start = nullptr;  // starting vectors per pair
    const ForwardTrace* pinned = nullptr;           // freeze activations to these masks
};

inline InputAnalysis analyze_input(const std::vector<Matrix>& w, const Vector& x, std::size_t y,
                                   const AnalysisOptions& opt = {}) {
    const std::size_t D = w.size();
    InputAnalysis a;
    a.trace = forward_weights(w, x, opt.pinned);
    InputProperties& p = a.props;
    p.dims.push_back(w[0].cols());
    for (const Matrix& m : w) p.dims.push_back(m.rows());

    for (std::size_t d = 0; d < D; ++d) p.layer_l2.push_back(norm2(a.trace.h[d]));
    for (std::size_t d = 1; d < D; ++d) {
        Vector s = a.trace.f[d];
        for (double& v : s) v = std::abs(v);
        std::sort(s.begin(), s.end());
        p.min_preact.push_back(s.front());
        p.sorted_abs_preacts.push_back(std::move(s));
    }

    p.jac_row_l2 = PairTable<double>(D);
    p.jac_spec = PairTable<double>(D);
    a.jac_fro = PairTable<double>(D);
    a.spec_vectors = PairTable<Vector>(D);
    a.jac.reserve(D);
    for (std::size_t from = 1; from <= D; ++from) a.jac.push_back(jacobians_from(w, a.trace, from));
    for_each_pair(D, [&](std::size_t from, std::size_t to) {
        const Matrix& j = a.J(from, to);
        p.jac_row_l2.at(from, to) = max_row_l2(j);
        a.jac_fro.at(from, to) = frobenius_norm(j);
        RngStream rng(kSpectralSeed, PairTable<double>::index_of(from, to));
        const Vector* start = opt.warm_start ? &opt.warm_start->at(from, to) : nullptr;
        SpectralNorm s = spectral_norm(j, rng, opt.spectral_tol, opt.spectral_max_iters, start);
        p.jac_spec.at(from, to) = s.value;
        if (!s.converged) ++p.spectral_unconverged;
        a.spec_vectors.at(from, to) = std::move(s.right);
    });
    p.margin_value = margin(a.trace, y);
    return a;
}

inline InputProperties input_properties(const MlpParams& params, const LabeledExample& ex) {
    return analyze_input(params.weights, ex.x, ex.y).props;
}

struct PropertyBounds {
    std::vector<std::size_t> dims;
    Vector alpha;         // d = 0..D-1
    Vector gamma_min;     // d = 1..D-1 at index d-1
    Vector gamma_5pc;
    Vector gamma_median;
    PairTable<double> zeta;
    PairTable<double> kappa;
    std::size_t m = 0;
    double gamma_class = 0.0;
    double max_input_norm = 0.0;  // unclamped max ‖x‖ over the data
    std::size_t spectral_unconverged = 0;

    std::size_t depth() const { return dims.size() - 1; }
    std::size_t width() const { return dims[1]; }

    /// ζ^{d'→d}, with ζ^{d→d} = 1 (identity Jacobian).
    double zeta_at(std::size_t from, std::size_t to) const { return from == to ? 1.0 : zeta.at(from, to); }
    double kappa_at(std::size_t from, std::size_t to) const { return from == to ? 1.0 : kappa.at(from, to); }

    bool operator==(const PropertyBounds&) const = default;
};

/// Number of points dropped by the 5% variant: ⌈0.05·m⌉, keeping at least one point.
inline std::size_t five_percent_drop(std::size_t m) { return std::min((5 * m + 99) / 100, m - 1); }

/// Index into an ascending sort of H units for the median variant: ⌈H/2⌉, clamped to the last unit.
inline std::size_t median_index(std::size_t H) { return std::min((H + 1) / 2, H - 1); }

inline PropertyBounds aggregate_bounds(const std::vector<InputProperties>& per_input, double gamma_class) {
    if (per_input.empty()) throw Error("aggregate_bounds: no inputs");
    PropertyBounds b;
    b.dims = per_input.front().dims;
    const std::size_t D = b.depth();
    for (const auto& p : per_input)
        if (p.dims != b.dims) throw DimensionError("aggregate_bounds: inputs disagree on network shape");
    const double inf = std::numeric_limits<double>::infinity();
    b.m = per_input.size();
    b.gamma_class = gamma_class;
    b.alpha.assign(D, 0.0);
    b.gamma_min.assign(D - 1, inf);
    b.gamma_median.assign(D - 1, inf);
    b.zeta = PairTable<double>(D, 0.0);
    b.kappa = PairTable<double>(D, 0.0);

    for (const auto& p : per_input) {
        for (std::size_t d = 0; d < D; ++d) b.alpha[d] = std::max(b.alpha[d], p.layer_l2[d]);
        for (std::size_t i = 0; i + 1 < D; ++i) {
            b.gamma_min[i] = std::min(b.gamma_min[i], p.min_preact[i]);
            const Vector& s = p.sorted_abs_preacts[i];
            b.gamma_median[i] = std::min(b.gamma_median[i], s[median_index(s.size())]);
        }
        for (std::size_t k = 0; k < b.zeta.size(); ++k) {
            b.zeta.values()[k] = std::max(b.zeta.values()[k], p.jac_row_l2.values()[k]);
            b.kappa.values()[k] = std::max(b.kappa.values()[k], p.jac_spec.values()[k]);
        }
        b.spectral_unconverged += p.spectral_unconverged;
    }
    b.max_input_norm = b.alpha[0];
    for (double& a : b.alpha) a = std::max(a, 1.0);
    for (double& z : b.zeta.values()) z = std::max(z, 1.0);
    for (double& k : b.kappa.values()) k = std::max(k, 1.0);

    // 5% variant: drop the points whose smallest |preact| over all layers and units is smallest.
    // Ties are broken by the full per-layer vector so the result does not depend on input order.
    std::vector<const Vector*> mins;
    mins.reserve(per_input.size());
    for (const auto& p : per_input) mins.push_back(&p.min_preact);
    auto point_min = [](const Vector* v) { return *std::min_element(v->begin(), v->end()); };
    std::sort(mins.begin(), mins.end(), [&](const Vector* a, const Vector* c) {
        const double ma = point_min(a), mc = point_min(c);
        if (ma != mc) return ma < mc;
        return *a < *c;
    });
    b.gamma_5pc.assign(D - 1, inf);
    for (std::size_t k = five_percent_drop(b.m); k < mins.size(); ++k)
        for (std::size_t i = 0; i + 1 < D; ++i) b.gamma_5pc[i] = std::min(b.gamma_5pc[i], (*mins[k])[i]);
    return b;
}

struct ScanResult {
    PropertyBounds bounds;
    std::vector<InputProperties> archive;
};

inline std::vector<InputProperties> scan_properties(const MlpParams& params, const std::vector<LabeledExample>& data) {
    std::vector<InputProperties> archive;
    archive.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        try {
            archive.push_back(input_properties(params, data[i]));
        } catch (const std::exception& e) {
            throw Error("example " + std::to_string(i) + ": " + e.what());
        }
    }
    return archive;
}

inline ScanResult scan_dataset(const MlpParams& params, const std::vector<LabeledExample>& data, double gamma_class) {
    if (data.empty()) throw Error("scan_dataset: empty data");
    ScanResult r;
    r.archive = scan_properties(params, data);
    r.bounds = aggregate_bounds(r.archive, gamma_class);
    return r;
}

/// One row per example: margin, layer norms, min preacts, Jacobian row/spectral norms.
inline void write_archive_csv(std::ostream& out, const std::vector<InputProperties>& archive) {
    if (archive.empty()) return;
    const std::size_t D = archive.front().depth();
    out << "index,margin";
    for (std::size_t d = 0; d < D; ++d) out << ",layer_l2_" << d;
    for (std::size_t d = 1; d < D; ++d) out << ",min_preact_" << d;
    for_each_pair(D, [&](std::size_t a, std::size_t b) { out << ",jac_row_l2_" << a << "_" << b; });
    for_each_pair(D, [&](std::size_t a, std::size_t b) { out << ",jac_spec_" << a << "_" << b; });
    out << "\n";
    const auto old = out.precision(12);
    for (std::size_t i = 0; i < archive.size(); ++i) {
        const auto& p = archive[i];
        out << i << "," << p.margin_value;
        for (double v : p.layer_l2) out << "," << v;
        for (double v : p.min_preact) out << "," << v;
        for (double v : p.jac_row_l2.values()) out << "," << v;
        for (double v : p.jac_spec.values()) out << "," << v;
        out << "\n";
    }
    out.precision(old);
}

}  // namespace pacnr
