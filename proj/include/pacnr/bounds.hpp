#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "network.hpp"

namespace pacnr {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Reported range for the depth-scaling B-terms; values outside raise a warning.
inline constexpr double kBTermLow = 0.1;
inline constexpr double kBTermHigh = 1000.0;

struct LayerNorms {
    Vector spectral;  // ‖W_d‖₂, d = 1..D at index d-1
    Vector row_max;   // ‖W_d‖_{2,∞}
    std::size_t unconverged = 0;
};

inline LayerNorms layer_norms(const MlpParams& p) {
    LayerNorms n;
    for (std::size_t d = 1; d <= p.depth(); ++d) {
        RngStream rng(kSpectralSeed, 0x10000 + d);
        const SpectralNorm s = spectral_norm(p.W(d), rng);
        if (!s.converged) ++n.unconverged;
        n.spectral.push_back(s.value);
        n.row_max.push_back(max_row_l2(p.W(d)));
    }
    return n;
}

struct BTerms {
    double layer_l2 = 0.0;
    double preact = 0.0;
    double preact_5pc = 0.0;
    double preact_median = 0.0;
    double output = 0.0;
    double jac_row_l2 = 0.0;
    double jac_spec = 0.0;
    double jac_row_l2_loose = 0.0;
    std::vector<std::string> warnings;

    /// The terms whose depth scaling is compared against the spectral product.
    double max_depth_terms() const { return std::max({layer_l2, output, jac_row_l2, jac_spec}); }
    double max_all() const { return std::max({layer_l2, preact, output, jac_row_l2, jac_spec}); }
};

namespace detail {
inline double preact_term(const PropertyBounds& pb, const Vector& gamma, const char* name,
                          std::vector<std::string>& warnings) {
    const std::size_t D = pb.depth();
    const double sH = std::sqrt(static_cast<double>(pb.width()));
    double best = 0.0;
    for (std::size_t d = 1; d < D; ++d) {
        double num = 0.0;
        for (std::size_t dp = 1; dp <= d; ++dp) num += pb.zeta_at(dp, d) * pb.alpha[dp - 1];
        const double g = gamma[d - 1];
        if (!(g > 0.0)) {
            warnings.push_back(std::string(name) + "_zero@" + std::to_string(d));
            best = kInf;
            continue;
        }
        best = std::max(best, num / (sH * g));
    }
    return best;
}
}  // namespace detail

inline BTerms compute_b_terms(const PropertyBounds& pb, const LayerNorms& norms) {
    const std::size_t D = pb.depth();
    const double sH = std::sqrt(static_cast<double>(pb.width()));
    BTerms b;
    for (std::size_t d = 1; d < D; ++d) {
        double num = 0.0;
        for (std::size_t dp = 1; dp <= d; ++dp) num += pb.zeta_at(dp, d) * pb.alpha[dp - 1];
        b.layer_l2 = std::max(b.layer_l2, num / pb.alpha[d]);
    }
    b.preact = detail::preact_term(pb, pb.gamma_min, "gamma_min", b.warnings);
    std::vector<std::string> ignored;
    b.preact_5pc = detail::preact_term(pb, pb.gamma_5pc, "gamma_5pc", ignored);
    b.preact_median = detail::preact_term(pb, pb.gamma_median, "gamma_median", ignored);

    for (std::size_t d = 1; d <= D; ++d) b.output += pb.zeta_at(d, D) * pb.alpha[d - 1];
    b.output /= sH * pb.gamma_class;

    for_each_pair(D, [&](std::size_t dp, std::size_t d) {
        double row = pb.zeta_at(dp, d - 1), spec = pb.kappa_at(dp, d - 1);
        double row_sum = 0.0, spec_sum = 0.0, loose = 0.0;
        for (std::size_t dpp = dp + 1; dpp <= d - 1; ++dpp) {
            row_sum += pb.kappa_at(dpp, d - 1) * pb.zeta_at(dp, dpp - 1);
            spec_sum += pb.kappa_at(dpp, d - 1) * pb.kappa_at(dp, dpp - 1);
        }
        row += norms.row_max[d - 1] * row_sum;
        spec += norms.spectral[d - 1] * spec_sum;
        for (std::size_t dpp = dp + 1; dpp <= d; ++dpp) loose += pb.zeta_at(dpp, d) * pb.zeta_at(dp, dpp - 1);
        b.jac_row_l2 = std::max(b.jac_row_l2, row / pb.zeta_at(dp, d));
        b.jac_spec = std::max(b.jac_spec, spec / pb.kappa_at(dp, d));
        b.jac_row_l2_loose = std::max(b.jac_row_l2_loose, loose / pb.zeta_at(dp, d));
    });
    return b;
}

inline BTerms compute_b_terms(const PropertyBounds& pb, const MlpParams& params) {
    return compute_b_terms(pb, layer_norms(params));
}

enum class GammaVariant { Min, FivePercent, Median };

/// Margins Δ* attached to each property: α^d for layer norms, γ^d/2 for pre-activations, ζ and κ for
/// Jacobians, γ_class for the output margin.
struct ConstraintMargins {
    Vector layer_l2;  // d = 1..D-1 at index d-1
    Vector preact;    // d = 1..D-1 at index d-1
    PairTable<double> jac_row_l2;
    PairTable<double> jac_spec;
    double output = 0.0;

    static ConstraintMargins from_bounds(const PropertyBounds& pb, GammaVariant v = GammaVariant::Min) {
        const std::size_t D = pb.depth();
        const Vector& g = v == GammaVariant::Min ? pb.gamma_min : v == GammaVariant::FivePercent ? pb.gamma_5pc : pb.gamma_median;
        ConstraintMargins m;
        for (std::size_t d = 1; d < D; ++d) {
            m.layer_l2.push_back(pb.alpha[d]);
            m.preact.push_back(g[d - 1] / 2.0);
        }
        m.jac_row_l2 = pb.zeta;
        m.jac_spec = pb.kappa;
        m.output = pb.gamma_class;
        return m;
    }
};

struct ToleranceConstraint {
    std::string label;
    double margin = 0.0;
    double coefficient = 0.0;
};

inline std::string pair_label(const char* kind, std::size_t from, std::size_t to) {
    return std::string(kind) + "[" + std::to_string(from) + "->" + std::to_string(to) + "]";
}

/// Per-property tolerance coefficients c with tolerance(σ) = c·σ. The norms of the perturbed network
/// entering each display are bounded by the dataset constants plus the prior tolerances Ĉ, which are half
/// of the property margins of `pb`. Jacobian Frobenius norms use ‖J‖_F ≤ √rows · ζ.
/// With `loose`, the Jacobian-row constraints use the alternative display and spectral constraints are omitted.
inline std::vector<ToleranceConstraint> build_tolerance_constraints(const PropertyBounds& pb, const ConstraintMargins& margins,
                                                                    const LayerNorms& norms, double delta_hat,
                                                                    bool loose = false) {
    if (!(delta_hat > 0.0 && delta_hat < 1.0)) throw Error("delta_hat must lie in (0, 1)");
    const std::size_t D = pb.depth();
    const double H = static_cast<double>(pb.width());
    const double sH = std::sqrt(H);
    const double DH = static_cast<double>(D) * H;
    const double l2 = std::sqrt(2.0 * std::log(2.0 * DH / delta_hat));
    const double l4 = std::sqrt(4.0 * std::log(DH / delta_hat));
    const double lloose = std::sqrt(2.0 * std::log(DH * DH / delta_hat));
    auto rows = [&](std::size_t d) { return std::sqrt(static_cast<double>(pb.dims[d])); };

    // ‖h^{d'-1}‖ + Ĉ-out_{d'-1}; the input is never perturbed.
    auto out_in = [&](std::size_t dp) { return pb.alpha[dp - 1] * (dp >= 2 ? 1.5 : 1.0); };
    // ‖J^{a→b}‖_F + Ĉ-jac(a,b)·√rows, exact for the identity.
    auto fro_in = [&](std::size_t a, std::size_t b) { return a == b ? rows(a) : rows(b) * 1.5 * pb.zeta_at(a, b); };
    // ‖J^{a→b}‖₂ + Ĉ-spec(a,b).
    auto spec_in = [&](std::size_t a, std::size_t b) { return a == b ? 1.0 : 1.5 * pb.kappa_at(a, b); };

    std::vector<ToleranceConstraint> out;
    for (std::size_t d = 1; d < D; ++d) {
        double c = 0.0;
        for (std::size_t dp = 1; dp <= d; ++dp) c += rows(d) * pb.zeta_at(dp, d) * out_in(dp);
        out.push_back({"layer_l2[" + std::to_string(d) + "]", margins.layer_l2[d - 1], c * l2});
    }
    for (std::size_t d = 1; d < D; ++d) {
        double c = 0.0;
        for (std::size_t dp = 1; dp <= d; ++dp) c += pb.zeta_at(dp, d) * out_in(dp);
        out.push_back({"preact[" + std::to_string(d) + "]", margins.preact[d - 1], c * l2});
    }
    {
        double c = 0.0;
        for (std::size_t dp = 1; dp <= D; ++dp) c += pb.zeta_at(dp, D) * out_in(dp);
        out.push_back({"output_margin", margins.output, c * l2});
    }
    for_each_pair(D, [&](std::size_t dp, std::size_t d) {
        double c = 0.0;
        if (loose) {
            for (std::size_t dpp = dp + 1; dpp <= d; ++dpp) c += rows(d) * pb.zeta_at(dpp, d) * fro_in(dp, dpp - 1);
            c *= lloose;
        } else {
            double sum = 0.0;
            for (std::size_t dpp = dp + 1; dpp <= d - 1; ++dpp) sum += pb.kappa_at(dpp, d - 1) * fro_in(dp, dpp - 1);
            c = l4 * (fro_in(dp, d - 1) + norms.row_max[d - 1] * sum);
        }
        out.push_back({pair_label("jac_row_l2", dp, d), margins.jac_row_l2.at(dp, d), c});
    });
    if (!loose) {
        for_each_pair(D, [&](std::size_t dp, std::size_t d) {
            double sum = 0.0;
            for (std::size_t dpp = dp + 1; dpp <= d - 1; ++dpp) sum += pb.kappa_at(dpp, d - 1) * spec_in(dp, dpp - 1);
            const double c = sH * l2 * (spec_in(dp, d - 1) + norms.spectral[d - 1] * sum);
            out.push_back({pair_label("jac_spec", dp, d), margins.jac_spec.at(dp, d), c});
        });
    }
    return out;
}

inline std::vector<ToleranceConstraint> build_tolerance_constraints(const PropertyBounds& pb, const MlpParams& params,
                                                                    double delta_hat, GammaVariant v = GammaVariant::Min,
                                                                    bool loose = false) {
    return build_tolerance_constraints(pb, ConstraintMargins::from_bounds(pb, v), layer_norms(params), delta_hat, loose);
}

/// δ̂ = 1/(4D√m).
inline double default_delta_hat(std::size_t D, std::size_t m) {
    return 1.0 / (4.0 * static_cast<double>(D) * std::sqrt(static_cast<double>(m)));
}

struct SigmaSolution {
    double sigma = 0.0;
    std::string binding;
    bool degenerate = false;  // a zero margin or non-finite coefficient forced σ* = 0
};

/// σ* = min over constraints of (Δ*/2)/c.
inline SigmaSolution solve_sigma_star(const std::vector<ToleranceConstraint>& cs) {
    if (cs.empty()) throw Error("solve_sigma_star: no constraints");
    SigmaSolution s;
    s.sigma = kInf;
    for (const auto& c : cs) {
        double v;
        if (!std::isfinite(c.coefficient) || !(c.margin > 0.0)) {
            v = 0.0;
        } else {
            v = c.coefficient > 0.0 ? (c.margin / 2.0) / c.coefficient : kInf;
        }
        if (v < s.sigma || s.binding.empty()) {
            if (v < s.sigma) s.sigma = v;
            s.binding = c.label;
        }
    }
    s.degenerate = s.sigma == 0.0;
    return s;
}

inline double distance_from_init_sq(const MlpParams& p) {
    double s = 0.0;
    for (std::size_t d = 1; d <= p.depth(); ++d) s += frobenius_norm_sq(p.W(d) - p.Z(d));
    return s;
}

/// KL(N(W, σ²I) ‖ N(Z, σ²I)) = ‖W − Z‖_F² / (2σ²).
inline double kl_gaussians(const MlpParams& p, double sigma) {
    if (!(sigma > 0.0)) throw Error("kl_gaussians: sigma must be positive");
    return distance_from_init_sq(p) / (2.0 * sigma * sigma);
}

/// L_γ + (R+1)·[2√((2·KL + ln(2m(R+1)/δ))/(m−1)) + 2/(√m−1)], R = 4D unless given.
inline double assemble_bound(double train_margin_loss, double kl, std::size_t D, std::size_t m, double delta,
                             double R = 0.0) {
    if (m < 2) throw Error("assemble_bound: need m >= 2");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("assemble_bound: delta must lie in (0, 1)");
    if (R == 0.0) R = 4.0 * static_cast<double>(D);
    const double md = static_cast<double>(m);
    const double gen = 2.0 * std::sqrt((2.0 * kl + std::log(2.0 * md * (R + 1.0) / delta)) / (md - 1.0)) + 2.0 / (std::sqrt(md) - 1.0);
    return train_margin_loss + (R + 1.0) * gen;
}

struct Baselines {
    double neyshabur18 = 0.0;
    double bartlett17 = 0.0;
    double spectral_term = 0.0;
    std::vector<std::string> warnings;
};

inline Baselines baseline_bounds(const MlpParams& p, const LayerNorms& norms, double max_input_norm, double gamma_class) {
    if (!(gamma_class > 0.0)) throw Error("baseline_bounds: gamma_class must be positive");
    const std::size_t D = p.depth();
    const double H = static_cast<double>(p.width());
    Baselines b;
    double prod = 1.0, fro_ratio = 0.0, l21_ratio = 0.0;
    bool zero = false;
    for (std::size_t d = 1; d <= D; ++d) {
        const double s = norms.spectral[d - 1];
        prod *= s;
        if (s == 0.0) {
            zero = true;
            continue;
        }
        const Matrix diff = p.W(d) - p.Z(d);
        fro_ratio += frobenius_norm_sq(diff) / (s * s);
        l21_ratio += std::pow(col_l2_sum(diff) / s, 2.0 / 3.0);
    }
    const double lead = max_input_norm * prod / gamma_class;
    b.spectral_term = lead * static_cast<double>(D);
    if (zero) {
        b.warnings.push_back("zero_spectral_norm");
        b.neyshabur18 = b.bartlett17 = kInf;
        return b;
    }
    b.neyshabur18 = lead * static_cast<double>(D) * std::sqrt(H) * std::sqrt(fro_ratio);
    b.bartlett17 = lead * std::pow(l21_ratio, 1.5);
    return b;
}

inline Baselines baseline_bounds(const MlpParams& p, double max_input_norm, double gamma_class) {
    return baseline_bounds(p, layer_norms(p), max_input_norm, gamma_class);
}

inline constexpr const char* kBoundCaveat =
    "norm constants are taken from this single network; the union bound over a grid of constants is not applied";

struct BoundReport {
    std::size_t depth = 0;
    std::size_t width = 0;
    std::size_t input_dim = 0;
    std::size_t m = 0;
    double gamma_class = 0.0;
    double delta = 0.01;
    double delta_hat = 0.0;
    BTerms b;
    SigmaSolution sigma;
    SigmaSolution sigma_5pc;
    SigmaSolution sigma_median;
    SigmaSolution sigma_loose;
    double dist_sq = 0.0;
    double kl = 0.0;
    double train_margin_loss = 0.0;
    double test_error = std::numeric_limits<double>::quiet_NaN();
    double final_bound = 0.0;
    double final_bound_5pc = 0.0;
    double final_bound_median = 0.0;
    double final_bound_loose = 0.0;
    Baselines baselines;
    std::vector<std::string> warnings;
    std::string caveat = kBoundCaveat;

    /// Bound with the m-dependence and the logarithmic factor removed: D·‖W−Z‖_F·√H·max B.
    double figure_value(double max_b, bool loose = false) const {
        const double Dd = static_cast<double>(depth);
        return (loose ? Dd * Dd : Dd) * std::sqrt(dist_sq) * std::sqrt(static_cast<double>(width)) * max_b;
    }
};

struct AuditOptions {
    double delta = 0.01;
};

inline double bound_for_sigma(const BoundReport& r, const MlpParams& p, double sigma, double R) {
    if (!(sigma > 0.0)) return kInf;
    return assemble_bound(r.train_margin_loss, kl_gaussians(p, sigma), r.depth, r.m, r.delta, R);
}

/// Full bound evaluation for one network given its dataset constants and training margin loss.
inline BoundReport compute_bound_report(const MlpParams& p, const PropertyBounds& pb, double train_margin_loss,
                                        const AuditOptions& opt = {}) {
    BoundReport r;
    r.depth = p.depth();
    r.width = p.width();
    r.input_dim = p.input_dim();
    r.m = pb.m;
    r.gamma_class = pb.gamma_class;
    r.delta = opt.delta;
    r.delta_hat = default_delta_hat(r.depth, r.m);
    r.train_margin_loss = train_margin_loss;
    const LayerNorms norms = layer_norms(p);

    r.b = compute_b_terms(pb, norms);
    r.warnings = r.b.warnings;
    auto solve = [&](GammaVariant v, bool loose) {
        return solve_sigma_star(build_tolerance_constraints(pb, ConstraintMargins::from_bounds(pb, v), norms, r.delta_hat, loose));
    };
    r.sigma = solve(GammaVariant::Min, false);
    r.sigma_5pc = solve(GammaVariant::FivePercent, false);
    r.sigma_median = solve(GammaVariant::Median, false);
    r.sigma_loose = solve(GammaVariant::Min, true);

    r.dist_sq = distance_from_init_sq(p);
    const double R = 4.0 * static_cast<double>(r.depth);
    r.kl = r.sigma.sigma > 0.0 ? kl_gaussians(p, r.sigma.sigma) : kInf;
    r.final_bound = bound_for_sigma(r, p, r.sigma.sigma, R);
    r.final_bound_5pc = bound_for_sigma(r, p, r.sigma_5pc.sigma, R);
    r.final_bound_median = bound_for_sigma(r, p, r.sigma_median.sigma, R);
    r.final_bound_loose = bound_for_sigma(r, p, r.sigma_loose.sigma, R * static_cast<double>(r.depth));
    if (r.sigma.degenerate) r.warnings.push_back("sigma_star_zero");

    r.baselines = baseline_bounds(p, norms, pb.max_input_norm, pb.gamma_class);
    for (const auto& w : r.baselines.warnings) r.warnings.push_back(w);

    if (r.width < r.input_dim) r.warnings.push_back("width_below_input_dim");
    if (pb.spectral_unconverged + norms.unconverged > 0)
        r.warnings.push_back("spectral_unconverged=" + std::to_string(pb.spectral_unconverged + norms.unconverged));
    const std::pair<const char*, double> ranged[] = {{"B_layer_l2", r.b.layer_l2},
                                                     {"B_output", r.b.output},
                                                     {"B_jac_row_l2", r.b.jac_row_l2},
                                                     {"B_jac_spec", r.b.jac_spec}};
    for (const auto& [name, v] : ranged)
        if (!(v >= kBTermLow && v <= kBTermHigh)) r.warnings.push_back(std::string("out_of_range:") + name);
    return r;
}

}  // namespace pacnr
