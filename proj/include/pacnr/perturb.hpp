#pragma once

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "bounds.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "network.hpp"
#include "rng.hpp"

namespace pacnr {

/// Tolerance used for spectral norms of perturbed Jacobians.
inline constexpr double kPerturbedSpectralTol = 1e-8;

inline std::vector<Matrix> sample_noise(const MlpParams& p, double sigma, RngStream& rng) {
    std::vector<Matrix> u;
    for (std::size_t d = 1; d <= p.depth(); ++d) u.push_back(sample_gaussian_matrix(p.dims()[d], p.dims()[d - 1], sigma, rng));
    return u;
}

inline std::vector<Matrix> add_noise(const std::vector<Matrix>& w, const std::vector<Matrix>& noise, std::size_t first_k) {
    if (noise.size() != w.size()) throw DimensionError("noise has " + std::to_string(noise.size()) + " layers, network has " + std::to_string(w.size()));
    std::vector<Matrix> out = w;
    for (std::size_t d = 0; d < std::min(first_k, w.size()); ++d) out[d] += noise[d];
    return out;
}

/// Frozen-activation network W[+U_k]: noise added to the first k matrices, masks pinned to `trace`.
inline ForwardTrace frozen_forward(const MlpParams& p, const std::vector<Matrix>& noise, const ForwardTrace& trace,
                                   std::size_t k) {
    return forward_weights(add_noise(p.weights, noise, k), trace.x(), &trace);
}

inline ForwardTrace frozen_forward(const MlpParams& p, const std::vector<Matrix>& noise, const ForwardTrace& trace) {
    return frozen_forward(p, noise, trace, p.depth());
}

/// Absolute change of every property between two analyses of the same input.
struct PropertyDeltas {
    Vector layer_l2;  // d = 0..D-1
    Vector preact;    // max_h |Δf^d_h|, d = 1..D at index d-1
    PairTable<double> jac_row_l2;
    PairTable<double> jac_spec;
    double margin = 0.0;
    std::vector<std::size_t> mask_flips;  // d = 0..D-1
};

inline PropertyDeltas property_deltas(const InputAnalysis& a, const InputAnalysis& b) {
    const std::size_t D = a.trace.depth();
    PropertyDeltas r;
    for (std::size_t d = 0; d < D; ++d) r.layer_l2.push_back(std::abs(a.props.layer_l2[d] - b.props.layer_l2[d]));
    for (std::size_t d = 1; d <= D; ++d) {
        double mx = 0.0;
        for (std::size_t h = 0; h < a.trace.f[d].size(); ++h) mx = std::max(mx, std::abs(a.trace.f[d][h] - b.trace.f[d][h]));
        r.preact.push_back(mx);
    }
    r.jac_row_l2 = PairTable<double>(D);
    r.jac_spec = PairTable<double>(D);
    for_each_pair(D, [&](std::size_t from, std::size_t to) {
        const Vector ra = row_l2_norms(a.J(from, to)), rb = row_l2_norms(b.J(from, to));
        double mx = 0.0;
        for (std::size_t h = 0; h < ra.size(); ++h) mx = std::max(mx, std::abs(ra[h] - rb[h]));
        r.jac_row_l2.at(from, to) = mx;
        r.jac_spec.at(from, to) = std::abs(a.props.jac_spec.at(from, to) - b.props.jac_spec.at(from, to));
    });
    r.margin = std::abs(a.props.margin_value - b.props.margin_value);
    for (std::size_t d = 0; d < D; ++d) {
        std::size_t n = 0;
        for (std::size_t h = 0; h < a.trace.mask[d].size(); ++h) n += a.trace.mask[d][h] != b.trace.mask[d][h];
        r.mask_flips.push_back(n);
    }
    return r;
}

inline bool is_zero_noise(const std::vector<Matrix>& noise) {
    for (const Matrix& u : noise)
        for (double v : u.data())
            if (v != 0.0) return false;
    return true;
}

/// Analysis of W+U (free) or W[+U] (frozen) reusing the unperturbed singular vectors as starts.
inline InputAnalysis perturbed_analysis(const MlpParams& p, const InputAnalysis& base, const std::vector<Matrix>& noise,
                                        std::size_t y, bool frozen) {
    if (is_zero_noise(noise)) return base;
    AnalysisOptions opt;
    opt.spectral_tol = kPerturbedSpectralTol;
    opt.warm_start = &base.spec_vectors;
    opt.pinned = frozen ? &base.trace : nullptr;
    return analyze_input(add_noise(p.weights, noise, p.depth()), base.trace.x(), y, opt);
}

struct PerturbationSample {
    std::vector<Matrix> noise;
    ForwardTrace frozen_trace;
    ForwardTrace free_trace;
    PropertyDeltas frozen;
    PropertyDeltas free;
};

inline PerturbationSample measure_perturbations(const MlpParams& p, const LabeledExample& ex, double sigma, RngStream& rng,
                                                const InputAnalysis* base_in = nullptr) {
    if (!(sigma >= 0.0)) throw Error("measure_perturbations: sigma must be nonnegative");
    const InputAnalysis base = base_in ? *base_in : analyze_input(p.weights, ex.x, ex.y);
    PerturbationSample s;
    s.noise = sample_noise(p, sigma, rng);
    const InputAnalysis fr = perturbed_analysis(p, base, s.noise, ex.y, true);
    const InputAnalysis fe = perturbed_analysis(p, base, s.noise, ex.y, false);
    s.frozen = property_deltas(base, fr);
    s.free = property_deltas(base, fe);
    s.frozen_trace = fr.trace;
    s.free_trace = fe.trace;
    return s;
}

/// Tolerances Ĉ assumed for already-controlled properties: half of each property margin.
struct PriorTolerances {
    Vector layer_l2;  // d = 1..D-1 at index d-1: α^d/2
    Vector preact;    // d = 1..D-1 at index d-1: γ^d/4
    PairTable<double> jac_row_l2;  // ζ/2
    PairTable<double> jac_spec;    // κ/2

    static PriorTolerances from_bounds(const PropertyBounds& pb) {
        PriorTolerances c;
        const std::size_t D = pb.depth();
        for (std::size_t d = 1; d < D; ++d) {
            c.layer_l2.push_back(pb.alpha[d] / 2.0);
            c.preact.push_back(pb.gamma_min[d - 1] / 4.0);
        }
        c.jac_row_l2 = pb.zeta;
        c.jac_spec = pb.kappa;
        for (double& v : c.jac_row_l2.values()) v /= 2.0;
        for (double& v : c.jac_spec.values()) v /= 2.0;
        return c;
    }
};

/// Per-input tolerance coefficients of the perturbation lemma (tolerance = σ·coefficient), evaluated with
/// the unperturbed norms of this input.
struct LemmaTolerances {
    Vector layer_l2;  // d = 1..D-1 at index d-1
    Vector preact;    // d = 1..D at index d-1
    PairTable<double> jac_row_l2;
    PairTable<double> jac_spec;
};

inline LemmaTolerances lemma_tolerances(const InputAnalysis& a, const PriorTolerances& c, const LayerNorms& norms,
                                        std::size_t width, double delta_hat) {
    const auto& dims = a.props.dims;
    const std::size_t D = dims.size() - 1;
    const double H = static_cast<double>(width);
    const double DH = static_cast<double>(D) * H;
    const double l2 = std::sqrt(2.0 * std::log(2.0 * DH / delta_hat));
    const double l4 = std::sqrt(4.0 * std::log(DH / delta_hat));
    auto rows = [&](std::size_t d) { return std::sqrt(static_cast<double>(dims[d])); };
    auto fro = [&](std::size_t a_, std::size_t b_) { return a_ == b_ ? rows(a_) : a.jac_fro.at(a_, b_); };
    auto row = [&](std::size_t a_, std::size_t b_) { return a_ == b_ ? 1.0 : a.props.jac_row_l2.at(a_, b_); };
    auto spec = [&](std::size_t a_, std::size_t b_) { return a_ == b_ ? 1.0 : a.props.jac_spec.at(a_, b_); };
    auto cjac = [&](std::size_t a_, std::size_t b_) { return a_ == b_ ? 0.0 : c.jac_row_l2.at(a_, b_); };
    auto cspec = [&](std::size_t a_, std::size_t b_) { return a_ == b_ ? 0.0 : c.jac_spec.at(a_, b_); };
    auto h_in = [&](std::size_t dp) { return a.props.layer_l2[dp - 1] + (dp >= 2 ? c.layer_l2[dp - 2] : 0.0); };

    LemmaTolerances t;
    for (std::size_t d = 1; d < D; ++d) {
        double s = 0.0;
        for (std::size_t dp = 1; dp <= d; ++dp) s += fro(dp, d) * h_in(dp);
        t.layer_l2.push_back(s * l2);
    }
    for (std::size_t d = 1; d <= D; ++d) {
        double s = 0.0;
        for (std::size_t dp = 1; dp <= d; ++dp) s += row(dp, d) * h_in(dp);
        t.preact.push_back(s * l2);
    }
    t.jac_row_l2 = PairTable<double>(D);
    t.jac_spec = PairTable<double>(D);
    for_each_pair(D, [&](std::size_t dp, std::size_t d) {
        double sr = fro(dp, d - 1) + cjac(dp, d - 1) * rows(d - 1);
        double ss = spec(dp, d - 1) + cspec(dp, d - 1);
        for (std::size_t dpp = dp + 1; dpp <= d - 1; ++dpp) {
            sr += norms.row_max[d - 1] * spec(dpp, d - 1) * (fro(dp, dpp - 1) + cjac(dp, dpp - 1) * rows(dpp - 1));
            ss += norms.spectral[d - 1] * spec(dpp, d - 1) * (spec(dp, dpp - 1) + cspec(dp, dpp - 1));
        }
        t.jac_row_l2.at(dp, d) = sr * l4;
        t.jac_spec.at(dp, d) = ss * std::sqrt(H) * l2;
    });
    return t;
}

/// 95% Clopper–Pearson interval for k successes in n trials.
inline std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double level = 0.95) {
    if (n == 0) return {0.0, 1.0};
    const double a = (1.0 - level) / 2.0;
    const double kd = static_cast<double>(k), nd = static_cast<double>(n);
    const double lo = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, a);
    const double hi = k == n ? 1.0 : boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - a);
    return {lo, hi};
}

struct FailureEstimate {
    std::size_t trials = 0;
    std::size_t failures = 0;
    double rate = 0.0;
    double threshold = 0.0;
    bool passed = true;
    double ci_low = 0.0;
    double ci_high = 0.0;

    static FailureEstimate make(std::size_t failures, std::size_t trials, double threshold) {
        FailureEstimate f;
        f.trials = trials;
        f.failures = failures;
        f.rate = trials ? static_cast<double>(failures) / static_cast<double>(trials) : 0.0;
        f.threshold = threshold;
        f.passed = f.rate <= threshold;
        std::tie(f.ci_low, f.ci_high) = clopper_pearson(failures, trials);
        return f;
    }
};

enum class Statement { LayerL2, Preact, JacRowL2, JacSpec };

inline const char* to_string(Statement s) {
    switch (s) {
        case Statement::LayerL2: return "layer_l2";
        case Statement::Preact: return "preact";
        case Statement::JacRowL2: return "jac_row_l2";
        case Statement::JacSpec: return "jac_spec";
    }
    return "?";
}

struct StatementEstimate {
    Statement statement;
    std::size_t layer = 0;
    FailureEstimate estimate;
};

struct LemmaCheckOptions {
    std::size_t trials = 2000;
    double tolerance_scale = 1.0;  // multiplies every target tolerance (power checks)
};

/// Monte Carlo estimate of each lemma statement's joint event at one input: the target property exceeds its
/// tolerance while every property below layer d stays within Ĉ, the statement's extra conditions hold, and
/// no activation below layer d flips. Statement 1 covers hidden layers d = 1..D-1 and statement 2 covers
/// d = 1..D (its output-norm condition applies below the output layer).
inline std::vector<StatementEstimate> verify_perturbation_statements(const MlpParams& p, const LabeledExample& ex, double sigma,
                                                      double delta_hat, const PriorTolerances& prior, RngStream& rng,
                                                      const LemmaCheckOptions& opt = {}) {
    if (opt.trials < 100) throw Error("verify_perturbation_statements: need at least 100 trials");
    if (!(sigma >= 0.0)) throw Error("verify_perturbation_statements: sigma must be nonnegative");
    const std::size_t D = p.depth();
    const InputAnalysis base = analyze_input(p.weights, ex.x, ex.y);
    const LayerNorms norms = layer_norms(p);
    LemmaTolerances tol = lemma_tolerances(base, prior, norms, p.width(), delta_hat);
    for (double& v : tol.layer_l2) v *= sigma * opt.tolerance_scale;
    for (double& v : tol.preact) v *= sigma * opt.tolerance_scale;
    for (double& v : tol.jac_row_l2.values()) v *= sigma * opt.tolerance_scale;
    for (double& v : tol.jac_spec.values()) v *= sigma * opt.tolerance_scale;

    std::vector<std::size_t> f_out(D, 0), f_pre(D + 1, 0), f_jac(D + 1, 0), f_spec(D + 1, 0);
    if (sigma > 0.0) {
        for (std::size_t trial = 0; trial < opt.trials; ++trial) {
            RngStream r = rng.split(trial);
            const std::vector<Matrix> noise = sample_noise(p, sigma, r);
            const InputAnalysis pert = perturbed_analysis(p, base, noise, ex.y, false);
            const PropertyDeltas dl = property_deltas(base, pert);

            // within[k]: every property at layers ≤ k within Ĉ and no flips in layers 1..k.
            std::vector<bool> within(D + 1, true);
            for (std::size_t k = 1; k <= D; ++k) {
                bool ok = within[k - 1];
                if (k < D) ok = ok && dl.layer_l2[k] <= prior.layer_l2[k - 1] && dl.preact[k - 1] <= prior.preact[k - 1] &&
                                dl.mask_flips[k] == 0;
                for (std::size_t dp = 1; dp < k && ok; ++dp)
                    ok = dl.jac_row_l2.at(dp, k) <= prior.jac_row_l2.at(dp, k) && dl.jac_spec.at(dp, k) <= prior.jac_spec.at(dp, k);
                within[k] = ok;
            }
            auto jac_rows_ok = [&](std::size_t d) {
                for (std::size_t dp = 1; dp < d; ++dp)
                    if (dl.jac_row_l2.at(dp, d) > prior.jac_row_l2.at(dp, d)) return false;
                return true;
            };
            for (std::size_t d = 1; d <= D; ++d) {
                const bool pre_ok = within[d - 1];
                if (!pre_ok) continue;
                const bool rows_ok = jac_rows_ok(d);
                if (d < D && rows_ok && dl.layer_l2[d] > tol.layer_l2[d - 1]) ++f_out[d];
                const bool out_ok = d == D || dl.layer_l2[d] <= prior.layer_l2[d - 1];
                if (rows_ok && out_ok && dl.preact[d - 1] > tol.preact[d - 1]) ++f_pre[d];
                if (d >= 2) {
                    bool jf = false, sf = false;
                    for (std::size_t dp = 1; dp < d; ++dp) {
                        jf = jf || dl.jac_row_l2.at(dp, d) > tol.jac_row_l2.at(dp, d);
                        sf = sf || dl.jac_spec.at(dp, d) > tol.jac_spec.at(dp, d);
                    }
                    if (jf) ++f_jac[d];
                    if (sf) ++f_spec[d];
                }
            }
        }
    }
    std::vector<StatementEstimate> out;
    for (std::size_t d = 1; d < D; ++d) out.push_back({Statement::LayerL2, d, FailureEstimate::make(f_out[d], opt.trials, delta_hat)});
    for (std::size_t d = 1; d <= D; ++d) out.push_back({Statement::Preact, d, FailureEstimate::make(f_pre[d], opt.trials, delta_hat)});
    for (std::size_t d = 2; d <= D; ++d) out.push_back({Statement::JacRowL2, d, FailureEstimate::make(f_jac[d], opt.trials, delta_hat)});
    for (std::size_t d = 2; d <= D; ++d) out.push_back({Statement::JacSpec, d, FailureEstimate::make(f_spec[d], opt.trials, delta_hat)});
    return out;
}

struct MuHatResult {
    double fraction = 0.0;
    std::size_t failing = 0;
    std::size_t points = 0;
    double threshold = 0.0;  // per-point probability threshold 1/√m
    Vector point_rates;
};

/// Fraction of points whose estimated Pr_U[∃ property r: |ρ_r(W+U) − ρ_r(W)| > Δ_r/2] exceeds 1/√m.
/// `m` defaults to the number of points.
inline MuHatResult estimate_mu_hat(const MlpParams& p, const std::vector<LabeledExample>& data, double sigma,
                                   const ConstraintMargins& margins, std::size_t n_noise, RngStream& rng,
                                   std::size_t m = 0) {
    if (n_noise < 100) throw Error("estimate_mu_hat: need at least 100 noise draws");
    if (data.empty()) throw Error("estimate_mu_hat: empty data");
    if (!(sigma >= 0.0)) throw Error("estimate_mu_hat: sigma must be nonnegative");
    const std::size_t D = p.depth();
    MuHatResult r;
    r.points = data.size();
    r.threshold = 1.0 / std::sqrt(static_cast<double>(m ? m : data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::size_t bad = 0;
        if (sigma > 0.0) {
            const InputAnalysis base = analyze_input(p.weights, data[i].x, data[i].y);
            RngStream pr = rng.split(i);
            for (std::size_t k = 0; k < n_noise; ++k) {
                RngStream dr = pr.split(k);
                const InputAnalysis pert = perturbed_analysis(p, base, sample_noise(p, sigma, dr), data[i].y, false);
                bool fail = std::abs(pert.props.margin_value - base.props.margin_value) > margins.output / 2.0;
                for (std::size_t d = 1; d < D && !fail; ++d) {
                    fail = std::abs(pert.props.layer_l2[d] - base.props.layer_l2[d]) > margins.layer_l2[d - 1] / 2.0;
                    for (std::size_t h = 0; h < base.trace.f[d].size() && !fail; ++h)
                        fail = std::abs(std::abs(pert.trace.f[d][h]) - std::abs(base.trace.f[d][h])) > margins.preact[d - 1] / 2.0;
                }
                for_each_pair(D, [&](std::size_t a, std::size_t b) {
                    if (fail) return;
                    const Vector ra = row_l2_norms(base.J(a, b)), rb = row_l2_norms(pert.J(a, b));
                    for (std::size_t h = 0; h < ra.size() && !fail; ++h)
                        fail = std::abs(ra[h] - rb[h]) > margins.jac_row_l2.at(a, b) / 2.0;
                    fail = fail || std::abs(base.props.jac_spec.at(a, b) - pert.props.jac_spec.at(a, b)) > margins.jac_spec.at(a, b) / 2.0;
                });
                if (fail) ++bad;
            }
        }
        const double rate = static_cast<double>(bad) / static_cast<double>(n_noise);
        r.point_rates.push_back(rate);
        if (rate > r.threshold) ++r.failing;
    }
    r.fraction = static_cast<double>(r.failing) / static_cast<double>(r.points);
    return r;
}

struct GaussianLemmaCheck {
    std::string lemma;
    std::string setting;
    std::size_t draws = 0;
    double empirical = 0.0;
    double bound = 0.0;
    bool passed = false;
};

/// Empirical tails against the analytic bounds for sums of Gaussians (Hoeffding), Gaussian matrix–vector
/// products and spectral norms of square Gaussian matrices.
inline std::vector<GaussianLemmaCheck> check_gaussian_lemmas(RngStream& rng, std::size_t draws = 100000) {
    std::vector<GaussianLemmaCheck> out;
    auto record = [&](std::string lemma, std::string setting, std::size_t hits, std::size_t n, double bound) {
        const double emp = static_cast<double>(hits) / static_cast<double>(n);
        out.push_back({std::move(lemma), std::move(setting), n, emp, bound, emp <= bound});
    };

    struct SumSetting {
        std::vector<double> sd;
        double t;
        std::size_t n;
    };
    const double d05 = std::sqrt(2.0 * 20.0 * std::log(1.0 / 0.05));
    const std::vector<SumSetting> sums = {
        {{1.0}, 3.0, std::max<std::size_t>(draws, 1000000)},
        {{0.5, 1.0, 1.5, 2.0, 2.5}, 2.0 * std::sqrt(13.75), draws},
        {std::vector<double>(20, 1.0), d05, draws},
        {{1.0, 2.0}, 0.0, draws},
    };
    for (const auto& s : sums) {
        double var = 0.0;
        for (double v : s.sd) var += v * v;
        std::size_t hits = 0;
        RngStream r = rng.split(out.size());
        for (std::size_t k = 0; k < s.n; ++k) {
            double sum = 0.0;
            for (double v : s.sd) sum += v * r.normal();
            if (sum >= s.t) ++hits;
        }
        record("sum_tail", "n=" + std::to_string(s.sd.size()) + " t=" + std::to_string(s.t), hits, s.n,
               std::exp(-s.t * s.t / (2.0 * var)));
    }

    {
        // One coordinate of U·x with U entries N(0, σ²): two-sided Gaussian tail at multiples of σ‖x‖.
        const Vector x = {0.3, -1.2, 0.5, 2.0};
        const double sigma = 0.7;
        const double scale = sigma * norm2(x);
        for (double k : {1.0, 2.0, 3.0}) {
            RngStream r = rng.split(out.size());
            std::size_t hits = 0;
            for (std::size_t n = 0; n < draws; ++n) {
                double s = 0.0;
                for (double xi : x) s += sigma * r.normal() * xi;
                if (std::abs(s) >= k * scale) ++hits;
            }
            record("projection_tail", "t=" + std::to_string(k) + "*sigma*|x|", hits, draws, 2.0 * std::exp(-k * k / 2.0));
        }
    }

    struct SpecSetting {
        std::size_t H;
        double delta;
    };
    for (const auto& s : {SpecSetting{32, 0.05}, SpecSetting{16, 0.1}, SpecSetting{8, 0.01}}) {
        const double sigma = 1.0;
        const double H = static_cast<double>(s.H);
        const double thr = sigma * std::sqrt(2.0 * H * std::log(2.0 * H / s.delta));
        RngStream r = rng.split(out.size());
        std::size_t hits = 0;
        for (std::size_t n = 0; n < draws; ++n) {
            const Matrix u = sample_gaussian_matrix(s.H, s.H, sigma, r);
            if (frobenius_norm(u) <= thr) continue;  // ‖U‖₂ ≤ ‖U‖_F
            if (spectral_norm(u, r, 1e-8).value > thr) ++hits;
        }
        record("spectral_tail", "H=" + std::to_string(s.H) + " delta=" + std::to_string(s.delta), hits, draws, s.delta);
    }
    return out;
}

}  // namespace pacnr
