// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
//   acceptance --cli build/pacnr --work-dir build/acceptance_work [--data-dir data/mnist] [--reuse-sweep]

#include <sys/resource.h>
#include <zlib.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "oracles.hpp"
#include "pacnr/commands.hpp"

using namespace pacnr;
namespace fs = std::filesystem;

namespace {

struct Options {
    std::string cli;
    std::string work_dir;
    std::string data_dir = PACNR_TEST_DATA_DIR;
    bool reuse_sweep = false;
};

// Depth-sweep protocol: H = 40, D = 2..8, m = 1024, γ_class = 10, SGD 0.1 / 64 / 0.99 margin stopping.
constexpr std::size_t kSweepEpochCap = 12000;
constexpr double kSweepCpuBudget = 30 * 60;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double child_cpu_seconds() {
    rusage ru{};
    getrusage(RUSAGE_CHILDREN, &ru);
    return ru.ru_utime.tv_sec + ru.ru_stime.tv_sec + 1e-6 * (ru.ru_utime.tv_usec + ru.ru_stime.tv_usec);
}

double self_cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string quote(const std::string& s) { return "'" + s + "'"; }

// Runs the CLI with the given arguments, stdout and stderr appended to `log`. Returns the exit status.
int run_cli(const Options& o, const std::string& args, const fs::path& log) {
    const std::string cmd = quote(o.cli) + " " + args + " --data-dir " + quote(o.data_dir) + " >> " + quote(log.string()) + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream o;
    o.precision(digits);
    o << v;
    return o.str();
}

double cell(const CsvTable& t, std::size_t row, const std::string& col) {
    double v;
    if (!parse_double(t.rows[row][t.column(col)], v)) throw Error("non-numeric " + col + " in row " + std::to_string(row));
    return v;
}

Vector random_vector(std::size_t n, RngStream& rng) {
    Vector v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

MlpParams params_of(std::vector<Matrix> w) {
    std::vector<std::size_t> dims{w.front().cols()};
    for (const auto& m : w) dims.push_back(m.rows());
    auto z = w;
    return MlpParams(dims, std::move(w), std::move(z));
}

double vec_rel_err(const Vector& a, const Vector& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return den == 0 ? std::sqrt(num) : std::sqrt(num / den);
}

// ---------------------------------------------------------------------------------------------

Outcome jacobian_fd() {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream rng(101);
    double worst = 0;
    std::size_t nets = 0, pairs = 0;
    while (nets < 20) {
        const std::size_t D = 2 + rng.below(4), H = 4 + rng.below(13), N = 2 + rng.below(6), K = 2 + rng.below(4);
        std::vector<std::size_t> dims{N};
        for (std::size_t d = 1; d < D; ++d) dims.push_back(H);
        dims.push_back(K);
        const auto w = oracle::random_weights(dims, rng);
        Vector x;
        bool found = false;
        for (int tries = 0; tries < 1000 && !found; ++tries) {
            x = random_vector(N, rng);
            const auto f = oracle::preacts(w, x);
            double m = INFINITY;
            for (std::size_t d = 1; d < f.size(); ++d)
                for (double v : f[d]) m = std::min(m, std::abs(v));
            found = m > 1e-3;
        }
        if (!found) continue;
        ++nets;
        const MlpParams p = params_of(w);
        const ForwardTrace t = forward(p, x);
        for (std::size_t to = 1; to <= D; ++to)
            for (std::size_t from = 0; from < to; ++from, ++pairs)
                worst = std::max(worst, oracle::rel_err(jacobian(p, t, from, to).matrix, oracle::fd_jacobian(w, x, from, to, 1e-6)));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst <= 1e-5 && secs < 60,
            std::to_string(nets) + " nets, " + std::to_string(pairs) + " layer pairs, max rel err " + fmt(worst) + " (<= 1e-5), " + fmt(secs, 3) +
                " s (< 60 s)"};
}

Outcome homogeneity() {
    RngStream rng(202);
    double worst = 0;
    for (int i = 0; i < 50; ++i) {
        const std::size_t D = 2 + rng.below(5), H = 3 + rng.below(30), N = 2 + rng.below(10);
        std::vector<std::size_t> dims{N};
        for (std::size_t d = 1; d < D; ++d) dims.push_back(H);
        dims.push_back(2 + rng.below(8));
        const MlpParams p = params_of(oracle::random_weights(dims, rng));
        const Vector x = random_vector(N, rng);
        const ForwardTrace t = forward(p, x);
        for (std::size_t d = 1; d <= D; ++d) worst = std::max(worst, vec_rel_err(matvec(jacobian(p, t, 0, d).matrix, x), t.f[d]));
    }
    return {worst <= 1e-10, "50 (net, x) pairs, all layers, max rel err " + fmt(worst) + " (<= 1e-10)"};
}

Outcome spectral_oracle() {
    RngStream rng(303);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t r = 1 + rng.below(64), c = 1 + rng.below(64);
        Matrix a(r, c);
        for (double& v : a.data()) v = rng.normal();
        const double exact = oracle::spectral_norm(a);
        worst = std::max(worst, std::abs(spectral_norm(a).value - exact) / exact);
    }
    return {worst <= 1e-8, "100 random matrices up to 64x64, max rel err " + fmt(worst) + " (<= 1e-8)"};
}

Outcome gaussian_lemmas() {
    RngStream rng(404);
    const auto rows = check_gaussian_lemmas(rng, 100000);
    std::map<std::string, std::size_t> settings;
    bool ok = true;
    std::string worst;
    double worst_ratio = 0;
    for (const auto& r : rows) {
        ++settings[r.lemma];
        ok = ok && r.passed && r.draws >= 100000;
        const double ratio = r.empirical / r.bound;
        if (ratio >= worst_ratio) {
            worst_ratio = ratio;
            worst = r.lemma + " " + r.setting + " " + fmt(r.empirical) + " vs " + fmt(r.bound);
        }
    }
    for (const char* l : {"sum_tail", "projection_tail", "spectral_tail"}) ok = ok && settings[l] >= 3;
    return {ok, std::to_string(rows.size()) + " settings (" + std::to_string(settings["sum_tail"]) + "/" + std::to_string(settings["projection_tail"]) + "/" +
                    std::to_string(settings["spectral_tail"]) + "), >= 1e5 draws each, tightest " + worst};
}

Outcome kl_formula() {
    RngStream rng(505);
    double worst = 0;
    for (int i = 0; i < 30; ++i) {
        const double a = 3 * rng.normal(), b = 3 * rng.normal(), s = 0.05 + 2 * rng.uniform();
        const Matrix out(2, 1, {1.0, -1.0});
        const MlpParams p({1, 1, 2}, {Matrix(1, 1, {a}), out}, {Matrix(1, 1, {b}), out});
        worst = std::max(worst, std::abs(kl_gaussians(p, s) - oracle::kl_quadrature(a, b, s)));
    }
    return {worst <= 1e-6, "30 (w, z, sigma) triples, max abs err " + fmt(worst) + " (<= 1e-6)"};
}

struct SweepData {
    bool ok = false;
    std::string error;
    fs::path dir;
    CsvTable table;
    double cpu = 0;
};

SweepData run_depth_sweep(const Options& o) {
    SweepData s;
    s.dir = fs::path(o.work_dir) / "sweep-h40";
    const fs::path cpu_file = s.dir / "cpu_seconds.txt";
    if (!(o.reuse_sweep && fs::exists(s.dir / "sweep.csv") && fs::exists(cpu_file))) {
        fs::remove_all(s.dir);
        fs::create_directories(s.dir);
        const fs::path spec = s.dir / "spec.json";
        std::ofstream(spec) << R"({"axis": "depth", "values": [2, 3, 4, 5, 6, 7, 8], "width": 40, "gamma_class": 10, "seed": 1,
 "train": {"optimizer": "sgd", "learning_rate": 0.1, "batch_size": 64, "stop_fraction": 0.99, "max_epochs": )"
                            << kSweepEpochCap << R"(}, "data": {"source": "mnist", "m": 1024, "seed": 1}})";
        const double before = child_cpu_seconds();
        const int rc = run_cli(o, "sweep --spec " + quote(spec.string()) + " --out-dir " + quote(s.dir.string()) + " --keep-checkpoints",
                               s.dir / "sweep.log");
        s.cpu = child_cpu_seconds() - before;
        std::ofstream(cpu_file) << format_double(s.cpu) << "\n";
        if (rc != 0) {
            s.error = "sweep exited with status " + std::to_string(rc) + ", see " + (s.dir / "sweep.log").string();
            return s;
        }
    } else {
        parse_double(slurp(cpu_file).substr(0, slurp(cpu_file).find('\n')), s.cpu);
    }
    s.table = read_csv_file((s.dir / "sweep.csv").string());
    s.ok = true;
    return s;
}

Outcome lemma_monte_carlo(const Options& o, const SweepData& sweep) {
    if (!sweep.ok) return {false, sweep.error};
    const fs::path ckpt = sweep.dir / "depth-5-run0.ckpt";
    if (!fs::exists(ckpt)) return {false, "missing " + ckpt.string()};
    const double t0 = self_cpu_seconds();
    const Checkpoint ck = load_checkpoint(ckpt.string());
    DataPaths paths;
    paths.data_dir = o.data_dir;
    const LoadedData data = load_data(DataSpec::from_tag(ck.data_source, ck.data_m, ck.data_seed), paths, false);
    const ScanResult scan = scan_dataset(ck.params, data.train.examples, 10.0);
    const double delta_hat = default_delta_hat(ck.params.depth(), scan.bounds.m);
    const double sigma_star = solve_sigma_star(build_tolerance_constraints(scan.bounds, ck.params, delta_hat)).sigma;
    if (!(sigma_star > 0)) return {false, "sigma* is zero for the D=5 checkpoint"};

    VerifyCommand cmd;
    cmd.sigmas = {0.0, sigma_star / 2, sigma_star};
    cmd.trials = 2000;
    cmd.points = 1;
    cmd.mu_points = 0;
    cmd.seed = 7;
    const VerifyOutcome v = run_verify(ck.params, data.train, cmd, 10.0);
    const double secs = self_cpu_seconds() - t0;

    bool zero_exact = true, ok = true;
    double worst = 0;
    std::size_t statements = 0;
    for (const auto& r : v.rows) {
        if (r.sigma == 0.0) {
            zero_exact = zero_exact && r.estimate.failures == 0;
            continue;
        }
        ++statements;
        ok = ok && r.estimate.rate <= delta_hat && r.estimate.trials == 2000;
        worst = std::max(worst, r.estimate.rate);
    }
    std::ofstream csv(fs::path(o.work_dir) / "lemma_mc.csv");
    csv << "statement,layer,sigma,trials,failures,rate,threshold\n";
    for (const auto& r : v.rows)
        csv << r.statement << "," << r.layer << "," << format_double(r.sigma) << "," << r.estimate.trials << "," << r.estimate.failures << ","
            << format_double(r.estimate.rate) << "," << format_double(r.estimate.threshold) << "\n";
    return {ok && zero_exact && secs < 600,
            "D=5 H=40 m=" + std::to_string(scan.bounds.m) + (ck.converged ? " converged" : " UNCONVERGED") + " net, sigma*=" + fmt(sigma_star) +
                ", " + std::to_string(statements) + " statement rates at sigma*/2 and sigma*, max " + fmt(worst) + " (<= delta_hat " +
                fmt(delta_hat) + "), sigma=0 " + (zero_exact ? "exactly 0" : "NONZERO") + ", " + fmt(secs, 3) + " s cpu (< 600 s)"};
}

Outcome depth_slopes(const SweepData& sweep) {
    if (!sweep.ok) return {false, sweep.error};
    const CsvTable& t = sweep.table;
    const LinearFit spec = log10_slope(t, "depth", "spectral_term");
    const LinearFit maxb = log10_slope(t, "depth", "B_max_depth_terms");
    std::size_t converged = 0;
    for (const auto& r : t.rows) converged += r[t.column("status")] == "converged";
    const double diff = spec.slope - maxb.slope;
    const bool ok = spec.points == 7 && maxb.points == 7 && spec.slope > 0 && maxb.slope > 0 && diff >= 0.05 && sweep.cpu < kSweepCpuBudget;
    return {ok, "spectral slope " + fmt(spec.slope) + ", max-B slope " + fmt(maxb.slope) + ", difference " + fmt(diff) + " (>= 0.05), " +
                    std::to_string(converged) + "/" + std::to_string(t.rows.size()) + " runs converged within " +
                    std::to_string(kSweepEpochCap) + " epochs, sweep cpu " + fmt(sweep.cpu, 4) + " s (< 1800 s)"};
}

bool orderings_hold(const CsvTable& t, std::size_t r, std::string& why) {
    const double bp = cell(t, r, "B_preact");
    auto check = [&](bool c, const std::string& what) {
        if (!c && why.empty()) why = what;
        return c;
    };
    bool ok = check(cell(t, r, "B_preact_5pc") <= bp, "B_preact_5pc > B_preact");
    ok = check(cell(t, r, "B_preact_median") <= bp, "B_preact_median > B_preact") && ok;
    ok = check(cell(t, r, "our_bound_5pc") <= cell(t, r, "our_bound"), "final_bound_5pc > final_bound") && ok;
    ok = check(cell(t, r, "our_bound_median") <= cell(t, r, "our_bound"), "final_bound_median > final_bound") && ok;
    ok = check(cell(t, r, "our_bound") >= cell(t, r, "train_margin_loss"), "final_bound < train_margin_loss") && ok;
    return ok;
}

Outcome variant_orderings(const SweepData& sweep, const std::vector<fs::path>& extra_audits) {
    std::size_t audited = 0;
    std::string why;
    bool ok = sweep.ok;
    if (sweep.ok)
        for (std::size_t r = 0; r < sweep.table.rows.size(); ++r, ++audited) ok = orderings_hold(sweep.table, r, why) && ok;
    for (const auto& p : extra_audits) {
        if (!fs::exists(p)) continue;
        const CsvTable t = read_csv_file(p.string());
        for (std::size_t r = 0; r < t.rows.size(); ++r, ++audited) ok = orderings_hold(t, r, why) && ok;
    }
    return {ok && audited > 0, std::to_string(audited) + " audited checkpoints" + (why.empty() ? ", all orderings hold" : ", first violation: " + why) +
                                   (sweep.ok ? "" : "; " + sweep.error)};
}

PropertyBounds random_bounds(RngStream& rng) {
    const std::size_t D = 2 + rng.below(5), H = 4 + rng.below(60);
    PropertyBounds pb;
    pb.dims.push_back(2 + rng.below(100));
    for (std::size_t d = 1; d < D; ++d) pb.dims.push_back(H);
    pb.dims.push_back(2 + rng.below(9));
    for (std::size_t d = 0; d < D; ++d) pb.alpha.push_back(1 + 10 * rng.uniform());
    for (std::size_t d = 1; d < D; ++d) {
        pb.gamma_min.push_back(0.01 + rng.uniform());
        pb.gamma_5pc.push_back(pb.gamma_min.back() * (1 + rng.uniform()));
        pb.gamma_median.push_back(pb.gamma_5pc.back() * (1 + rng.uniform()));
    }
    pb.zeta = PairTable<double>(D);
    pb.kappa = PairTable<double>(D);
    for (double& v : pb.zeta.values()) v = 1 + 5 * rng.uniform();
    for (double& v : pb.kappa.values()) v = 1 + 5 * rng.uniform();
    pb.m = 100 + rng.below(5000);
    pb.gamma_class = 0.5 + 10 * rng.uniform();
    pb.max_input_norm = pb.alpha[0];
    return pb;
}

Outcome sigma_solver() {
    const double example = solve_sigma_star({{"a", 2, 1}, {"b", 4, 8}}).sigma;
    RngStream rng(909);
    std::size_t checks = 0, violations = 0;
    std::string first;
    for (int i = 0; i < 100; ++i) {
        const PropertyBounds pb = random_bounds(rng);
        const std::size_t D = pb.depth();
        LayerNorms norms;
        for (std::size_t d = 0; d < D; ++d) {
            norms.row_max.push_back(0.5 + 2 * rng.uniform());
            norms.spectral.push_back(norms.row_max.back() * (1 + 3 * rng.uniform()));
        }
        const ConstraintMargins m = ConstraintMargins::from_bounds(pb);
        const double dh = 1 / (4 * D * std::sqrt(static_cast<double>(pb.m)));
        auto sigma = [&](const PropertyBounds& b, const ConstraintMargins& mm, const LayerNorms& n) {
            return solve_sigma_star(build_tolerance_constraints(b, mm, n, dh)).sigma;
        };
        const double s0 = sigma(pb, m, norms);
        auto expect = [&](bool c, const std::string& what) {
            ++checks;
            if (!c) {
                ++violations;
                if (first.empty()) first = what + " (instance " + std::to_string(i) + ")";
            }
        };
        const double f = 1 + rng.uniform();
        // coefficient side grows: σ* must not increase
        for (std::size_t d = 0; d < D; ++d) {
            PropertyBounds b = pb;
            b.alpha[d] *= f;
            expect(sigma(b, m, norms) <= s0, "alpha[" + std::to_string(d) + "] up raised sigma*");
            LayerNorms n = norms;
            n.row_max[d] *= f;
            expect(sigma(pb, m, n) <= s0, "row norm up raised sigma*");
            n = norms;
            n.spectral[d] *= f;
            expect(sigma(pb, m, n) <= s0, "spectral norm up raised sigma*");
        }
        for (std::size_t k = 0; k < pb.zeta.size(); ++k) {
            PropertyBounds b = pb;
            b.zeta.values()[k] *= f;
            expect(sigma(b, m, norms) <= s0, "zeta up raised sigma*");
            b = pb;
            b.kappa.values()[k] *= f;
            expect(sigma(b, m, norms) <= s0, "kappa up raised sigma*");
        }
        // margin side grows: σ* must not decrease
        for (std::size_t d = 0; d < m.layer_l2.size(); ++d) {
            ConstraintMargins mm = m;
            mm.layer_l2[d] *= f;
            expect(sigma(pb, mm, norms) >= s0, "layer margin up lowered sigma*");
        }
        for (std::size_t d = 0; d < m.preact.size(); ++d) {
            ConstraintMargins mm = m;
            mm.preact[d] *= f;
            expect(sigma(pb, mm, norms) >= s0, "preact margin up lowered sigma*");
        }
        for (std::size_t k = 0; k < m.jac_row_l2.size(); ++k) {
            ConstraintMargins mm = m;
            mm.jac_row_l2.values()[k] *= f;
            expect(sigma(pb, mm, norms) >= s0, "jac row margin up lowered sigma*");
            mm = m;
            mm.jac_spec.values()[k] *= f;
            expect(sigma(pb, mm, norms) >= s0, "jac spec margin up lowered sigma*");
        }
        ConstraintMargins mm = m;
        mm.output *= f;
        expect(sigma(pb, mm, norms) >= s0, "output margin up lowered sigma*");
    }
    return {example == 0.25 && violations == 0,
            "example sigma* = " + fmt(example, 17) + " (exact 0.25), " + std::to_string(checks) + " single-constant perturbations on 100 instances, " +
                std::to_string(violations) + " violations" + (first.empty() ? "" : ": " + first)};
}

Outcome range_sanity(const SweepData& sweep) {
    if (!sweep.ok) return {false, sweep.error};
    const CsvTable& t = sweep.table;
    bool ok = true;
    std::string out_of_range;
    double lo = INFINITY, hi = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string warnings = t.rows[r][t.column("warnings")];
        for (const char* c : {"B_layer_l2", "B_output", "B_jac_row_l2", "B_jac_spec"}) {
            const double v = cell(t, r, c);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            const bool in = v >= 0.1 && v <= 1000;
            const bool warned = warnings.find(std::string("out_of_range:") + c) != std::string::npos;
            if (!in) out_of_range += " D=" + t.rows[r][t.column("depth")] + ":" + c + "=" + fmt(v);
            if (in == warned) out_of_range += " D=" + t.rows[r][t.column("depth")] + ":" + c + (warned ? " spurious warning" : " missing warning");
            ok = ok && in && !warned;
        }
    }
    return {ok, std::to_string(t.rows.size()) + " sweep rows, four B-terms span [" + fmt(lo) + ", " + fmt(hi) + "] (within [0.1, 1000])" +
                    (out_of_range.empty() ? "" : "; problems:" + out_of_range)};
}

Outcome determinism(const Options& o, std::vector<fs::path>& audits) {
    const fs::path dir = fs::path(o.work_dir) / "determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "train.json";
    std::ofstream(cfg) << R"({"depth": 3, "width": 40, "init_seed": 11, "stop_margin": 1.0, "max_epochs": 60, "seed": 5,
 "data": {"source": "mnist", "m": 256, "seed": 3}})";
    int codes[4];
    for (int i = 0; i < 2; ++i) {
        const std::string tag = std::to_string(i + 1);
        codes[2 * i] = run_cli(o, "train --config " + quote(cfg.string()) + " --out " + quote((dir / ("run" + tag + ".ckpt")).string()), dir / "log.txt");
        codes[2 * i + 1] = run_cli(o, "audit --checkpoint " + quote((dir / ("run" + tag + ".ckpt")).string()) + " --out " +
                                          quote((dir / ("audit" + tag + ".csv")).string()),
                                   dir / "log.txt");
    }
    for (int c : {codes[1], codes[3]})
        if (c != 0) return {false, "audit exited with status " + std::to_string(c) + ", see " + (dir / "log.txt").string()};
    for (int c : {codes[0], codes[2]})
        if (c != 0 && c != 1) return {false, "train exited with status " + std::to_string(c) + ", see " + (dir / "log.txt").string()};
    audits.push_back(dir / "audit1.csv");
    const std::string c1 = slurp(dir / "run1.ckpt"), c2 = slurp(dir / "run2.ckpt");
    const std::string a1 = slurp(dir / "audit1.csv"), a2 = slurp(dir / "audit2.csv");
    const bool ok = !c1.empty() && c1 == c2 && !a1.empty() && a1 == a2;
    return {ok, "checkpoint " + std::to_string(c1.size()) + " bytes " + (c1 == c2 ? "identical" : "DIFFER") + ", audit CSV " +
                    std::to_string(a1.size()) + " bytes " + (a1 == a2 ? "identical" : "DIFFER")};
}

std::optional<std::uint64_t> parse_offset(const std::vector<std::uint8_t>& bytes) {
    try {
        parse_idx(bytes, "corrupt");
    } catch (const ParseError& e) {
        return e.offset;
    }
    return std::nullopt;
}

Outcome idx_parser(const Options& o) {
    const fs::path dir = fs::path(o.work_dir) / "idx";
    fs::create_directories(dir);
    RngStream rng(1212);
    IdxFile img, lab;
    img.header.magic = kIdxImageMagic;
    img.header.dims = {37, 28, 28};
    for (std::size_t i = 0; i < 37 * 28 * 28; ++i) img.payload.push_back(static_cast<std::uint8_t>(rng.below(256)));
    lab.header.magic = kIdxLabelMagic;
    lab.header.dims = {37};
    for (std::size_t i = 0; i < 37; ++i) lab.payload.push_back(static_cast<std::uint8_t>(rng.below(10)));

    // bytes written by hand (big-endian header) so the check does not rely on the encoder
    std::vector<std::uint8_t> raw = {0, 0, 8, 3, 0, 0, 0, 37, 0, 0, 0, 28, 0, 0, 0, 28};
    raw.insert(raw.end(), img.payload.begin(), img.payload.end());
    std::vector<std::uint8_t> raw_lab = {0, 0, 8, 1, 0, 0, 0, 37};
    raw_lab.insert(raw_lab.end(), lab.payload.begin(), lab.payload.end());

    bool ok = encode_idx(img) == raw && encode_idx(parse_idx(raw)) == raw && encode_idx(parse_idx(raw_lab)) == raw_lab;
    write_bytes((dir / "images").string(), raw);
    write_bytes((dir / "labels").string(), raw_lab);
    gzFile gz = gzopen((dir / "images.gz").c_str(), "wb");
    gzwrite(gz, raw.data(), static_cast<unsigned>(raw.size()));
    gzclose(gz);
    const Dataset plain = load_mnist((dir / "images").string(), (dir / "labels").string());
    const Dataset zipped = load_mnist((dir / "images.gz").string(), (dir / "labels").string());
    for (std::size_t i = 0; i < 37; ++i)
        for (std::size_t j = 0; j < 784; ++j) {
            ok = ok && plain[i].x[j] == img.payload[i * 784 + j] / 255.0 && zipped[i].x[j] == plain[i].x[j];
            ok = ok && plain[i].y == lab.payload[i];
        }

    std::vector<std::string> errors;
    auto corrupt = [&](const std::string& what, std::vector<std::uint8_t> b, std::uint64_t want) {
        const auto got = parse_offset(b);
        if (!got || *got != want) errors.push_back(what);
    };
    auto b = raw;
    b[1] = 0x12;
    corrupt("magic", b, 0);
    b = raw;
    b[2] = 0x0b;
    corrupt("type byte", b, 2);
    corrupt("truncated header", std::vector<std::uint8_t>(raw.begin(), raw.begin() + 9), 9);
    corrupt("truncated payload", std::vector<std::uint8_t>(raw.begin(), raw.end() - 5), raw.size() - 5);
    b = raw;
    b.push_back(1);
    corrupt("trailing bytes", b, raw.size());
    b = raw;
    b[7] = 38;  // count now claims one more image
    corrupt("inflated count", b, raw.size());
    try {
        dataset_from_idx(parse_idx(raw_lab), parse_idx(raw));
        errors.push_back("swapped files accepted");
    } catch (const ParseError& e) {
        if (e.offset != 0) errors.push_back("swapped files offset");
    }
    ok = ok && errors.empty();
    std::string detail = "37x28x28 synthetic round trip bit-exact (plain and gzip), 7 corruptions rejected with offsets";
    if (!errors.empty()) {
        detail = "unexpected results for:";
        for (const auto& e : errors) detail += " " + e;
    }
    return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"acceptance checks"};
    app.add_option("--cli", o.cli, "path to the pacnr executable")->required();
    app.add_option("--work-dir", o.work_dir, "scratch directory")->required();
    app.add_option("--data-dir", o.data_dir, "MNIST directory");
    app.add_flag("--reuse-sweep", o.reuse_sweep, "reuse an existing depth sweep in the work directory");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(o.work_dir);

    std::vector<std::pair<std::string, Outcome>> results;
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            return Outcome{false, std::string("exception: ") + e.what()};
        }
    };
    auto record = [&](int n, const std::string& name, const Outcome& r) {
        std::cout << (r.pass ? "PASS" : "FAIL") << "  criterion " << n << "  " << name << ": " << r.detail << std::endl;
        results.push_back({name, r});
    };

    record(1, "jacobian vs finite differences", guarded(jacobian_fd));
    record(2, "homogeneity identity", guarded(homogeneity));
    record(3, "spectral norm vs eigen oracle", guarded(spectral_oracle));
    record(4, "gaussian tail lemmas", guarded(gaussian_lemmas));
    record(5, "kl closed form vs quadrature", guarded(kl_formula));
    std::cout << "      (running the H=40 depth sweep, this takes a while)" << std::endl;
    SweepData sweep;
    try {
        sweep = run_depth_sweep(o);
    } catch (const std::exception& e) {
        sweep.error = e.what();
    }
    record(6, "perturbation lemma monte carlo", guarded([&] { return lemma_monte_carlo(o, sweep); }));
    record(7, "depth-sweep slopes", guarded([&] { return depth_slopes(sweep); }));
    // the determinism run also supplies one more audited checkpoint for the ordering check
    std::vector<fs::path> audits;
    const Outcome det = guarded([&] { return determinism(o, audits); });
    record(8, "variant orderings", guarded([&] { return variant_orderings(sweep, audits); }));
    record(9, "sigma* solver", guarded(sigma_solver));
    record(10, "b-term ranges", guarded([&] { return range_sanity(sweep); }));
    record(11, "end-to-end determinism", det);
    record(12, "idx parser", guarded([&] { return idx_parser(o); }));

    std::size_t failed = 0;
    for (const auto& [name, r] : results) failed += !r.pass;
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << results.size() - failed << "/" << results.size() << std::endl;
    return failed ? 1 : 0;
}
