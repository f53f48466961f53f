#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "bounds.hpp"
#include "checkpoint.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "network.hpp"
#include "perturb.hpp"
#include "report.hpp"
#include "trainer.hpp"

namespace pacnr {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// Bad flags, unreadable inputs or malformed configuration; reported with exit code 2.
struct UsageError : Error {
    using Error::Error;
};

/// Where training (and optional test) examples come from.
struct DataSpec {
    std::string source = "mnist";  // "mnist" or "blobs"
    std::size_t m = 1024;
    std::uint64_t seed = 1;
    // blobs only
    std::size_t blob_n = 512;
    std::size_t blob_dim = 2;
    std::size_t blob_classes = 2;
    double blob_separation = 10.0;

    /// Compact token stored in checkpoints.
    std::string tag() const {
        if (source == "mnist") return "mnist";
        return "blobs:n=" + std::to_string(blob_n) + ",dim=" + std::to_string(blob_dim) + ",classes=" +
               std::to_string(blob_classes) + ",sep=" + format_double(blob_separation);
    }

    static DataSpec from_tag(const std::string& tag, std::size_t m, std::uint64_t seed) {
        DataSpec s;
        s.m = m;
        s.seed = seed;
        if (tag.empty() || tag == "mnist") return s;
        if (tag.rfind("blobs:", 0) != 0) throw UsageError("unknown data source '" + tag + "'");
        s.source = "blobs";
        std::stringstream ss(tag.substr(6));
        std::string kv;
        while (std::getline(ss, kv, ',')) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("bad data source '" + tag + "'");
            const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
            bool ok = true;
            if (k == "n") ok = parse_int(v, s.blob_n);
            else if (k == "dim") ok = parse_int(v, s.blob_dim);
            else if (k == "classes") ok = parse_int(v, s.blob_classes);
            else if (k == "sep") ok = parse_double(v, s.blob_separation);
            else ok = false;
            if (!ok) throw UsageError("bad data source field '" + kv + "'");
        }
        return s;
    }
};

/// File locations; empty members fall back to the data directory.
struct DataPaths {
    std::string data_dir;
    std::string train_images, train_labels, test_images, test_labels;

    std::string resolved_dir() const {
        if (!data_dir.empty()) return data_dir;
        const std::string env = data_dir_from_env();
        if (!env.empty()) return env;
        return "data/mnist";
    }
};

struct LoadedData {
    Dataset train;
    std::optional<Dataset> test;
};

inline LoadedData load_data(const DataSpec& spec, const DataPaths& paths, bool want_test) {
    LoadedData out;
    if (spec.source == "blobs") {
        RngStream rng(spec.seed, 0x626c6f62);
        Dataset all = synthetic_blobs(spec.blob_n, spec.blob_dim, spec.blob_classes, spec.blob_separation, rng);
        const std::size_t m = spec.m ? std::min(spec.m, all.size()) : all.size();
        out.train = all;
        out.train.examples.resize(m);
        if (want_test && m < all.size()) {
            Dataset t = all;
            t.examples.assign(all.examples.begin() + static_cast<std::ptrdiff_t>(m), all.examples.end());
            out.test = std::move(t);
        }
        return out;
    }
    if (spec.source != "mnist") throw UsageError("unknown data source '" + spec.source + "'");
    const std::string dir = paths.resolved_dir();
    MnistPaths tr = mnist_paths(dir, true);
    if (!paths.train_images.empty()) tr.images = paths.train_images;
    if (!paths.train_labels.empty()) tr.labels = paths.train_labels;
    for (const auto& p : {tr.images, tr.labels})
        if (!std::filesystem::exists(p)) throw IoError(p, "data file not found");
    Dataset full = load_mnist(tr.images, tr.labels);
    if (spec.m > full.size())
        throw UsageError("requested m=" + std::to_string(spec.m) + " but " + tr.images + " holds " + std::to_string(full.size()));
    RngStream rng(spec.seed, 0x73756273);
    out.train = spec.m ? subset(full, spec.m, rng) : full;
    if (want_test) {
        MnistPaths te = mnist_paths(dir, false);
        if (!paths.test_images.empty()) te.images = paths.test_images;
        if (!paths.test_labels.empty()) te.labels = paths.test_labels;
        if (std::filesystem::exists(te.images) && std::filesystem::exists(te.labels)) out.test = load_mnist(te.images, te.labels);
    }
    return out;
}

inline double zero_one_error(const MlpParams& p, const Dataset& d) { return 1.0 - margin_accuracy(p, d.examples, 0.0); }

/// Network shape, initialization and optimizer settings for one training run.
struct TrainSpec {
    std::size_t depth = 5;
    std::size_t width = 40;
    InitScheme init_scheme = InitScheme::InvSqrtFanin;
    std::uint64_t init_seed = 1;
    TrainConfig train;
    DataSpec data;
};

inline TrainSpec parse_train_spec(const nlohmann::json& j) {
    TrainSpec s;
    try {
        s.depth = j.value("depth", s.depth);
        s.width = j.value("width", s.width);
        if (s.depth >= 20 && !j.contains("optimizer")) s.train = TrainConfig::deep_adam();
        s.init_scheme = parse_init_scheme(j.value("init_scheme", to_string(s.init_scheme)));
        s.init_seed = j.value("init_seed", s.init_seed);
        s.train.optimizer = parse_optimizer(j.value("optimizer", to_string(s.train.optimizer)));
        s.train.learning_rate = j.value("learning_rate", s.train.learning_rate);
        s.train.batch_size = j.value("batch_size", s.train.batch_size);
        s.train.stop_fraction = j.value("stop_fraction", s.train.stop_fraction);
        s.train.stop_margin = j.value("stop_margin", s.train.stop_margin);
        s.train.max_epochs = j.value("max_epochs", s.train.max_epochs);
        s.train.seed = j.value("seed", s.train.seed);
        if (j.contains("data")) {
            const auto& d = j.at("data");
            s.data.source = d.value("source", s.data.source);
            s.data.m = d.value("m", s.data.m);
            s.data.seed = d.value("seed", s.data.seed);
            s.data.blob_n = d.value("n", s.data.blob_n);
            s.data.blob_dim = d.value("dim", s.data.blob_dim);
            s.data.blob_classes = d.value("classes", s.data.blob_classes);
            s.data.blob_separation = d.value("separation", s.data.blob_separation);
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    } catch (const Error& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    if (s.depth < 2) throw UsageError("config: depth must be >= 2");
    if (s.width == 0) throw UsageError("config: width must be positive");
    return s;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
}

struct TrainOutcome {
    Checkpoint checkpoint;
    bool diverged = false;
    std::string message;
};

inline TrainOutcome run_training(const TrainSpec& spec, const Dataset& train, std::ostream* log = nullptr) {
    TrainOutcome out;
    RngStream rng(spec.init_seed, 0x696e6974);
    MlpParams init = init_network(mlp_dims(train.input_dim, spec.width, spec.depth, train.num_classes), spec.init_scheme, rng);
    EpochCallback cb;
    if (log)
        cb = [log](std::size_t e, double loss, double acc) {
            if (e % 10 == 0) *log << "epoch " << e << " loss " << loss << " margin-accuracy " << acc << "\n";
        };
    Checkpoint& c = out.checkpoint;
    c.init_seed = spec.init_seed;
    c.init_scheme = spec.init_scheme;
    c.train = spec.train;
    c.data_source = spec.data.tag();
    c.data_m = train.size();
    c.data_seed = spec.data.seed;
    try {
        TrainResult r = pacnr::train(std::move(init), train.examples, spec.train, cb);
        c.params = std::move(r.params);
        c.epochs = r.epochs_run;
        c.margin_accuracy = r.final_margin_accuracy;
        c.converged = r.converged;
    } catch (const DivergenceError& e) {
        out.diverged = true;
        out.message = e.what();
    }
    return out;
}

struct TrainCommand {
    std::string config;
    DataPaths paths;
    std::string out;
    bool verbose = false;
};

inline int cmd_train(const TrainCommand& cmd, std::ostream& log = std::cerr) {
    try {
        const TrainSpec spec = parse_train_spec(read_json_file(cmd.config));
        const LoadedData data = load_data(spec.data, cmd.paths, false);
        if (data.train.input_dim > spec.width)
            log << "warning: width " << spec.width << " is below the input dimension " << data.train.input_dim << "\n";
        TrainOutcome t = run_training(spec, data.train, cmd.verbose ? &log : nullptr);
        if (t.diverged) {
            log << "error: " << t.message << "\n";
            return kExitFailure;
        }
        save_checkpoint(cmd.out, t.checkpoint);
        log << (t.checkpoint.converged ? "converged" : "did not converge") << " after " << t.checkpoint.epochs
            << " epochs, margin accuracy " << t.checkpoint.margin_accuracy << "; wrote " << cmd.out << "\n";
        return t.checkpoint.converged ? kExitOk : kExitFailure;
    } catch (const IoError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

struct AuditResult {
    BoundReport report;
    ScanResult scan;
};

inline AuditResult audit_network(const MlpParams& p, const Dataset& train, const std::optional<Dataset>& test,
                                 double gamma_class, double delta) {
    AuditResult a;
    a.scan = scan_dataset(p, train.examples, gamma_class);
    const double loss = 1.0 - margin_accuracy(p, train.examples, gamma_class);
    a.report = compute_bound_report(p, a.scan.bounds, loss, {delta});
    if (test && !test->empty()) a.report.test_error = zero_one_error(p, *test);
    return a;
}

struct AuditCommand {
    std::string checkpoint;
    DataPaths paths;
    std::string out;
    std::string archive;  // optional per-input CSV
    std::optional<double> gamma_class;
    double delta = 0.01;
    bool loose = false;
    bool figure_mode = false;
};

inline int cmd_audit(const AuditCommand& cmd, std::ostream& log = std::cerr) {
    try {
        const Checkpoint ck = load_checkpoint(cmd.checkpoint);
        const DataSpec spec = DataSpec::from_tag(ck.data_source, ck.data_m, ck.data_seed);
        const LoadedData data = load_data(spec, cmd.paths, true);
        if (!(cmd.delta > 0.0 && cmd.delta < 1.0)) throw UsageError("--delta must lie in (0, 1)");
        const double gamma = cmd.gamma_class.value_or(ck.train.stop_margin);
        if (!(gamma > 0.0)) throw UsageError("--gamma-class must be positive");
        const AuditResult a = audit_network(ck.params, data.train, data.test, gamma, cmd.delta);
        const CsvOptions opt{cmd.figure_mode, cmd.loose};
        std::ofstream out(cmd.out, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(cmd.out, "cannot open for writing");
        write_csv_row(out, audit_header(opt));
        write_csv_row(out, audit_row(a.report, opt));
        if (!cmd.archive.empty()) {
            std::ofstream ar(cmd.archive, std::ios::binary | std::ios::trunc);
            if (!ar) throw IoError(cmd.archive, "cannot open for writing");
            write_archive_csv(ar, a.scan.archive);
        }
        for (const auto& w : a.report.warnings) log << "warning: " << w << "\n";
        log << "sigma* " << a.report.sigma.sigma << " (binding " << a.report.sigma.binding << "), bound " << a.report.final_bound
            << "; wrote " << cmd.out << "\n";
        return kExitOk;
    } catch (const IoError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

/// Grid of training runs over depth or width.
struct SweepSpec {
    std::string axis = "depth";
    std::vector<std::size_t> values;
    std::size_t fixed = 40;  // H for depth sweeps, D for width sweeps
    std::size_t runs = 1;
    std::uint64_t seed = 1;
    double gamma_class = 10.0;
    double delta = 0.01;
    bool figure_mode = false;
    TrainSpec base;  // optimizer, data and init settings shared by every run

    void validate() const {
        if (axis != "depth" && axis != "width") throw UsageError("sweep axis must be 'depth' or 'width'");
        if (values.empty()) throw UsageError("sweep values must be nonempty");
        for (auto v : values)
            if (v == 0) throw UsageError("sweep values must be positive");
        if (runs == 0) throw UsageError("sweep runs must be positive");
    }

    TrainSpec run_spec(std::size_t value, std::size_t run) const {
        TrainSpec s = base;
        s.depth = axis == "depth" ? value : fixed;
        s.width = axis == "depth" ? fixed : value;
        if (s.depth >= 20 && base.train.optimizer == Optimizer::Sgd && deep_adam_default) s.train = TrainConfig::deep_adam();
        s.train.stop_margin = gamma_class;
        const std::uint64_t mix = detail::mix64(seed * 0x9E3779B97F4A7C15ull + value * 1000003ull + run);
        s.init_seed = mix;
        s.train.seed = detail::mix64(mix + 1);
        s.data.seed = base.data.seed + (resample_data ? run : 0);
        return s;
    }

    bool deep_adam_default = true;
    bool resample_data = false;
};

inline SweepSpec parse_sweep_spec(const nlohmann::json& j) {
    SweepSpec s;
    try {
        s.axis = j.value("axis", s.axis);
        s.values = j.at("values").get<std::vector<std::size_t>>();
        s.fixed = j.value(s.axis == "depth" ? "width" : "depth", s.fixed);
        s.runs = j.value("runs", s.runs);
        s.seed = j.value("seed", s.seed);
        s.gamma_class = j.value("gamma_class", s.gamma_class);
        s.delta = j.value("delta", s.delta);
        s.figure_mode = j.value("figure_mode", s.figure_mode);
        s.resample_data = j.value("resample_data", s.resample_data);
        nlohmann::json t = j.value("train", nlohmann::json::object());
        if (j.contains("data")) t["data"] = j.at("data");
        s.base = parse_train_spec(t);
        s.deep_adam_default = !t.contains("optimizer");
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("sweep spec: ") + e.what());
    }
    s.validate();
    return s;
}

/// Presets following the published experiment grid.
inline SweepSpec sweep_preset(const std::string& name, std::size_t runs = 0, std::size_t m = 0) {
    SweepSpec s;
    s.base.data.m = 4096;
    if (name == "h40-depth") {
        s.fixed = 40;
        for (std::size_t d = 2; d <= 11; ++d) s.values.push_back(d);
    } else if (name == "h1280-depth") {
        s.fixed = 1280;
        for (std::size_t d = 2; d <= 11; ++d) s.values.push_back(d);
    } else if (name == "width-d8" || name == "width-d14") {
        s.axis = "width";
        s.fixed = name == "width-d8" ? 8 : 14;
        s.values = {40, 80, 160, 320, 640, 1280};
    } else if (name == "d28-adam") {
        s.fixed = 40;
        s.values = {28};
        s.runs = 12;
        s.resample_data = true;
    } else {
        throw UsageError("unknown preset '" + name + "' (h40-depth, h1280-depth, width-d8, width-d14, d28-adam)");
    }
    if (runs) s.runs = runs;
    if (m) s.base.data.m = m;
    s.validate();
    return s;
}

inline std::vector<std::string> sweep_header(const CsvOptions& opt) {
    std::vector<std::string> h = {"run", "seed", "status", "epochs", "margin_accuracy"};
    for (const auto& c : audit_header(opt)) h.push_back(c);
    return h;
}

/// Bound columns whose depth/width slopes are summarized.
inline std::vector<std::string> slope_columns() {
    return {"B_layer_l2", "B_preact",     "B_preact_5pc", "B_preact_median", "B_output",   "B_jac_row_l2",
            "B_jac_spec", "sigma_star",   "kl",           "our_bound",       "our_bound_5pc", "our_bound_median",
            "our_bound_loose", "neyshabur18", "bartlett17", "spectral_term", "B_max_depth_terms"};
}

struct SweepRun {
    std::size_t value = 0;
    std::size_t run = 0;
    std::uint64_t seed = 0;
    std::string status;
    std::optional<Checkpoint> checkpoint;
    std::optional<BoundReport> report;
};

/// Trains and audits every (value, run) pair. Data are loaded once per distinct data seed.
inline std::vector<SweepRun> run_sweep(const SweepSpec& spec, const DataPaths& paths, std::ostream* log = nullptr) {
    std::vector<SweepRun> out;
    std::map<std::uint64_t, LoadedData> cache;
    for (std::size_t v : spec.values) {
        for (std::size_t run = 0; run < spec.runs; ++run) {
            const TrainSpec ts = spec.run_spec(v, run);
            auto it = cache.find(ts.data.seed);
            if (it == cache.end()) it = cache.emplace(ts.data.seed, load_data(ts.data, paths, true)).first;
            const LoadedData& data = it->second;
            SweepRun r;
            r.value = v;
            r.run = run;
            r.seed = ts.init_seed;
            if (log) *log << spec.axis << "=" << v << " run " << run << ": training\n";
            TrainOutcome t = run_training(ts, data.train);
            if (t.diverged) {
                r.status = "diverged";
                if (log) *log << "  " << t.message << "\n";
            } else {
                r.status = t.checkpoint.converged ? "converged" : "unconverged";
                r.report = audit_network(t.checkpoint.params, data.train, data.test, spec.gamma_class, spec.delta).report;
                r.checkpoint = std::move(t.checkpoint);
                if (log)
                    *log << "  " << r.status << " after " << r.checkpoint->epochs << " epochs; spectral term "
                         << r.report->baselines.spectral_term << ", max B " << r.report->b.max_depth_terms() << "\n";
            }
            out.push_back(std::move(r));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const SweepRun& a, const SweepRun& b) {
        return a.value != b.value ? a.value < b.value : a.run < b.run;
    });
    return out;
}

inline CsvTable sweep_table(const SweepSpec& spec, const std::vector<SweepRun>& runs) {
    const CsvOptions opt{spec.figure_mode, true};
    CsvTable t;
    t.header = sweep_header(opt);
    t.header.push_back("B_max_depth_terms");
    for (const auto& r : runs) {
        std::vector<std::string> row = {std::to_string(r.run), std::to_string(r.seed), r.status,
                                        r.checkpoint ? std::to_string(r.checkpoint->epochs) : "",
                                        r.checkpoint ? num(r.checkpoint->margin_accuracy) : ""};
        if (r.report) {
            for (auto& f : audit_row(*r.report, opt)) row.push_back(std::move(f));
            row.push_back(num(r.report->b.max_depth_terms()));
        } else {
            const std::size_t D = spec.axis == "depth" ? r.value : spec.fixed;
            const std::size_t H = spec.axis == "depth" ? spec.fixed : r.value;
            row.push_back(std::to_string(D));
            row.push_back(std::to_string(H));
            while (row.size() < t.header.size()) row.emplace_back();
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline CsvTable slope_table(const SweepSpec& spec, const CsvTable& sweep) {
    CsvTable s;
    s.header = {"column", "axis", "slope", "intercept", "points", "growth_per_unit"};
    for (const auto& c : slope_columns()) {
        LinearFit f;
        if (spec.axis == "depth") {
            f = log10_slope(sweep, "depth", c);
        } else {
            auto [xs, ys] = log_points(sweep, "width", c);
            for (double& x : xs) x = std::log10(x);
            f = least_squares(xs, ys);
        }
        s.rows.push_back({c, spec.axis == "depth" ? "depth" : "log10_width", num(f.slope), num(f.intercept),
                          std::to_string(f.points), num(std::pow(10.0, f.slope))});
    }
    return s;
}

inline void write_table(const std::string& path, const CsvTable& t, const std::string& comment = "") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    if (!comment.empty()) out << "# " << comment << "\n";
    write_csv_row(out, t.header);
    for (const auto& r : t.rows) write_csv_row(out, r);
}

struct SweepCommand {
    std::string spec_file;
    std::string preset;
    std::size_t runs = 0;
    std::size_t m = 0;
    DataPaths paths;
    std::string out_dir;
    bool keep_checkpoints = false;
    bool figure_mode = false;
};

inline int cmd_sweep(const SweepCommand& cmd, std::ostream& log = std::cerr) {
    try {
        SweepSpec spec;
        if (!cmd.spec_file.empty())
            spec = parse_sweep_spec(read_json_file(cmd.spec_file));
        else if (!cmd.preset.empty())
            spec = sweep_preset(cmd.preset);
        else
            throw UsageError("sweep needs --spec or --preset");
        if (cmd.runs) spec.runs = cmd.runs;
        if (cmd.m) spec.base.data.m = cmd.m;
        if (cmd.figure_mode) spec.figure_mode = true;
        std::filesystem::create_directories(cmd.out_dir);
        const auto runs = run_sweep(spec, cmd.paths, &log);
        const CsvTable t = sweep_table(spec, runs);
        const std::filesystem::path dir(cmd.out_dir);
        write_table((dir / "sweep.csv").string(), t);
        write_table((dir / "slopes.csv").string(), slope_table(spec, t));
        if (cmd.keep_checkpoints)
            for (const auto& r : runs)
                if (r.checkpoint)
                    save_checkpoint((dir / (spec.axis + "-" + std::to_string(r.value) + "-run" + std::to_string(r.run) + ".ckpt")).string(),
                                    *r.checkpoint);
        log << "wrote " << (dir / "sweep.csv").string() << " and slopes.csv\n";
        return kExitOk;
    } catch (const IoError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

inline constexpr const char* kVerifyCaveat =
    "Monte Carlo spot-check on sampled training inputs only; the guarantee covers every input meeting the norm "
    "preconditions, which sampling cannot exhaust";

struct VerifyCommand {
    std::string checkpoint;
    DataPaths paths;
    std::vector<double> sigmas;  // empty: {σ*/4, σ*/2, σ*, 2σ*}
    std::size_t trials = 2000;
    std::size_t points = 1;
    std::size_t mu_points = 16;
    std::size_t n_noise = 200;
    std::uint64_t seed = 1;
    std::optional<double> gamma_class;
    std::string out;
};

struct VerifyRow {
    std::string statement;
    std::string layer;
    std::string point;
    double sigma = 0.0;
    double sigma_ratio = 0.0;
    FailureEstimate estimate;
};

struct VerifyOutcome {
    double sigma_star = 0.0;
    std::vector<VerifyRow> rows;
    bool all_pass_below_sigma_star = true;
};

inline VerifyOutcome run_verify(const MlpParams& p, const Dataset& train, const VerifyCommand& cmd, double gamma_class) {
    VerifyOutcome out;
    const ScanResult scan = scan_dataset(p, train.examples, gamma_class);
    const PropertyBounds& pb = scan.bounds;
    const double delta_hat = default_delta_hat(p.depth(), pb.m);
    out.sigma_star = solve_sigma_star(build_tolerance_constraints(pb, p, delta_hat)).sigma;
    std::vector<double> grid = cmd.sigmas;
    if (grid.empty()) grid = {out.sigma_star / 4, out.sigma_star / 2, out.sigma_star, 2 * out.sigma_star};
    const PriorTolerances prior = PriorTolerances::from_bounds(pb);
    const ConstraintMargins margins = ConstraintMargins::from_bounds(pb);
    RngStream root(cmd.seed, 0x76657269);
    const double ratio_den = out.sigma_star > 0.0 ? out.sigma_star : 1.0;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double sigma = grid[gi];
        for (std::size_t i = 0; i < std::min(cmd.points, train.size()); ++i) {
            RngStream rng = root.split(gi * 1000003 + i);
            for (const auto& s : verify_perturbation_statements(p, train[i], sigma, delta_hat, prior, rng, {cmd.trials, 1.0})) {
                out.rows.push_back({to_string(s.statement), std::to_string(s.layer), std::to_string(i), sigma, sigma / ratio_den, s.estimate});
                if (!s.estimate.passed && sigma <= out.sigma_star) out.all_pass_below_sigma_star = false;
            }
        }
        if (cmd.mu_points > 0) {
            std::vector<LabeledExample> pts(train.examples.begin(),
                                            train.examples.begin() + static_cast<std::ptrdiff_t>(std::min(cmd.mu_points, train.size())));
            RngStream rng = root.split(0xfeed0000 + gi);
            const MuHatResult mu = estimate_mu_hat(p, pts, sigma, margins, cmd.n_noise, rng, pb.m);
            // informational: the fraction is reported, not judged
            FailureEstimate f = FailureEstimate::make(mu.failing, mu.points, 1.0);
            out.rows.push_back({"mu_hat", "*", "first-" + std::to_string(mu.points), sigma, sigma / ratio_den, f});
        }
    }
    return out;
}

inline int cmd_verify_noise(const VerifyCommand& cmd, std::ostream& log = std::cerr) {
    try {
        if (cmd.trials < 100) throw UsageError("--trials must be at least 100");
        if (cmd.mu_points > 0 && cmd.n_noise < 100) throw UsageError("--noise-draws must be at least 100");
        for (double s : cmd.sigmas)
            if (!(s >= 0.0)) throw UsageError("sigma values must be nonnegative");
        const Checkpoint ck = load_checkpoint(cmd.checkpoint);
        const LoadedData data = load_data(DataSpec::from_tag(ck.data_source, ck.data_m, ck.data_seed), cmd.paths, false);
        const VerifyOutcome v = run_verify(ck.params, data.train, cmd, cmd.gamma_class.value_or(ck.train.stop_margin));
        CsvTable t;
        t.header = {"statement", "layer", "point", "sigma", "sigma_over_sigma_star", "trials", "failures",
                    "rate",      "threshold", "pass", "ci_low", "ci_high"};
        for (const auto& r : v.rows) {
            const auto& e = r.estimate;
            t.rows.push_back({r.statement, r.layer, r.point, num(r.sigma), num(r.sigma_ratio), std::to_string(e.trials),
                              std::to_string(e.failures), num(e.rate), num(e.threshold), e.passed ? "1" : "0", num(e.ci_low),
                              num(e.ci_high)});
        }
        write_table(cmd.out, t, kVerifyCaveat);
        log << "sigma* " << v.sigma_star << "; " << (v.all_pass_below_sigma_star ? "all statements pass" : "FAILURES")
            << " at sigma <= sigma*; wrote " << cmd.out << "\n";
        return v.all_pass_below_sigma_star ? kExitOk : kExitFailure;
    } catch (const IoError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

struct PlotCommand {
    std::string csv;
    std::vector<std::string> columns;
    std::string x = "depth";
    std::string out;
};

inline int cmd_plot(const PlotCommand& cmd, std::ostream& log = std::cerr) {
    try {
        const CsvTable t = read_csv_file(cmd.csv);
        if (cmd.columns.empty()) throw UsageError("plot needs at least one column");
        std::string svg;
        try {
            svg = render_svg(t, cmd.x, cmd.columns);
        } catch (const Error& e) {
            throw UsageError(cmd.csv + ": " + e.what());
        }
        std::ofstream out(cmd.out, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(cmd.out, "cannot open for writing");
        out << svg;
        log << "wrote " << cmd.out << "\n";
        return kExitOk;
    } catch (const IoError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        log << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

}  // namespace pacnr
