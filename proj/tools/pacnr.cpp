#include <CLI11.hpp>

#include <iostream>

#include "pacnr/commands.hpp"

namespace {

void add_data_flags(CLI::App* app, pacnr::DataPaths& p) {
    app->add_option("--data-dir", p.data_dir, "directory holding the MNIST IDX files (default: $PACNR_DATA_DIR, then data/mnist)");
    app->add_option("--train-images", p.train_images, "training image file, overrides --data-dir");
    app->add_option("--train-labels", p.train_labels, "training label file, overrides --data-dir");
    app->add_option("--test-images", p.test_images, "test image file, overrides --data-dir");
    app->add_option("--test-labels", p.test_labels, "test label file, overrides --data-dir");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noise-resilience generalization bounds for ReLU networks"};
    app.require_subcommand(1);

    pacnr::TrainCommand train;
    auto* t = app.add_subcommand("train", "train a network from a JSON config and write a checkpoint");
    t->add_option("--config", train.config, "JSON training config")->required();
    t->add_option("--out", train.out, "checkpoint path")->required();
    t->add_flag("-v,--verbose", train.verbose, "log progress every 10 epochs");
    add_data_flags(t, train.paths);

    pacnr::AuditCommand audit;
    double gamma_class = 0.0;
    auto* a = app.add_subcommand("audit", "compute the bound and baselines for a checkpoint");
    a->add_option("--checkpoint", audit.checkpoint, "checkpoint from 'train'")->required();
    a->add_option("--out", audit.out, "output CSV")->required();
    a->add_option("--archive", audit.archive, "optional per-input property CSV");
    auto* gopt = a->add_option("--gamma-class", gamma_class, "classification margin (default: training margin)");
    a->add_option("--delta", audit.delta, "confidence parameter")->capture_default_str();
    a->add_flag("--loose", audit.loose, "also report the loose-union variant columns");
    a->add_flag("--figure-mode", audit.figure_mode, "append the comparison-figure columns");
    add_data_flags(a, audit.paths);

    pacnr::SweepCommand sweep;
    auto* s = app.add_subcommand("sweep", "train and audit a depth or width grid");
    auto* spec = s->add_option("--spec", sweep.spec_file, "JSON sweep spec");
    s->add_option("--preset", sweep.preset, "h40-depth, h1280-depth, width-d8, width-d14 or d28-adam")->excludes(spec);
    s->add_option("--runs", sweep.runs, "override runs per grid point");
    s->add_option("--m", sweep.m, "override training set size");
    s->add_option("--out-dir", sweep.out_dir, "output directory")->required();
    s->add_flag("--keep-checkpoints", sweep.keep_checkpoints, "write one checkpoint per run");
    s->add_flag("--figure-mode", sweep.figure_mode, "append the comparison-figure columns");
    add_data_flags(s, sweep.paths);

    pacnr::VerifyCommand verify;
    double vgamma = 0.0;
    auto* v = app.add_subcommand("verify-noise", "Monte Carlo check of the perturbation statements");
    v->add_option("--checkpoint", verify.checkpoint, "checkpoint from 'train'")->required();
    v->add_option("--out", verify.out, "output CSV")->required();
    v->add_option("--sigma", verify.sigmas, "noise levels (default: sigma*/4, sigma*/2, sigma*, 2 sigma*)");
    v->add_option("--trials", verify.trials, "noise draws per input")->capture_default_str();
    v->add_option("--points", verify.points, "training inputs checked per noise level")->capture_default_str();
    v->add_option("--mu-points", verify.mu_points, "inputs used for the mu-hat estimate (0 disables)")->capture_default_str();
    v->add_option("--noise-draws", verify.n_noise, "noise draws per input for mu-hat")->capture_default_str();
    v->add_option("--seed", verify.seed, "RNG seed")->capture_default_str();
    auto* vg = v->add_option("--gamma-class", vgamma, "classification margin (default: training margin)");
    add_data_flags(v, verify.paths);

    pacnr::PlotCommand plot;
    auto* p = app.add_subcommand("plot", "render sweep columns as a log-scale SVG");
    p->add_option("--csv", plot.csv, "sweep.csv or audit CSV")->required();
    p->add_option("--columns", plot.columns, "columns to draw")->required()->delimiter(',');
    p->add_option("--x", plot.x, "x-axis column")->capture_default_str();
    p->add_option("--out", plot.out, "output SVG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : pacnr::kExitUsage;
    }

    if (*t) return pacnr::cmd_train(train);
    if (*a) {
        if (*gopt) audit.gamma_class = gamma_class;
        return pacnr::cmd_audit(audit);
    }
    if (*s) return pacnr::cmd_sweep(sweep);
    if (*v) {
        if (*vg) verify.gamma_class = vgamma;
        return pacnr::cmd_verify_noise(verify);
    }
    if (*p) return pacnr::cmd_plot(plot);
    return pacnr::kExitUsage;
}
