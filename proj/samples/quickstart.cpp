// Train a small net on synthetic blobs and print its bound report.
#include <iostream>

#include "pacnr/bounds.hpp"
#include "pacnr/data.hpp"
#include "pacnr/trainer.hpp"

int main() {
    using namespace pacnr;
    RngStream data_rng(1);
    const Dataset ds = synthetic_blobs(256, 2, 2, 10.0, data_rng);

    RngStream init_rng(2);
    MlpParams net = init_network({2, 16, 16, 2}, InitScheme::InvSqrtFanin, init_rng);

    TrainConfig cfg;
    cfg.stop_margin = 1.0;
    cfg.batch_size = 16;
    cfg.max_epochs = 500;
    const TrainResult tr = train(net, ds.examples, cfg);
    std::cout << "epochs " << tr.epochs_run << (tr.converged ? " (converged)" : " (not converged)") << "\n";

    const double gamma = 1.0;
    const ScanResult scan = scan_dataset(tr.params, ds.examples, gamma);
    const BoundReport r = compute_bound_report(tr.params, scan.bounds, 1.0 - margin_accuracy(tr.params, ds.examples, gamma));
    std::cout << "B_layer_l2 " << r.b.layer_l2 << "\nB_preact " << r.b.preact << "\nB_output " << r.b.output
              << "\nB_jac_row_l2 " << r.b.jac_row_l2 << "\nB_jac_spec " << r.b.jac_spec << "\nsigma* " << r.sigma.sigma
              << "\nkl " << r.kl << "\nbound " << r.final_bound << "\nspectral baseline " << r.baselines.spectral_term << "\n";
    for (const auto& w : r.warnings) std::cout << "warning: " << w << "\n";
}
