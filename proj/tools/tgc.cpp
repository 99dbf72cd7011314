// tgc: command-line front end. JSON results on stdout, diagnostics on stderr.

#include <CLI11.hpp>
#include <iostream>

#include "tgc/cli.hpp"

namespace {

int emit(const tgc::cli::CommandResult& r) {
    if (!r.diagnostics.empty()) std::cerr << r.diagnostics << '\n';
    if (r.exit_code == 0 || !r.payload.is_null()) std::cout << r.payload.dump() << '\n';
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace tgc::cli;
    CLI::App app{"Topology graph consistency losses, gradient checks and desk-scale training"};
    app.require_subcommand(1);

    MetricsOptions metrics;
    auto* m = app.add_subcommand("metrics", "Dice/Jaccard and TGC loss between two maps");
    m->add_option("--pred", metrics.pred, "prediction map (PGM or CSV)")->required();
    m->add_option("--ref", metrics.ref, "reference map (PGM or CSV)")->required();
    m->add_option("--k", metrics.k, "kNN neighbourhood size")->capture_default_str();
    m->add_option("--sigma", metrics.sigma, "affinity bandwidth in pixels, or 'auto'")->capture_default_str();
    m->add_option("--tau", metrics.tau, "soft component-count threshold")->capture_default_str();
    m->add_option("--alpha", metrics.alpha, "soft component-count sharpness")->capture_default_str();
    m->add_option("--threshold", metrics.threshold, "foreground threshold (strict >)")->capture_default_str();
    m->add_option("--min-area", metrics.min_area, "smallest region kept, pixels")->capture_default_str();
    m->add_flag("--json", "accepted for compatibility; output is always JSON");

    GradcheckOptions gradcheck;
    std::string gradcheck_csv;
    auto* g = app.add_subcommand("gradcheck", "analytic vs central-difference gradients on random layouts");
    g->add_option("--seed", gradcheck.seed)->capture_default_str();
    g->add_option("--n-instances", gradcheck.n_instances)->capture_default_str();
    g->set_help_flag("--help", "Print this help message and exit");  // frees -h for the step size
    g->add_option("--h", gradcheck.h, "finite-difference step")->capture_default_str();
    g->add_option("--csv", gradcheck_csv, "write the worst instance's per-coordinate table");

    OptimizeOptions optimize;
    std::string optimize_out;
    auto* o = app.add_subcommand("optimize", "gradient descent of prediction centroids under the TGC loss");
    o->add_option("--ref", optimize.ref)->required();
    o->add_option("--init", optimize.init)->required();
    o->add_option("--steps", optimize.steps)->capture_default_str();
    o->add_option("--lr", optimize.lr)->capture_default_str();
    o->add_option("--out", optimize_out, "per-step loss CSV");
    o->add_option("--k", optimize.k)->capture_default_str();
    o->add_option("--tau", optimize.tau)->capture_default_str();
    o->add_option("--alpha", optimize.alpha)->capture_default_str();

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic gland-like dataset");
    s->add_option("--out", synth.out)->required();
    s->add_option("--n", synth.n)->capture_default_str();
    s->add_option("--seed", synth.seed)->capture_default_str();
    s->add_option("--size", synth.size)->capture_default_str();
    s->add_option("--blobs", synth.blobs, "blob count range min:max")->capture_default_str();

    TrainOptions train;
    auto* t = app.add_subcommand("train", "dual-network semi-supervised training");
    t->add_option("--data", train.data, "manifest.json")->required();
    t->add_option("--labeled-ratio", train.labeled_ratio)->capture_default_str();
    t->add_option("--epochs", train.epochs)->capture_default_str();
    t->add_option("--seed", train.seed)->capture_default_str();
    t->add_flag("--no-tgc", train.no_tgc, "disable the topology terms (ablation)");
    t->add_option("--out", train.out)->required();
    t->add_option("--lr", train.lr)->capture_default_str();
    t->add_option("--batch-size", train.batch_size)->capture_default_str();

    EvalOptions eval;
    auto* e = app.add_subcommand("eval", "mean Dice/Jaccard of a checkpoint");
    e->add_option("--model", eval.model)->required();
    e->add_option("--data", eval.data, "manifest.json")->required();
    e->add_option("--split", eval.split, "val or all")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        std::cerr << ex.what() << '\n';
        return 1;
    }

    if (m->parsed()) return emit(cmd_metrics(metrics));
    if (g->parsed()) {
        if (!gradcheck_csv.empty()) gradcheck.csv = gradcheck_csv;
        return emit(cmd_gradcheck(gradcheck));
    }
    if (o->parsed()) {
        if (!optimize_out.empty()) optimize.out = optimize_out;
        return emit(cmd_optimize(optimize));
    }
    if (s->parsed()) return emit(cmd_synth(synth));
    if (t->parsed()) return emit(cmd_train(train));
    if (e->parsed()) return emit(cmd_eval(eval));
    return 1;
}
