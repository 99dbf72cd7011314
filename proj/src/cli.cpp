#include "tgc/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "tgc/error.hpp"
#include "tgc/grad.hpp"
#include "tgc/graph.hpp"
#include "tgc/losses.hpp"
#include "tgc/maskio.hpp"
#include "tgc/spectrum.hpp"
#include "tgc/synth.hpp"
#include "tgc/trainer.hpp"

namespace tgc::cli {

namespace {

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

template <typename Fn>
CommandResult guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        return {static_cast<int>(e.kind()), nullptr, e.what()};
    } catch (const std::filesystem::filesystem_error& e) {
        return {static_cast<int>(ErrorKind::io), nullptr, e.what()};
    } catch (const nlohmann::json::exception& e) {
        return {static_cast<int>(ErrorKind::validation), nullptr, e.what()};
    }
}

std::optional<double> parse_sigma(const std::string& s) {
    if (s == "auto") return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError("--sigma must be 'auto' or a positive number");
    }
    return v;
}

struct Extracted {
    ProbMap map;
    RegionSet regions;
    std::vector<Point> centroids;
};

Extracted extract(const std::filesystem::path& path, double t, int min_area) {
    if (min_area < 1) throw ValidationError("--min-area must be >= 1");
    Extracted e;
    e.map = load_map(path);
    e.regions = connected_components(threshold(e.map, t), Connectivity::eight, static_cast<std::size_t>(min_area));
    e.centroids = centroids(e.regions, e.map, CentroidMode::soft);
    return e;
}

void check_loss_params(int k, double tau, double alpha) {
    if (k < 1) throw ValidationError("--k must be >= 1");
    if (!(alpha > 0.0)) throw ValidationError("--alpha must be positive");
    if (!(tau >= 0.0)) throw ValidationError("--tau must be nonnegative");
}

nlohmann::json breakdown_json(const LossBreakdown& l, double k_hat_pred) {
    auto j = loss_to_json(l);
    j["k_hat_pred"] = round_sig12(k_hat_pred);
    return j;
}

}  // namespace

CommandResult cmd_metrics(const MetricsOptions& o) {
    return guarded([&] {
        check_loss_params(o.k, o.tau, o.alpha);
        const GraphParams params{o.k, parse_sigma(o.sigma)};
        const Extracted pred = extract(o.pred, o.threshold, o.min_area);
        const Extracted ref = extract(o.ref, o.threshold, o.min_area);

        const Overlap ov = dice_jaccard(threshold(pred.map, o.threshold), threshold(ref.map, o.threshold));
        const RegionGraph gp = build_graph(pred.centroids, params);
        const RegionGraph gr = build_graph(ref.centroids, params);
        const Spectrum sp = graph_spectrum(gp);
        const Spectrum sr = graph_spectrum(gr);
        TgcWeights w;
        w.tau = o.tau;
        w.alpha = o.alpha;
        const LossBreakdown loss = tgc_loss(gp, sp, gr, sr, w);

        CommandResult r;
        r.payload = {{"dice", round_sig12(ov.dice)},
                     {"jaccard", round_sig12(ov.jaccard)},
                     {"n_pred", gp.size()},
                     {"n_ref", gr.size()},
                     {"sigma_pred", round_sig12(gp.sigma)},
                     {"sigma_ref", round_sig12(gr.sigma)},
                     {"k_hat_pred", round_sig12(soft_component_count(sp, o.tau, o.alpha))},
                     {"k_hat_ref", round_sig12(soft_component_count(sr, o.tau, o.alpha))},
                     {"loss", loss_to_json(loss)},
                     {"flags", loss.flags.names()}};
        return r;
    });
}

CommandResult cmd_gradcheck(const GradcheckOptions& o) {
    return guarded([&] {
        if (o.n_instances < 1) throw ValidationError("--n-instances must be >= 1");
        if (!(o.h > 0.0)) throw ValidationError("--h must be positive");
        GradCheckOptions opt;
        opt.seed = o.seed;
        opt.n_instances = o.n_instances;
        opt.h = o.h;
        const GradCheckSuite suite = run_gradcheck(opt);

        CommandResult r;
        r.payload = gradcheck_to_json(suite);
        if (o.csv) {
            const GradCheckInstance* worst = &suite.instances.front();
            for (const auto& inst : suite.instances) {
                if (inst.report.max_rel_err > worst->report.max_rel_err) worst = &inst;
            }
            std::ofstream out(*o.csv);
            if (!out) throw IoError("cannot write " + o.csv->string());
            out << gradcheck_csv(worst->report);
        }
        if (suite.roundoff_regime) {
            r.diagnostics = "h below 1e-8: central differences are dominated by round-off; errors reported, not gated";
        } else if (!(suite.max_rel_err < kGradCheckTolerance)) {
            r.exit_code = static_cast<int>(ErrorKind::numerical);
            r.diagnostics = "gradient check failed: max relative error " + fmt_g(suite.max_rel_err);
        }
        return r;
    });
}

CommandResult cmd_optimize(const OptimizeOptions& o) {
    return guarded([&] {
        check_loss_params(o.k, o.tau, o.alpha);
        if (o.steps < 0) throw ValidationError("--steps must be >= 0");
        if (!(o.lr >= 0.0) || !std::isfinite(o.lr)) throw ValidationError("--lr must be finite and nonnegative");
        const Extracted ref = extract(o.ref, o.threshold, o.min_area);
        const Extracted init = extract(o.init, o.threshold, o.min_area);
        if (init.centroids.empty()) throw ValidationError("--init has no regions after thresholding");
        if (init.centroids.size() < 2) throw ValidationError("--init needs at least 2 regions to differentiate");
        if (ref.centroids.empty()) throw ValidationError("--ref has no regions after thresholding");

        // One bandwidth, taken from the reference, for both graphs.
        const double sigma = ref.centroids.size() >= 2 ? estimate_sigma(ref.centroids) : 1.0;
        const GraphParams params{o.k, sigma};
        TgcWeights w;
        w.tau = o.tau;
        w.alpha = o.alpha;
        const RegionGraph gr = build_graph(ref.centroids, params);
        const double k_hat_ref = soft_component_count(graph_spectrum(gr), o.tau, o.alpha);

        std::string csv = "step,spec,conn,adj,total\n";
        char buf[192];
        std::vector<Point> c = init.centroids;
        LossBreakdown first;
        LossBreakdown last;
        double k_first = 0.0;
        double k_last = 0.0;
        for (int s = 0; s <= o.steps; ++s) {
            const RegionGraph gp = build_graph(c, params);
            const CentroidGrad g = tgc_grad_centroids(gp, gr, w);
            const double k_hat = soft_component_count(graph_spectrum(gp), o.tau, o.alpha);
            if (!std::isfinite(g.loss.total)) throw NumericalError("non-finite loss at step " + std::to_string(s));
            std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g\n", s, g.loss.spec, g.loss.conn, g.loss.adj,
                          g.loss.total);
            csv += buf;
            if (s == 0) {
                first = g.loss;
                k_first = k_hat;
            }
            last = g.loss;
            k_last = k_hat;
            if (s == o.steps) break;
            for (std::size_t i = 0; i < c.size(); ++i) {
                c[i].x -= o.lr * g.grad[i].x;
                c[i].y -= o.lr * g.grad[i].y;
            }
        }
        if (o.out) {
            std::ofstream out(*o.out);
            if (!out) throw IoError("cannot write " + o.out->string());
            out << csv;
        }

        auto final_centroids = nlohmann::json::array();
        for (const auto& p : c) final_centroids.push_back({round_sig12(p.x), round_sig12(p.y)});
        CommandResult r;
        r.payload = {{"steps", o.steps},
                     {"lr", o.lr},
                     {"sigma", round_sig12(sigma)},
                     {"n_pred", c.size()},
                     {"n_ref", gr.size()},
                     {"k_hat_ref", round_sig12(k_hat_ref)},
                     {"first", breakdown_json(first, k_first)},
                     {"last", breakdown_json(last, k_last)},
                     {"reduction", round_sig12(first.total > 0.0 ? 1.0 - last.total / first.total : 0.0)},
                     {"final_centroids", final_centroids}};
        return r;
    });
}

CommandResult cmd_synth(const SynthOptions& o) {
    return guarded([&] {
        if (o.n < 0) throw ValidationError("--n must be >= 0");
        SceneSpec spec;
        spec.width = o.size;
        spec.height = o.size;
        spec.seed = o.seed;
        const auto colon = o.blobs.find(':');
        if (colon == std::string::npos) throw ValidationError("--blobs must look like min:max");
        try {
            spec.min_blobs = std::stoi(o.blobs.substr(0, colon));
            spec.max_blobs = std::stoi(o.blobs.substr(colon + 1));
        } catch (const std::exception&) {
            throw ValidationError("--blobs must look like min:max");
        }
        const Manifest m = generate_dataset(spec, o.n, o.out);
        int placed = 0;
        int requested = 0;
        for (const auto& e : m.samples) {
            placed += e.blobs_placed;
            requested += e.blobs_requested;
        }
        CommandResult r;
        r.payload = {{"manifest", (o.out / "manifest.json").string()},
                     {"n", m.samples.size()},
                     {"seed", o.seed},
                     {"size", o.size},
                     {"blobs_requested", requested},
                     {"blobs_placed", placed}};
        return r;
    });
}

CommandResult cmd_train(const TrainOptions& o) {
    return guarded([&] {
        TrainConfig cfg;
        cfg.labeled_ratio = o.labeled_ratio;
        cfg.epochs = o.epochs;
        cfg.seed = o.seed;
        cfg.learning_rate = o.lr;
        cfg.batch_size = o.batch_size;
        if (o.no_tgc) {
            cfg.lambda_sup = 0.0;
            cfg.ramp.lambda_max = 0.0;
        }
        cfg.validate();
        const TrainResult res = train(o.data, cfg);

        std::error_code ec;
        std::filesystem::create_directories(o.out, ec);
        if (ec || !std::filesystem::is_directory(o.out)) throw IoError("cannot create directory " + o.out.string());
        nlohmann::json files;
        for (int m = 0; m < 2; ++m) {
            const std::string stem = "model" + std::to_string(m + 1);
            save_model(o.out / (stem + ".json"), res.best[m]);
            save_model(o.out / (stem + "_init.json"), res.initial[m]);
            files[stem] = (o.out / (stem + ".json")).string();
            files[stem + "_init"] = (o.out / (stem + "_init.json")).string();
        }
        {
            std::ofstream out(o.out / "history.csv");
            if (!out) throw IoError("cannot write history.csv");
            out << history_csv(res.history);
        }
        files["history"] = (o.out / "history.csv").string();

        const auto& last = res.history.epochs.back();
        CommandResult r;
        r.payload = {{"epochs", cfg.epochs},
                     {"seed", cfg.seed},
                     {"tgc", !o.no_tgc},
                     {"n_labeled", res.split.labeled.size()},
                     {"n_unlabeled", res.split.unlabeled.size()},
                     {"n_validation", res.split.validation.size()},
                     {"best_epoch", {res.best_epoch[0], res.best_epoch[1]}},
                     {"best_val_dice", {round_sig12(res.best_val_dice[0]), round_sig12(res.best_val_dice[1])}},
                     {"final_val_dice", {round_sig12(last.validation[0].dice), round_sig12(last.validation[1].dice)}},
                     {"files", files}};
        return r;
    });
}

CommandResult cmd_eval(const EvalOptions& o) {
    return guarded([&] {
        const PixelModel model = load_model(o.model);
        const Manifest manifest = load_manifest(o.data);
        const auto samples = load_training_samples(manifest);
        std::vector<int> ids;
        if (o.split == "all") {
            for (std::size_t i = 0; i < samples.size(); ++i) ids.push_back(static_cast<int>(i));
        } else if (o.split == "val") {
            const TrainConfig defaults;
            ids = make_split(samples.size(), 1.0, defaults.val_fraction, 0).validation;
        } else {
            throw ValidationError("--split must be 'val' or 'all'");
        }
        const Overlap ov = evaluate(model, samples, ids);
        CommandResult r;
        r.payload = {{"split", o.split},
                     {"n", ids.size()},
                     {"dice", round_sig12(ov.dice)},
                     {"jaccard", round_sig12(ov.jaccard)}};
        return r;
    });
}

}  // namespace tgc::cli
