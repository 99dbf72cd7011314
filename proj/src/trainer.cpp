#include "tgc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "tgc/error.hpp"
#include "tgc/grad.hpp"
#include "tgc/parallel.hpp"
#include "tgc/rng.hpp"
#include "tgc/spectrum.hpp"

namespace tgc {

std::vector<double> box_blur(const ProbMap& image, int r) {
    const int w = image.width();
    const int h = image.height();
    // (w+1) x (h+1) summed-area table
    std::vector<double> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
    auto at = [&](int x, int y) -> double& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
    for (int y = 0; y < h; ++y) {
        double row = 0.0;
        for (int x = 0; x < w; ++x) {
            row += image.at(x, y);
            at(x + 1, y + 1) = at(x + 1, y) + row;
        }
    }
    std::vector<double> out(image.size());
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - r);
        const int y1 = std::min(h, y + r + 1);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - r);
            const int x1 = std::min(w, x + r + 1);
            const double sum = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
            out[image.index(x, y)] = sum / static_cast<double>((x1 - x0) * (y1 - y0));
        }
    }
    return out;
}

FeatureStack featurize(const ProbMap& image) {
    FeatureStack f;
    f.width = image.width();
    f.height = image.height();
    const std::size_t n = image.size();
    f.data.assign(n * kFeatureCount, 0.0);
    for (std::size_t s = 0; s < kBlurHalfWidths.size(); ++s) {
        const auto blurred = box_blur(image, kBlurHalfWidths[s]);
        for (std::size_t i = 0; i < n; ++i) f.data[i * kFeatureCount + s] = blurred[i];
    }
    const double sx = f.width > 1 ? 1.0 / (f.width - 1) : 0.0;
    const double sy = f.height > 1 ? 1.0 / (f.height - 1) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double* px = f.data.data() + i * kFeatureCount;
        px[3] = image[i];
        px[4] = static_cast<double>(i % f.width) * sx;
        px[5] = static_cast<double>(i / f.width) * sy;
        px[6] = 1.0;
    }
    return f;
}

ProbMap forward(const PixelModel& model, const FeatureStack& features) {
    std::vector<double> p(features.pixels());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto x = features.pixel(i);
        double z = 0.0;
        for (int c = 0; c < kFeatureCount; ++c) z += model.weights[c] * x[c];
        p[i] = sigmoid(z);
    }
    return ProbMap(features.width, features.height, std::move(p));
}

LabelMask make_pseudo_label(const ProbMap& p_other, double threshold_value) { return threshold(p_other, threshold_value); }

void TrainConfig::validate() const {
    if (!(labeled_ratio > 0.0 && labeled_ratio <= 1.0)) throw ValidationError("labeled_ratio must lie in (0,1]");
    if (epochs < 1) throw ValidationError("epochs must be positive");
    if (batch_size < 1) throw ValidationError("batch_size must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ValidationError("learning_rate must be finite and nonnegative");
    }
    if (!(lambda_sup >= 0.0) || !(ramp.lambda_max >= 0.0)) throw ValidationError("lambda weights must be nonnegative");
    if (!(pseudo_threshold > 0.0 && pseudo_threshold < 1.0)) throw ValidationError("pseudo_threshold must lie in (0,1)");
    if (!(region_threshold > 0.0 && region_threshold < 1.0)) throw ValidationError("region_threshold must lie in (0,1)");
    if (min_area < 1) throw ValidationError("min_area must be >= 1");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ValidationError("val_fraction must lie in [0,1)");
    if (graph.k < 1) throw ValidationError("graph k must be >= 1");
    tgc.validate();
}

RampSchedule TrainConfig::resolved_ramp() const {
    RampSchedule r = ramp;
    if (r.ramp_epochs <= 0) r.ramp_epochs = std::max(1, static_cast<int>(std::ceil(0.4 * epochs)));
    return r;
}

SampleLoss sample_loss(const PixelModel& model, const FeatureStack& features, const LabelMask& reference,
                       double tgc_weight, const TrainConfig& cfg) {
    SampleLoss out;
    const ProbMap p = forward(model, features);
    std::vector<double> grad_p(p.size(), 0.0);
    out.dicece = dice_ce_loss_grad(p, reference, grad_p);

    const RegionSet pred_regions =
        connected_components(threshold(p, cfg.region_threshold), Connectivity::eight, cfg.min_area);
    const RegionSet ref_regions = connected_components(reference, Connectivity::eight, cfg.min_area);
    const RegionGraph gr = build_graph(centroids(ref_regions, p, CentroidMode::hard), cfg.graph);
    const RegionGraph gp = build_graph(centroids(pred_regions, p, CentroidMode::soft), cfg.graph);

    if (gp.size() >= 2) {
        const CentroidGrad g = tgc_grad_centroids(gp, gr, cfg.tgc);
        out.breakdown = g.loss;
        out.tgc = g.loss.total;
        out.tgc_gradient = true;
        if (tgc_weight > 0.0) {
            std::vector<Point> scaled(g.grad);
            for (auto& c : scaled) {
                c.x *= tgc_weight;
                c.y *= tgc_weight;
            }
            accumulate_soft_centroid_grad(pred_regions, p, scaled, grad_p);
        }
    } else {
        out.breakdown = tgc_loss(gp, gr, cfg.tgc);
        // Without prediction regions only the connectivity pressure remains.
        out.tgc = gp.empty() ? cfg.tgc.w_conn * out.breakdown.conn : out.breakdown.total;
    }

    const double loss = out.dicece + tgc_weight * out.tgc;
    if (!std::isfinite(loss)) {
        throw NumericalError("non-finite loss (dicece " + std::to_string(out.dicece) + ", tgc " +
                             std::to_string(out.tgc) + ")");
    }

    for (std::size_t i = 0; i < p.size(); ++i) {
        const double dz = grad_p[i] * p[i] * (1.0 - p[i]);
        if (dz == 0.0) continue;
        const auto x = features.pixel(i);
        for (int c = 0; c < kFeatureCount; ++c) out.grad[c] += dz * x[c];
    }
    return out;
}

namespace {

struct Job {
    const TrainingSample* sample;
    const LabelMask* reference;
    double weight;
};

// Evaluates jobs in parallel, reduces in job order.
std::vector<SampleLoss> run_jobs(const std::vector<Job>& jobs, const PixelModel& model, const TrainConfig& cfg) {
    std::vector<SampleLoss> out(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        try {
            out[i] = sample_loss(model, jobs[i].sample->features, *jobs[i].reference, jobs[i].weight, cfg);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " at sample id " + std::to_string(jobs[i].sample->id));
        }
    });
    return out;
}

}  // namespace

StepRecord step(std::span<const TrainingSample* const> labeled, std::span<const TrainingSample* const> unlabeled,
                std::array<PixelModel, 2>& models, const TrainConfig& cfg, int epoch) {
    if (labeled.empty() && unlabeled.empty()) throw ValidationError("step needs at least one sample");
    StepRecord rec;
    rec.lambda_unsup = rampup_weight(epoch, cfg.resolved_ramp());

    // Pseudo-labels from the pre-update weights: pseudo[m][i] is what model m
    // publishes for unlabeled sample i and what model 1-m trains on.
    std::array<std::vector<LabelMask>, 2> pseudo;
    for (int m = 0; m < 2; ++m) {
        pseudo[m].resize(unlabeled.size());
        parallel_for(unlabeled.size(), [&](std::size_t i) {
            pseudo[m][i] = make_pseudo_label(forward(models[m], unlabeled[i]->features), cfg.pseudo_threshold);
        });
    }

    std::array<PixelModel, 2> updated = models;
    for (int m = 0; m < 2; ++m) {
        const int other = 1 - m;
        std::vector<Job> jobs;
        for (const auto* s : labeled) jobs.push_back({s, &s->mask, cfg.lambda_sup});
        for (std::size_t i = 0; i < unlabeled.size(); ++i) jobs.push_back({unlabeled[i], &pseudo[other][i], rec.lambda_unsup});
        const std::vector<SampleLoss> results = run_jobs(jobs, models[m], cfg);

        ModelTerms& t = rec.models[m];
        std::array<double, kFeatureCount> grad{};
        const double inv_l = labeled.empty() ? 0.0 : 1.0 / static_cast<double>(labeled.size());
        const double inv_u = unlabeled.empty() ? 0.0 : 1.0 / static_cast<double>(unlabeled.size());
        for (std::size_t j = 0; j < results.size(); ++j) {
            const bool is_labeled = j < labeled.size();
            const double scale = is_labeled ? inv_l : inv_u;
            const SampleLoss& r = results[j];
            if (is_labeled) {
                t.lab_dicece += r.dicece * inv_l;
                t.lab_tgc += r.tgc * inv_l;
            } else {
                t.unlab_dicece += r.dicece * inv_u;
                t.unlab_tgc += r.tgc * inv_u;
                t.pseudo_foreground += jobs[j].reference->foreground_count();
            }
            for (int c = 0; c < kFeatureCount; ++c) grad[c] += scale * r.grad[c];
        }
        t.objective = total_objective({t.lab_dicece, t.lab_tgc, t.unlab_dicece, t.unlab_tgc}, cfg.lambda_sup,
                                      rec.lambda_unsup);
        for (int c = 0; c < kFeatureCount; ++c) updated[m].weights[c] -= cfg.learning_rate * grad[c];
    }
    models = updated;
    return rec;
}

DataSplit make_split(std::size_t n, double labeled_ratio, double val_fraction, std::uint64_t seed) {
    if (!(labeled_ratio > 0.0 && labeled_ratio <= 1.0)) throw ValidationError("labeled_ratio must lie in (0,1]");
    DataSplit split;
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_val;
    if (n_train == 0) throw ValidationError("no training samples after the validation split");

    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed, 0, RngTag::split);
    for (std::size_t i = n_train - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.next() % (i + 1));
        std::swap(order[i], order[j]);
    }
    const auto n_lab = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(labeled_ratio * static_cast<double>(n_train) - 1e-9)));
    split.labeled.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_lab));
    split.unlabeled.assign(order.begin() + static_cast<std::ptrdiff_t>(n_lab), order.end());
    for (std::size_t i = n_train; i < n; ++i) split.validation.push_back(static_cast<int>(i));
    return split;
}

std::vector<TrainingSample> load_training_samples(const Manifest& manifest) {
    std::vector<TrainingSample> out(manifest.samples.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& e = manifest.samples[i];
        const auto image_path = manifest.directory / e.image;
        const auto mask_path = manifest.directory / e.mask;
        if (!std::filesystem::exists(image_path)) throw IoError("manifest references missing file " + image_path.string());
        if (!std::filesystem::exists(mask_path)) throw IoError("manifest references missing file " + mask_path.string());
        out[i].id = e.index;
        out[i].features = featurize(load_map(image_path));
        out[i].mask = threshold(load_map(mask_path), 0.5);
        if (out[i].mask.width() != out[i].features.width || out[i].mask.height() != out[i].features.height) {
            throw ShapeError("image and mask sizes differ for sample " + std::to_string(e.index));
        }
    }
    return out;
}

PixelModel initial_model(std::uint64_t seed, int model_index) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(model_index), RngTag::model_init);
    PixelModel m;
    for (double& w : m.weights) w = 0.01 * rng.normal();
    return m;
}

Overlap evaluate(const PixelModel& model, const std::vector<TrainingSample>& samples, std::span<const int> indices) {
    if (indices.empty()) return {0.0, 0.0};
    std::vector<Overlap> per(indices.size());
    parallel_for(indices.size(), [&](std::size_t i) {
        const auto& s = samples.at(static_cast<std::size_t>(indices[i]));
        per[i] = dice_jaccard(threshold(forward(model, s.features), 0.5), s.mask);
    });
    Overlap mean;
    for (const auto& o : per) {
        mean.dice += o.dice;
        mean.jaccard += o.jaccard;
    }
    mean.dice /= static_cast<double>(per.size());
    mean.jaccard /= static_cast<double>(per.size());
    return mean;
}

namespace {

std::vector<const TrainingSample*> shuffled(const std::vector<TrainingSample>& samples, const std::vector<int>& ids,
                                            Rng rng) {
    std::vector<const TrainingSample*> out;
    out.reserve(ids.size());
    for (const int i : ids) out.push_back(&samples[static_cast<std::size_t>(i)]);
    for (std::size_t i = out.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next() % i);
        std::swap(out[i - 1], out[j]);
    }
    return out;
}

// Batch b of a cyclic traversal of `order`.
std::vector<const TrainingSample*> cyclic_batch(const std::vector<const TrainingSample*>& order, std::size_t b,
                                                std::size_t batch_size) {
    std::vector<const TrainingSample*> out;
    if (order.empty()) return out;
    const std::size_t take = std::min(batch_size, order.size());
    for (std::size_t t = 0; t < take; ++t) out.push_back(order[(b * batch_size + t) % order.size()]);
    return out;
}

}  // namespace

TrainResult train(const std::vector<TrainingSample>& samples, const TrainConfig& cfg) {
    cfg.validate();
    if (samples.empty()) throw ValidationError("training set is empty");
    TrainResult result;
    result.split = make_split(samples.size(), cfg.labeled_ratio, cfg.val_fraction, cfg.seed);
    const DataSplit& split = result.split;
    // Without a held-out split, model selection falls back to the labeled set.
    const std::vector<int>& val_ids = split.validation.empty() ? split.labeled : split.validation;

    std::array<PixelModel, 2> models = {initial_model(cfg.seed, 0), initial_model(cfg.seed, 1)};
    result.initial = models;
    result.best = models;
    for (int m = 0; m < 2; ++m) {
        result.history.initial_validation[m] = evaluate(models[m], samples, val_ids);
        result.best_val_dice[m] = result.history.initial_validation[m].dice;
    }

    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t lab_batches = (split.labeled.size() + bs - 1) / bs;
    const std::size_t unlab_batches = (split.unlabeled.size() + bs - 1) / bs;
    const std::size_t steps = std::max(lab_batches, unlab_batches);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto e = static_cast<std::uint64_t>(epoch);
        const auto lab_order = shuffled(samples, split.labeled, make_rng(cfg.seed, 2 * e, RngTag::epoch_order));
        const auto unlab_order = shuffled(samples, split.unlabeled, make_rng(cfg.seed, 2 * e + 1, RngTag::epoch_order));

        EpochRecord rec;
        rec.epoch = epoch;
        for (std::size_t s = 0; s < steps; ++s) {
            const auto lab = cyclic_batch(lab_order, s, bs);
            const auto unlab = s < unlab_batches ? cyclic_batch(unlab_order, s, bs) : std::vector<const TrainingSample*>{};
            const StepRecord sr = step(lab, unlab, models, cfg, epoch);
            rec.lambda_unsup = sr.lambda_unsup;
            for (int m = 0; m < 2; ++m) {
                rec.terms[m].lab_dicece += sr.models[m].lab_dicece / steps;
                rec.terms[m].lab_tgc += sr.models[m].lab_tgc / steps;
                rec.terms[m].unlab_dicece += sr.models[m].unlab_dicece / steps;
                rec.terms[m].unlab_tgc += sr.models[m].unlab_tgc / steps;
                rec.terms[m].objective += sr.models[m].objective / steps;
                rec.terms[m].pseudo_foreground += sr.models[m].pseudo_foreground;
            }
        }
        for (int m = 0; m < 2; ++m) {
            rec.validation[m] = evaluate(models[m], samples, val_ids);
            if (rec.validation[m].dice > result.best_val_dice[m]) {
                result.best_val_dice[m] = rec.validation[m].dice;
                result.best[m] = models[m];
                result.best_epoch[m] = epoch;
            }
        }
        result.history.epochs.push_back(rec);
    }
    return result;
}

TrainResult train(const std::filesystem::path& manifest_path, const TrainConfig& cfg) {
    return train(load_training_samples(load_manifest(manifest_path)), cfg);
}

nlohmann::json model_to_json(const PixelModel& m) {
    return {{"weights", std::vector<double>(m.weights.begin(), m.weights.end())},
            {"feature_spec_version", kFeatureSpecVersion}};
}

PixelModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("feature_spec_version").get<int>() != kFeatureSpecVersion) {
            throw ValidationError("unsupported feature_spec_version");
        }
        const auto w = j.at("weights").get<std::vector<double>>();
        if (w.size() != kFeatureCount) throw ValidationError("checkpoint must hold 7 weights");
        PixelModel m;
        for (int c = 0; c < kFeatureCount; ++c) {
            if (!std::isfinite(w[c])) throw ValidationError("checkpoint weight is not finite");
            m.weights[c] = w[c];
        }
        return m;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("malformed checkpoint: ") + ex.what());
    }
}

void save_model(const std::filesystem::path& path, const PixelModel& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << model_to_json(m).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

PixelModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(path.string() + ": " + ex.what());
    }
    return model_from_json(j);
}

std::string history_csv(const TrainHistory& h) {
    std::string out = "epoch,lambda_unsup";
    for (int m = 1; m <= 2; ++m) {
        for (const char* col : {"lab_dicece", "lab_tgc", "unlab_dicece", "unlab_tgc", "objective", "val_dice",
                                "val_jaccard"}) {
            out += ",m" + std::to_string(m) + "_" + col;
        }
    }
    out += '\n';
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.12g", v);
        out += buf;
    };
    for (const auto& r : h.epochs) {
        out += std::to_string(r.epoch);
        num(r.lambda_unsup);
        for (int m = 0; m < 2; ++m) {
            const auto& t = r.terms[m];
            num(t.lab_dicece);
            num(t.lab_tgc);
            num(t.unlab_dicece);
            num(t.unlab_tgc);
            num(t.objective);
            num(r.validation[m].dice);
            num(r.validation[m].jaccard);
        }
        out += '\n';
    }
    return out;
}

}  // namespace tgc
