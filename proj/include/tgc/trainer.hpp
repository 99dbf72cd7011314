#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "tgc/graph.hpp"
#include "tgc/losses.hpp"
#include "tgc/maskio.hpp"
#include "tgc/synth.hpp"

namespace tgc {

inline constexpr int kFeatureCount = 7;
inline constexpr int kFeatureSpecVersion = 1;
inline constexpr std::array<int, 3> kBlurHalfWidths = {1, 3, 7};

/// Per-pixel features, pixel-major: blur(1), blur(3), blur(7), raw, x/(W-1), y/(H-1), 1.
struct FeatureStack {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    std::size_t pixels() const noexcept { return static_cast<std::size_t>(width) * height; }
    std::span<const double, kFeatureCount> pixel(std::size_t i) const {
        return std::span<const double, kFeatureCount>(data.data() + i * kFeatureCount, kFeatureCount);
    }
};

/// Box mean over the in-bounds part of a (2r+1)^2 window.
std::vector<double> box_blur(const ProbMap& image, int half_width);

FeatureStack featurize(const ProbMap& image);

struct PixelModel {
    std::array<double, kFeatureCount> weights{};

    friend bool operator==(const PixelModel&, const PixelModel&) = default;
};

ProbMap forward(const PixelModel& model, const FeatureStack& features);

/// label = 1 iff p_other > threshold. The result is a constant: nothing flows back to its producer.
LabelMask make_pseudo_label(const ProbMap& p_other, double threshold = 0.5);

struct TrainConfig {
    double labeled_ratio = 0.1;
    int epochs = 30;
    int batch_size = 8;
    double learning_rate = 2.0;
    double lambda_sup = 0.1;
    /// ramp_epochs <= 0 resolves to ceil(0.4 * epochs).
    RampSchedule ramp{0.1, 0};
    TgcWeights tgc;
    GraphParams graph;
    std::uint64_t seed = 0;
    double pseudo_threshold = 0.5;
    double region_threshold = 0.5;
    std::size_t min_area = 8;
    double val_fraction = 0.2;

    void validate() const;
    RampSchedule resolved_ramp() const;
};

/// Regions, graphs and TGC value of one prediction against one reference mask.
struct SampleLoss {
    double dicece = 0.0;
    double tgc = 0.0;
    LossBreakdown breakdown;
    bool tgc_gradient = false;  // false when the prediction has < 2 regions
    std::array<double, kFeatureCount> grad{};
};

/// Loss dicece + tgc_weight * tgc for one sample and its gradient in model weights.
/// The TGC path runs prediction -> soft centroids -> graph with region membership,
/// kNN support and bandwidth frozen. An empty prediction keeps only the connectivity term.
SampleLoss sample_loss(const PixelModel& model, const FeatureStack& features, const LabelMask& reference,
                       double tgc_weight, const TrainConfig& cfg);

struct ModelTerms {
    double lab_dicece = 0.0;
    double lab_tgc = 0.0;
    double unlab_dicece = 0.0;
    double unlab_tgc = 0.0;
    double objective = 0.0;
    std::size_t pseudo_foreground = 0;  // foreground pixels in the pseudo-labels this model trained on
};

struct StepRecord {
    std::array<ModelTerms, 2> models;
    double lambda_unsup = 0.0;
};

struct TrainingSample {
    int id = 0;
    FeatureStack features;
    LabelMask mask;
};

/// One update of both models. Pseudo-labels for model m come from model 1-m's
/// prediction before the update. An empty unlabeled batch gives a supervised step.
StepRecord step(std::span<const TrainingSample* const> labeled, std::span<const TrainingSample* const> unlabeled,
                std::array<PixelModel, 2>& models, const TrainConfig& cfg, int epoch);

struct EpochRecord {
    int epoch = 0;
    double lambda_unsup = 0.0;
    std::array<ModelTerms, 2> terms;  // means over the epoch's steps
    std::array<Overlap, 2> validation;
};

struct TrainHistory {
    std::array<Overlap, 2> initial_validation;
    std::vector<EpochRecord> epochs;
};

struct DataSplit {
    std::vector<int> labeled;
    std::vector<int> unlabeled;
    std::vector<int> validation;
};

/// Validation = last floor(val_fraction * n) samples. The rest are shuffled with the
/// seed and the first ceil(labeled_ratio * n_train) become labeled.
DataSplit make_split(std::size_t n, double labeled_ratio, double val_fraction, std::uint64_t seed);

std::vector<TrainingSample> load_training_samples(const Manifest& manifest);

struct TrainResult {
    std::array<PixelModel, 2> best;
    std::array<PixelModel, 2> initial;
    std::array<int, 2> best_epoch{-1, -1};  // -1 = initial weights
    std::array<double, 2> best_val_dice{};
    TrainHistory history;
    DataSplit split;
};

PixelModel initial_model(std::uint64_t seed, int model_index);

TrainResult train(const std::vector<TrainingSample>& samples, const TrainConfig& cfg);
TrainResult train(const std::filesystem::path& manifest_path, const TrainConfig& cfg);

/// Mean per-sample Dice / Jaccard of the thresholded (0.5) prediction.
Overlap evaluate(const PixelModel& model, const std::vector<TrainingSample>& samples, std::span<const int> indices);

nlohmann::json model_to_json(const PixelModel& m);
PixelModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const PixelModel& m);
PixelModel load_model(const std::filesystem::path& path);

std::string history_csv(const TrainHistory& h);

}  // namespace tgc
