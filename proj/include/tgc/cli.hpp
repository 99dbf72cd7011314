#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

namespace tgc::cli {

/// exit_code: 0 ok, 1 validation, 2 I/O, 3 numerical. payload goes to stdout,
/// diagnostics to stderr.
struct CommandResult {
    int exit_code = 0;
    nlohmann::json payload;
    std::string diagnostics;
};

struct MetricsOptions {
    std::filesystem::path pred;
    std::filesystem::path ref;
    int k = 5;
    std::string sigma = "auto";
    double tau = 0.05;
    double alpha = 200.0;
    double threshold = 0.5;
    int min_area = 8;
};

struct GradcheckOptions {
    std::uint64_t seed = 0;
    int n_instances = 30;
    double h = 1e-5;
    std::optional<std::filesystem::path> csv;  // per-coordinate table of the worst instance
};

struct OptimizeOptions {
    std::filesystem::path ref;
    std::filesystem::path init;
    int steps = 500;
    double lr = 0.5;
    std::optional<std::filesystem::path> out;
    int k = 5;
    double tau = 0.05;
    double alpha = 200.0;
    double threshold = 0.5;
    int min_area = 8;
};

struct SynthOptions {
    std::filesystem::path out;
    int n = 200;
    std::uint64_t seed = 0;
    int size = 64;
    std::string blobs = "2:5";
};

struct TrainOptions {
    std::filesystem::path data;
    double labeled_ratio = 0.1;
    int epochs = 30;
    std::uint64_t seed = 0;
    bool no_tgc = false;
    std::filesystem::path out;
    double lr = 2.0;
    int batch_size = 8;
};

struct EvalOptions {
    std::filesystem::path model;
    std::filesystem::path data;
    std::string split = "val";
};

CommandResult cmd_metrics(const MetricsOptions& o);
CommandResult cmd_gradcheck(const GradcheckOptions& o);
CommandResult cmd_optimize(const OptimizeOptions& o);
CommandResult cmd_synth(const SynthOptions& o);
CommandResult cmd_train(const TrainOptions& o);
CommandResult cmd_eval(const EvalOptions& o);

}  // namespace tgc::cli
