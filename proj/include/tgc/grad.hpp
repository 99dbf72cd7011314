#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "tgc/graph.hpp"
#include "tgc/losses.hpp"
#include "tgc/maskio.hpp"

namespace tgc {

struct CentroidGrad {
    std::vector<Point> grad;  // dL/dc per prediction node
    LossBreakdown loss;
    /// Set when eigenvalues closer than kEigenDegeneracy carry loss gradient; those
    /// clusters use the subspace-averaged derivative.
    bool degenerate_spectrum = false;
};

inline constexpr double kEigenDegeneracy = 1e-8;

/// Piecewise-smooth choices held fixed while differentiating the prediction graph.
struct FrozenConventions {
    EdgeMask support;
    std::vector<int> degree_order;
    double sigma = 1.0;
    int k = 0;
};

FrozenConventions freeze_conventions(const RegionGraph& gp);

/// TGC loss of the prediction centroids under frozen kNN support, bandwidth and degree order.
LossBreakdown frozen_tgc_loss(std::span<const Point> centroids, const FrozenConventions& frozen,
                              const RegionGraph& gr, const Spectrum& sr, const TgcWeights& w);

/// Gradient of tgc_loss(gp, gr) with respect to the prediction centroids, reference fixed.
/// Needs gp.size() >= 2.
CentroidGrad tgc_grad_centroids(const RegionGraph& gp, const RegionGraph& gr, const TgcWeights& w);

struct GradCheckEntry {
    std::size_t coordinate = 0;  // 2*node + (0 for x, 1 for y)
    double analytic = 0.0;
    double fd = 0.0;
    double rel_err = 0.0;
    bool finite = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    double h = 0.0;
};

/// |a - f| / max(1e-8, |a|, |f|).
double relative_error(double analytic, double fd);

using CentroidLossFn = std::function<double(std::span<const Point>)>;

/// Central differences of loss_fn at centroids, compared against analytic.
/// Coordinates whose perturbed loss is non-finite are reported and left out of the max.
GradCheckReport fd_check(const CentroidLossFn& loss_fn, std::span<const Point> centroids,
                         std::span<const Point> analytic, double h = 1e-5);

/// d(soft centroid)/d p_q = (q - c) / mass for each pixel q of the region, in region order.
std::vector<Point> soft_centroid_grad(const Region& region, const ProbMap& p);

/// Adds sum_i dL/dc_i * dc_i/dp into grad_p (one entry per pixel of p).
void accumulate_soft_centroid_grad(const RegionSet& regions, const ProbMap& p, std::span<const Point> dl_dc,
                                   std::span<double> grad_p);

struct GradCheckOptions {
    std::uint64_t seed = 0;
    int n_instances = 30;
    double h = 1e-5;
    int min_nodes = 3;
    int max_nodes = 12;
    double extent = 64.0;
    int k = 5;
    double min_eigen_gap = 1e-3;
    int max_regenerations = 10000;
    TgcWeights weights;
};

struct GradCheckInstance {
    int index = 0;
    int n_pred = 0;
    int n_ref = 0;
    double sigma = 0.0;
    double loss = 0.0;
    GradCheckReport report;
};

struct GradCheckSuite {
    std::vector<GradCheckInstance> instances;
    int regenerations = 0;
    double max_rel_err = 0.0;
    double h = 0.0;
    /// Steps below kRoundoffStep are dominated by floating-point cancellation;
    /// their errors are reported but not gated.
    bool roundoff_regime = false;
};

inline constexpr double kRoundoffStep = 1e-8;
inline constexpr double kGradCheckTolerance = 1e-4;

/// Random prediction/reference centroid layouts with a shared explicit bandwidth.
/// Layouts whose prediction spectrum has a gap below min_eigen_gap, or whose kNN
/// support changes under +-h on any coordinate, are redrawn and counted.
GradCheckSuite run_gradcheck(const GradCheckOptions& options);

nlohmann::json gradcheck_to_json(const GradCheckSuite& suite);
/// coordinate,analytic,fd,rel_err rows for one report.
std::string gradcheck_csv(const GradCheckReport& report);

}  // namespace tgc
