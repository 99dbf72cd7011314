#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tgc/maskio.hpp"

namespace tgc {

using EdgeMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kAffinityUnderflow = 1e-300;

struct GraphParams {
    int k = 5;
    /// Affinity bandwidth in pixels; nullopt resolves to estimate_sigma() at build time.
    std::optional<double> sigma;
};

/// kNN Gaussian-affinity graph over region centroids.
///
/// adjacency is symmetric with a zero diagonal, degree = adjacency * 1 and
/// laplacian = I - D^{-1/2} A D^{-1/2}. A zero-degree node gets a zero row in
/// D^{-1/2} and a unit diagonal entry in the Laplacian. support marks the
/// (symmetrized) kNN edge set the weights were evaluated on.
struct RegionGraph {
    std::vector<Point> centroids;
    Eigen::MatrixXd adjacency;
    Eigen::VectorXd degree;
    Eigen::MatrixXd laplacian;
    EdgeMask support;
    int k = 0;  // effective k after clamping to n-1
    double sigma = 1.0;

    std::size_t size() const noexcept { return centroids.size(); }
    bool empty() const noexcept { return centroids.empty(); }
};

/// Median pairwise Euclidean distance; 1.0 when the median is 0.
double estimate_sigma(std::span<const Point> centroids);

/// Gaussian affinity exp(-d^2 / (2 sigma^2)), flushed to 0 below kAffinityUnderflow.
double affinity(const Point& a, const Point& b, double sigma);

/// Symmetrized kNN edge set: i~j iff j is among the k nearest of i or vice versa.
/// Distance ties go to the lower node id.
EdgeMask knn_support(std::span<const Point> centroids, int k);

RegionGraph build_graph(std::span<const Point> centroids, const GraphParams& params);

/// Builds with a fixed edge set and bandwidth (no neighbor search).
RegionGraph build_graph_on_support(std::span<const Point> centroids, double sigma, const EdgeMask& support, int k);

/// Mean of all off-diagonal adjacency entries; 0 for n <= 1.
double mean_adjacency(const RegionGraph& g);

/// Centroid CSV: header "x,y", one centroid per line, 6 decimals.
void write_centroids_csv(const std::filesystem::path& path, std::span<const Point> centroids);
std::vector<Point> read_centroids_csv(const std::filesystem::path& path);

}  // namespace tgc
