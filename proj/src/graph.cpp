#include "tgc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "tgc/error.hpp"

namespace tgc {

namespace {

double squared_distance(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

}  // namespace

double estimate_sigma(std::span<const Point> centroids) {
    const std::size_t n = centroids.size();
    if (n < 2) throw DegenerateError("estimate_sigma needs at least 2 centroids");
    std::vector<double> dist;
    dist.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) dist.push_back(std::sqrt(squared_distance(centroids[i], centroids[j])));
    }
    std::sort(dist.begin(), dist.end());
    const std::size_t m = dist.size();
    const double median = m % 2 == 1 ? dist[m / 2] : 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
    return median > 0.0 ? median : 1.0;
}

double affinity(const Point& a, const Point& b, double sigma) {
    const double w = std::exp(-squared_distance(a, b) / (2.0 * sigma * sigma));
    return w < kAffinityUnderflow ? 0.0 : w;
}

EdgeMask knn_support(std::span<const Point> centroids, int k) {
    const auto n = static_cast<Eigen::Index>(centroids.size());
    EdgeMask support = EdgeMask::Constant(n, n, false);
    const int kk = std::min<int>(k, static_cast<int>(n) - 1);
    if (kk <= 0) return support;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::vector<double> d(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) d[j] = squared_distance(centroids[i], centroids[j]);
        order.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) order.push_back(j);
        }
        std::partial_sort(order.begin(), order.begin() + kk, order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return d[a] < d[b] || (d[a] == d[b] && a < b);
        });
        for (int t = 0; t < kk; ++t) {
            support(i, order[t]) = true;
            support(order[t], i) = true;
        }
    }
    return support;
}

RegionGraph build_graph_on_support(std::span<const Point> centroids, double sigma, const EdgeMask& support, int k) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be positive and finite");
    const auto n = static_cast<Eigen::Index>(centroids.size());
    if (support.rows() != n || support.cols() != n) throw ShapeError("edge support does not match centroid count");

    RegionGraph g;
    g.centroids.assign(centroids.begin(), centroids.end());
    g.sigma = sigma;
    g.k = k;
    g.support = support;
    g.adjacency = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (!support(i, j)) continue;
            // max(w_ij, w_ji) collapses to the shared Gaussian weight: both directions
            // evaluate the same symmetric distance.
            const double w = affinity(centroids[i], centroids[j], sigma);
            g.adjacency(i, j) = w;
            g.adjacency(j, i) = w;
        }
    }
    g.degree = g.adjacency.rowwise().sum();

    Eigen::VectorXd inv_sqrt(n);
    for (Eigen::Index i = 0; i < n; ++i) inv_sqrt[i] = g.degree[i] > 0.0 ? 1.0 / std::sqrt(g.degree[i]) : 0.0;
    g.laplacian = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) g.laplacian(i, j) = -inv_sqrt[i] * g.adjacency(i, j) * inv_sqrt[j];
        }
    }
    return g;
}

RegionGraph build_graph(std::span<const Point> centroids, const GraphParams& params) {
    if (params.k < 1) throw ValidationError("graph k must be >= 1");
    if (params.sigma && !(*params.sigma > 0.0)) throw ValidationError("graph sigma must be positive");
    const std::size_t n = centroids.size();
    // Auto bandwidth needs two points; smaller graphs have no edges so the value is inert.
    const double sigma = params.sigma ? *params.sigma : (n >= 2 ? estimate_sigma(centroids) : 1.0);
    const int effective_k = n == 0 ? 0 : std::min<int>(params.k, static_cast<int>(n) - 1);
    return build_graph_on_support(centroids, sigma, knn_support(centroids, params.k), effective_k);
}

double mean_adjacency(const RegionGraph& g) {
    const auto n = static_cast<double>(g.size());
    if (g.size() <= 1) return 0.0;
    return g.adjacency.sum() / (n * (n - 1.0));
}

void write_centroids_csv(const std::filesystem::path& path, std::span<const Point> centroids) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "x,y\n";
    char buf[96];
    for (const auto& c : centroids) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", c.x, c.y);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Point> read_centroids_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("x,y", 0) != 0) {
        throw FormatError(path.string() + ": missing 'x,y' header (line 1)");
    }
    std::vector<Point> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::istringstream row(line);
        Point p;
        char comma = 0;
        if (!(row >> p.x >> comma >> p.y) || comma != ',') {
            throw FormatError(path.string() + ": bad centroid row (line " + std::to_string(line_no) + ")");
        }
        out.push_back(p);
    }
    return out;
}

}  // namespace tgc
