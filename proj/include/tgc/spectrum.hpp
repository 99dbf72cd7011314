#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <span>

#include "tgc/graph.hpp"

namespace tgc {

/// Ascending eigenvalues; eigenvectors.col(i) pairs with eigenvalues[i].
struct Spectrum {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;

    std::size_t size() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
};

struct JacobiOptions {
    int max_sweeps = 100;
    /// Stop once the off-diagonal Frobenius norm falls below tolerance * max(1, ||A||_F).
    double tolerance = 1e-12;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Output is deterministic: rotations run in fixed (p, q) order, eigenpairs are
/// sorted ascending (stable on ties), and each eigenvector is signed so that its
/// largest-magnitude entry is positive (lowest index wins a tie).
/// Throws ValidationError if ||A - A^T||_inf > 1e-10 and NumericalError when the
/// sweep cap is hit.
Spectrum eig_sym(const Eigen::MatrixXd& a, const JacobiOptions& options = {});

/// Spectrum of a graph's Laplacian; a single-node graph is defined to have spectrum [0].
Spectrum graph_spectrum(const RegionGraph& g);

/// Components of the graph with edges {A_ij > w_eps}; union-find.
int hard_component_count(const Eigen::MatrixXd& adjacency, double w_eps);

/// Sum over all eigenvalues of sigmoid((tau - lambda) * alpha). Empty spectrum gives 0.
double soft_component_count(std::span<const double> eigenvalues, double tau, double alpha);
double soft_component_count(const Spectrum& s, double tau, double alpha);

double sigmoid(double z);

/// {"eigenvalues": [...], "n": n} plus "eigenvectors" (row-major rows) when requested.
nlohmann::json spectrum_to_json(const Spectrum& s, bool with_eigenvectors = false);

}  // namespace tgc
