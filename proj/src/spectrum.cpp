#include "tgc/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tgc/error.hpp"

namespace tgc {

namespace {

double off_diagonal_norm(const Eigen::MatrixXd& a) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            if (i != j) s += a(i, j) * a(i, j);
        }
    }
    return std::sqrt(s);
}

// One Jacobi rotation zeroing a(p,q); updates rows/columns p and q only.
void rotate(Eigen::MatrixXd& a, Eigen::MatrixXd& v, Eigen::Index p, Eigen::Index q) {
    const double apq = a(p, q);
    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
    double t;
    if (std::abs(theta) > 1e150) {
        t = 0.5 / theta;
    } else {
        t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    }
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;
    const Eigen::Index n = a.rows();

    for (Eigen::Index k = 0; k < n; ++k) {
        if (k == p || k == q) continue;
        const double akp = a(k, p);
        const double akq = a(k, q);
        const double np = c * akp - s * akq;
        const double nq = s * akp + c * akq;
        a(k, p) = np;
        a(p, k) = np;
        a(k, q) = nq;
        a(q, k) = nq;
    }
    a(p, p) -= t * apq;
    a(q, q) += t * apq;
    a(p, q) = 0.0;
    a(q, p) = 0.0;

    for (Eigen::Index k = 0; k < n; ++k) {
        const double vkp = v(k, p);
        const double vkq = v(k, q);
        v(k, p) = c * vkp - s * vkq;
        v(k, q) = s * vkp + c * vkq;
    }
}

}  // namespace

Spectrum eig_sym(const Eigen::MatrixXd& input, const JacobiOptions& options) {
    if (input.rows() != input.cols()) throw ShapeError("eig_sym: matrix is not square");
    const Eigen::Index n = input.rows();
    if (n > 0) {
        const double asym = (input - input.transpose()).cwiseAbs().rowwise().sum().maxCoeff();
        if (!(asym <= 1e-10)) {
            throw ValidationError("eig_sym: matrix is not symmetric (||A - A^T||_inf = " + std::to_string(asym) + ")");
        }
    }

    // Work on the exactly symmetrized copy.
    Eigen::MatrixXd a = 0.5 * (input + input.transpose());
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    const double stop = options.tolerance * std::max(1.0, a.norm());

    int sweep = 0;
    double off = off_diagonal_norm(a);
    while (off > stop) {
        if (sweep == options.max_sweeps) {
            throw NumericalError("eig_sym: no convergence after " + std::to_string(sweep) +
                                 " sweeps (off-diagonal norm " + std::to_string(off) + ")");
        }
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) != 0.0) rotate(a, v, p, q);
            }
        }
        ++sweep;
        off = off_diagonal_norm(a);
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

    Spectrum out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const Eigen::Index src = order[static_cast<std::size_t>(c)];
        out.eigenvalues[c] = a(src, src);
        Eigen::VectorXd col = v.col(src);
        Eigen::Index arg = 0;
        for (Eigen::Index r = 1; r < n; ++r) {
            if (std::abs(col[r]) > std::abs(col[arg])) arg = r;
        }
        if (col[arg] < 0.0) col = -col;
        out.eigenvectors.col(c) = col;
    }
    return out;
}

Spectrum graph_spectrum(const RegionGraph& g) {
    if (g.size() == 1) {
        Spectrum s;
        s.eigenvalues = Eigen::VectorXd::Zero(1);
        s.eigenvectors = Eigen::MatrixXd::Identity(1, 1);
        return s;
    }
    return eig_sym(g.laplacian);
}

int hard_component_count(const Eigen::MatrixXd& adjacency, double w_eps) {
    const Eigen::Index n = adjacency.rows();
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](Eigen::Index x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    int components = static_cast<int>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (!(adjacency(i, j) > w_eps)) continue;
            const Eigen::Index ri = find(i);
            const Eigen::Index rj = find(j);
            if (ri != rj) {
                parent[std::max(ri, rj)] = std::min(ri, rj);
                --components;
            }
        }
    }
    return components;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double soft_component_count(std::span<const double> eigenvalues, double tau, double alpha) {
    if (!(alpha > 0.0)) throw ValidationError("soft_component_count: alpha must be positive");
    double k = 0.0;
    for (const double lambda : eigenvalues) k += sigmoid((tau - lambda) * alpha);
    return k;
}

double soft_component_count(const Spectrum& s, double tau, double alpha) {
    return soft_component_count(std::span<const double>(s.eigenvalues.data(), s.size()), tau, alpha);
}

nlohmann::json spectrum_to_json(const Spectrum& s, bool with_eigenvectors) {
    nlohmann::json j;
    j["n"] = s.size();
    j["eigenvalues"] = std::vector<double>(s.eigenvalues.data(), s.eigenvalues.data() + s.size());
    if (with_eigenvectors) {
        auto rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < s.eigenvectors.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(s.eigenvectors.cols()));
            for (Eigen::Index c = 0; c < s.eigenvectors.cols(); ++c) row[c] = s.eigenvectors(r, c);
            rows.push_back(row);
        }
        j["eigenvectors"] = rows;
    }
    return j;
}

}  // namespace tgc
