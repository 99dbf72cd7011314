#include "tgc/grad.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tgc/error.hpp"
#include "tgc/rng.hpp"
#include "tgc/spectrum.hpp"

namespace tgc {

FrozenConventions freeze_conventions(const RegionGraph& gp) {
    return {gp.support, degree_sort_order(gp), gp.sigma, gp.k};
}

LossBreakdown frozen_tgc_loss(std::span<const Point> centroids, const FrozenConventions& frozen,
                              const RegionGraph& gr, const Spectrum& sr, const TgcWeights& w) {
    const RegionGraph gp = build_graph_on_support(centroids, frozen.sigma, frozen.support, frozen.k);
    return tgc_loss(gp, graph_spectrum(gp), gr, sr, w, std::span<const int>(frozen.degree_order));
}

namespace {

// dL/dlambda_i for the spectral and connectivity terms.
Eigen::VectorXd eigenvalue_weights(const Spectrum& sp, const Spectrum& sr, const TgcWeights& w) {
    const auto n = static_cast<Eigen::Index>(sp.size());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);

    const std::size_t m = std::min(sp.size(), sr.size());
    if (m >= 2) {
        const double scale = 2.0 * w.w_spec / static_cast<double>(m - 1);
        for (std::size_t i = 1; i < m; ++i) g[i] += scale * (sp.eigenvalues[i] - sr.eigenvalues[i]);
    }

    const double k_diff = soft_component_count(sp, w.tau, w.alpha) - soft_component_count(sr, w.tau, w.alpha);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = sigmoid((w.tau - sp.eigenvalues[i]) * w.alpha);
        g[i] += w.w_conn * 2.0 * k_diff * (-w.alpha * s * (1.0 - s));
    }
    return g;
}

// Replaces the weight of each eigenvalue in a near-degenerate cluster with the
// cluster mean. Sum_i g_i dlambda_i then equals (sum g) * mean_j(v_j^T dL v_j),
// which only depends on the cluster's invariant subspace.
bool average_degenerate_clusters(const Spectrum& sp, Eigen::VectorXd& g) {
    bool touched = false;
    const auto n = static_cast<Eigen::Index>(sp.size());
    Eigen::Index start = 0;
    while (start < n) {
        Eigen::Index end = start + 1;
        while (end < n && sp.eigenvalues[end] - sp.eigenvalues[end - 1] < kEigenDegeneracy) ++end;
        if (end - start > 1) {
            const double mean = g.segment(start, end - start).mean();
            if (g.segment(start, end - start).cwiseAbs().maxCoeff() > 0.0) touched = true;
            g.segment(start, end - start).setConstant(mean);
        }
        start = end;
    }
    return touched;
}

}  // namespace

CentroidGrad tgc_grad_centroids(const RegionGraph& gp, const RegionGraph& gr, const TgcWeights& w) {
    w.validate();
    const auto n = static_cast<Eigen::Index>(gp.size());
    if (n < 2) throw DegenerateError("tgc_grad_centroids needs at least 2 prediction nodes");

    const Spectrum sp = graph_spectrum(gp);
    const Spectrum sr = graph_spectrum(gr);
    const std::vector<int> order = degree_sort_order(gp);

    CentroidGrad out;
    out.loss = tgc_loss(gp, sp, gr, sr, w, std::span<const int>(order));
    out.grad.assign(gp.size(), Point{});

    Eigen::VectorXd g_lambda = eigenvalue_weights(sp, sr, w);
    out.degenerate_spectrum = average_degenerate_clusters(sp, g_lambda);

    // dL/dd_k for the sorted-degree term, permutation held fixed.
    Eigen::VectorXd g_degree = Eigen::VectorXd::Zero(n);
    const std::size_t m = std::min(gp.size(), gr.size());
    if (m > 0) {
        std::vector<double> dr(gr.degree.data(), gr.degree.data() + gr.size());
        std::sort(dr.begin(), dr.end());
        for (std::size_t r = 0; r < m; ++r) {
            const int node = order[r];
            g_degree[node] += w.w_adj * 2.0 * (gp.degree[node] - dr[r]) / static_cast<double>(m);
        }
    }
    // Mean adjacency counts each undirected edge twice over n(n-1) slots.
    const double nn = static_cast<double>(n);
    const double g_mean_edge =
        w.w_adj * 2.0 * (mean_adjacency(gp) - mean_adjacency(gr)) * 2.0 / (nn * (nn - 1.0));

    const Eigen::MatrixXd& v = sp.eigenvectors;
    const Eigen::VectorXd& lambda = sp.eigenvalues;
    const double inv_sigma2 = 1.0 / (gp.sigma * gp.sigma);

    for (Eigen::Index p = 0; p < n; ++p) {
        for (Eigen::Index q = p + 1; q < n; ++q) {
            const double a = gp.adjacency(p, q);
            if (a == 0.0) continue;
            const double dp = gp.degree[p];
            const double dq = gp.degree[q];
            const double sqrt_dpdq = std::sqrt(dp * dq);

            // dlambda_j / da_pq = -(2 v_p v_q / sqrt(d_p d_q) - mu_j (v_p^2/d_p + v_q^2/d_q)), mu_j = 1 - lambda_j
            double g_edge = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (g_lambda[j] == 0.0) continue;
                const double vp = v(p, j);
                const double vq = v(q, j);
                const double mu = 1.0 - lambda[j];
                const double dlambda = -(2.0 * vp * vq / sqrt_dpdq - mu * (vp * vp / dp + vq * vq / dq));
                g_edge += g_lambda[j] * dlambda;
            }
            g_edge += g_degree[p] + g_degree[q] + g_mean_edge;

            // da_pq/dc_p = a (c_q - c_p) / sigma^2
            const double fx = g_edge * a * (gp.centroids[q].x - gp.centroids[p].x) * inv_sigma2;
            const double fy = g_edge * a * (gp.centroids[q].y - gp.centroids[p].y) * inv_sigma2;
            out.grad[p].x += fx;
            out.grad[p].y += fy;
            out.grad[q].x -= fx;
            out.grad[q].y -= fy;
        }
    }
    return out;
}

double relative_error(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max({1e-8, std::abs(analytic), std::abs(fd)});
}

GradCheckReport fd_check(const CentroidLossFn& loss_fn, std::span<const Point> centroids,
                         std::span<const Point> analytic, double h) {
    if (!(h > 0.0)) throw ValidationError("fd_check: step h must be positive");
    if (analytic.size() != centroids.size()) throw ShapeError("fd_check: analytic gradient length mismatch");

    GradCheckReport report;
    report.h = h;
    std::vector<Point> x(centroids.begin(), centroids.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (int axis = 0; axis < 2; ++axis) {
            double& coord = axis == 0 ? x[i].x : x[i].y;
            const double base = coord;
            coord = base + h;
            const double up = loss_fn(x);
            coord = base - h;
            const double down = loss_fn(x);
            coord = base;

            GradCheckEntry e;
            e.coordinate = 2 * i + static_cast<std::size_t>(axis);
            e.analytic = axis == 0 ? analytic[i].x : analytic[i].y;
            e.fd = (up - down) / (2.0 * h);
            e.finite = std::isfinite(up) && std::isfinite(down);
            e.rel_err = e.finite ? relative_error(e.analytic, e.fd) : std::numeric_limits<double>::quiet_NaN();
            if (e.finite) report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
            report.entries.push_back(e);
        }
    }
    return report;
}

std::vector<Point> soft_centroid_grad(const Region& region, const ProbMap& p) {
    const double mass = region_mass(region, p);
    if (!(mass > 0.0)) throw DegenerateError("soft_centroid_grad: region " + std::to_string(region.id) + " has zero mass");
    const int w = p.width();
    double cx = 0.0;
    double cy = 0.0;
    for (const std::size_t i : region.pixels) {
        cx += p[i] * static_cast<double>(i % w);
        cy += p[i] * static_cast<double>(i / w);
    }
    cx /= mass;
    cy /= mass;
    std::vector<Point> out;
    out.reserve(region.area());
    for (const std::size_t i : region.pixels) {
        out.push_back({(static_cast<double>(i % w) - cx) / mass, (static_cast<double>(i / w) - cy) / mass});
    }
    return out;
}

void accumulate_soft_centroid_grad(const RegionSet& regions, const ProbMap& p, std::span<const Point> dl_dc,
                                   std::span<double> grad_p) {
    if (dl_dc.size() != regions.size()) throw ShapeError("centroid gradient does not match region count");
    if (grad_p.size() != p.size()) throw ShapeError("pixel gradient buffer size mismatch");
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const Region& region = regions.regions[r];
        const std::vector<Point> dc = soft_centroid_grad(region, p);
        for (std::size_t t = 0; t < region.pixels.size(); ++t) {
            grad_p[region.pixels[t]] += dl_dc[r].x * dc[t].x + dl_dc[r].y * dc[t].y;
        }
    }
}

namespace {

std::vector<Point> random_layout(Rng& rng, int n, double extent) {
    std::vector<Point> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) p = {rng.uniform(0.0, extent), rng.uniform(0.0, extent)};
    return pts;
}

bool spectrum_well_separated(const Spectrum& s, double min_gap) {
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s.eigenvalues[i] - s.eigenvalues[i - 1] <= min_gap) return false;
    }
    return true;
}

bool support_stable(std::span<const Point> centroids, const EdgeMask& support, int k, double h) {
    std::vector<Point> x(centroids.begin(), centroids.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (int axis = 0; axis < 2; ++axis) {
            for (const double step : {h, -h}) {
                double& coord = axis == 0 ? x[i].x : x[i].y;
                const double base = coord;
                coord = base + step;
                const bool same = knn_support(x, k) == support;
                coord = base;
                if (!same) return false;
            }
        }
    }
    return true;
}

}  // namespace

GradCheckSuite run_gradcheck(const GradCheckOptions& opt) {
    if (opt.n_instances < 1) throw ValidationError("gradcheck needs at least one instance");
    if (!(opt.h > 0.0)) throw ValidationError("gradcheck step h must be positive");
    if (opt.min_nodes < 2 || opt.max_nodes < opt.min_nodes) throw ValidationError("gradcheck node range invalid");

    GradCheckSuite suite;
    suite.h = opt.h;
    suite.roundoff_regime = opt.h < kRoundoffStep;

    std::uint64_t draw = 0;
    for (int inst = 0; inst < opt.n_instances; ++inst) {
        while (true) {
            if (suite.regenerations > opt.max_regenerations) {
                throw NumericalError("gradcheck: too many rejected layouts (" + std::to_string(suite.regenerations) + ")");
            }
            Rng rng = make_rng(opt.seed, draw++, RngTag::gradcheck);
            const int n_pred = rng.uniform_int(opt.min_nodes, opt.max_nodes);
            const int n_ref = rng.uniform_int(opt.min_nodes, opt.max_nodes);
            const auto pred = random_layout(rng, n_pred, opt.extent);
            const auto ref = random_layout(rng, n_ref, opt.extent);
            const double sigma = estimate_sigma(ref);

            const GraphParams params{opt.k, sigma};
            const RegionGraph gp = build_graph(pred, params);
            const RegionGraph gr = build_graph(ref, params);
            if (!spectrum_well_separated(graph_spectrum(gp), opt.min_eigen_gap) ||
                !support_stable(pred, gp.support, opt.k, opt.h)) {
                ++suite.regenerations;
                continue;
            }

            const CentroidGrad g = tgc_grad_centroids(gp, gr, opt.weights);
            const FrozenConventions frozen = freeze_conventions(gp);
            const Spectrum sr = graph_spectrum(gr);
            auto loss_fn = [&](std::span<const Point> c) {
                return frozen_tgc_loss(c, frozen, gr, sr, opt.weights).total;
            };

            GradCheckInstance result;
            result.index = inst;
            result.n_pred = n_pred;
            result.n_ref = n_ref;
            result.sigma = sigma;
            result.loss = g.loss.total;
            result.report = fd_check(loss_fn, pred, g.grad, opt.h);
            suite.max_rel_err = std::max(suite.max_rel_err, result.report.max_rel_err);
            suite.instances.push_back(std::move(result));
            break;
        }
    }
    return suite;
}

nlohmann::json gradcheck_to_json(const GradCheckSuite& suite) {
    auto instances = nlohmann::json::array();
    for (const auto& inst : suite.instances) {
        instances.push_back({{"index", inst.index},
                             {"n_pred", inst.n_pred},
                             {"n_ref", inst.n_ref},
                             {"sigma", round_sig12(inst.sigma)},
                             {"loss", round_sig12(inst.loss)},
                             {"max_rel_err", round_sig12(inst.report.max_rel_err)}});
    }
    return {{"h", suite.h},
            {"n_instances", suite.instances.size()},
            {"regenerations", suite.regenerations},
            {"max_rel_err", round_sig12(suite.max_rel_err)},
            {"tolerance", kGradCheckTolerance},
            {"roundoff_regime", suite.roundoff_regime},
            {"passed", suite.roundoff_regime || suite.max_rel_err < kGradCheckTolerance},
            {"instances", instances}};
}

std::string gradcheck_csv(const GradCheckReport& report) {
    std::string out = "coordinate,analytic,fd,rel_err\n";
    char buf[160];
    for (const auto& e : report.entries) {
        std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.6g\n", e.coordinate, e.analytic, e.fd, e.rel_err);
        out += buf;
    }
    return out;
}

}  // namespace tgc
