#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tgc/error.hpp"
#include "tgc/grad.hpp"
#include "tgc/graph.hpp"
#include "tgc/spectrum.hpp"

using namespace tgc;

namespace {

std::vector<Point> random_points(std::mt19937_64& gen, int n, double extent) {
    std::uniform_real_distribution<double> u(0.0, extent);
    std::vector<Point> c(n);
    for (auto& p : c) p = {u(gen), u(gen)};
    return c;
}

double total_at(std::span<const Point> c, const RegionGraph& gr, const FrozenConventions& frozen) {
    return frozen_tgc_loss(c, frozen, gr, graph_spectrum(gr), TgcWeights{}).total;
}

}  // namespace

TEST(CentroidGrad, ZeroAtIdenticalGraphs) {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = random_points(gen, 3 + trial % 10, 64.0);
        const GraphParams shared{5, 15.0};
        const RegionGraph g = build_graph(c, shared);
        const CentroidGrad cg = tgc_grad_centroids(g, g, TgcWeights{});
        ASSERT_EQ(cg.grad.size(), c.size());
        for (const auto& d : cg.grad) {
            EXPECT_LE(std::abs(d.x), 1e-9);
            EXPECT_LE(std::abs(d.y), 1e-9);
        }
        EXPECT_EQ(cg.loss.total, 0.0);
    }
}

TEST(CentroidGrad, TwoNodeClosedForm) {
    const double sigma = 4.0;
    const std::vector<Point> cp{{1.0, 2.0}, {4.0, 6.5}};
    const std::vector<Point> cr{{0.0, 0.0}, {7.0, 1.0}};
    const RegionGraph gp = build_graph(cp, {5, sigma});
    const RegionGraph gr = build_graph(cr, {5, sigma});
    const double a = gp.adjacency(0, 1);
    const double b = gr.adjacency(0, 1);
    // loss = 2(a-b)^2; da/dc0 = a (c1 - c0) / sigma^2, da/dc1 = -da/dc0
    const double dl_da = 4.0 * (a - b);
    const CentroidGrad cg = tgc_grad_centroids(gp, gr, TgcWeights{});
    const double gx = dl_da * a * (cp[1].x - cp[0].x) / (sigma * sigma);
    const double gy = dl_da * a * (cp[1].y - cp[0].y) / (sigma * sigma);
    EXPECT_NEAR(cg.loss.total, 2.0 * (a - b) * (a - b), 1e-15);
    EXPECT_NEAR(cg.grad[0].x, gx, 1e-14);
    EXPECT_NEAR(cg.grad[0].y, gy, 1e-14);
    EXPECT_NEAR(cg.grad[1].x, -gx, 1e-14);
    EXPECT_NEAR(cg.grad[1].y, -gy, 1e-14);
}

TEST(CentroidGrad, NeedsTwoNodes) {
    const std::vector<Point> one{{0, 0}};
    const std::vector<Point> two{{0, 0}, {1, 1}};
    EXPECT_THROW(tgc_grad_centroids(build_graph(one, {}), build_graph(two, {}), TgcWeights{}), DegenerateError);
}

TEST(CentroidGrad, MatchesFiniteDifferences) {
    std::mt19937_64 gen(2);
    int checked = 0;
    for (int trial = 0; trial < 60 && checked < 20; ++trial) {
        const auto cp = random_points(gen, 3 + trial % 10, 64.0);
        const auto cr = random_points(gen, 3 + (trial * 5) % 10, 64.0);
        const double sigma = estimate_sigma(cr);
        const GraphParams params{5, sigma};
        const RegionGraph gp = build_graph(cp, params);
        const RegionGraph gr = build_graph(cr, params);
        const Spectrum sp = graph_spectrum(gp);
        bool gapped = true;
        for (std::size_t i = 1; i < sp.size(); ++i) gapped &= sp.eigenvalues[i] - sp.eigenvalues[i - 1] > 1e-3;
        if (!gapped) continue;
        const FrozenConventions frozen = freeze_conventions(gp);
        const CentroidGrad cg = tgc_grad_centroids(gp, gr, TgcWeights{});
        EXPECT_FALSE(cg.degenerate_spectrum);
        const auto report = fd_check([&](std::span<const Point> c) { return total_at(c, gr, frozen); }, cp,
                                     cg.grad, 1e-5);
        EXPECT_LT(report.max_rel_err, 1e-4) << "trial " << trial;
        ++checked;
    }
    EXPECT_GE(checked, 10);
}

TEST(CentroidGrad, TranslationEquivariant) {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto cp = random_points(gen, 4 + trial % 6, 64.0);
        const auto cr = random_points(gen, 5, 64.0);
        auto shifted = cp;
        for (auto& p : shifted) {
            p.x += 10.0;
            p.y -= 3.0;
        }
        const GraphParams shared{5, 18.0};
        const RegionGraph gr = build_graph(cr, shared);
        const CentroidGrad a = tgc_grad_centroids(build_graph(cp, shared), gr, TgcWeights{});
        const CentroidGrad b = tgc_grad_centroids(build_graph(shifted, shared), gr, TgcWeights{});
        for (std::size_t i = 0; i < cp.size(); ++i) {
            EXPECT_NEAR(a.grad[i].x, b.grad[i].x, 1e-10);
            EXPECT_NEAR(a.grad[i].y, b.grad[i].y, 1e-10);
        }
    }
}

TEST(CentroidGrad, DegenerateSpectrumIsFlagged) {
    // a square is symmetric enough to give a repeated eigenvalue
    const std::vector<Point> square{{0, 0}, {10, 0}, {0, 10}, {10, 10}};
    const std::vector<Point> ref{{0, 0}, {12, 1}, {3, 9}, {15, 14}};
    const GraphParams params{3, 10.0};
    const CentroidGrad cg = tgc_grad_centroids(build_graph(square, params), build_graph(ref, params), TgcWeights{});
    EXPECT_TRUE(cg.degenerate_spectrum);
    for (const auto& g : cg.grad) {
        EXPECT_TRUE(std::isfinite(g.x));
        EXPECT_TRUE(std::isfinite(g.y));
    }
}

TEST(FdCheck, QuadraticIsNearExact) {
    const std::vector<Point> c{{1.5, -2.0}, {3.0, 0.25}, {-4.0, 7.0}};
    std::vector<Point> analytic(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) analytic[i] = {2 * c[i].x, 2 * c[i].y};
    const auto report = fd_check(
        [](std::span<const Point> x) {
            double s = 0.0;
            for (const auto& p : x) s += p.x * p.x + p.y * p.y;
            return s;
        },
        c, analytic, 1e-5);
    ASSERT_EQ(report.entries.size(), 6u);
    EXPECT_EQ(report.entries[3].coordinate, 3u);
    EXPECT_LT(report.max_rel_err, 1e-9);
}

TEST(FdCheck, NonFiniteExcludedFromMax) {
    const std::vector<Point> c{{1.0, 1.0}};
    const std::vector<Point> analytic{{2.0, 0.0}};
    const auto report = fd_check(
        [](std::span<const Point> x) { return x[0].y > 1.0 ? std::nan("") : x[0].x * x[0].x; }, c, analytic, 1e-5);
    EXPECT_TRUE(report.entries[0].finite);
    EXPECT_FALSE(report.entries[1].finite);
    EXPECT_LT(report.max_rel_err, 1e-8);
}

TEST(FdCheck, RelativeErrorDefinition) {
    EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
    EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(relative_error(1e-10, 2e-10), 1e-10 / 1e-8);
}

TEST(GradCheckSuite, DefaultRunPasses) {
    const GradCheckSuite suite = run_gradcheck(GradCheckOptions{});
    EXPECT_EQ(suite.instances.size(), 30u);
    EXPECT_LT(suite.max_rel_err, kGradCheckTolerance);
    EXPECT_FALSE(suite.roundoff_regime);
    for (const auto& inst : suite.instances) {
        EXPECT_GE(inst.n_pred, 3);
        EXPECT_LE(inst.n_pred, 12);
    }
    const auto j = gradcheck_to_json(suite);
    EXPECT_TRUE(j["passed"].get<bool>());
}

TEST(GradCheckSuite, TinyStepIsRoundoffRegime) {
    GradCheckOptions o;
    o.h = 1e-12;
    o.n_instances = 3;
    const GradCheckSuite suite = run_gradcheck(o);
    EXPECT_TRUE(suite.roundoff_regime);
    const std::string csv = gradcheck_csv(suite.instances[0].report);
    EXPECT_EQ(csv.rfind("coordinate,analytic,fd,rel_err\n", 0), 0u);
}

TEST(SoftCentroidGrad, Examples) {
    Region one;
    one.pixels = {4};
    const auto g1 = soft_centroid_grad(one, ProbMap(3, 3, 0.6));
    EXPECT_EQ(g1[0], (Point{0.0, 0.0}));

    std::vector<double> v(11, 0.0);
    v[0] = v[10] = 0.5;
    Region two;
    two.pixels = {0, 10};
    const auto g2 = soft_centroid_grad(two, ProbMap(11, 1, v));
    EXPECT_DOUBLE_EQ(g2[0].x, -5.0);
    EXPECT_DOUBLE_EQ(g2[1].x, 5.0);

    Region zero;
    zero.pixels = {1};
    EXPECT_THROW(soft_centroid_grad(zero, ProbMap(3, 1, 0.0)), DegenerateError);
}

TEST(SoftCentroidGrad, UniformRowsSumToZero) {
    Region r;
    for (std::size_t i : {3u, 4u, 5u, 9u, 10u, 17u}) r.pixels.push_back(i);
    const auto g = soft_centroid_grad(r, ProbMap(6, 4, 0.8));
    double sx = 0.0;
    double sy = 0.0;
    for (const auto& d : g) {
        sx += d.x;
        sy += d.y;
    }
    EXPECT_NEAR(sx, 0.0, 1e-12);
    EXPECT_NEAR(sy, 0.0, 1e-12);
}

TEST(SoftCentroidGrad, ChainMatchesFiniteDifferences) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(0.55, 0.95);
    LabelMask m(10, 8);
    for (int y = 1; y < 4; ++y)
        for (int x = 1; x < 4; ++x) m.set(x, y, true);
    for (int y = 5; y < 8; ++y)
        for (int x = 6; x < 10; ++x) m.set(x, y, true);
    std::vector<double> v(80, 0.1);
    for (std::size_t i = 0; i < 80; ++i)
        if (m[i]) v[i] = u(gen);
    const RegionSet rs = connected_components(m, Connectivity::eight, 1);
    const std::vector<Point> dl_dc{{0.7, -1.1}, {-0.4, 0.3}};
    std::vector<double> grad(80, 0.0);
    accumulate_soft_centroid_grad(rs, ProbMap(10, 8, v), dl_dc, grad);
    auto objective = [&](const std::vector<double>& vals) {
        const auto c = centroids(rs, ProbMap(10, 8, vals), CentroidMode::soft);
        return dl_dc[0].x * c[0].x + dl_dc[0].y * c[0].y + dl_dc[1].x * c[1].x + dl_dc[1].y * c[1].y;
    };
    const double h = 1e-6;
    for (std::size_t i = 0; i < 80; ++i) {
        auto up = v;
        auto dn = v;
        up[i] += h;
        dn[i] -= h;
        const double fd = (objective(up) - objective(dn)) / (2 * h);
        EXPECT_NEAR(grad[i], fd, 1e-7) << "pixel " << i;
    }
}
