#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "tgc/error.hpp"
#include "tgc/graph.hpp"
#include "tgc/spectrum.hpp"

using namespace tgc;

namespace {

Eigen::MatrixXd random_symmetric(std::mt19937_64& gen, int n) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = g(gen);
    return a;
}

void expect_decomposition(const Eigen::MatrixXd& a, const Spectrum& s) {
    const int n = static_cast<int>(a.rows());
    const double scale = std::max(1.0, a.cwiseAbs().rowwise().sum().maxCoeff());
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd r = a * s.eigenvectors.col(i) - s.eigenvalues(i) * s.eigenvectors.col(i);
        EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-8 * scale);
        if (i > 0) EXPECT_LE(s.eigenvalues(i - 1), s.eigenvalues(i));
    }
    const Eigen::MatrixXd gram = s.eigenvectors.transpose() * s.eigenvectors;
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-8);
}

}  // namespace

TEST(InertiaOracle, KnownSpectrum) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
    a.diagonal() << 3.0, -1.0, 2.0;
    const auto ev = oracle::eigenvalues_by_bisection(a);
    EXPECT_NEAR(ev[0], -1.0, 1e-11);
    EXPECT_NEAR(ev[1], 2.0, 1e-11);
    EXPECT_NEAR(ev[2], 3.0, 1e-11);
}

TEST(EigSym, Identity) {
    const Spectrum s = eig_sym(Eigen::MatrixXd::Identity(4, 4));
    for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(s.eigenvalues(i), 1.0);
    EXPECT_EQ(s.eigenvectors, Eigen::MatrixXd::Identity(4, 4));
}

TEST(EigSym, TwoByTwo) {
    Eigen::MatrixXd a(2, 2);
    a << 1, -1, -1, 1;
    const Spectrum s = eig_sym(a);
    EXPECT_NEAR(s.eigenvalues(0), 0.0, 1e-14);
    EXPECT_NEAR(s.eigenvalues(1), 2.0, 1e-14);
    expect_decomposition(a, s);
}

TEST(EigSym, MatchesBisectionOracle) {
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::MatrixXd a = random_symmetric(gen, 8);
        const Spectrum s = eig_sym(a);
        const auto expected = oracle::eigenvalues_by_bisection(a);
        for (int i = 0; i < 8; ++i) EXPECT_NEAR(s.eigenvalues(i), expected[i], 1e-7) << "trial " << trial;
        expect_decomposition(a, s);
    }
}

TEST(EigSym, SignConventionAndDeterminism) {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd a = random_symmetric(gen, 6);
        const Spectrum s = eig_sym(a);
        const Spectrum again = eig_sym(a);
        EXPECT_EQ(s.eigenvalues, again.eigenvalues);
        EXPECT_EQ(s.eigenvectors, again.eigenvectors);
        for (int j = 0; j < 6; ++j) {
            Eigen::Index at = 0;
            s.eigenvectors.col(j).cwiseAbs().maxCoeff(&at);
            EXPECT_GT(s.eigenvectors(at, j), 0.0);
        }
    }
}

TEST(EigSym, RejectsAsymmetricAndNonSquare) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
    a(0, 1) = 1e-6;
    EXPECT_THROW(eig_sym(a), ValidationError);
    EXPECT_THROW(eig_sym(Eigen::MatrixXd::Zero(2, 3)), ShapeError);
    a(0, 1) = 1e-12;  // within the symmetry tolerance
    EXPECT_NO_THROW(eig_sym(a));
}

TEST(EigSym, PermutationInvariantAndTrace) {
    std::mt19937_64 gen(33);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + trial % 8;
        std::uniform_real_distribution<double> u(0.0, 40.0);
        std::vector<Point> c(n);
        for (auto& p : c) p = {u(gen), u(gen)};
        const RegionGraph g = build_graph(c, {3, std::nullopt});
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), gen);
        Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
        for (int i = 0; i < n; ++i) p.indices()(i) = perm[i];
        const Eigen::MatrixXd lp = p * g.laplacian * p.transpose();
        const Spectrum s = eig_sym(g.laplacian);
        const Spectrum sp = eig_sym(lp);
        EXPECT_LT((s.eigenvalues - sp.eigenvalues).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_NEAR(s.eigenvalues.sum(), g.laplacian.trace(), 1e-8);
    }
}

TEST(HardCount, Examples) {
    Eigen::MatrixXd complete = Eigen::MatrixXd::Constant(4, 4, 0.5);
    complete.diagonal().setZero();
    EXPECT_EQ(hard_component_count(complete, 1e-12), 1);
    EXPECT_EQ(hard_component_count(Eigen::MatrixXd::Zero(3, 3), 1e-12), 3);
    EXPECT_EQ(hard_component_count(Eigen::MatrixXd(0, 0), 1e-12), 0);
}

TEST(HardCount, BlockDiagonalMatchesSpectrum) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int sizes[3] = {2 + trial % 3, 3, 1 + trial % 4};
        const int n = sizes[0] + sizes[1] + sizes[2];
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        int off = 0;
        for (int b : sizes) {
            for (int i = off; i < off + b; ++i)
                for (int j = off; j < i; ++j) a(i, j) = a(j, i) = u(gen);
            off += b;
        }
        // a singleton block is an isolated node; give it a self-contained partner-free row
        const int hard = hard_component_count(a, 1e-12);
        EXPECT_EQ(hard, oracle::dfs_components(a, 1e-12));
        if (sizes[2] > 1) {
            EXPECT_EQ(hard, 3);
            const Eigen::VectorXd d = a.rowwise().sum();
            const Eigen::VectorXd dis = d.cwiseSqrt().cwiseInverse();
            const Eigen::MatrixXd l =
                Eigen::MatrixXd::Identity(n, n) - dis.asDiagonal() * a * dis.asDiagonal();
            const Spectrum s = eig_sym(l);
            int zeros = 0;
            for (int i = 0; i < n; ++i) zeros += s.eigenvalues(i) < 1e-6;
            EXPECT_EQ(zeros, 3);
        }
    }
}

TEST(SoftCount, Examples) {
    const std::vector<double> two{0.0, 2.0};
    const double expected = 1.0 / (1.0 + std::exp(-10.0)) + 1.0 / (1.0 + std::exp(390.0));
    EXPECT_NEAR(soft_component_count(two, 0.05, 200.0), expected, 1e-15);
    EXPECT_NEAR(soft_component_count(two, 0.05, 200.0), 0.9999546, 1e-7);
    EXPECT_EQ(soft_component_count(std::vector<double>{}, 0.05, 200.0), 0.0);
    EXPECT_THROW(soft_component_count(two, 0.05, 0.0), ValidationError);
    // saturation: no eigenvalue within 1e-3 of tau
    const std::vector<double> ev{0.0, 1e-9, 0.01, 0.052, 0.7, 1.9};
    EXPECT_NEAR(soft_component_count(ev, 0.05, 1e5), 3.0, 1e-6);
}

TEST(SoftCount, MonotoneInEigenvaluesAndTau) {
    std::mt19937_64 gen(15);
    std::uniform_real_distribution<double> u(0.0, 0.3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> ev(6);
        for (auto& v : ev) v = u(gen);
        const double base = soft_component_count(ev, 0.05, 200.0);
        for (std::size_t i = 0; i < ev.size(); ++i) {
            auto up = ev;
            up[i] += 0.01;
            EXPECT_LE(soft_component_count(up, 0.05, 200.0), base);
        }
        EXPECT_GE(soft_component_count(ev, 0.06, 200.0), base);
    }
}

TEST(SpectrumJson, Shape) {
    Eigen::MatrixXd a(2, 2);
    a << 1, -1, -1, 1;
    const auto j = spectrum_to_json(eig_sym(a));
    EXPECT_EQ(j["n"], 2);
    EXPECT_EQ(j["eigenvalues"].size(), 2u);
    EXPECT_FALSE(j.contains("eigenvectors"));
    EXPECT_TRUE(spectrum_to_json(eig_sym(a), true).contains("eigenvectors"));
}
