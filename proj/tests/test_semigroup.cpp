#include "blochconv/semigroup.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace blochconv;

namespace {

const double T = 2.0 * pi;

LineFunction gaussian(double X, int M) {
    return LineFunction::sample(LineGrid::covering(X, T / M), [](double x) { return std::exp(-x * x); });
}

// Heat with a smooth nonpositive T-periodic potential V(x) = -(1 + cos x) / 2.
OperatorSpec heat_with_potential(int M) {
    auto A = OperatorSpec::heat();
    PeriodicCoefficient V{T, M, {}};
    for (int m = 0; m < M; ++m)
        V.values.push_back(Eigen::MatrixXcd::Constant(1, 1, -0.5 * (1.0 + std::cos(m * T / M))));
    A.coeff = V;
    return A;
}

Eigen::MatrixXcd random_matrix(std::mt19937& rng, int n, double scale) {
    std::normal_distribution<double> N(0.0, scale);
    Eigen::MatrixXcd A(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            A(r, c) = cplx(N(rng), N(rng));
    return A;
}

} // namespace

TEST(Expm, MatchesEigendecomposition) {
    std::mt19937 rng(1);
    for (double scale : {0.01, 0.3, 1.0, 4.0}) {
        const auto A = random_matrix(rng, 6, scale);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A);
        const Eigen::MatrixXcd V = es.eigenvectors();
        const Eigen::MatrixXcd oracle = V * es.eigenvalues().array().exp().matrix().asDiagonal() * V.inverse();
        EXPECT_LE((expm(A) - oracle).norm(), 1e-10 * oracle.norm()) << "scale " << scale;
    }
}

TEST(Expm, NilpotentIsExactPolynomial) {
    Eigen::MatrixXcd N = Eigen::MatrixXcd::Zero(3, 3);
    N(0, 1) = 5.0;
    N(1, 2) = 5.0;
    Eigen::MatrixXcd expect = Eigen::MatrixXcd::Identity(3, 3) + N + 0.5 * N * N;
    EXPECT_LE((expm(N) - expect).norm(), 1e-12 * expect.norm());
}

TEST(Semigroup, BlockLawHoldsForRandomTimes) {
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> U(0.0, 2.0);
    std::normal_distribution<double> N(0.0, 1.0);
    const auto A = heat_with_potential(16);
    for (double xi : {-0.5, 0.0, 0.25}) {
        const auto block = assemble_bloch_block(A, xi, 8, T);
        Eigen::VectorXcd c(block.size());
        for (auto& v : c)
            v = cplx(N(rng), N(rng));
        const double t = U(rng), s = U(rng);
        const auto lhs = evolve_block(block, t + s, c);
        const auto rhs = evolve_block(block, t, evolve_block(block, s, c));
        EXPECT_LE((lhs - rhs).norm(), 1e-9 * c.norm());
    }
}

TEST(Semigroup, BlockStructure) {
    const auto heat = OperatorSpec::heat(2.0);
    EXPECT_NEAR(std::abs(heat.symbol_at(3.0)(0, 0) - cplx(-18.0)), 0.0, 1e-14);
    const auto block = assemble_bloch_block(heat, 0.1, 4, T);
    EXPECT_TRUE(block.block_diagonal);
    for (int l = -4; l <= 4; ++l) {
        const double k = 0.1 + l;
        EXPECT_NEAR(block.matrix(block.index(l, 0), block.index(l, 0)).real(), -2.0 * k * k, 1e-12);
    }
    const auto A = heat_with_potential(16);
    const auto full = assemble_bloch_block(A, 0.2, 4, T);
    EXPECT_FALSE(full.block_diagonal);
    // V = -1/2 - cos(x)/2: hat V(0) = -1/2, hat V(+-1) = -1/4.
    EXPECT_NEAR(std::abs(full.matrix(full.index(1, 0), full.index(0, 0)) - cplx(-0.25)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(full.matrix(full.index(2, 0), full.index(0, 0))), 0.0, 1e-14);
    EXPECT_LE((full.matrix - full.matrix.adjoint()).norm(), 1e-14);
    EXPECT_THROW(assemble_bloch_block(A, 0.2, 0, T), TruncationTooSmall);
    EXPECT_THROW(assemble_bloch_block(A, 0.2, 4, 2.0 * T), GridMismatch);
}

TEST(EvolveLine, HeatKernelClosedForm) {
    const auto f = gaussian(40.0, 64);
    for (double t : {0.5, 1.0, 2.0}) {
        const auto v = evolve_line(OperatorSpec::heat(), f, T, t);
        const auto exact = LineFunction::sample(f.grid, [&](double x) {
            return std::exp(-x * x / (1.0 + 4.0 * t)) / std::sqrt(1.0 + 4.0 * t);
        });
        EXPECT_LE(l2_distance(v, exact), 1e-6) << "t = " << t;
    }
}

TEST(EvolveLine, IdentityAtZeroAndTransportShift) {
    const auto f = gaussian(20.0, 32);
    EXPECT_EQ(evolve_line(OperatorSpec::heat(), f, T, 0.0).values, f.values);
    // d/dx generates f(x) -> f(x + t).
    const double t = 1.3;
    const auto v = evolve_line(OperatorSpec::transport(), f, T, t);
    const auto exact = LineFunction::sample(f.grid, [&](double x) { return std::exp(-(x + t) * (x + t)); });
    EXPECT_LE(l2_distance(v, exact), 1e-9);
}

TEST(EvolveLine, PeriodicPotentialMatchesMethodOfLines) {
    // RK4 on the truncated line with a dense Fourier second-derivative matrix.
    const int M = 32;
    const auto f = LineFunction::sample(LineGrid::covering(20.0, T / M), [](double x) { return std::exp(-x * x / 2.0); });
    const auto A = heat_with_potential(M);
    const double t_end = 0.5;
    const auto v = evolve_line(A, f, T, t_end, 32, 64);

    const auto N = static_cast<Eigen::Index>(f.grid.size());
    const double P = N * f.grid.dx();
    Eigen::MatrixXd D2(N, N);
    for (Eigen::Index j = 0; j < N; ++j)
        for (Eigen::Index m = 0; m < N; ++m) {
            double acc = 0.0;
            for (Eigen::Index q = -N / 2; q < N / 2; ++q) {
                const double k = 2.0 * pi * q / P;
                acc -= k * k * std::cos(k * (j - m) * f.grid.dx());
            }
            D2(j, m) = acc / N;
        }
    Eigen::VectorXd pot(N), u(N);
    for (Eigen::Index j = 0; j < N; ++j) {
        const double x = f.grid.x(static_cast<std::size_t>(j));
        pot(j) = -0.5 * (1.0 + std::cos(x));
        u(j) = f.values[static_cast<std::size_t>(j)].real();
    }
    auto rhs = [&](const Eigen::VectorXd& w) -> Eigen::VectorXd { return D2 * w + pot.cwiseProduct(w); };
    const int steps = 1000;
    const double h = t_end / steps;
    for (int s = 0; s < steps; ++s) {
        const Eigen::VectorXd k1 = rhs(u), k2 = rhs(u + 0.5 * h * k1), k3 = rhs(u + 0.5 * h * k2), k4 = rhs(u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    auto oracle = LineFunction::zeros(f.grid);
    for (Eigen::Index j = 0; j < N; ++j)
        oracle.values[static_cast<std::size_t>(j)] = u(j);
    EXPECT_LE(l2_distance(v, oracle), 1e-5);
}

TEST(EvolveLine, DissipativeNormNonincreasing) {
    const auto f = gaussian(20.0, 32);
    const std::vector<double> times = {0.0, 0.25, 0.5, 1.0, 2.0};
    const auto v = evolve_line(heat_with_potential(32), f, T, times, 16, 64);
    for (std::size_t i = 1; i < v.size(); ++i)
        EXPECT_LE(l2_norm(v[i]), l2_norm(v[i - 1]) * (1.0 + 1e-12));
}

TEST(EvolveLine, TruncationDoublingConverges) {
    const auto f = gaussian(20.0, 64);
    const auto A = heat_with_potential(64);
    const auto v4 = evolve_line(A, f, T, 0.2, 4, 48);
    const auto v8 = evolve_line(A, f, T, 0.2, 8, 48);
    const auto v16 = evolve_line(A, f, T, 0.2, 16, 48);
    const double d1 = l2_distance(v4, v8), d2 = l2_distance(v8, v16);
    EXPECT_GE(d1 / d2, 4.0) << d1 << " " << d2;
}

TEST(EvolvePeriodic, SingleModeDecaysByItsSymbol) {
    const int n = 3;
    const PeriodicGrid grid(T, n, 16);
    const double k = 2.0 * pi * 4 / (n * T);
    const auto g = PeriodicFunction::sample(grid, [&](double x) { return std::cos(k * x); });
    EXPECT_EQ(evolve_periodic(OperatorSpec::heat(), g, 0.0).values, g.values);
    const auto v = evolve_periodic(OperatorSpec::heat(), g, 0.7);
    EXPECT_LE(l2_norm(v - cplx(std::exp(-k * k * 0.7)) * g), 1e-12);
}

TEST(EvolvePeriodic, AgreesWithLineForSupportInsidePeriod) {
    // Transport of a bump whose support stays inside the period at time t.
    const auto grid = LineGrid::covering(40.0, T / 32);
    const auto f = LineFunction::sample(grid, [](double x) { return std::exp(-x * x); });
    const auto g = periodize(f, 4, T);
    const auto vp = zero_extend(evolve_periodic(OperatorSpec::transport(), g, 1.0), grid);
    const auto vl = evolve_line(OperatorSpec::transport(), f, T, 1.0);
    EXPECT_LE(l2_distance(vp, vl), 1e-10);
}

TEST(Commutation, HeatGaussian) {
    const auto f = gaussian(20.0, 32);
    EXPECT_LE(check_commutation(OperatorSpec::heat(), f, T, 0.5, 16, 64).max_residual, 1e-8);
    EXPECT_LE(check_commutation(OperatorSpec::heat(), f, T, 0.0, 16, 64).max_residual, 1e-12);
}

TEST(Spectrum, StabilityAndOverflow) {
    EXPECT_LE(max_real_eigenvalue(OperatorSpec::heat(), T, 8), 1e-14);
    EXPECT_LE(max_real_eigenvalue(heat_with_potential(16), T, 8), 0.0);
    const auto backward = OperatorSpec::heat(-1.0);
    EXPECT_GT(max_real_eigenvalue(backward, T, 8), 0.0);
    const auto f = gaussian(10.0, 64);
    EXPECT_THROW(evolve_line(backward, f, T, 2.0, 32, 16), NonFinite);
}

TEST(ApplyPeriodic, SpectralDerivativesAndPotential) {
    const PeriodicGrid grid(T, 2, 32);
    const auto g = PeriodicFunction::sample(grid, [](double x) { return std::sin(1.5 * x); });
    const auto Ag = apply_periodic(heat_with_potential(32), g);
    const auto expect = PeriodicFunction::sample(grid, [](double x) {
        return (-2.25 - 0.5 * (1.0 + std::cos(x))) * std::sin(1.5 * x);
    });
    EXPECT_LE(l2_norm(Ag - expect), 1e-11);
}
