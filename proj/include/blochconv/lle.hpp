#pragma once

// Periodic stationary solutions of the Lugiato-Lefever equation
//   psi_t = -i beta psi_xx - (1 + i alpha) psi + i |psi|^2 psi + F
// in real coordinates u = (Re psi, Im psi), their linearization
// A[phi] = -I + J L[phi], and a numerical diffusive-stability check.

#include "blochconv/errors.hpp"
#include "blochconv/fft.hpp"
#include "blochconv/grids.hpp"
#include "blochconv/parallel.hpp"
#include "blochconv/semigroup.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

namespace blochconv::lle {

struct LLEParams {
    double alpha = 0.0;
    double beta = -1.0;
    double F = 1.0;
    double T = 2.0 * pi;

    void validate() const {
        if (!(F > 0.0) || !std::isfinite(F))
            throw std::invalid_argument("LLEParams: F must be positive");
        if (!(T > 0.0) || !std::isfinite(T))
            throw std::invalid_argument("LLEParams: T must be positive");
        if (!std::isfinite(alpha) || !std::isfinite(beta))
            throw std::invalid_argument("LLEParams: alpha and beta must be finite");
    }

    /// |beta| = 1 is the usual normalization; other values still work.
    bool beta_normalized() const { return std::abs(std::abs(beta) - 1.0) < 1e-14; }
};

struct PeriodicWave {
    LLEParams params;
    PeriodicFunction phi; ///< dim 2 on PeriodicGrid(T, 1, M)
    double residual = 0.0;
    bool converged = false;
    int newton_steps = 0;
};

/// 2x2 rotation J = [[0, -1], [1, 0]].
inline Eigen::MatrixXcd J() {
    Eigen::MatrixXcd out(2, 2);
    out << 0.0, -1.0, 1.0, 0.0;
    return out;
}

/// Q(u) = [[3r^2 + i^2, 2ri], [2ri, r^2 + 3i^2]], the derivative of u -> |u|^2 u.
/// Evaluated polynomially so it extends complex-linearly.
inline Eigen::Matrix2cd potential_matrix(cplx r, cplx i) {
    Eigen::Matrix2cd Q;
    Q << 3.0 * r * r + i * i, 2.0 * r * i, 2.0 * r * i, r * r + 3.0 * i * i;
    return Q;
}

namespace detail {

// Dense real matrix of d^2/dx^2 on M equispaced samples of one period.
inline Eigen::MatrixXd spectral_second_derivative(int M, double T) {
    Eigen::MatrixXd D(M, M);
    std::vector<double> column(static_cast<std::size_t>(M));
    for (int d = 0; d < M; ++d) {
        double acc = 0.0;
        for (int q = 0; q < M; ++q) {
            const double k = 2.0 * pi * fft::signed_mode(q, M) / T;
            acc -= k * k * std::cos(2.0 * pi * q * d / M);
        }
        column[static_cast<std::size_t>(d)] = acc / M;
    }
    for (int j = 0; j < M; ++j)
        for (int m = 0; m < M; ++m)
            D(j, m) = column[static_cast<std::size_t>(fft::bin_of(j - m, M))];
    return D;
}

inline double cubic(const LLEParams& p, double rho) {
    return ((rho - 2.0 * p.alpha) * rho + 1.0 + p.alpha * p.alpha) * rho - p.F * p.F;
}

inline double l2_of(const Eigen::VectorXd& v, double dx) { return std::sqrt(v.squaredNorm() * dx); }

// Real state vector [r_0 .. r_{M-1}, i_0 .. i_{M-1}] <-> PeriodicFunction.
inline Eigen::VectorXd to_state(const PeriodicFunction& phi) {
    const auto M = static_cast<Eigen::Index>(phi.grid.size());
    Eigen::VectorXd u(2 * M);
    for (Eigen::Index j = 0; j < M; ++j) {
        u(j) = phi.at(0, static_cast<std::size_t>(j)).real();
        u(M + j) = phi.at(1, static_cast<std::size_t>(j)).real();
    }
    return u;
}

inline PeriodicFunction from_state(const PeriodicGrid& grid, const Eigen::VectorXd& u) {
    auto phi = PeriodicFunction::zeros(grid, 2);
    const auto M = static_cast<Eigen::Index>(grid.size());
    for (Eigen::Index j = 0; j < M; ++j) {
        phi.at(0, static_cast<std::size_t>(j)) = u(j);
        phi.at(1, static_cast<std::size_t>(j)) = u(M + j);
    }
    return phi;
}

inline Eigen::VectorXd residual_vector(const LLEParams& p, const Eigen::MatrixXd& D2, const Eigen::VectorXd& u) {
    const Eigen::Index M = D2.rows();
    const Eigen::VectorXd r = u.head(M), i = u.tail(M);
    const Eigen::VectorXd mod2 = r.cwiseProduct(r) + i.cwiseProduct(i);
    // D2 kills constants; shifting by the first sample keeps that exact in floating point.
    const Eigen::VectorXd r2 = D2 * (r.array() - r(0)).matrix(), i2 = D2 * (i.array() - i(0)).matrix();
    // L = -beta u'' - alpha u + |u|^2 u, then -u + J L + F e_1.
    const Eigen::VectorXd Lr = -p.beta * r2 - p.alpha * r + mod2.cwiseProduct(r);
    const Eigen::VectorXd Li = -p.beta * i2 - p.alpha * i + mod2.cwiseProduct(i);
    Eigen::VectorXd out(2 * M);
    out.head(M) = -r - Li + Eigen::VectorXd::Constant(M, p.F);
    out.tail(M) = -i + Lr;
    return out;
}

inline Eigen::MatrixXd jacobian(const LLEParams& p, const Eigen::MatrixXd& D2, const Eigen::VectorXd& u) {
    const Eigen::Index M = D2.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(M, M);
    const Eigen::MatrixXd base = -p.beta * D2 - p.alpha * I;
    Eigen::MatrixXd Jac = Eigen::MatrixXd::Zero(2 * M, 2 * M);
    Eigen::MatrixXd Lrr = base, Lri = Eigen::MatrixXd::Zero(M, M), Lir = Lri, Lii = base;
    for (Eigen::Index j = 0; j < M; ++j) {
        const double r = u(j), i = u(M + j);
        Lrr(j, j) += 3.0 * r * r + i * i;
        Lri(j, j) += 2.0 * r * i;
        Lir(j, j) += 2.0 * r * i;
        Lii(j, j) += r * r + 3.0 * i * i;
    }
    // -I + J L: first row block is -I - L_i., second is L_r. - I.
    Jac.topLeftCorner(M, M) = -I - Lir;
    Jac.topRightCorner(M, M) = -Lii;
    Jac.bottomLeftCorner(M, M) = Lrr;
    Jac.bottomRightCorner(M, M) = Lri - I;
    return Jac;
}

// Spectral derivative of a real periodic sample vector (Nyquist mode dropped).
inline Eigen::VectorXd derivative(const Eigen::VectorXd& v, double T) {
    const int M = static_cast<int>(v.size());
    std::vector<cplx> samples(v.data(), v.data() + M);
    auto spec = fft::forward(samples);
    for (int q = 0; q < M; ++q) {
        const int l = fft::signed_mode(q, M);
        spec[static_cast<std::size_t>(q)] *= 2 * l == -M ? cplx(0.0) : cplx(0.0, 2.0 * pi * l / T);
    }
    auto back = fft::backward(spec);
    Eigen::VectorXd out(M);
    for (int j = 0; j < M; ++j)
        out(j) = back[static_cast<std::size_t>(j)].real() / M;
    return out;
}

} // namespace detail

/// L2(0, T) norm of the profile residual -phi + J(-beta phi'' - alpha phi + |phi|^2 phi) + F e_1.
inline double profile_residual(const LLEParams& params, const PeriodicFunction& phi) {
    const int M = phi.grid.M();
    const auto D2 = detail::spectral_second_derivative(M, params.T);
    return detail::l2_of(detail::residual_vector(params, D2, detail::to_state(phi)), phi.grid.dx());
}

inline PeriodicFunction constant_profile(cplx psi, double T, int M) {
    return PeriodicFunction::sample(PeriodicGrid(T, 1, M), 2, [&](double, int c) {
        return cplx(c == 0 ? psi.real() : psi.imag());
    });
}

/// The formal wave phi = 0, whose linearization is -I + J(-beta d^2 - alpha).
inline PeriodicWave zero_wave(const LLEParams& params, int M = 64) {
    return {params, PeriodicFunction::zeros(PeriodicGrid(params.T, 1, M), 2), 0.0, false, 0};
}

/// All constant solutions. rho = |psi|^2 solves rho^3 - 2 alpha rho^2 +
/// (1 + alpha^2) rho - F^2 = 0 and psi = F / (1 + i(alpha - rho)).
inline std::vector<PeriodicWave> solve_constant_state(const LLEParams& params, int M = 64) {
    params.validate();
    if (!params.beta_normalized())
        std::clog << "warning: |beta| != 1, dispersion is not in normalized form\n";
    const auto& p = params;
    // Critical points of the cubic split [0, inf) into monotone pieces.
    std::vector<double> cuts = {0.0};
    const double disc = p.alpha * p.alpha - 3.0;
    if (disc > 0.0) {
        const double c1 = (2.0 * p.alpha - std::sqrt(disc)) / 3.0;
        const double c2 = (2.0 * p.alpha + std::sqrt(disc)) / 3.0;
        for (double c : {c1, c2})
            if (c > 0.0)
                cuts.push_back(c);
    }
    double hi = 1.0;
    while (detail::cubic(p, hi) <= 0.0 || hi <= cuts.back())
        hi *= 2.0;
    cuts.push_back(hi);

    std::vector<double> roots;
    boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 2);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k], b = cuts[k + 1];
        const double fa = detail::cubic(p, a), fb = detail::cubic(p, b);
        if (fa == 0.0) {
            roots.push_back(a);
            continue;
        }
        if (fa * fb > 0.0)
            continue;
        if (fb == 0.0) {
            roots.push_back(b);
            continue;
        }
        std::uintmax_t iters = 200;
        const auto bracket = boost::math::tools::toms748_solve([&](double r) { return detail::cubic(p, r); }, a, b,
                                                               fa, fb, tol, iters);
        roots.push_back(0.5 * (bracket.first + bracket.second));
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(x)); }),
                roots.end());

    std::vector<PeriodicWave> out;
    for (double rho : roots) {
        const cplx psi = p.F / cplx(1.0, p.alpha - rho);
        PeriodicWave wave{params, constant_profile(psi, p.T, M), 0.0, true, 0};
        wave.residual = profile_residual(params, wave.phi);
        out.push_back(std::move(wave));
    }
    return out;
}

struct NewtonOptions {
    int max_iter = 50;
    double tol = 1e-10;          ///< accept when residual <= tol * max(1, |phi|)
    double rank_tol = 1e-11;     ///< relative pivot threshold for the Newton system
    bool strict = false;         ///< throw NoConvergence instead of returning a flagged iterate
};

/// Damped Newton on the collocated profile equation. The translation mode is
/// pinned by appending the phase condition <phi', delta> = 0 to each Newton
/// system and solving it in the least-squares sense.
inline PeriodicWave solve_profile(const LLEParams& params, const PeriodicFunction& guess,
                                  const NewtonOptions& opts = {}) {
    params.validate();
    if (guess.dim != 2 || guess.grid.n() != 1)
        throw GridMismatch("solve_profile: guess must be a 2-component function on one period");
    if (std::abs(guess.grid.T() - params.T) > 1e-12 * params.T)
        throw GridMismatch("solve_profile: guess period differs from params.T");
    const auto grid = guess.grid;
    const int M = grid.M();
    const double dx = grid.dx();
    const auto D2 = detail::spectral_second_derivative(M, params.T);

    Eigen::VectorXd u = detail::to_state(guess);
    Eigen::VectorXd R = detail::residual_vector(params, D2, u);
    double res = detail::l2_of(R, dx);
    auto target = [&](const Eigen::VectorXd& v) { return opts.tol * std::max(1.0, detail::l2_of(v, dx)); };

    int steps = 0;
    while (res > target(u) && steps < opts.max_iter) {
        ++steps;
        Eigen::MatrixXd system(2 * M + 1, 2 * M);
        system.topRows(2 * M) = detail::jacobian(params, D2, u);
        Eigen::VectorXd phase(2 * M);
        phase.head(M) = detail::derivative(u.head(M), params.T);
        phase.tail(M) = detail::derivative(u.tail(M), params.T);
        system.row(2 * M) = phase.transpose();
        Eigen::VectorXd rhs(2 * M + 1);
        rhs.head(2 * M) = -R;
        rhs(2 * M) = 0.0;

        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(system);
        qr.setThreshold(opts.rank_tol);
        if (qr.rank() < 2 * M)
            throw SingularJacobian("solve_profile: Newton system is rank deficient (rank " +
                                   std::to_string(qr.rank()) + " of " + std::to_string(2 * M) + ")");
        const Eigen::VectorXd delta = qr.solve(rhs);

        double lambda = 1.0;
        Eigen::VectorXd trial;
        Eigen::VectorXd trial_R;
        double trial_res = std::numeric_limits<double>::infinity();
        while (lambda >= 1.0 / 1024.0) {
            trial = u + lambda * delta;
            trial_R = detail::residual_vector(params, D2, trial);
            trial_res = detail::l2_of(trial_R, dx);
            if (trial_res < (1.0 - 1e-4 * lambda) * res)
                break;
            lambda *= 0.5;
        }
        if (!(trial_res < res))
            break; // stalled
        u = trial;
        R = trial_R;
        res = trial_res;
    }

    PeriodicWave wave{params, detail::from_state(grid, u), res, res <= target(u), steps};
    if (!wave.converged && opts.strict)
        throw NoConvergence("solve_profile: residual " + std::to_string(res) + " after " + std::to_string(steps) +
                                " Newton steps",
                            res);
    return wave;
}

/// Spectral derivative phi' of a wave, same grid.
inline PeriodicFunction wave_derivative(const PeriodicWave& wave) {
    const auto u = detail::to_state(wave.phi);
    const Eigen::Index M = u.size() / 2;
    Eigen::VectorXd du(2 * M);
    du.head(M) = detail::derivative(u.head(M), wave.params.T);
    du.tail(M) = detail::derivative(u.tail(M), wave.params.T);
    return detail::from_state(wave.phi.grid, du);
}

namespace detail {

// Samples of phi on the coefficient lattice y_m = m T / M (wave grid starts at -T/2).
inline std::vector<Eigen::MatrixXcd> coefficient_samples(const PeriodicWave& wave, bool times_J) {
    const int M = wave.phi.grid.M();
    std::vector<Eigen::MatrixXcd> values;
    values.reserve(static_cast<std::size_t>(M));
    const Eigen::MatrixXcd rot = J();
    for (int m = 0; m < M; ++m) {
        const auto j = static_cast<std::size_t>(fft::bin_of(m + M / 2, M));
        const Eigen::MatrixXcd Q = potential_matrix(wave.phi.at(0, j), wave.phi.at(1, j));
        values.push_back(times_J ? Eigen::MatrixXcd(rot * Q) : Q);
    }
    return values;
}

} // namespace detail

/// A[phi] = -I + J L[phi] with L[phi] = -beta d^2 - alpha + Q(phi).
inline OperatorSpec linearized_operator(const PeriodicWave& wave) {
    const auto& p = wave.params;
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(2, 2);
    OperatorSpec A;
    A.dim = 2;
    A.symbol = {-I - p.alpha * J(), Eigen::MatrixXcd::Zero(2, 2), -p.beta * J()};
    A.coeff = PeriodicCoefficient{p.T, wave.phi.grid.M(), detail::coefficient_samples(wave, true)};
    return A;
}

/// L[phi] = -beta d^2 - alpha + Q(phi), formally self-adjoint.
inline OperatorSpec self_adjoint_part(const PeriodicWave& wave) {
    const auto& p = wave.params;
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(2, 2);
    OperatorSpec L;
    L.dim = 2;
    L.symbol = {-p.alpha * I, Eigen::MatrixXcd::Zero(2, 2), -p.beta * I};
    L.coeff = PeriodicCoefficient{p.T, wave.phi.grid.M(), detail::coefficient_samples(wave, false)};
    return L;
}

/// N[phi](v) = J Q(v) phi + J |v|^2 v, pointwise.
inline PeriodicFunction evaluate_nonlinearity(const PeriodicWave& wave, const PeriodicFunction& v) {
    require_same_grid(wave.phi, v);
    auto out = PeriodicFunction::zeros(v.grid, 2);
    for (std::size_t j = 0; j < v.grid.size(); ++j) {
        const cplx a = wave.phi.at(0, j), b = wave.phi.at(1, j);
        const cplx p = v.at(0, j), q = v.at(1, j);
        const auto Q = potential_matrix(p, q);
        const cplx mod2 = p * p + q * q;
        const cplx x = Q(0, 0) * a + Q(0, 1) * b + mod2 * p;
        const cplx y = Q(1, 0) * a + Q(1, 1) * b + mod2 * q;
        out.at(0, j) = -y;
        out.at(1, j) = x;
    }
    return out;
}

/// Hill's-method eigenvalues of A_xi[phi], sorted by decreasing real part.
inline std::vector<cplx> bloch_spectrum(const PeriodicWave& wave, double xi, int L = default_truncation) {
    return block_eigenvalues(assemble_bloch_block(linearized_operator(wave), xi, L, wave.params.T));
}

struct StabilityOptions {
    int xi_samples = 129;
    int L = default_truncation;
    double theta_min = 1e-6;
    double gap_min = 1e-4;
    double tol_zero = 1e-6;      ///< |lambda_0| threshold
    double tol_align = 1e-3;     ///< alignment must reach 1 - tol_align
    double unstable_tol = 1e-8;  ///< Re lambda above this is a definite instability
};

struct XiSample {
    double xi = 0.0;
    double max_re = 0.0;
    double slack = 0.0; ///< -max_re - theta_min xi^2, inside the ratio window
};

enum class Verdict { Stable, Unstable, Inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Stable: return "stable";
    case Verdict::Unstable: return "unstable";
    case Verdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

struct StabilityVerdict {
    double cond1_spectrum_margin = 0.0; ///< max over sampled xi != 0 of max Re sigma(A_xi)
    double zero_block_margin = 0.0;     ///< max Re over A_0 eigenvalues other than lambda_0
    double cond2_theta = 0.0;
    std::vector<XiSample> samples;
    cplx lambda0 = 0.0;
    double cond3_zero_eig_error = 0.0;  ///< |lambda_0|
    double eigenfunction_residual = 0.0; ///< |A_0 phi'| / |phi'|
    double alignment = 0.0;
    double gap = 0.0;
    bool cond1 = false, cond2 = false, cond3 = false;
    Verdict verdict = Verdict::Inconclusive;
    std::string reason;
};

inline StabilityVerdict stability_check(const PeriodicWave& wave, const StabilityOptions& opts = {}) {
    if (opts.xi_samples < 3)
        throw std::invalid_argument("stability_check: need at least 3 xi samples");
    const double T = wave.params.T;
    const auto A = linearized_operator(wave);
    StabilityVerdict out;

    // xi on a uniform grid of [-pi/T, pi/T], endpoints included, so an odd
    // sample count hits xi = 0.
    const int count = opts.xi_samples % 2 == 1 ? opts.xi_samples : opts.xi_samples + 1;
    out.samples.resize(static_cast<std::size_t>(count));
    parallel_for(out.samples.size(), [&](std::size_t k) {
        const int centered = static_cast<int>(k) - count / 2;
        const double xi = 2.0 * pi / T * centered / (count - 1);
        out.samples[k].xi = xi;
        out.samples[k].max_re = block_eigenvalues(assemble_bloch_block(A, xi, opts.L, T)).front().real();
    });

    // Condition 3 on A_0.
    const auto block = assemble_bloch_block(A, 0.0, opts.L, T);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(block.matrix, true);
    const auto& vals = solver.eigenvalues();
    Eigen::Index nearest = 0;
    for (Eigen::Index k = 1; k < vals.size(); ++k)
        if (std::abs(vals(k)) < std::abs(vals(nearest)))
            nearest = k;
    out.lambda0 = vals(nearest);
    out.cond3_zero_eig_error = std::abs(out.lambda0);
    out.gap = std::numeric_limits<double>::infinity();
    out.zero_block_margin = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < vals.size(); ++k) {
        if (k == nearest)
            continue;
        out.gap = std::min(out.gap, std::abs(vals(k) - out.lambda0));
        out.zero_block_margin = std::max(out.zero_block_margin, vals(k).real());
    }

    const auto dphi = wave_derivative(wave);
    std::vector<cplx> shifted(2 * static_cast<std::size_t>(wave.phi.grid.M()));
    const int M = wave.phi.grid.M();
    for (int c = 0; c < 2; ++c)
        for (int m = 0; m < M; ++m)
            shifted[static_cast<std::size_t>(c * M + m)] = dphi.at(c, static_cast<std::size_t>(fft::bin_of(m + M / 2, M)));
    const Eigen::VectorXcd dcoef = blochconv::detail::slice_to_block(shifted, 2, M, opts.L);
    const Eigen::VectorXcd e0 = solver.eigenvectors().col(nearest);
    const double dnorm = dcoef.norm();
    if (dnorm > 1e-12) {
        out.alignment = std::abs(e0.dot(dcoef)) / (e0.norm() * dnorm);
        out.eigenfunction_residual = (block.matrix * dcoef).norm() / dnorm;
    }

    double margin = -std::numeric_limits<double>::infinity();
    double theta = std::numeric_limits<double>::infinity();
    const double window = pi / (64.0 * T);
    for (auto& s : out.samples) {
        if (s.xi == 0.0)
            continue;
        margin = std::max(margin, s.max_re);
        if (std::abs(s.xi) >= window)
            theta = std::min(theta, -s.max_re / (s.xi * s.xi));
    }
    for (auto& s : out.samples)
        s.slack = (s.xi == 0.0 || std::abs(s.xi) < window) ? 0.0 : -s.max_re - opts.theta_min * s.xi * s.xi;
    out.cond1_spectrum_margin = margin;
    out.cond2_theta = theta;

    out.cond1 = margin < 0.0 && out.zero_block_margin < 0.0;
    out.cond2 = theta >= opts.theta_min;
    out.cond3 = out.cond3_zero_eig_error <= opts.tol_zero && out.alignment >= 1.0 - opts.tol_align &&
                out.gap >= opts.gap_min;

    if (out.cond1 && out.cond2 && out.cond3) {
        out.verdict = Verdict::Stable;
    } else if (margin > opts.unstable_tol || out.zero_block_margin > opts.unstable_tol) {
        out.verdict = Verdict::Unstable;
        out.reason = "spectrum in the right half plane";
    } else {
        out.verdict = Verdict::Inconclusive;
        if (!out.cond1)
            out.reason += "condition 1 fails; ";
        if (!out.cond2)
            out.reason += "condition 2 fails (theta below floor); ";
        if (!out.cond3)
            out.reason += "condition 3 fails (no simple zero eigenvalue aligned with phi'); ";
    }
    return out;
}

} // namespace blochconv::lle
