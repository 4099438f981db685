#pragma once

// Linear operators A = p(d/dx) + V(x) with constant matrix symbol
// coefficients and an optional T-periodic matrix coefficient V, their Bloch
// blocks A_xi = M_xi^{-1} A M_xi on a truncated Fourier basis of L2_per(0, T),
// and the semigroup solutions written through the torus and line Bloch
// representations.

#include "blochconv/bloch.hpp"
#include "blochconv/errors.hpp"
#include "blochconv/expm.hpp"
#include "blochconv/fft.hpp"
#include "blochconv/grids.hpp"
#include "blochconv/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace blochconv {

/// V(x) sampled at y_m = m T / M, m = 0 .. M-1, one dim x dim matrix each.
struct PeriodicCoefficient {
    double T = 0.0;
    int M = 0;
    std::vector<Eigen::MatrixXcd> values;
};

/// A = sum_j C_j d^j/dx^j + V(x). On the Fourier mode exp(ikx) the
/// constant-coefficient part acts by symbol_at(k) = sum_j C_j (ik)^j.
struct OperatorSpec {
    int dim = 1;
    std::vector<Eigen::MatrixXcd> symbol;
    std::optional<PeriodicCoefficient> coeff;

    Eigen::MatrixXcd symbol_at(double k) const {
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
        cplx power = 1.0;
        for (const auto& C : symbol) {
            out += power * C;
            power *= cplx(0.0, k);
        }
        return out;
    }

    void validate() const {
        if (dim < 1)
            throw std::invalid_argument("OperatorSpec: dim must be >= 1");
        for (const auto& C : symbol)
            if (C.rows() != dim || C.cols() != dim || !C.allFinite())
                throw std::invalid_argument("OperatorSpec: symbol coefficients must be finite dim x dim matrices");
        if (coeff) {
            if (!(coeff->T > 0.0) || coeff->M < 1 || coeff->values.size() != static_cast<std::size_t>(coeff->M))
                throw std::invalid_argument("OperatorSpec: periodic coefficient must hold M samples over [0, T)");
            for (const auto& V : coeff->values)
                if (V.rows() != dim || V.cols() != dim || !V.allFinite())
                    throw std::invalid_argument("OperatorSpec: coefficient samples must be finite dim x dim matrices");
        }
    }

    /// Fourier coefficient hat V(q) of the periodic coefficient; the Nyquist
    /// mode is split evenly between q = +-M/2.
    Eigen::MatrixXcd coefficient_mode(int q) const {
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
        if (!coeff)
            return out;
        const int M = coeff->M;
        if (2 * std::abs(q) > M)
            return out;
        for (int m = 0; m < M; ++m)
            out += std::polar(1.0, -2.0 * pi * q * m / M) * coeff->values[static_cast<std::size_t>(m)];
        out /= static_cast<double>(M);
        if (M % 2 == 0 && 2 * std::abs(q) == M)
            out *= 0.5;
        return out;
    }

    static OperatorSpec zero(int dim = 1) {
        OperatorSpec A;
        A.dim = dim;
        A.symbol = {Eigen::MatrixXcd::Zero(dim, dim)};
        return A;
    }

    /// diffusivity * d^2/dx^2
    static OperatorSpec heat(double diffusivity = 1.0) {
        OperatorSpec A;
        A.symbol = {Eigen::MatrixXcd::Zero(1, 1), Eigen::MatrixXcd::Zero(1, 1),
                    Eigen::MatrixXcd::Constant(1, 1, diffusivity)};
        return A;
    }

    /// speed * d/dx, whose semigroup is the shift f(x) -> f(x + speed t).
    static OperatorSpec transport(double speed = 1.0) {
        OperatorSpec A;
        A.symbol = {Eigen::MatrixXcd::Zero(1, 1), Eigen::MatrixXcd::Constant(1, 1, speed)};
        return A;
    }
};

/// Dense matrix of A_xi on modes exp(2 pi i l x / T), l = -L .. L; the entry
/// for component c of mode l sits at row (l + L) * dim + c.
struct BlochBlock {
    double xi = 0.0;
    double T = 0.0;
    int L = 0;
    int dim = 1;
    bool block_diagonal = false; ///< no periodic coefficient: modes decouple
    Eigen::MatrixXcd matrix;

    Eigen::Index size() const { return matrix.rows(); }
    Eigen::Index index(int l, int c) const { return static_cast<Eigen::Index>(l + L) * dim + c; }
};

/// Period used by A: the coefficient period if present, otherwise `T`.
inline void require_operator_period(const OperatorSpec& A, double T) {
    if (A.coeff && std::abs(A.coeff->T - T) > 1e-12 * T)
        throw GridMismatch("operator coefficient period differs from the function's base period");
}

inline BlochBlock assemble_bloch_block(const OperatorSpec& A, double xi, int L, double T) {
    A.validate();
    if (L < 1)
        throw TruncationTooSmall("assemble_bloch_block: need L >= 1");
    if (std::abs(xi) > pi / T * (1.0 + 1e-12))
        throw std::invalid_argument("assemble_bloch_block: xi outside [-pi/T, pi/T]");
    require_operator_period(A, T);
    const int d = A.dim;
    BlochBlock block;
    block.xi = xi;
    block.T = T;
    block.L = L;
    block.dim = d;
    block.block_diagonal = !A.coeff.has_value();
    const Eigen::Index size = static_cast<Eigen::Index>(2 * L + 1) * d;
    block.matrix = Eigen::MatrixXcd::Zero(size, size);
    for (int l = -L; l <= L; ++l)
        block.matrix.block(block.index(l, 0), block.index(l, 0), d, d) = A.symbol_at(xi + 2.0 * pi * l / T);
    if (A.coeff) {
        std::vector<Eigen::MatrixXcd> modes;
        modes.reserve(static_cast<std::size_t>(4 * L + 1));
        for (int q = -2 * L; q <= 2 * L; ++q)
            modes.push_back(A.coefficient_mode(q));
        for (int l = -L; l <= L; ++l)
            for (int lp = -L; lp <= L; ++lp)
                block.matrix.block(block.index(l, 0), block.index(lp, 0), d, d) +=
                    modes[static_cast<std::size_t>(l - lp + 2 * L)];
    }
    return block;
}

namespace detail {

inline void require_finite(const Eigen::VectorXcd& v) {
    if (!v.allFinite())
        throw NonFinite("matrix exponential overflowed; the operator is not semi-bounded at this truncation");
}

// exp(t A_xi) for one or many times, reusing the per-mode exponentials when
// the block is block-diagonal.
class BlockPropagator {
public:
    explicit BlockPropagator(const BlochBlock& block) : block_(block) {}

    Eigen::VectorXcd apply(double t, const Eigen::VectorXcd& coeffs) const {
        if (t < 0.0)
            throw std::invalid_argument("evolve_block: t must be >= 0");
        if (coeffs.size() != block_.size())
            throw std::invalid_argument("evolve_block: coefficient length does not match the block");
        Eigen::VectorXcd out(coeffs.size());
        const int d = block_.dim;
        if (block_.block_diagonal) {
            for (int l = -block_.L; l <= block_.L; ++l) {
                const auto i = block_.index(l, 0);
                if (d == 1)
                    out(i) = std::exp(t * block_.matrix(i, i)) * coeffs(i);
                else
                    out.segment(i, d) = expm(Eigen::MatrixXcd(t * block_.matrix.block(i, i, d, d))) * coeffs.segment(i, d);
            }
        } else {
            out = expm(Eigen::MatrixXcd(t * block_.matrix)) * coeffs;
        }
        require_finite(out);
        return out;
    }

private:
    const BlochBlock& block_;
};

// Slice samples (dim x M) -> block coefficients on l = -L .. L.
inline Eigen::VectorXcd slice_to_block(std::span<const cplx> slice, int dim, int M, int L) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(2 * L + 1) * dim);
    for (int c = 0; c < dim; ++c) {
        auto coeffs = fft::forward(slice.subspan(static_cast<std::size_t>(c) * M, static_cast<std::size_t>(M)));
        for (int q = 0; q < M; ++q) {
            const int l = fft::signed_mode(q, M);
            if (l >= -L && l <= L)
                v(static_cast<Eigen::Index>(l + L) * dim + c) = coeffs[static_cast<std::size_t>(q)] / static_cast<double>(M);
        }
    }
    return v;
}

// Block coefficients -> slice samples at x_m = m T / M (modes folded mod M).
inline std::vector<cplx> block_to_slice(const Eigen::VectorXcd& v, int dim, int M, int L) {
    std::vector<cplx> slice(static_cast<std::size_t>(dim) * M);
    std::vector<cplx> bins(static_cast<std::size_t>(M));
    for (int c = 0; c < dim; ++c) {
        std::fill(bins.begin(), bins.end(), cplx(0.0));
        for (int l = -L; l <= L; ++l)
            bins[static_cast<std::size_t>(fft::bin_of(l, M))] += v(static_cast<Eigen::Index>(l + L) * dim + c);
        auto values = fft::backward(bins);
        std::copy(values.begin(), values.end(), slice.begin() + static_cast<std::ptrdiff_t>(c) * M);
    }
    return slice;
}

// Evolves every slice of a family for each requested time.
inline std::vector<BlochFamily> propagate_family(const OperatorSpec& A, const BlochFamily& family,
                                                 std::span<const double> times, int L) {
    if (A.dim != family.dim)
        throw GridMismatch("operator dimension differs from the function's component count");
    std::vector<BlochFamily> out(times.size(), family);
    parallel_for(family.size(), [&](std::size_t k) {
        const auto block = assemble_bloch_block(A, family.xi[k], L, family.T);
        const BlockPropagator propagator(block);
        const auto coeffs = slice_to_block(family.slices[k], family.dim, family.M, L);
        for (std::size_t i = 0; i < times.size(); ++i)
            out[i].slices[k] = block_to_slice(propagator.apply(times[i], coeffs), family.dim, family.M, L);
    });
    return out;
}

} // namespace detail

/// exp(t * block.matrix) * coeffs.
inline Eigen::VectorXcd evolve_block(const BlochBlock& block, double t, const Eigen::VectorXcd& coeffs) {
    return detail::BlockPropagator(block).apply(t, coeffs);
}

inline constexpr int default_truncation = 32;

/// v_n(t) = (1/2 pi) sum_{xi in Omega_n} exp(i xi x) exp(t A_xi) B_T(g_n)(xi, x) dxi;
/// t = 0 returns g_n itself.
inline std::vector<PeriodicFunction> evolve_periodic(const OperatorSpec& A, const PeriodicFunction& g_n,
                                                     std::span<const double> times, int L = default_truncation) {
    require_operator_period(A, g_n.grid.T());
    const auto family = bloch_torus(g_n);
    auto evolved = detail::propagate_family(A, family, times, L);
    std::vector<PeriodicFunction> out;
    out.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        out.push_back(times[i] == 0.0 ? g_n : inverse_bloch_torus(evolved[i]));
    return out;
}

inline PeriodicFunction evolve_periodic(const OperatorSpec& A, const PeriodicFunction& g_n, double t,
                                        int L = default_truncation) {
    const double times[] = {t};
    return std::move(evolve_periodic(A, g_n, times, L).front());
}

inline constexpr int default_xi_nodes = 256;

/// v(t) = (1/2 pi) int exp(i xi x) exp(t A_xi) B(f)(xi, x) dxi by the chosen
/// xi-quadrature, reconstructed on f's grid. t = 0 returns f itself.
inline std::vector<LineFunction> evolve_line(const OperatorSpec& A, const LineFunction& f, double T,
                                             std::span<const double> times, int L = default_truncation,
                                             int n_xi = default_xi_nodes, XiRule rule = XiRule::Midpoint) {
    require_operator_period(A, T);
    const auto family = bloch_line(f, T, n_xi, rule);
    auto evolved = detail::propagate_family(A, family, times, L);
    std::vector<LineFunction> out;
    out.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        out.push_back(times[i] == 0.0 ? f : inverse_bloch_line(evolved[i], f.grid));
    return out;
}

inline LineFunction evolve_line(const OperatorSpec& A, const LineFunction& f, double T, double t,
                                int L = default_truncation, int n_xi = default_xi_nodes,
                                XiRule rule = XiRule::Midpoint) {
    const double times[] = {t};
    return std::move(evolve_line(A, f, T, times, L, n_xi, rule).front());
}

struct CommutationReport {
    double max_residual = 0.0; ///< max over xi of |B(e^{tA} f) - e^{tA_xi} B(f)|_{L2(0,T)}
    double reference = 0.0;    ///< max over xi of |B(f)(xi, .)|_{L2(0,T)}
    double relative() const { return reference > 0.0 ? max_residual / reference : max_residual; }
};

/// Compares transforming the evolved function with evolving the transform.
inline CommutationReport check_commutation(const OperatorSpec& A, const LineFunction& f, double T, double t,
                                           int L = default_truncation, int n_xi = default_xi_nodes) {
    const auto evolved = evolve_line(A, f, T, t, L, n_xi);
    const auto left = bloch_line(evolved, T, n_xi);
    const auto source = bloch_line(f, T, n_xi);
    const double times[] = {t};
    const auto right = detail::propagate_family(A, source, times, L).front();
    CommutationReport report;
    const double dx = source.slice_dx();
    for (std::size_t k = 0; k < source.size(); ++k) {
        std::vector<cplx> diff(left.slices[k].size());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = left.slices[k][i] - right.slices[k][i];
        report.max_residual = std::max(report.max_residual, slice_l2(diff, dx));
        report.reference = std::max(report.reference, slice_l2(source.slices[k], dx));
    }
    return report;
}

/// Eigenvalues of a Bloch block, sorted by decreasing real part.
inline std::vector<cplx> block_eigenvalues(const BlochBlock& block) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(block.matrix, false);
    std::vector<cplx> out(solver.eigenvalues().begin(), solver.eigenvalues().end());
    std::sort(out.begin(), out.end(), [](cplx a, cplx b) { return a.real() > b.real(); });
    return out;
}

/// Largest real part over the spectra of A_xi at `xi_samples` uniform
/// frequencies on [-pi/T, pi/T]: a numerical stand-in for semigroup
/// generation, which the caller must guarantee.
inline double max_real_eigenvalue(const OperatorSpec& A, double T, int L = default_truncation, int xi_samples = 33) {
    std::vector<double> per(static_cast<std::size_t>(xi_samples));
    parallel_for(per.size(), [&](std::size_t k) {
        const double xi = xi_samples == 1 ? 0.0 : -pi / T + 2.0 * pi / T * static_cast<double>(k) / (xi_samples - 1);
        per[k] = block_eigenvalues(assemble_bloch_block(A, xi, L, T)).front().real();
    });
    return *std::max_element(per.begin(), per.end());
}

/// A applied to an nT-periodic function: spectral derivatives plus pointwise
/// multiplication by V (which must share the function's samples per period).
inline PeriodicFunction apply_periodic(const OperatorSpec& A, const PeriodicFunction& g) {
    A.validate();
    require_operator_period(A, g.grid.T());
    if (A.dim != g.dim)
        throw GridMismatch("apply_periodic: operator dimension differs from the function's");
    if (A.coeff && A.coeff->M != g.grid.M())
        throw GridMismatch("apply_periodic: coefficient samples per period differ from the function's");
    const std::size_t N = g.grid.size();
    const int n_int = static_cast<int>(N);
    const double period = g.grid.n() * g.grid.T();
    std::vector<std::vector<cplx>> spectra;
    for (int c = 0; c < g.dim; ++c)
        spectra.push_back(fft::forward(g.component(c)));
    auto out = PeriodicFunction::zeros(g.grid, g.dim);
    std::vector<cplx> work(N);
    for (int r = 0; r < g.dim; ++r) {
        std::fill(work.begin(), work.end(), cplx(0.0));
        for (int q = 0; q < n_int; ++q) {
            const int mode = fft::signed_mode(q, n_int);
            // The Nyquist mode has no well-defined odd derivative.
            const bool nyquist = 2 * mode == -n_int;
            const double k = 2.0 * pi * mode / period;
            const auto P = A.symbol_at(k);
            const auto Pnyq = A.symbol_at(-k);
            for (int c = 0; c < g.dim; ++c) {
                const cplx entry = nyquist ? 0.5 * (P(r, c) + Pnyq(r, c)) : P(r, c);
                work[static_cast<std::size_t>(q)] += entry * spectra[static_cast<std::size_t>(c)][static_cast<std::size_t>(q)];
            }
        }
        // The grid offset only contributes a phase that cancels on the way back.
        auto back = fft::backward(work);
        for (std::size_t j = 0; j < N; ++j)
            out.at(r, j) = back[j] / static_cast<double>(N);
    }
    if (A.coeff) {
        const int M = g.grid.M();
        const long zero = static_cast<long>(g.grid.n()) * M / 2;
        for (std::size_t j = 0; j < N; ++j) {
            const auto m = static_cast<std::size_t>(fft::bin_of(static_cast<int>((static_cast<long>(j) - zero) % M), M));
            const auto& V = A.coeff->values[m];
            for (int r = 0; r < g.dim; ++r)
                for (int c = 0; c < g.dim; ++c)
                    out.at(r, j) += V(r, c) * g.at(c, j);
        }
    }
    return out;
}

} // namespace blochconv
