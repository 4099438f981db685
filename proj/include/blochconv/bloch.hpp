#pragma once

// Bloch transforms on the torus [-nT/2, nT/2) (finite sum over the n
// frequencies of Omega_n) and on the line (integral over [-pi/T, pi/T)).
//
// Slices are T-periodic functions sampled at x_m = m*T/M, m = 0 .. M-1.
// With fhat(s) = int exp(-i s t) f(t) dt,
//   B(f)(xi, x) = sum_l exp(2 pi i l x / T) fhat(xi + 2 pi l / T),
// and, at grid points, the l-sum over M consecutive l collapses to the folded
// sum T * sum_p f(x + pT) exp(-i xi (x + pT)), which is what the fast path
// computes.

#include "blochconv/errors.hpp"
#include "blochconv/fft.hpp"
#include "blochconv/grids.hpp"
#include "blochconv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace blochconv {

enum class XiRule { Midpoint, Trapezoid, Gauss };
enum class FamilyKind { Torus, Line };

/// Map xi -> T-periodic slice, for xi on Omega_n (torus) or on a quadrature
/// grid of the Brillouin interval (line).
struct BlochFamily {
    double T = 0.0;
    int M = 0;
    int dim = 1;
    FamilyKind kind = FamilyKind::Line;
    int n = 0; ///< period multiple for torus families
    XiRule rule = XiRule::Midpoint;
    std::vector<double> xi;
    std::vector<double> weights;
    /// slices[k][c * M + m] = B(f)(xi[k], m * T / M), component c.
    std::vector<std::vector<cplx>> slices;
    std::optional<LineGrid> line_grid; ///< source grid for line families
    int l_max = 0;                      ///< l-sum kept for -l_max <= l < l_max
    double truncation_estimate = 0.0;   ///< tail bound for the discarded l, line families

    std::size_t size() const noexcept { return xi.size(); }
    double slice_dx() const noexcept { return T / M; }
};

struct XiQuadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Omega_n = { xi in [-pi/T, pi/T) : exp(i xi n T) = 1 }, ascending.
inline std::vector<double> omega_n(int n, double T) {
    if (n < 1)
        throw std::invalid_argument("omega_n: n must be >= 1");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    const int first = -(n / 2);
    for (int j = 0; j < n; ++j)
        out.push_back(2.0 * pi * (first + j) / (n * T));
    return out;
}

namespace detail {

// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_N.
inline void gauss_legendre(int count, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(static_cast<std::size_t>(count), 0.0);
    weights.assign(static_cast<std::size_t>(count), 0.0);
    for (int i = 0; i < (count + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (count + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 1; j <= count; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = count * (z * p0 - p1) / (z * z - 1.0);
            const double step = p0 / dp;
            z -= step;
            if (std::abs(step) < 1e-16)
                break;
        }
        // Recompute the derivative at the converged node.
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= count; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = count * (z * p0 - p1) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[static_cast<std::size_t>(i)] = -z;
        nodes[static_cast<std::size_t>(count - 1 - i)] = z;
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(count - 1 - i)] = w;
    }
}

inline int samples_per_period(double T, double dx) {
    const double ratio = T / dx;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * ratio || static_cast<long>(rounded) % 2 != 0)
        throw IncompatibleSpacing("T/dx must be an even integer");
    return static_cast<int>(rounded);
}

// Folded Bloch slice at frequency xi of samples x_j = (j - zero_index) * dx.
inline std::vector<cplx> fold(std::span<const cplx> values, int dim, std::size_t count, long zero_index, int M,
                              double dx, double xi) {
    const double T = M * dx;
    std::vector<cplx> slice(static_cast<std::size_t>(dim) * M);
    for (std::size_t j = 0; j < count; ++j) {
        const long rel = static_cast<long>(j) - zero_index;
        const auto m = static_cast<std::size_t>(fft::bin_of(static_cast<int>(rel % M), M));
        const cplx phase = std::polar(T, -xi * static_cast<double>(rel) * dx);
        for (int c = 0; c < dim; ++c) {
            const cplx v = values[static_cast<std::size_t>(c) * count + j];
            if (v != cplx(0.0))
                slice[static_cast<std::size_t>(c) * M + m] += phase * v;
        }
    }
    return slice;
}

// Keeps only Fourier modes -l_max <= l < l_max of each slice component.
inline void truncate_modes(std::vector<cplx>& slice, int dim, int M, int l_max) {
    if (l_max >= M / 2)
        return;
    for (int c = 0; c < dim; ++c) {
        std::span<cplx> comp(slice.data() + static_cast<std::size_t>(c) * M, static_cast<std::size_t>(M));
        auto coeffs = fft::forward(comp);
        for (int q = 0; q < M; ++q) {
            const int l = fft::signed_mode(q, M);
            if (l < -l_max || l >= l_max)
                coeffs[static_cast<std::size_t>(q)] = 0.0;
        }
        auto back = fft::backward(coeffs);
        for (int m = 0; m < M; ++m)
            comp[static_cast<std::size_t>(m)] = back[static_cast<std::size_t>(m)] / static_cast<double>(M);
    }
}

// int_{l_max + 1/2}^inf ((2l - 1) pi / T)^{-s} dl, an upper bound for the
// sum over l > l_max since the summand is convex and decreasing.
inline double tail_remainder(double T, double s, int l_max) {
    return std::pow(pi / T, -s) * std::pow(2.0 * l_max, 1.0 - s) / (2.0 * (s - 1.0));
}

// sum_{l >= 1} ((2l - 1) pi / T)^{-s}, exact to l_max plus the remainder bound.
inline double one_sided_tail(double T, double s, int l_max) {
    double sum = 0.0;
    for (int l = 1; l <= l_max; ++l)
        sum += std::pow((2.0 * l - 1.0) * pi / T, -s);
    return sum + tail_remainder(T, s, l_max);
}

} // namespace detail

/// Quadrature nodes and weights on the Brillouin interval [-pi/T, pi/T).
/// Trapezoid is the periodic (left-endpoint) rule; the integrand
/// exp(i xi x) B(f)(xi, x) is 2 pi / T periodic in xi, so both uniform rules
/// are spectrally accurate.
inline XiQuadrature xi_quadrature(XiRule rule, int count, double T) {
    if (count < 1)
        throw std::invalid_argument("xi_quadrature: need at least one node");
    XiQuadrature q;
    const double a = -pi / T;
    const double h = 2.0 * pi / (count * T);
    switch (rule) {
    case XiRule::Midpoint:
        for (int k = 0; k < count; ++k) {
            q.nodes.push_back(a + (k + 0.5) * h);
            q.weights.push_back(h);
        }
        break;
    case XiRule::Trapezoid:
        for (int k = 0; k < count; ++k) {
            q.nodes.push_back(a + k * h);
            q.weights.push_back(h);
        }
        break;
    case XiRule::Gauss: {
        std::vector<double> z, w;
        detail::gauss_legendre(count, z, w);
        for (int k = 0; k < count; ++k) {
            q.nodes.push_back(pi / T * z[static_cast<std::size_t>(k)]);
            q.weights.push_back(pi / T * w[static_cast<std::size_t>(k)]);
        }
        break;
    }
    }
    return q;
}

/// The uniform rule whose nodes are exactly Omega_n: midpoint for odd n,
/// left-endpoint for even n.
inline XiRule rule_matching_omega(int n) { return n % 2 == 1 ? XiRule::Midpoint : XiRule::Trapezoid; }

/// Torus Bloch transform of an nT-periodic function over Omega_n.
inline BlochFamily bloch_torus(const PeriodicFunction& g) {
    const int n = g.grid.n();
    const int M = g.grid.M();
    BlochFamily out;
    out.T = g.grid.T();
    out.M = M;
    out.dim = g.dim;
    out.kind = FamilyKind::Torus;
    out.n = n;
    out.rule = rule_matching_omega(n);
    out.xi = omega_n(n, out.T);
    out.weights.assign(out.xi.size(), 2.0 * pi / (n * out.T));
    out.l_max = M / 2;
    out.slices.resize(out.xi.size());
    const long zero_index = static_cast<long>(n) * M / 2;
    parallel_for(out.xi.size(), [&](std::size_t k) {
        out.slices[k] = detail::fold(g.values, g.dim, g.grid.size(), zero_index, M, g.grid.dx(), out.xi[k]);
    });
    return out;
}

/// Line Bloch transform sampled at the given frequencies; l_max <= 0 keeps
/// every representable mode (l_max = M/2).
inline BlochFamily bloch_line_at(const LineFunction& f, double T, std::vector<double> nodes,
                                 std::vector<double> weights, int l_max = 0, XiRule rule = XiRule::Midpoint) {
    const int M = detail::samples_per_period(T, f.grid.dx());
    if (nodes.size() != weights.size())
        throw MalformedFamily("bloch_line_at: node and weight counts differ");
    BlochFamily out;
    out.T = T;
    out.M = M;
    out.dim = f.dim;
    out.kind = FamilyKind::Line;
    out.rule = rule;
    out.xi = std::move(nodes);
    out.weights = std::move(weights);
    out.line_grid = f.grid;
    out.l_max = (l_max <= 0 || l_max > M / 2) ? M / 2 : l_max;
    out.slices.resize(out.xi.size());
    parallel_for(out.xi.size(), [&](std::size_t k) {
        auto slice = detail::fold(f.values, f.dim, f.grid.size(), f.grid.half_count(), M, f.grid.dx(), out.xi[k]);
        detail::truncate_modes(slice, f.dim, M, out.l_max);
        out.slices[k] = std::move(slice);
    });
    if (out.l_max < M / 2) {
        const double s = default_sobolev_index;
        const double hs1 = norms_line(f, s + 1.0).hs;
        out.truncation_estimate = 2.0 * hs1 * detail::tail_remainder(T, s, out.l_max);
    }
    return out;
}

inline BlochFamily bloch_line(const LineFunction& f, double T, int n_xi, XiRule rule = XiRule::Midpoint,
                              int l_max = 0) {
    auto q = xi_quadrature(rule, n_xi, T);
    return bloch_line_at(f, T, std::move(q.nodes), std::move(q.weights), l_max, rule);
}

/// Line Bloch transform assembled the long way: fhat(xi + 2 pi l / T) by
/// direct quadrature over the line grid, then the l-sum over -M/2 <= l < M/2.
/// Independent of the folding path; O(M * N) per frequency.
inline BlochFamily bloch_line_direct(const LineFunction& f, double T, const std::vector<double>& nodes) {
    const int M = detail::samples_per_period(T, f.grid.dx());
    BlochFamily out;
    out.T = T;
    out.M = M;
    out.dim = f.dim;
    out.kind = FamilyKind::Line;
    out.xi = nodes;
    out.weights.assign(nodes.size(), 0.0);
    out.line_grid = f.grid;
    out.l_max = M / 2;
    out.slices.resize(nodes.size());

    std::vector<cplx> roots(static_cast<std::size_t>(M));
    for (int r = 0; r < M; ++r)
        roots[static_cast<std::size_t>(r)] = std::polar(1.0, 2.0 * pi * r / M);
    const std::size_t count = f.grid.size();
    const long zero = f.grid.half_count();
    const double dx = f.grid.dx();

    parallel_for(nodes.size(), [&](std::size_t k) {
        const double xi = nodes[k];
        std::vector<cplx> slice(static_cast<std::size_t>(f.dim) * M);
        std::vector<cplx> modulated(count);
        for (int c = 0; c < f.dim; ++c) {
            for (std::size_t j = 0; j < count; ++j) {
                const double x = (static_cast<double>(j) - static_cast<double>(zero)) * dx;
                modulated[j] = std::polar(1.0, -xi * x) * f.at(c, j);
            }
            std::vector<cplx> fhat(static_cast<std::size_t>(M));
            for (int l = -M / 2; l < M / 2; ++l) {
                cplx acc = 0.0;
                for (std::size_t j = 0; j < count; ++j) {
                    const long rel = static_cast<long>(j) - zero;
                    const int r = fft::bin_of(static_cast<int>((-static_cast<long>(l) * rel) % M), M);
                    acc += modulated[j] * roots[static_cast<std::size_t>(r)];
                }
                fhat[static_cast<std::size_t>(l + M / 2)] = dx * acc;
            }
            for (int m = 0; m < M; ++m) {
                cplx acc = 0.0;
                for (int l = -M / 2; l < M / 2; ++l)
                    acc += roots[static_cast<std::size_t>(fft::bin_of((l * m) % M, M))] *
                           fhat[static_cast<std::size_t>(l + M / 2)];
                slice[static_cast<std::size_t>(c) * M + static_cast<std::size_t>(m)] = acc;
            }
        }
        out.slices[k] = std::move(slice);
    });
    return out;
}

namespace detail {

inline void require_well_formed(const BlochFamily& B) {
    if (B.M < 2 || B.dim < 1 || !(B.T > 0.0))
        throw MalformedFamily("Bloch family has invalid T, M or dim");
    if (B.slices.size() != B.xi.size() || B.weights.size() != B.xi.size())
        throw MalformedFamily("Bloch family: slice, weight and frequency counts differ");
    for (const auto& s : B.slices)
        if (s.size() != static_cast<std::size_t>(B.dim) * B.M)
            throw MalformedFamily("Bloch family: slice length must be dim * M");
    for (double xi : B.xi)
        if (xi < -pi / B.T * (1.0 + 1e-12) || xi > pi / B.T * (1.0 + 1e-12))
            throw MalformedFamily("Bloch family: frequency outside the Brillouin interval");
}

// (1/2 pi) sum_k w_k exp(i xi_k x_j) slice_k(x_j mod T) at x_j = (j - zero) dx.
inline std::vector<cplx> reconstruct(const BlochFamily& B, std::size_t count, long zero_index) {
    const int M = B.M;
    const double dx = B.slice_dx();
    std::vector<cplx> values(static_cast<std::size_t>(B.dim) * count);
    const unsigned workers = std::max(1u, std::min<unsigned>(sweep_threads(), 64u));
    const std::size_t chunk = (count + workers - 1) / workers;
    parallel_for(workers, [&](std::size_t w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        for (std::size_t k = 0; k < B.xi.size(); ++k) {
            const double scale = B.weights[k] / (2.0 * pi);
            const auto& slice = B.slices[k];
            for (std::size_t j = begin; j < end; ++j) {
                const long rel = static_cast<long>(j) - zero_index;
                const auto m = static_cast<std::size_t>(fft::bin_of(static_cast<int>(rel % M), M));
                const cplx phase = std::polar(scale, B.xi[k] * static_cast<double>(rel) * dx);
                for (int c = 0; c < B.dim; ++c)
                    values[static_cast<std::size_t>(c) * count + j] += phase * slice[static_cast<std::size_t>(c) * M + m];
            }
        }
    });
    return values;
}

} // namespace detail

inline PeriodicFunction inverse_bloch_torus(const BlochFamily& B) {
    detail::require_well_formed(B);
    if (B.kind != FamilyKind::Torus || B.n < 1)
        throw MalformedFamily("inverse_bloch_torus: not a torus family");
    const auto expected = omega_n(B.n, B.T);
    if (expected.size() != B.xi.size())
        throw MalformedFamily("inverse_bloch_torus: frequencies are not Omega_n");
    for (std::size_t k = 0; k < expected.size(); ++k)
        if (std::abs(expected[k] - B.xi[k]) > 1e-12 * pi / B.T)
            throw MalformedFamily("inverse_bloch_torus: frequencies are not Omega_n");
    PeriodicGrid grid(B.T, B.n, B.M);
    auto values = detail::reconstruct(B, grid.size(), static_cast<long>(B.n) * B.M / 2);
    return {grid, B.dim, std::move(values)};
}

/// Quadrature reconstruction of a line function on `target`.
inline LineFunction inverse_bloch_line(const BlochFamily& B, const LineGrid& target) {
    detail::require_well_formed(B);
    if (B.kind != FamilyKind::Line)
        throw MalformedFamily("inverse_bloch_line: not a line family");
    if (!detail::same_spacing(target.dx(), B.slice_dx()))
        throw IncompatibleSpacing("inverse_bloch_line: target spacing differs from T/M");
    auto values = detail::reconstruct(B, target.size(), target.half_count());
    return {target, B.dim, std::move(values)};
}

inline LineFunction inverse_bloch_line(const BlochFamily& B) {
    if (!B.line_grid)
        throw MalformedFamily("inverse_bloch_line: family carries no line grid");
    return inverse_bloch_line(B, *B.line_grid);
}

/// L2(0, T) norm of a slice (all components).
inline double slice_l2(std::span<const cplx> slice, double dx) {
    double sum = 0.0;
    for (const auto& v : slice)
        sum += std::norm(v);
    return std::sqrt(sum * dx);
}

/// (1/2 pi) sum_k w_k |B(xi_k, .)|^2_{L2(0,T)}. Equals T |f|^2 for the
/// unnormalized L2(0, T) slice norm.
inline double bloch_energy(const BlochFamily& B) {
    double sum = 0.0;
    for (std::size_t k = 0; k < B.size(); ++k) {
        const double n = slice_l2(B.slices[k], B.slice_dx());
        sum += B.weights[k] * n * n;
    }
    return sum / (2.0 * pi);
}

/// Trigonometric interpolation of slice k at an arbitrary x, component c.
inline cplx slice_value(const BlochFamily& B, std::size_t k, double x, int c = 0) {
    const int M = B.M;
    std::span<const cplx> comp(B.slices[k].data() + static_cast<std::size_t>(c) * M, static_cast<std::size_t>(M));
    auto coeffs = fft::forward(comp);
    cplx acc = 0.0;
    for (int q = 0; q < M; ++q) {
        const int l = fft::signed_mode(q, M);
        acc += coeffs[static_cast<std::size_t>(q)] * std::polar(1.0, 2.0 * pi * l * x / B.T);
    }
    return acc / static_cast<double>(M);
}

struct BlochsEqualReport {
    double max_discrepancy = 0.0; ///< max over Omega_n of the slice L2(0,T) difference
    double reference = 0.0;       ///< max over Omega_n of the torus slice norm
    double relative() const { return reference > 0.0 ? max_discrepancy / reference : max_discrepancy; }
};

/// Compares B_T(g_n) with B(g~_n) on Omega_n, the two sides computed by the
/// folding path and by direct Fourier quadrature respectively.
inline BlochsEqualReport check_blochs_equal(const PeriodicFunction& g_n, const LineGrid& line_target) {
    const auto extended = zero_extend(g_n, line_target);
    const auto torus = bloch_torus(g_n);
    const auto line = bloch_line_direct(extended, g_n.grid.T(), torus.xi);
    BlochsEqualReport report;
    const double dx = g_n.grid.dx();
    for (std::size_t k = 0; k < torus.size(); ++k) {
        std::vector<cplx> diff(torus.slices[k].size());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = torus.slices[k][i] - line.slices[k][i];
        report.max_discrepancy = std::max(report.max_discrepancy, slice_l2(diff, dx));
        report.reference = std::max(report.reference, slice_l2(torus.slices[k], dx));
    }
    return report;
}

/// Ingredients of the uniform bound |B(f)(xi, x)| <= |fhat|_inf + |f|_{H^{s+1}} * tail.
struct BlochBound {
    double sup_bound = 0.0;
    double l_infty_fhat = 0.0;
    double hs1_norm = 0.0;
    double tail_constant = 0.0;
    double s = 0.0;
    double sampled_max = 0.0; ///< max |B(f)| over the sampled (xi, x) grid
    bool holds = true;        ///< sampled_max <= sup_bound
};

/// tail = sum_{l>=1} |(2l-1) pi/T|^{-s} + sum_{l<=-1} |(2l+1) pi/T|^{-s},
/// summed to l_max with an integral upper bound for the remainder.
inline double bloch_tail_constant(double T, double s, int l_max) {
    if (!(s > 1.0))
        throw HypothesisViolation("bloch_tail_constant: the l-sums diverge for s <= 1");
    if (l_max < 1)
        throw std::invalid_argument("bloch_tail_constant: l_max must be >= 1");
    return 2.0 * detail::one_sided_tail(T, s, l_max);
}

inline BlochBound bloch_sup_bound(const LineFunction& f, double T, double s = default_sobolev_index,
                                  int l_max = 64, int xi_samples = 64) {
    if (!(s > 2.0))
        throw HypothesisViolation("bloch_sup_bound: requires s > 2");
    BlochBound bound;
    bound.s = s;
    const std::size_t count = f.grid.size();
    const double dx = f.grid.dx();
    std::vector<double> modulus(count, 0.0);
    for (int c = 0; c < f.dim; ++c) {
        auto spectrum = fft::forward(f.component(c));
        for (std::size_t q = 0; q < count; ++q)
            modulus[q] += std::norm(dx * spectrum[q]);
    }
    for (double m : modulus)
        bound.l_infty_fhat = std::max(bound.l_infty_fhat, std::sqrt(m));
    bound.hs1_norm = norms_line(f, s + 1.0).hs;
    bound.tail_constant = bloch_tail_constant(T, s, l_max);
    bound.sup_bound = bound.l_infty_fhat + bound.hs1_norm * bound.tail_constant;

    const auto family = bloch_line(f, T, xi_samples, XiRule::Midpoint);
    for (const auto& slice : family.slices)
        for (int m = 0; m < family.M; ++m)
            bound.sampled_max = std::max(
                bound.sampled_max, detail::pointwise_modulus(slice, f.dim, static_cast<std::size_t>(family.M),
                                                             static_cast<std::size_t>(m)));
    bound.holds = bound.sampled_max <= bound.sup_bound;
    return bound;
}

struct ContinuityRow {
    double aggregated = 0.0; ///< sum_k w_k |B(f_k)(xi_k) - B(f)(xi_k)|^2_{L2(0,T)}
    double direct = 0.0;     ///< 2 pi T |f_k - f|^2_{L2(R)}
};

/// Frequency-integrated squared Bloch discrepancy of each f_k against f,
/// paired with the Plancherel value computed from the direct L2 difference.
inline std::vector<ContinuityRow> check_bloch_l2_continuity(const std::vector<LineFunction>& f_seq,
                                                            const LineFunction& f, double T, int n_xi = 0) {
    const int M = detail::samples_per_period(T, f.grid.dx());
    if (n_xi <= 0) // enough nodes that the rectangle rule sees no aliasing on [-X, X)
        n_xi = static_cast<int>(std::ceil(2.0 * f.grid.X() / T)) + 1;
    const auto reference = bloch_line(f, T, n_xi, XiRule::Midpoint);
    std::vector<ContinuityRow> rows;
    for (const auto& fk : f_seq) {
        require_same_grid(fk, f);
        const auto family = bloch_line(fk, T, n_xi, XiRule::Midpoint);
        ContinuityRow row;
        for (std::size_t k = 0; k < family.size(); ++k) {
            std::vector<cplx> diff(family.slices[k].size());
            for (std::size_t i = 0; i < diff.size(); ++i)
                diff[i] = family.slices[k][i] - reference.slices[k][i];
            const double d = slice_l2(diff, T / M);
            row.aggregated += family.weights[k] * d * d;
        }
        const double l2 = l2_distance(fk, f);
        row.direct = 2.0 * pi * T * l2 * l2;
        rows.push_back(row);
    }
    return rows;
}

} // namespace blochconv
