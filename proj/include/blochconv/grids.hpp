#pragma once

// Function representations on nT-periodic domains and on the truncated real
// line, the zero-extension embedding between them, and the L1 / L2 / H^s norms.

#include "blochconv/errors.hpp"
#include "blochconv/fft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace blochconv {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

namespace detail {

inline bool same_spacing(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); }

// Euclidean modulus over components of sample j of a component-major array.
inline double pointwise_modulus(std::span<const cplx> values, int dim, std::size_t count, std::size_t j) {
    double sum = 0.0;
    for (int c = 0; c < dim; ++c)
        sum += std::norm(values[static_cast<std::size_t>(c) * count + j]);
    return std::sqrt(sum);
}

// Discrete Sobolev norm of samples on a uniform grid of `count` points and
// spacing dx, read as one period of length count*dx:
//   |f|_{H^s}^2 = (1/P) sum_k (1 + k^2)^s |fhat(k)|^2,  fhat(k) = dx * DFT.
inline double sobolev_norm(std::span<const cplx> values, int dim, std::size_t count, double dx, double s) {
    const double period = static_cast<double>(count) * dx;
    const int n = static_cast<int>(count);
    double sum = 0.0;
    for (int c = 0; c < dim; ++c) {
        auto spectrum = fft::forward(values.subspan(static_cast<std::size_t>(c) * count, count));
        for (int q = 0; q < n; ++q) {
            const double k = 2.0 * pi * fft::signed_mode(q, n) / period;
            const double weight = s == 0.0 ? 1.0 : std::pow(1.0 + k * k, s);
            sum += weight * std::norm(dx * spectrum[static_cast<std::size_t>(q)]);
        }
    }
    return std::sqrt(sum / period);
}

} // namespace detail

/// Uniform grid over one full period [-nT/2, nT/2) with M samples per base
/// period T. Points x_j = -nT/2 + j*T/M for j = 0 .. nM-1.
class PeriodicGrid {
public:
    PeriodicGrid(double T, int n, int M) : T_(T), n_(n), M_(M) {
        if (!(T > 0.0) || !std::isfinite(T))
            throw std::invalid_argument("PeriodicGrid: base period must be positive");
        if (n < 1)
            throw std::invalid_argument("PeriodicGrid: period multiple n must be >= 1");
        if (M < 2 || M % 2 != 0)
            throw std::invalid_argument("PeriodicGrid: samples per period must be a positive even integer");
    }

    double T() const noexcept { return T_; }
    int n() const noexcept { return n_; }
    int M() const noexcept { return M_; }
    double dx() const noexcept { return T_ / M_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(n_) * static_cast<std::size_t>(M_); }
    double half_width() const noexcept { return 0.5 * n_ * T_; }
    double x(std::size_t j) const noexcept { return (static_cast<double>(j) - 0.5 * n_ * M_) * dx(); }

    friend bool operator==(const PeriodicGrid& a, const PeriodicGrid& b) {
        return a.n_ == b.n_ && a.M_ == b.M_ && detail::same_spacing(a.T_, b.T_);
    }

private:
    double T_;
    int n_;
    int M_;
};

/// Uniform grid on the truncated line [-X, X) with X = H*dx; 2H samples
/// x_j = -X + j*dx. Functions are implicitly zero for |x| >= X.
class LineGrid {
public:
    /// Requires 2X/dx to be an even integer.
    static LineGrid from_half_width(double X, double dx) {
        if (!(dx > 0.0) || !(X > 0.0))
            throw std::invalid_argument("LineGrid: X and dx must be positive");
        const double ratio = X / dx;
        const double rounded = std::round(ratio);
        if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio) || rounded < 1)
            throw IncompatibleSpacing("LineGrid: 2X/dx = " + std::to_string(2 * ratio) + " is not an even integer");
        return LineGrid(dx, static_cast<long>(rounded));
    }

    /// Smallest admissible grid with spacing dx and half-width at least X_min.
    static LineGrid covering(double X_min, double dx) {
        if (!(dx > 0.0) || !(X_min > 0.0))
            throw std::invalid_argument("LineGrid: X and dx must be positive");
        return LineGrid(dx, static_cast<long>(std::ceil(X_min / dx - 1e-9)));
    }

    double dx() const noexcept { return dx_; }
    long half_count() const noexcept { return half_; }
    double X() const noexcept { return static_cast<double>(half_) * dx_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(2 * half_); }
    double x(std::size_t j) const noexcept { return (static_cast<double>(j) - static_cast<double>(half_)) * dx_; }

    friend bool operator==(const LineGrid& a, const LineGrid& b) {
        return a.half_ == b.half_ && detail::same_spacing(a.dx_, b.dx_);
    }

private:
    LineGrid(double dx, long half) : dx_(dx), half_(half) {}
    double dx_;
    long half_;
};

/// Samples of an nT-periodic, possibly vector-valued function. Values are
/// component-major: values[c * size + j].
struct PeriodicFunction {
    PeriodicGrid grid;
    int dim = 1;
    std::vector<cplx> values;

    PeriodicFunction(PeriodicGrid g, int d, std::vector<cplx> v) : grid(g), dim(d), values(std::move(v)) {
        if (dim < 1)
            throw std::invalid_argument("PeriodicFunction: dim must be >= 1");
        if (values.size() != static_cast<std::size_t>(dim) * grid.size())
            throw std::invalid_argument("PeriodicFunction: values length must equal dim * n * M");
    }

    static PeriodicFunction zeros(PeriodicGrid g, int d = 1) {
        return {g, d, std::vector<cplx>(static_cast<std::size_t>(d) * g.size())};
    }

    /// Samples fn(x, component) on the grid.
    template <class Fn>
    static PeriodicFunction sample(PeriodicGrid g, int d, Fn&& fn) {
        auto out = zeros(g, d);
        for (int c = 0; c < d; ++c)
            for (std::size_t j = 0; j < g.size(); ++j)
                out.at(c, j) = fn(g.x(j), c);
        return out;
    }

    template <class Fn>
    static PeriodicFunction sample(PeriodicGrid g, Fn&& fn) {
        return sample(g, 1, [&](double x, int) { return cplx(fn(x)); });
    }

    cplx& at(int c, std::size_t j) { return values[static_cast<std::size_t>(c) * grid.size() + j]; }
    const cplx& at(int c, std::size_t j) const { return values[static_cast<std::size_t>(c) * grid.size() + j]; }
    std::span<const cplx> component(int c) const {
        return std::span<const cplx>(values).subspan(static_cast<std::size_t>(c) * grid.size(), grid.size());
    }
};

/// Samples of a localized function on the truncated line, same layout as
/// PeriodicFunction.
struct LineFunction {
    LineGrid grid;
    int dim = 1;
    std::vector<cplx> values;

    LineFunction(LineGrid g, int d, std::vector<cplx> v) : grid(g), dim(d), values(std::move(v)) {
        if (dim < 1)
            throw std::invalid_argument("LineFunction: dim must be >= 1");
        if (values.size() != static_cast<std::size_t>(dim) * grid.size())
            throw std::invalid_argument("LineFunction: values length must equal dim * 2X/dx");
    }

    static LineFunction zeros(LineGrid g, int d = 1) {
        return {g, d, std::vector<cplx>(static_cast<std::size_t>(d) * g.size())};
    }

    template <class Fn>
    static LineFunction sample(LineGrid g, int d, Fn&& fn) {
        auto out = zeros(g, d);
        for (int c = 0; c < d; ++c)
            for (std::size_t j = 0; j < g.size(); ++j)
                out.at(c, j) = fn(g.x(j), c);
        return out;
    }

    template <class Fn>
    static LineFunction sample(LineGrid g, Fn&& fn) {
        return sample(g, 1, [&](double x, int) { return cplx(fn(x)); });
    }

    cplx& at(int c, std::size_t j) { return values[static_cast<std::size_t>(c) * grid.size() + j]; }
    const cplx& at(int c, std::size_t j) const { return values[static_cast<std::size_t>(c) * grid.size() + j]; }
    std::span<const cplx> component(int c) const {
        return std::span<const cplx>(values).subspan(static_cast<std::size_t>(c) * grid.size(), grid.size());
    }
};

inline void require_same_grid(const LineFunction& a, const LineFunction& b) {
    if (!(a.grid == b.grid) || a.dim != b.dim)
        throw GridMismatch("line functions live on different grids");
}

inline void require_same_grid(const PeriodicFunction& a, const PeriodicFunction& b) {
    if (!(a.grid == b.grid) || a.dim != b.dim)
        throw GridMismatch("periodic functions live on different grids");
}

template <class Fn>
    requires requires(Fn f, cplx a, cplx b) { f(a, b); }
LineFunction combine(const LineFunction& a, const LineFunction& b, Fn&& fn) {
    require_same_grid(a, b);
    auto out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = fn(a.values[i], b.values[i]);
    return out;
}

inline LineFunction operator+(const LineFunction& a, const LineFunction& b) {
    return combine(a, b, [](cplx u, cplx v) { return u + v; });
}
inline LineFunction operator-(const LineFunction& a, const LineFunction& b) {
    return combine(a, b, [](cplx u, cplx v) { return u - v; });
}
inline LineFunction operator*(cplx alpha, LineFunction f) {
    for (auto& v : f.values)
        v *= alpha;
    return f;
}

inline PeriodicFunction operator-(const PeriodicFunction& a, const PeriodicFunction& b) {
    require_same_grid(a, b);
    auto out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] -= b.values[i];
    return out;
}
inline PeriodicFunction operator+(const PeriodicFunction& a, const PeriodicFunction& b) {
    require_same_grid(a, b);
    auto out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] += b.values[i];
    return out;
}
inline PeriodicFunction operator*(cplx alpha, PeriodicFunction f) {
    for (auto& v : f.values)
        v *= alpha;
    return f;
}

/// L1, L2 and H^s norms of one function, with the Sobolev index used.
struct NormTriple {
    double l1 = 0.0;
    double l2 = 0.0;
    double hs = 0.0;
    double s = 0.0;
};

/// Default Sobolev index: the smallest integer above 2.
inline constexpr double default_sobolev_index = 3.0;

/// The embedding g -> g~: g on [-nT/2, nT/2), zero elsewhere on the target.
inline LineFunction zero_extend(const PeriodicFunction& g, const LineGrid& target) {
    if (!detail::same_spacing(g.grid.dx(), target.dx()))
        throw IncompatibleSpacing("zero_extend: target spacing differs from T/M");
    const long half_period = static_cast<long>(g.grid.n()) * g.grid.M() / 2;
    if (target.half_count() < half_period)
        throw DomainTooSmall("zero_extend: target half-width " + std::to_string(target.X()) + " < nT/2 = " +
                             std::to_string(g.grid.half_width()));
    auto out = LineFunction::zeros(target, g.dim);
    const std::size_t offset = static_cast<std::size_t>(target.half_count() - half_period);
    for (int c = 0; c < g.dim; ++c)
        for (std::size_t j = 0; j < g.grid.size(); ++j)
            out.at(c, offset + j) = g.at(c, j);
    return out;
}

/// The nT-periodic function agreeing with f on [-nT/2, nT/2). The number of
/// samples per period is M = T/dx, which must be an even integer.
inline PeriodicFunction periodize(const LineFunction& f, int n, double T) {
    const double ratio = T / f.grid.dx();
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * ratio || static_cast<long>(rounded) % 2 != 0)
        throw IncompatibleSpacing("periodize: T/dx must be an even integer");
    PeriodicGrid grid(T, n, static_cast<int>(rounded));
    const long half_period = static_cast<long>(n) * grid.M() / 2;
    if (f.grid.half_count() < half_period)
        throw DomainTooSmall("periodize: line grid does not cover one full period nT");
    auto out = PeriodicFunction::zeros(grid, f.dim);
    const std::size_t offset = static_cast<std::size_t>(f.grid.half_count() - half_period);
    for (int c = 0; c < f.dim; ++c)
        for (std::size_t j = 0; j < grid.size(); ++j)
            out.at(c, j) = f.at(c, offset + j);
    return out;
}

inline NormTriple norms_periodic(const PeriodicFunction& g, double s = default_sobolev_index) {
    if (s < 0.0)
        throw std::invalid_argument("norms_periodic: Sobolev index must be >= 0");
    NormTriple out;
    out.s = s;
    const std::size_t count = g.grid.size();
    const double dx = g.grid.dx();
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
        const double m = detail::pointwise_modulus(g.values, g.dim, count, j);
        l1 += m;
        l2 += m * m;
    }
    out.l1 = l1 * dx;
    out.l2 = std::sqrt(l2 * dx);
    out.hs = detail::sobolev_norm(g.values, g.dim, count, dx, s);
    return out;
}

inline NormTriple norms_line(const LineFunction& f, double s = default_sobolev_index) {
    if (s < 0.0)
        throw std::invalid_argument("norms_line: Sobolev index must be >= 0");
    NormTriple out;
    out.s = s;
    const std::size_t count = f.grid.size();
    const double dx = f.grid.dx();
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
        const double m = detail::pointwise_modulus(f.values, f.dim, count, j);
        l1 += m;
        l2 += m * m;
    }
    out.l1 = l1 * dx;
    out.l2 = std::sqrt(l2 * dx);
    out.hs = detail::sobolev_norm(f.values, f.dim, count, dx, s);
    return out;
}

inline double l2_norm(const LineFunction& f) {
    double sum = 0.0;
    for (const auto& v : f.values)
        sum += std::norm(v);
    return std::sqrt(sum * f.grid.dx());
}

inline double l2_norm(const PeriodicFunction& g) {
    double sum = 0.0;
    for (const auto& v : g.values)
        sum += std::norm(v);
    return std::sqrt(sum * g.grid.dx());
}

inline double l2_distance(const LineFunction& a, const LineFunction& b) {
    require_same_grid(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        sum += std::norm(a.values[i] - b.values[i]);
    return std::sqrt(sum * a.grid.dx());
}

enum class NormKind { L1, L2, Hs };

/// Table of delta_k = |g~_{n_k} - g| in L1, L2 and H^s.
struct NormConvergenceReport {
    struct Row {
        std::size_t k = 0;
        int n = 0;
        double l1 = 0.0;
        double l2 = 0.0;
        double hs = 0.0;
    };
    NormKind norm = NormKind::L2;
    double s = default_sobolev_index;
    std::vector<Row> rows;
    bool converging = false;

    double delta(std::size_t k) const {
        switch (norm) {
        case NormKind::L1: return rows[k].l1;
        case NormKind::L2: return rows[k].l2;
        case NormKind::Hs: return rows[k].hs;
        }
        return rows[k].l2;
    }
};

namespace detail {

// Non-increasing over the final half of the schedule, up to roundoff.
inline bool tail_non_increasing(const std::vector<double>& d, double scale) {
    if (d.size() < 2)
        return true;
    for (std::size_t k = d.size() / 2; k + 1 < d.size(); ++k)
        if (d[k + 1] > d[k] * (1.0 + 1e-12) + 1e-14 * scale)
            return false;
    return true;
}

} // namespace detail

/// Measures convergence over a period of `seq` to `limit` (Def. of norm
/// convergence through the zero-extension embedding).
inline NormConvergenceReport check_norm_convergence(const std::vector<PeriodicFunction>& seq,
                                                    const LineFunction& limit, NormKind norm = NormKind::L2,
                                                    double s = default_sobolev_index) {
    NormConvergenceReport report;
    report.norm = norm;
    report.s = s;
    for (std::size_t k = 0; k < seq.size(); ++k) {
        if (k > 0 && seq[k].grid.n() <= seq[k - 1].grid.n())
            throw NotIncreasing("check_norm_convergence: period multiples must be strictly increasing");
        const auto diff = zero_extend(seq[k], limit.grid) - limit;
        const auto nt = norms_line(diff, s);
        report.rows.push_back({k, seq[k].grid.n(), nt.l1, nt.l2, nt.hs});
    }
    std::vector<double> deltas;
    for (std::size_t k = 0; k < report.rows.size(); ++k)
        deltas.push_back(report.delta(k));
    const auto ln = norms_line(limit, s);
    const double scale = std::max({ln.l1, ln.l2, ln.hs, deltas.empty() ? 0.0 : deltas.front()});
    report.converging = detail::tail_non_increasing(deltas, scale);
    return report;
}

} // namespace blochconv
