#pragma once

// Convergence of subharmonic solutions to the localized solution, uniformity
// in t, domination diagnostics and Banach-Saks averaging.

#include "blochconv/bloch.hpp"
#include "blochconv/errors.hpp"
#include "blochconv/grids.hpp"
#include "blochconv/semigroup.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace blochconv {

struct Resolution {
    double T = 2.0 * pi;
    int L = default_truncation;
    int n_xi = default_xi_nodes;
    XiRule rule = XiRule::Midpoint;
};

struct InvariantCheck {
    std::string name;
    bool passed = true;
    std::string detail;
};

struct ConvergenceReport {
    std::vector<int> schedule;
    std::vector<double> times;
    // [n index][t index]
    std::vector<std::vector<double>> E;    ///< |v~_n - v|
    std::vector<std::vector<double>> leg1; ///< |v~_n - w_n|
    std::vector<std::vector<double>> leg2; ///< |w_n - v|
    std::vector<double> delta;             ///< |g~_n - g|
    std::vector<double> domination_stat;   ///< per t: |max_n |v~_n||_{L2}
    std::vector<double> semigroup_norm;    ///< per t: estimated |e^{tA}|
    int M = 0;
    int L = 0;
    int n_xi = 0;
    double X = 0.0;
    double T = 0.0;
};

namespace detail {

inline void require_schedule(const std::vector<int>& schedule, const LineGrid& grid, double T) {
    if (schedule.empty())
        throw std::invalid_argument("empty schedule");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        if (schedule[k] < 1)
            throw std::invalid_argument("schedule entries must be >= 1");
        if (k > 0 && schedule[k] <= schedule[k - 1])
            throw NotIncreasing("schedule must be strictly increasing");
        if (0.5 * schedule[k] * T > grid.X() * (1.0 + 1e-12))
            throw ScheduleExceedsDomain("n = " + std::to_string(schedule[k]) + ": nT/2 exceeds the line half-width " +
                                        std::to_string(grid.X()));
    }
}

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline void require_times(const std::vector<double>& times) {
    for (double t : times)
        if (!(t >= 0.0) || !std::isfinite(t))
            throw std::invalid_argument("times must be finite and >= 0");
}

} // namespace detail

/// Largest singular value of exp(t A_xi) over `xi_samples` uniform xi: an
/// estimate of |e^{tA}| on L2.
inline double semigroup_norm_estimate(const OperatorSpec& A, double T, double t, int L = default_truncation,
                                      int xi_samples = 17) {
    std::vector<double> per(static_cast<std::size_t>(xi_samples));
    parallel_for(per.size(), [&](std::size_t k) {
        const double xi = -pi / T + 2.0 * pi / T * (static_cast<double>(k) + 0.5) / xi_samples;
        const auto block = assemble_bloch_block(A, xi, L, T);
        double best = 0.0;
        if (block.block_diagonal) {
            for (int l = -L; l <= L; ++l) {
                const auto i = block.index(l, 0);
                const Eigen::MatrixXcd E = expm(Eigen::MatrixXcd(t * block.matrix.block(i, i, block.dim, block.dim)));
                best = std::max(best, Eigen::JacobiSVD<Eigen::MatrixXcd>(E).singularValues()(0));
            }
        } else {
            const Eigen::MatrixXcd E = expm(Eigen::MatrixXcd(t * block.matrix));
            best = Eigen::JacobiSVD<Eigen::MatrixXcd>(E).singularValues()(0);
        }
        per[k] = best;
    });
    return *std::max_element(per.begin(), per.end());
}

/// Pointwise envelope h(x) = max_n |f_n(x)| (component-wise Euclidean modulus).
inline LineFunction envelope(const std::vector<LineFunction>& family) {
    if (family.empty())
        throw std::invalid_argument("envelope: empty family");
    auto h = LineFunction::zeros(family.front().grid, 1);
    for (const auto& f : family) {
        require_same_grid(f, family.front());
        for (std::size_t j = 0; j < f.grid.size(); ++j)
            h.values[j] = std::max(h.values[j].real(), detail::pointwise_modulus(f.values, f.dim, f.grid.size(), j));
    }
    return h;
}

/// For each n: g_n = periodize(g, n, T), v~_n from the torus evolution, w_n and
/// v from the line evolution of g~_n and g, and the two legs of the triangle
/// split |v~_n - v| <= |v~_n - w_n| + |w_n - v|.
inline ConvergenceReport run_convergence(const OperatorSpec& A, const LineFunction& g, const std::vector<int>& schedule,
                                         const std::vector<double>& times, const Resolution& res = {}) {
    detail::require_schedule(schedule, g.grid, res.T);
    detail::require_times(times);
    ConvergenceReport rep;
    rep.schedule = schedule;
    rep.times = times;
    rep.M = detail::samples_per_period(res.T, g.grid.dx());
    rep.L = res.L;
    rep.n_xi = res.n_xi;
    rep.X = g.grid.X();
    rep.T = res.T;

    const auto v = evolve_line(A, g, res.T, times, res.L, res.n_xi, res.rule);
    std::vector<std::vector<LineFunction>> tilde_v; // [n][t]
    for (int n : schedule) {
        const auto g_n = periodize(g, n, res.T);
        const auto g_tilde = zero_extend(g_n, g.grid);
        rep.delta.push_back(l2_distance(g_tilde, g));
        const auto periodic = evolve_periodic(A, g_n, times, res.L);
        const auto w = evolve_line(A, g_tilde, res.T, times, res.L, res.n_xi, res.rule);
        std::vector<double> e, l1, l2;
        std::vector<LineFunction> row;
        for (std::size_t i = 0; i < times.size(); ++i) {
            auto vn = zero_extend(periodic[i], g.grid);
            e.push_back(l2_distance(vn, v[i]));
            l1.push_back(l2_distance(vn, w[i]));
            l2.push_back(l2_distance(w[i], v[i]));
            row.push_back(std::move(vn));
        }
        rep.E.push_back(std::move(e));
        rep.leg1.push_back(std::move(l1));
        rep.leg2.push_back(std::move(l2));
        tilde_v.push_back(std::move(row));
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        std::vector<LineFunction> family;
        for (auto& row : tilde_v)
            family.push_back(row[i]);
        rep.domination_stat.push_back(l2_norm(envelope(family)));
        rep.semigroup_norm.push_back(times[i] == 0.0 ? 1.0 : semigroup_norm_estimate(A, res.T, times[i], res.L));
    }
    return rep;
}

namespace detail {

inline bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] < v[k - 1]))
            return false;
    return true;
}

} // namespace detail

/// Column E_n(t_i) over the schedule.
inline std::vector<double> error_column(const ConvergenceReport& rep, std::size_t ti) {
    std::vector<double> col;
    for (const auto& row : rep.E)
        col.push_back(row[ti]);
    return col;
}

/// The structural invariants every report must satisfy.
inline std::vector<InvariantCheck> check_invariants(const ConvergenceReport& rep) {
    std::vector<InvariantCheck> out;
    auto add = [&](std::string name, bool ok, std::string detail = {}) {
        out.push_back({std::move(name), ok, std::move(detail)});
    };

    bool nonneg = true;
    for (std::size_t k = 0; k < rep.schedule.size(); ++k) {
        nonneg = nonneg && rep.delta[k] >= 0.0;
        for (std::size_t i = 0; i < rep.times.size(); ++i)
            nonneg = nonneg && rep.E[k][i] >= 0.0 && rep.leg1[k][i] >= 0.0 && rep.leg2[k][i] >= 0.0;
    }
    add("nonnegative", nonneg);

    bool increasing = true;
    for (std::size_t k = 1; k < rep.schedule.size(); ++k)
        increasing = increasing && rep.schedule[k] > rep.schedule[k - 1];
    add("schedule increasing", increasing);

    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rep.schedule.size(); ++k)
        for (std::size_t i = 0; i < rep.times.size(); ++i)
            worst = std::max(worst, rep.E[k][i] - rep.leg1[k][i] - rep.leg2[k][i]);
    add("triangle", worst <= 1e-10, "max E - leg1 - leg2 = " + detail::sci(worst));

    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        if (rep.times[i] != 0.0)
            continue;
        double gap = 0.0;
        for (std::size_t k = 0; k < rep.schedule.size(); ++k)
            gap = std::max(gap, std::abs(rep.E[k][i] - rep.delta[k]));
        add("t = 0 column equals delta", gap <= 1e-12, "max |E_n(0) - delta_n| = " + detail::sci(gap));
    }

    // leg2 = |e^{tA}(g~_n - g)| <= |e^{tA}| delta_n for contractions.
    bool bound = true;
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        if (rep.semigroup_norm[i] > 1.0 + 1e-9)
            continue;
        for (std::size_t k = 0; k < rep.schedule.size(); ++k)
            bound = bound && rep.leg2[k][i] <= rep.semigroup_norm[i] * rep.delta[k] * (1.0 + 1e-6) + 1e-14;
    }
    add("semigroup bound on leg2", bound);

    // E_{next} < E_n for every t over the final half of the schedule.
    bool tail = true;
    for (std::size_t i = 0; i < rep.times.size(); ++i)
        for (std::size_t k = rep.schedule.size() / 2; k + 1 < rep.schedule.size(); ++k)
            tail = tail && rep.E[k + 1][i] < rep.E[k][i];
    add("monotone tail", tail);
    return out;
}

inline bool all_passed(const std::vector<InvariantCheck>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const InvariantCheck& c) { return c.passed; });
}

struct UniformityReport {
    ConvergenceReport base;
    std::vector<double> sup_E;     ///< per n, sup over the t grid
    std::vector<double> sup_leg1;  ///< per n
    std::vector<double> bound;     ///< per n: sup_t |e^{tA}| delta_n + sup_t leg1
    bool decreasing = false;
    bool bounded = false;
};

/// sup_t E_n(t) over a dense t grid, together with the bound through the
/// semigroup norm. Requires a numerically stable operator.
inline UniformityReport run_uniformity(const OperatorSpec& A, const LineFunction& g, const std::vector<int>& schedule,
                                       const std::vector<double>& t_grid, const Resolution& res = {}) {
    const double growth = max_real_eigenvalue(A, res.T, res.L);
    if (growth > 1e-10)
        throw HypothesisViolation("run_uniformity: Bloch blocks have eigenvalues with Re = " + detail::sci(growth) +
                                  " > 0, the semigroup is not bounded");
    UniformityReport out;
    out.base = run_convergence(A, g, schedule, t_grid, res);
    const double norm_sup = *std::max_element(out.base.semigroup_norm.begin(), out.base.semigroup_norm.end());
    out.bounded = true;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        out.sup_E.push_back(*std::max_element(out.base.E[k].begin(), out.base.E[k].end()));
        out.sup_leg1.push_back(*std::max_element(out.base.leg1[k].begin(), out.base.leg1[k].end()));
        out.bound.push_back(norm_sup * out.base.delta[k] + out.sup_leg1.back());
        out.bounded = out.bounded && out.sup_E.back() <= out.bound.back() * (1.0 + 1e-9) + 1e-12;
    }
    out.decreasing = detail::strictly_decreasing(out.sup_E);
    return out;
}

struct DominationReport {
    LineFunction envelope;
    double norm = 0.0;
    double half_norm = 0.0;         ///< envelope norm of the first half of the family
    double relative_increase = 0.0; ///< norm / half_norm - 1
    bool plausible = false;
};

/// Envelope of the family and whether its L2 norm has stopped growing: the
/// increase from the first half of the family to all of it must be <= 1%.
inline DominationReport check_domination(const std::vector<LineFunction>& family) {
    auto h = envelope(family);
    DominationReport rep{h, l2_norm(h), 0.0, 0.0, false};
    const std::vector<LineFunction> half(family.begin(), family.begin() + static_cast<std::ptrdiff_t>((family.size() + 1) / 2));
    rep.half_norm = l2_norm(envelope(half));
    rep.relative_increase = rep.half_norm > 0.0 ? rep.norm / rep.half_norm - 1.0 : (rep.norm > 0.0 ? 1.0 : 0.0);
    rep.plausible = rep.relative_increase <= 0.01;
    return rep;
}

struct BanachSaksAverage {
    LineFunction G;     ///< (1/m) sum_j g~_{n_j}
    PeriodicFunction G_per; ///< n_m-periodic, equal to G on its support
};

/// Average of the first m terms, zero-extended onto `target`.
inline BanachSaksAverage banach_saks_average(const std::vector<PeriodicFunction>& seq, std::size_t m,
                                             const LineGrid& target) {
    if (m < 1 || m > seq.size())
        throw std::invalid_argument("banach_saks_average: need 1 <= m <= sequence length");
    const auto& first = seq.front();
    for (std::size_t j = 0; j < m; ++j) {
        if (seq[j].dim != first.dim || seq[j].grid.M() != first.grid.M() ||
            !detail::same_spacing(seq[j].grid.T(), first.grid.T()))
            throw GridMismatch("banach_saks_average: terms must share T, M and dim");
        if (j > 0 && seq[j].grid.n() <= seq[j - 1].grid.n())
            throw NotIncreasing("banach_saks_average: periods n_j must be strictly increasing");
    }
    auto G = LineFunction::zeros(target, first.dim);
    for (std::size_t j = 0; j < m; ++j) {
        const auto ext = zero_extend(seq[j], target);
        for (std::size_t i = 0; i < G.values.size(); ++i)
            G.values[i] += ext.values[i];
    }
    for (auto& value : G.values)
        value /= static_cast<double>(m);
    auto G_per = periodize(G, seq[m - 1].grid.n(), first.grid.T());
    return {std::move(G), std::move(G_per)};
}

/// g_j = periodize(g + sin(q_j x) chi(x), n_j, T): a weakly null perturbation
/// of g by oscillating bumps.
template <class G, class Chi>
std::vector<PeriodicFunction> make_oscillatory_sequence(G&& g, Chi&& chi, double T, int M, const std::vector<int>& q,
                                                        const std::vector<int>& n) {
    if (q.size() != n.size())
        throw std::invalid_argument("make_oscillatory_sequence: q and n lengths differ");
    std::vector<PeriodicFunction> out;
    for (std::size_t j = 0; j < q.size(); ++j)
        out.push_back(PeriodicFunction::sample(PeriodicGrid(T, n[j], M), [&](double x) {
            return g(x) + std::sin(q[j] * x) * chi(x);
        }));
    return out;
}

struct AveragingReport {
    std::vector<int> m_values;
    std::vector<int> subsequence; ///< n_j used
    std::vector<double> times;
    std::vector<double> strong_errors;             ///< |G_m - g|
    std::vector<std::vector<double>> evolved_errors; ///< [m][t] |V~_m(t) - v(t)|
    bool support_ok = true; ///< zero_extend(G_m_per) == G_m for every m
};

/// Evolves each G_m^per on its n_m T torus and compares its zero extension with
/// the line solution from g.
inline AveragingReport run_averaged_convergence(const OperatorSpec& A, const std::vector<PeriodicFunction>& seq,
                                                const LineFunction& g, const std::vector<int>& m_schedule,
                                                const std::vector<double>& times, const Resolution& res = {}) {
    detail::require_times(times);
    AveragingReport rep;
    rep.m_values = m_schedule;
    rep.times = times;
    for (const auto& s : seq)
        rep.subsequence.push_back(s.grid.n());
    for (std::size_t k = 1; k < m_schedule.size(); ++k)
        if (m_schedule[k] <= m_schedule[k - 1])
            throw NotIncreasing("run_averaged_convergence: m schedule must be strictly increasing");
    if (!m_schedule.empty() && static_cast<std::size_t>(m_schedule.back()) <= seq.size())
        detail::require_schedule({seq[static_cast<std::size_t>(m_schedule.back()) - 1].grid.n()}, g.grid, res.T);

    const auto v = evolve_line(A, g, res.T, times, res.L, res.n_xi, res.rule);
    for (int m : m_schedule) {
        const auto avg = banach_saks_average(seq, static_cast<std::size_t>(m), g.grid);
        rep.support_ok = rep.support_ok && zero_extend(avg.G_per, g.grid).values == avg.G.values;
        rep.strong_errors.push_back(l2_distance(avg.G, g));
        const auto V = evolve_periodic(A, avg.G_per, times, res.L);
        std::vector<double> row;
        for (std::size_t i = 0; i < times.size(); ++i)
            row.push_back(l2_distance(zero_extend(V[i], g.grid), v[i]));
        rep.evolved_errors.push_back(std::move(row));
    }
    return rep;
}

/// Least-squares slope of log(err) against log(m), negated: err ~ C m^{-p}.
struct PowerFit {
    double exponent = 0.0;
    double constant = 0.0;
};

inline PowerFit fit_power_law(const std::vector<int>& m, const std::vector<double>& err) {
    const std::size_t N = m.size();
    if (N < 2 || err.size() != N)
        throw std::invalid_argument("fit_power_law: need at least two matching points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t k = 0; k < N; ++k) {
        const double x = std::log(static_cast<double>(m[k])), y = std::log(err[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (N * sxy - sx * sy) / (N * sxx - sx * sx);
    return {-slope, std::exp((sy - slope * sx) / N)};
}

} // namespace blochconv
