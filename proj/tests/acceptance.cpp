// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "blochconv/experiments.hpp"
#include "blochconv/lle.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace blochconv;

namespace {

const double T = 2.0 * pi;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[violated: " << what << "] ";
        }
    }
};

PeriodicFunction random_periodic(std::mt19937& rng, int n, int M) {
    std::normal_distribution<double> N(0.0, 1.0);
    auto g = PeriodicFunction::zeros(PeriodicGrid(T, n, M), 1);
    for (auto& v : g.values)
        v = cplx(N(rng), N(rng));
    return g;
}

PeriodicFunction band_limited(std::mt19937& rng, int n, int M) {
    std::normal_distribution<double> N(0.0, 1.0);
    const int K = n * M / 2 - 1;
    std::vector<cplx> c(static_cast<std::size_t>(2 * K + 1));
    for (auto& v : c)
        v = cplx(N(rng), N(rng));
    for (int q = -K; q <= K; ++q)
        c[static_cast<std::size_t>(q + K)] /= 1.0 + std::abs(q);
    return PeriodicFunction::sample(PeriodicGrid(T, n, M), 1, [&](double x, int) {
        cplx acc = 0.0;
        for (int q = -K; q <= K; ++q)
            acc += c[static_cast<std::size_t>(q + K)] * std::polar(1.0, 2.0 * pi * q * x / (n * T));
        return acc;
    });
}

LineFunction on_line(double X, int M, const std::function<double(double)>& f) {
    return LineFunction::sample(LineGrid::covering(X, T / M), [&](double x) { return f(x); });
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// ---- polynomial oracle for the bump (1 - (x/a)^2)^p on [-a, a] ----

using Poly = std::vector<long double>; // coefficients in u = x / a

Poly bump_poly(int p) {
    Poly out(static_cast<std::size_t>(2 * p + 1), 0.0L);
    long double binom = 1.0L;
    for (int k = 0; k <= p; ++k) {
        out[static_cast<std::size_t>(2 * k)] = (k % 2 ? -binom : binom);
        binom = binom * (p - k) / (k + 1);
    }
    return out;
}

Poly derivative(const Poly& p) {
    Poly out(p.size() > 1 ? p.size() - 1 : 1, 0.0L);
    for (std::size_t k = 1; k < p.size(); ++k)
        out[k - 1] = p[k] * static_cast<long double>(k);
    return out;
}

long double integral_of_square(const Poly& p) {
    long double sum = 0.0L;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j)
            if ((i + j) % 2 == 0)
                sum += p[i] * p[j] * 2.0L / static_cast<long double>(i + j + 1);
    return sum;
}

// |f|_{H^m}^2 = sum_j C(m, j) |f^{(j)}|^2 with f(x) = P(x / a).
double bump_sobolev_sq(double a, int p, int m) {
    Poly d = bump_poly(p);
    long double total = 0.0L, binom = 1.0L;
    for (int j = 0; j <= m; ++j) {
        total += binom * integral_of_square(d) * a / std::pow(static_cast<long double>(a), 2 * j);
        binom = binom * (m - j) / (j + 1);
        d = derivative(d);
    }
    return static_cast<double>(total);
}

double bump_mass(double a, int p) {
    long double sum = 0.0L;
    const Poly q = bump_poly(p);
    for (std::size_t k = 0; k < q.size(); k += 2)
        sum += q[k] * 2.0L / static_cast<long double>(k + 1);
    return static_cast<double>(sum * a);
}

// ---- criteria ----

Outcome c1_norm_equality() {
    Outcome o;
    std::mt19937 rng(101);
    double worst = 0.0;
    const int ns[] = {1, 2, 4, 8};
    for (int k = 0; k < 100; ++k) {
        const int n = ns[k % 4];
        const auto g = random_periodic(rng, n, 32);
        const auto ext = zero_extend(g, LineGrid::covering(n * T / 2.0 + 5.0, g.grid.dx()));
        worst = std::max(worst, std::abs(l2_norm(g) - l2_norm(ext)) / l2_norm(g));
    }
    o.detail << "max rel diff " << worst << "; ";
    o.require(worst <= 1e-12, "rel diff <= 1e-12");
    return o;
}

Outcome c2_round_trips() {
    Outcome o;
    std::mt19937 rng(202);
    double torus = 0.0, line_bl = 0.0, line_gauss = 0.0;
    for (int n : {1, 2, 4, 8}) {
        for (int rep = 0; rep < 3; ++rep) {
            const auto g = band_limited(rng, n, 16);
            torus = std::max(torus, l2_norm(inverse_bloch_torus(bloch_torus(g)) - g) / l2_norm(g));
            const auto f = zero_extend(g, LineGrid::covering(n * T / 2.0 + 3.0, g.grid.dx()));
            line_bl = std::max(line_bl, l2_distance(inverse_bloch_line(bloch_line(f, T, 256)), f) / l2_norm(f));
        }
    }
    for (double width : {0.5, 1.0, 2.0}) {
        const auto f = on_line(40.0, 64, [&](double x) { return std::exp(-x * x / (width * width)); });
        for (auto rule : {XiRule::Midpoint, XiRule::Trapezoid})
            line_gauss =
                std::max(line_gauss, l2_distance(inverse_bloch_line(bloch_line(f, T, 256, rule)), f) / l2_norm(f));
    }
    o.detail << "torus " << torus << ", line band-limited " << line_bl << ", line Gaussian " << line_gauss << "; ";
    o.require(torus <= 1e-10, "torus band-limited <= 1e-10");
    o.require(line_bl <= 1e-10, "line band-limited <= 1e-10");
    o.require(line_gauss <= 1e-8, "line Gaussian <= 1e-8");
    return o;
}

Outcome c3_blochs_equal() {
    Outcome o;
    std::mt19937 rng(303);
    double worst = 0.0;
    for (int n : {1, 2, 3, 4, 5, 8, 12, 16}) {
        const auto g = band_limited(rng, n, 16);
        const auto rep = check_blochs_equal(g, LineGrid::covering(n * T / 2.0 + 2.0, g.grid.dx()));
        worst = std::max(worst, rep.relative());
    }
    o.detail << "max relative discrepancy " << worst << "; ";
    o.require(worst <= 1e-10, "relative <= 1e-10");
    return o;
}

Outcome c4_sup_bound() {
    Outcome o;
    const double s = 3.0;
    // tail constant: 2 (T/pi)^s (1 - 2^-s) zeta(s)
    const double tail_oracle = 2.0 * std::pow(T / pi, s) * (1.0 - std::pow(2.0, -s)) * std::riemann_zeta(s);

    struct Datum {
        std::string name;
        LineFunction f;
        double fhat_inf, hs1;
    };
    const double a = 3.0;
    const int p = 10;
    std::vector<Datum> data;
    // Gaussian e^{-x^2}: fhat = sqrt(pi) e^{-k^2/4}; |f|_{H^4}^2 = sqrt(pi/2) sum_j C(4,j) (2j-1)!!.
    data.push_back({"gaussian", on_line(40.0, 64, [](double x) { return std::exp(-x * x); }), std::sqrt(pi),
                    std::sqrt(std::sqrt(pi / 2.0) * (1.0 + 4.0 + 6.0 * 3.0 + 4.0 * 15.0 + 105.0))});
    data.push_back({"bump", on_line(40.0, 64, [&](double x) {
                        return std::abs(x) < a ? std::pow(1.0 - (x / a) * (x / a), p) : 0.0;
                    }),
                    bump_mass(a, p), std::sqrt(bump_sobolev_sq(a, p, 4))});

    for (const auto& d : data) {
        const auto b = bloch_sup_bound(d.f, T, s, 20000, 64);
        const double e1 = rel(b.l_infty_fhat, d.fhat_inf), e2 = rel(b.hs1_norm, d.hs1),
                     e3 = rel(b.tail_constant, tail_oracle);
        o.detail << d.name << ": sampled " << b.sampled_max << " <= bound " << b.sup_bound << ", oracle rel errs "
                 << e1 << "/" << e2 << "/" << e3 << "; ";
        o.require(b.holds && b.sampled_max <= b.sup_bound, d.name + " sampled sup <= bound");
        o.require(e1 <= 1e-8 && e2 <= 1e-8 && e3 <= 1e-8, d.name + " components match oracles to 1e-8");
    }
    return o;
}

Outcome c5_heat_exactness() {
    Outcome o;
    const auto f = on_line(40.0, 64, [](double x) { return std::exp(-x * x); });
    const std::vector<double> times = {0.5, 1.0, 2.0};
    const auto v = evolve_line(OperatorSpec::heat(), f, T, times, default_truncation, 256);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double t = times[i];
        const auto exact = LineFunction::sample(f.grid, [&](double x) {
            return std::exp(-x * x / (1.0 + 4.0 * t)) / std::sqrt(1.0 + 4.0 * t);
        });
        const double err = l2_distance(v[i], exact);
        o.detail << "t=" << t << ": " << err << "; ";
        o.require(err <= 1e-6, "L2 error <= 1e-6");
    }
    return o;
}

// Wide Gaussian datum shared by criteria 6 and 7.
LineFunction heat_datum() {
    return on_line(100.0, 64, [](double x) { return std::exp(-x * x / 144.0); });
}

const std::vector<int> schedule = {1, 2, 4, 8, 16};

Outcome c6_convergence() {
    Outcome o;
    const auto rep = run_convergence(OperatorSpec::heat(), heat_datum(), schedule, {0.0, 0.5, 1.0});
    for (std::size_t i = 0; i < rep.times.size(); ++i) {
        const auto col = error_column(rep, i);
        bool dec = true;
        for (std::size_t k = 1; k < col.size(); ++k)
            dec = dec && col[k] < col[k - 1];
        o.require(dec, "E_n strictly decreasing at t=" + std::to_string(rep.times[i]));
    }
    const double ratio = rep.E.back()[2] / rep.E.front()[2];
    o.detail << "E_16(1)/E_1(1) = " << ratio << "; ";
    o.require(ratio <= 0.05, "E_16(1) <= 0.05 E_1(1)");
    double gap = 0.0, triangle = -1.0;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        gap = std::max(gap, std::abs(rep.E[k][0] - rep.delta[k]));
        for (std::size_t i = 0; i < rep.times.size(); ++i)
            triangle = std::max(triangle, rep.E[k][i] - rep.leg1[k][i] - rep.leg2[k][i]);
    }
    o.detail << "|E(0) - delta| " << gap << ", max(E - leg1 - leg2) " << triangle << "; ";
    o.require(gap <= 1e-12, "t=0 column equals delta_n to 1e-12");
    o.require(triangle <= 0.0, "triangle-leg inequality");
    return o;
}

Outcome c7_uniformity() {
    Outcome o;
    std::vector<double> t_grid;
    for (int k = 0; k <= 40; ++k)
        t_grid.push_back(0.1 * k);
    const auto rep = run_uniformity(OperatorSpec::heat(), heat_datum(), schedule, t_grid);
    o.require(rep.decreasing, "sup_t E_n decreasing in n");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const double excess = rep.sup_E[k] - rep.base.delta[k];
        o.detail << "n=" << schedule[k] << ": sup E " << rep.sup_E[k] << " delta " << rep.base.delta[k] << "; ";
        o.require(excess <= 1e-4, "sup_t E_n <= delta_n + 1e-4 at n=" + std::to_string(schedule[k]));
    }
    return o;
}

int discriminant_root_count(double alpha, double F) {
    const double b = -2.0 * alpha, c = 1.0 + alpha * alpha, d = -F * F;
    const double disc = 18.0 * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * c * c * c - 27.0 * d * d;
    return disc > 0.0 ? 3 : 1;
}

Outcome c8_constant_states() {
    Outcome o;
    std::mt19937 rng(808);
    std::uniform_real_distribution<double> A(-1.0, 5.0), Fd(0.2, 3.0);
    double worst = 0.0;
    int bistable = 0;
    for (int k = 0; k < 20; ++k) {
        const double alpha = A(rng), F = Fd(rng);
        const auto states = lle::solve_constant_state({alpha, -1.0, F, T});
        const int expected = discriminant_root_count(alpha, F);
        bistable += expected == 3;
        o.require(static_cast<int>(states.size()) == expected, "root count at alpha=" + std::to_string(alpha) +
                                                                   " F=" + std::to_string(F));
        for (const auto& s : states)
            worst = std::max(worst, s.residual);
    }
    o.detail << "max residual " << worst << ", " << bistable << " of 20 pairs bistable; ";
    o.require(worst <= 1e-12, "residual <= 1e-12");
    return o;
}

lle::PeriodicWave stable_wave() {
    const lle::LLEParams p{1.0, -1.0, 1.05, T};
    auto guess = lle::solve_constant_state(p, 64).front().phi;
    for (int c = 0; c < 2; ++c)
        for (std::size_t j = 0; j < guess.grid.size(); ++j)
            guess.at(c, j) += 0.3 * std::cos(guess.grid.x(j));
    return lle::solve_profile(p, guess);
}

Outcome c9_linearization() {
    Outcome o;
    const auto wave = stable_wave();
    const auto L = lle::self_adjoint_part(wave);
    double herm = 0.0, spec = 0.0;
    for (int k = 0; k < 33; ++k) {
        const double xi = -pi / T + 2.0 * pi / T * k / 32.0;
        const auto block = assemble_bloch_block(L, std::min(xi, pi / T), 32, T);
        herm = std::max(herm, (block.matrix - block.matrix.adjoint()).cwiseAbs().maxCoeff());
    }
    for (double beta : {-1.0, 1.0}) {
        const auto zero = lle::zero_wave({0.7, beta, 1.0, T}, 16);
        for (int k = 0; k < 33; ++k) {
            const double xi = -pi / T + 2.0 * pi / T * k / 32.0;
            auto computed = lle::bloch_spectrum(zero, xi, 8);
            std::vector<cplx> oracle;
            for (int l = -8; l <= 8; ++l) {
                const double kk = xi + 2.0 * pi * l / T;
                oracle.emplace_back(-1.0, beta * kk * kk - 0.7);
                oracle.emplace_back(-1.0, -(beta * kk * kk - 0.7));
            }
            if (computed.size() != oracle.size()) {
                spec = std::numeric_limits<double>::infinity();
                continue;
            }
            for (const auto& z : oracle) {
                auto it = std::min_element(computed.begin(), computed.end(),
                                           [&](cplx u, cplx v) { return std::abs(u - z) < std::abs(v - z); });
                spec = std::max(spec, std::abs(*it - z) / std::max(1.0, std::abs(z)));
                computed.erase(it);
            }
        }
    }
    o.detail << "max |L - L^*| " << herm << ", max rel spectrum mismatch " << spec << "; ";
    o.require(herm <= 1e-12, "L block Hermitian to 1e-12");
    o.require(spec <= 1e-12, "phi=0 spectrum matches closed form");
    return o;
}

Outcome c10_condition3() {
    Outcome o;
    const auto wave = stable_wave();
    o.require(wave.converged, "Newton converged");
    std::vector<cplx> lambdas;
    for (int L : {32, 64}) {
        lle::StabilityOptions opts;
        opts.L = L;
        opts.xi_samples = 3;
        const auto v = lle::stability_check(wave, opts);
        lambdas.push_back(v.lambda0);
        o.detail << "L=" << L << ": |lambda0| " << v.cond3_zero_eig_error << " alignment " << v.alignment << " gap "
                 << v.gap << "; ";
        o.require(v.cond3_zero_eig_error <= 1e-6, "|lambda0| <= 1e-6 at L=" + std::to_string(L));
        o.require(v.alignment >= 0.999, "alignment >= 0.999 at L=" + std::to_string(L));
    }
    o.detail << "|lambda0(32) - lambda0(64)| " << std::abs(lambdas[0] - lambdas[1]) << "; ";
    o.require(std::abs(lambdas[0] - lambdas[1]) <= 1e-6, "stable under doubling L");
    return o;
}

Outcome c11_averaging() {
    Outcome o;
    const int M = 256;
    auto g = [](double x) { return std::exp(-x * x); };
    auto chi = [](double x) { return std::exp(-x * x / 32.0); };
    std::vector<int> q, n;
    for (int j = 1; j <= 64; ++j) {
        q.push_back(j);
        n.push_back(8 + j);
    }
    const auto seq = make_oscillatory_sequence(g, chi, T, M, q, n);
    const auto line = on_line(n.back() * T / 2.0, M, g);
    const std::vector<int> ms = {4, 8, 16, 32, 64};
    const auto rep = run_averaged_convergence(OperatorSpec::heat(), seq, line, ms, {1.0}, {T, M / 2, 256});

    const double C = std::sqrt(2.0 * std::sqrt(pi)); // |chi|_2 / sqrt 2
    bool dec = true;
    double worst_scaled = 0.0;
    for (std::size_t k = 0; k < ms.size(); ++k) {
        if (k > 0)
            dec = dec && rep.strong_errors[k] < rep.strong_errors[k - 1];
        worst_scaled = std::max(worst_scaled, rep.strong_errors[k] * std::sqrt(ms[k]));
    }
    const auto fit = fit_power_law(ms, rep.strong_errors);
    bool evolved_dec = true;
    for (std::size_t k = ms.size() / 2 + 1; k < ms.size(); ++k)
        evolved_dec = evolved_dec && rep.evolved_errors[k][0] < rep.evolved_errors[k - 1][0];
    o.detail << "fitted exponent " << fit.exponent << ", max sqrt(m)|G_m - g| " << worst_scaled << " vs C " << C
             << ", evolved";
    for (const auto& row : rep.evolved_errors)
        o.detail << " " << row[0];
    o.detail << "; ";
    o.require(rep.support_ok, "G_m^per agrees with G_m");
    o.require(dec, "|G_m - g| decreasing");
    o.require(worst_scaled <= 1.1 * C, "|G_m - g| <= C / sqrt(m)");
    o.require(fit.exponent >= 0.4 && fit.exponent <= 0.6, "fitted exponent in [0.4, 0.6]");
    o.require(evolved_dec, "evolved errors decreasing over the final half");
    return o;
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s; // <= 0: no runtime clause
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "norm equality under zero extension", 1.0, c1_norm_equality},
        {2, "Bloch round trips", 10.0, c2_round_trips},
        {3, "torus and line Bloch transforms agree on Omega_n", 0.0, c3_blochs_equal},
        {4, "uniform Bloch sup bound", 0.0, c4_sup_bound},
        {5, "heat semigroup matches the heat kernel", 30.0, c5_heat_exactness},
        {6, "periodic-to-line convergence at fixed t", 300.0, c6_convergence},
        {7, "uniformity in t for a contraction semigroup", 0.0, c7_uniformity},
        {8, "LLE constant states", 0.0, c8_constant_states},
        {9, "LLE linearization structure", 0.0, c9_linearization},
        {10, "LLE zero eigenvalue and translation mode", 0.0, c10_condition3},
        {11, "Banach-Saks averaging", 300.0, c11_averaging},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_s > 0.0 && secs > c.budget_s) {
            o.pass = false;
            o.detail << "[violated: runtime budget " << c.budget_s << " s] ";
        }
        failures += !o.pass;
        std::printf("%s criterion %2d: %s (%.2f s) %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
