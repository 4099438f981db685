// blochconv command line: Bloch transforms, semigroup evolution, LLE waves and
// the convergence experiments. JSON in, JSON or CSV out.

#include "blochconv/experiments.hpp"
#include "blochconv/io.hpp"
#include "blochconv/lle.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace bc = blochconv;
using bc::io::json;

namespace {

bc::XiRule parse_rule(const std::string& s) {
    if (s == "midpoint")
        return bc::XiRule::Midpoint;
    if (s == "trapezoid")
        return bc::XiRule::Trapezoid;
    if (s == "gauss")
        return bc::XiRule::Gauss;
    throw CLI::ValidationError("--rule", "expected midpoint, trapezoid or gauss");
}

bc::LineFunction read_line(const std::string& path) {
    auto f = bc::io::function_from_json(bc::io::read_json_file(path));
    if (auto* line = std::get_if<bc::LineFunction>(&f))
        return *line;
    throw std::invalid_argument(path + ": expected a line function");
}

void emit_json(const std::string& out, const json& j) { bc::io::write_text(out, j.dump(2) + "\n"); }

void write_plot_dir(const std::string& dir, const std::string& name, const std::string& csv) {
    std::filesystem::create_directories(dir);
    bc::io::write_text((std::filesystem::path(dir) / name).string(), csv);
}

void report_checks(const std::vector<bc::InvariantCheck>& checks) {
    for (const auto& c : checks)
        std::cerr << (c.passed ? "ok   " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")")
                  << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bloch decompositions, subharmonic-to-localized convergence and LLE stability"};
    app.require_subcommand(1);
    int exit_code = 0;

    // Shared resolution options.
    double T = 2.0 * bc::pi;
    int L = bc::default_truncation;
    int n_xi = bc::default_xi_nodes;
    std::string rule = "midpoint";
    std::string out = "-";
    std::string plot_dir;
    auto add_resolution = [&](CLI::App* cmd) {
        cmd->add_option("--T", T, "base period")->capture_default_str();
        cmd->add_option("--L", L, "Fourier modes per Bloch block are -L..L")->capture_default_str();
        cmd->add_option("--nxi", n_xi, "xi quadrature nodes for line transforms")->capture_default_str();
        cmd->add_option("--rule", rule, "midpoint | trapezoid | gauss")->capture_default_str();
        cmd->add_option("-o,--out", out, "output file, - for stdout")->capture_default_str();
    };

    // gen-datum / gen-operator: small generators for quick experiments.
    auto* gen_datum = app.add_subcommand("gen-datum", "sample a Gaussian exp(-x^2/sigma^2) as line function JSON");
    double sigma = 1.0, X = 40.0;
    int M = 64;
    gen_datum->add_option("--sigma", sigma)->capture_default_str();
    gen_datum->add_option("--X", X, "minimum half-width")->capture_default_str();
    gen_datum->add_option("--M", M, "samples per period T")->capture_default_str();
    gen_datum->add_option("--T", T)->capture_default_str();
    gen_datum->add_option("-o,--out", out);

    auto* gen_op = app.add_subcommand("gen-operator", "emit operator JSON: heat, transport or zero");
    std::string op_kind = "heat";
    double coef = 1.0;
    gen_op->add_option("kind", op_kind)->check(CLI::IsMember({"heat", "transport", "zero"}));
    gen_op->add_option("--coef", coef, "diffusivity or speed")->capture_default_str();
    gen_op->add_option("-o,--out", out);

    auto* bloch = app.add_subcommand("bloch", "Bloch transform of a function JSON");
    std::string function_path;
    bloch->add_option("function", function_path)->required()->check(CLI::ExistingFile);
    add_resolution(bloch);

    auto* evolve = app.add_subcommand("evolve", "evolve a function under exp(tA)");
    std::string operator_path;
    std::vector<double> times{1.0};
    evolve->add_option("--operator", operator_path)->required()->check(CLI::ExistingFile);
    evolve->add_option("--function", function_path)->required()->check(CLI::ExistingFile);
    evolve->add_option("--times", times)->delimiter(',')->capture_default_str();
    add_resolution(evolve);

    bc::lle::LLEParams params;
    auto add_params = [&](CLI::App* cmd) {
        cmd->add_option("--alpha", params.alpha)->capture_default_str();
        cmd->add_option("--beta", params.beta)->capture_default_str();
        cmd->add_option("--F", params.F)->capture_default_str();
        cmd->add_option("--T", params.T)->capture_default_str();
        cmd->add_option("-o,--out", out);
    };

    auto* lle_const = app.add_subcommand("lle-constant", "all constant solutions");
    add_params(lle_const);
    lle_const->add_option("--M", M)->capture_default_str();

    auto* lle_prof = app.add_subcommand("lle-profile", "Newton solve for a periodic wave from a seeded guess");
    add_params(lle_prof);
    double seed = 0.3;
    int root = 0;
    std::string guess_path;
    lle_prof->add_option("--M", M)->capture_default_str();
    lle_prof->add_option("--seed", seed, "cos(2 pi x / T) amplitude added to both components")->capture_default_str();
    lle_prof->add_option("--root", root, "which constant state to seed from (ascending |psi|^2)")->capture_default_str();
    lle_prof->add_option("--guess", guess_path, "wave JSON to start from instead")->check(CLI::ExistingFile);

    std::string wave_path;
    auto* lle_spec = app.add_subcommand("lle-spectrum", "eigenvalues of A_xi[phi]");
    double xi = 0.0;
    lle_spec->add_option("--wave", wave_path)->required()->check(CLI::ExistingFile);
    lle_spec->add_option("--xi", xi)->capture_default_str();
    lle_spec->add_option("--L", L)->capture_default_str();
    lle_spec->add_option("-o,--out", out);

    auto* lle_stab = app.add_subcommand("lle-stability", "diffusive spectral stability verdict");
    bc::lle::StabilityOptions stab;
    std::string csv_path;
    lle_stab->add_option("--wave", wave_path)->required()->check(CLI::ExistingFile);
    lle_stab->add_option("--xi-samples", stab.xi_samples)->capture_default_str();
    lle_stab->add_option("--L", stab.L)->capture_default_str();
    lle_stab->add_option("--csv", csv_path, "(xi, max Re lambda) table");
    lle_stab->add_option("-o,--out", out);

    std::string datum_path;
    std::vector<int> schedule{1, 2, 4, 8, 16};
    auto add_experiment = [&](CLI::App* cmd) {
        cmd->add_option("--operator", operator_path)->required()->check(CLI::ExistingFile);
        cmd->add_option("--datum", datum_path)->required()->check(CLI::ExistingFile);
        cmd->add_option("--schedule", schedule)->delimiter(',')->capture_default_str();
        cmd->add_option("--plot-data", plot_dir, "directory for (x, y) series files");
        add_resolution(cmd);
    };

    auto* converge = app.add_subcommand("converge", "E_n(t) table over a schedule of periods");
    add_experiment(converge);
    times = {0.0, 0.5, 1.0};
    converge->add_option("--times", times)->delimiter(',')->capture_default_str();

    auto* uniformity = app.add_subcommand("uniformity", "sup over a dense t grid of E_n(t)");
    add_experiment(uniformity);
    double t_max = 4.0;
    int nt = 41;
    uniformity->add_option("--tmax", t_max)->capture_default_str();
    uniformity->add_option("--nt", nt)->capture_default_str();

    auto* average = app.add_subcommand("average", "Banach-Saks averages of an oscillatory weakly null sequence");
    std::vector<int> m_values{4, 8, 16, 32, 64};
    double chi_width = 4.0, t_avg = 1.0;
    int n0 = 8;
    average->add_option("--operator", operator_path)->required()->check(CLI::ExistingFile);
    average->add_option("--datum", datum_path)->required()->check(CLI::ExistingFile);
    average->add_option("--m", m_values)->delimiter(',')->capture_default_str();
    average->add_option("--n0", n0, "term j has period (n0 + j) T and frequency j")->capture_default_str();
    average->add_option("--chi-width", chi_width, "bump exp(-x^2/w^2)")->capture_default_str();
    average->add_option("--t", t_avg)->capture_default_str();
    average->add_option("--plot-data", plot_dir);
    add_resolution(average);

    auto* domination = app.add_subcommand("domination", "envelope of a family of line functions");
    std::vector<std::string> family_paths;
    domination->add_option("family", family_paths)->required()->check(CLI::ExistingFile);
    domination->add_option("-o,--out", out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen_datum) {
            const auto grid = bc::LineGrid::covering(X, T / M);
            emit_json(out, bc::io::to_json(bc::LineFunction::sample(
                               grid, [&](double x) { return std::exp(-x * x / (sigma * sigma)); })));
        } else if (*gen_op) {
            const auto A = op_kind == "heat"        ? bc::OperatorSpec::heat(coef)
                           : op_kind == "transport" ? bc::OperatorSpec::transport(coef)
                                                    : bc::OperatorSpec::zero();
            emit_json(out, bc::io::to_json(A));
        } else if (*bloch) {
            auto f = bc::io::function_from_json(bc::io::read_json_file(function_path));
            if (auto* g = std::get_if<bc::PeriodicFunction>(&f))
                emit_json(out, bc::io::to_json(bc::bloch_torus(*g)));
            else
                emit_json(out, bc::io::to_json(bc::bloch_line(std::get<bc::LineFunction>(f), T, n_xi, parse_rule(rule))));
        } else if (*evolve) {
            const auto A = bc::io::operator_from_json(bc::io::read_json_file(operator_path));
            auto f = bc::io::function_from_json(bc::io::read_json_file(function_path));
            json arr = json::array();
            if (auto* g = std::get_if<bc::PeriodicFunction>(&f)) {
                const auto v = bc::evolve_periodic(A, *g, times, L);
                for (std::size_t i = 0; i < times.size(); ++i)
                    arr.push_back({{"t", times[i]}, {"function", bc::io::to_json(v[i])}});
            } else {
                const auto v = bc::evolve_line(A, std::get<bc::LineFunction>(f), T, times, L, n_xi, parse_rule(rule));
                for (std::size_t i = 0; i < times.size(); ++i)
                    arr.push_back({{"t", times[i]}, {"function", bc::io::to_json(v[i])}});
            }
            emit_json(out, arr);
        } else if (*lle_const) {
            json arr = json::array();
            for (const auto& w : bc::lle::solve_constant_state(params, M))
                arr.push_back(bc::io::to_json(w));
            emit_json(out, arr);
        } else if (*lle_prof) {
            bc::PeriodicFunction guess = bc::lle::constant_profile(0.0, params.T, M);
            if (!guess_path.empty()) {
                guess = bc::io::wave_from_json(bc::io::read_json_file(guess_path)).phi;
            } else {
                const auto states = bc::lle::solve_constant_state(params, M);
                const auto& base = states.at(static_cast<std::size_t>(std::clamp(root, 0, static_cast<int>(states.size()) - 1)));
                guess = base.phi;
                for (int c = 0; c < 2; ++c)
                    for (std::size_t j = 0; j < guess.grid.size(); ++j)
                        guess.at(c, j) += seed * std::cos(2.0 * bc::pi * guess.grid.x(j) / params.T);
            }
            const auto wave = bc::lle::solve_profile(params, guess);
            emit_json(out, bc::io::to_json(wave));
            if (!wave.converged) {
                std::cerr << "Newton did not converge; residual " << wave.residual << '\n';
                exit_code = 1;
            }
        } else if (*lle_spec) {
            const auto wave = bc::io::wave_from_json(bc::io::read_json_file(wave_path));
            json arr = json::array();
            for (const auto& ev : bc::lle::bloch_spectrum(wave, xi, L))
                arr.push_back({ev.real(), ev.imag()});
            emit_json(out, {{"xi", xi}, {"L", L}, {"eigenvalues", arr}});
        } else if (*lle_stab) {
            const auto wave = bc::io::wave_from_json(bc::io::read_json_file(wave_path));
            const auto verdict = bc::lle::stability_check(wave, stab);
            emit_json(out, bc::io::to_json(verdict));
            if (!csv_path.empty())
                bc::io::write_text(csv_path, bc::io::stability_csv(verdict));
        } else if (*converge) {
            const auto A = bc::io::operator_from_json(bc::io::read_json_file(operator_path));
            const auto g = read_line(datum_path);
            const bc::Resolution res{T, L, n_xi, parse_rule(rule)};
            const auto rep = bc::run_convergence(A, g, schedule, times, res);
            bc::io::write_text(out, bc::io::convergence_csv(rep));
            const auto checks = bc::check_invariants(rep);
            report_checks(checks);
            if (!plot_dir.empty())
                for (std::size_t i = 0; i < rep.times.size(); ++i) {
                    std::vector<double> n(rep.schedule.begin(), rep.schedule.end());
                    write_plot_dir(plot_dir, "E_vs_n_t" + std::to_string(i) + ".csv",
                                   bc::io::series_csv("n", "E", n, bc::error_column(rep, i)));
                }
            exit_code = bc::all_passed(checks) ? 0 : 1;
        } else if (*uniformity) {
            const auto A = bc::io::operator_from_json(bc::io::read_json_file(operator_path));
            const auto g = read_line(datum_path);
            std::vector<double> grid;
            for (int i = 0; i < nt; ++i)
                grid.push_back(t_max * i / std::max(1, nt - 1));
            const auto rep = bc::run_uniformity(A, g, schedule, grid, {T, L, n_xi, parse_rule(rule)});
            std::ostringstream os;
            os << std::setprecision(17) << "n,sup_E,delta_n,sup_leg1,bound\n";
            for (std::size_t k = 0; k < schedule.size(); ++k)
                os << schedule[k] << ',' << rep.sup_E[k] << ',' << rep.base.delta[k] << ',' << rep.sup_leg1[k] << ','
                   << rep.bound[k] << '\n';
            bc::io::write_text(out, os.str());
            auto checks = bc::check_invariants(rep.base);
            checks.push_back({"sup_t E_n decreasing", rep.decreasing, {}});
            checks.push_back({"sup_t E_n within semigroup bound", rep.bounded, {}});
            report_checks(checks);
            if (!plot_dir.empty())
                for (std::size_t k = 0; k < schedule.size(); ++k)
                    write_plot_dir(plot_dir, "E_vs_t_n" + std::to_string(schedule[k]) + ".csv",
                                   bc::io::series_csv("t", "E", grid, rep.base.E[k]));
            exit_code = bc::all_passed(checks) ? 0 : 1;
        } else if (*average) {
            const auto A = bc::io::operator_from_json(bc::io::read_json_file(operator_path));
            const auto g = read_line(datum_path);
            const int count = *std::max_element(m_values.begin(), m_values.end());
            const int Mp = bc::detail::samples_per_period(T, g.grid.dx());
            std::vector<bc::PeriodicFunction> seq;
            for (int j = 1; j <= count; ++j) {
                auto pert = g;
                for (std::size_t i = 0; i < pert.grid.size(); ++i) {
                    const double x = pert.grid.x(i);
                    pert.values[i] += std::sin(j * x) * std::exp(-x * x / (chi_width * chi_width));
                }
                seq.push_back(bc::periodize(pert, n0 + j, T));
            }
            const std::vector<double> ts{t_avg};
            const auto rep = bc::run_averaged_convergence(A, seq, g, m_values, ts, {T, L, n_xi, parse_rule(rule)});
            (void)Mp;
            std::ostringstream os;
            os << std::setprecision(17) << "m,n_m,strong_error,evolved_error\n";
            for (std::size_t k = 0; k < m_values.size(); ++k)
                os << m_values[k] << ',' << rep.subsequence[static_cast<std::size_t>(m_values[k]) - 1] << ','
                   << rep.strong_errors[k] << ',' << rep.evolved_errors[k][0] << '\n';
            bc::io::write_text(out, os.str());
            const auto fit = bc::fit_power_law(m_values, rep.strong_errors);
            std::cerr << "fitted |G_m - g| ~ " << fit.constant << " m^-" << fit.exponent << '\n';
            if (!plot_dir.empty()) {
                std::vector<double> mv(m_values.begin(), m_values.end());
                write_plot_dir(plot_dir, "strong_error.csv", bc::io::series_csv("m", "error", mv, rep.strong_errors));
            }
            exit_code = rep.support_ok ? 0 : 1;
        } else if (*domination) {
            std::vector<bc::LineFunction> family;
            for (const auto& p : family_paths)
                family.push_back(read_line(p));
            const auto rep = bc::check_domination(family);
            emit_json(out, {{"envelope_norm", rep.norm},
                            {"half_family_norm", rep.half_norm},
                            {"relative_increase", rep.relative_increase},
                            {"plausible", rep.plausible},
                            {"envelope", bc::io::to_json(rep.envelope)}});
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return exit_code;
}
