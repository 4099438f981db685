#pragma once

// JSON documents for functions, Bloch families, operators, waves and
// stability verdicts; CSV tables for norm, convergence and spectrum sweeps.

#include "blochconv/bloch.hpp"
#include "blochconv/experiments.hpp"
#include "blochconv/grids.hpp"
#include "blochconv/lle.hpp"
#include "blochconv/semigroup.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace blochconv::io {

using nlohmann::json;

namespace detail {

inline json complex_array(std::span<const cplx> values) {
    json arr = json::array();
    for (const auto& v : values)
        arr.push_back({v.real(), v.imag()});
    return arr;
}

inline std::vector<cplx> read_complex_array(const json& arr) {
    std::vector<cplx> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (v.is_number())
            out.emplace_back(v.get<double>(), 0.0);
        else
            out.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    }
    return out;
}

inline json matrix(const Eigen::MatrixXcd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(row);
    }
    return rows;
}

// Accepts a scalar (1x1), a flat d*d list, or nested rows; entries real or [re, im].
inline Eigen::MatrixXcd read_matrix(const json& j, int dim) {
    Eigen::MatrixXcd m(dim, dim);
    auto entry = [](const json& e) {
        return e.is_number() ? cplx(e.get<double>(), 0.0) : cplx(e.at(0).get<double>(), e.at(1).get<double>());
    };
    if (j.is_number()) {
        if (dim != 1)
            throw std::invalid_argument("scalar matrix entry requires dim = 1");
        m(0, 0) = j.get<double>();
        return m;
    }
    const auto d = static_cast<std::size_t>(dim);
    if (dim == 1 && j.size() == 2 && j.at(0).is_number()) {
        m(0, 0) = entry(j);
        return m;
    }
    if (j.size() == d && j.at(0).is_array() && j.at(0).size() == d) {
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c)
                m(r, c) = entry(j.at(r).at(c));
        return m;
    }
    if (j.size() == d * d) {
        for (int r = 0; r < dim; ++r)
            for (int c = 0; c < dim; ++c)
                m(r, c) = entry(j.at(r * dim + c));
        return m;
    }
    throw std::invalid_argument("matrix entry has the wrong shape");
}

} // namespace detail

inline json to_json(const PeriodicFunction& g) {
    return {{"kind", "periodic"}, {"T", g.grid.T()}, {"n", g.grid.n()}, {"M", g.grid.M()},
            {"dx", g.grid.dx()}, {"X", g.grid.half_width()}, {"dim", g.dim}, {"values", detail::complex_array(g.values)}};
}

inline json to_json(const LineFunction& f) {
    return {{"kind", "line"}, {"X", f.grid.X()}, {"dx", f.grid.dx()}, {"dim", f.dim},
            {"values", detail::complex_array(f.values)}};
}

using AnyFunction = std::variant<PeriodicFunction, LineFunction>;

inline AnyFunction function_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    const int dim = j.value("dim", 1);
    auto values = detail::read_complex_array(j.at("values"));
    if (kind == "periodic")
        return PeriodicFunction(PeriodicGrid(j.at("T").get<double>(), j.at("n").get<int>(), j.at("M").get<int>()), dim,
                                std::move(values));
    if (kind == "line")
        return LineFunction(LineGrid::from_half_width(j.at("X").get<double>(), j.at("dx").get<double>()), dim,
                            std::move(values));
    throw std::invalid_argument("function JSON: kind must be \"periodic\" or \"line\"");
}

inline json to_json(const BlochFamily& B) {
    json slices = json::array();
    for (const auto& s : B.slices)
        slices.push_back(detail::complex_array(s));
    json j = {{"T", B.T},
              {"kind", B.kind == FamilyKind::Torus ? "torus" : "line"},
              {"M", B.M},
              {"dim", B.dim},
              {"xi", B.xi},
              {"weights", B.weights},
              {"slices", slices}};
    if (B.kind == FamilyKind::Torus)
        j["n"] = B.n;
    else
        j["truncation_estimate"] = B.truncation_estimate;
    return j;
}

inline BlochFamily family_from_json(const json& j) {
    BlochFamily B;
    B.T = j.at("T").get<double>();
    B.kind = j.at("kind").get<std::string>() == "torus" ? FamilyKind::Torus : FamilyKind::Line;
    B.xi = j.at("xi").get<std::vector<double>>();
    B.dim = j.value("dim", 1);
    for (const auto& s : j.at("slices"))
        B.slices.push_back(detail::read_complex_array(s));
    B.M = j.contains("M") ? j.at("M").get<int>()
                          : (B.slices.empty() ? 0 : static_cast<int>(B.slices.front().size()) / B.dim);
    B.n = j.value("n", static_cast<int>(B.xi.size()));
    B.weights = j.contains("weights") ? j.at("weights").get<std::vector<double>>()
                                      : std::vector<double>(B.xi.size(), 2.0 * pi / (B.xi.size() * B.T));
    B.l_max = B.M / 2;
    return B;
}

inline json to_json(const OperatorSpec& A) {
    json symbol = json::array();
    for (const auto& C : A.symbol)
        symbol.push_back(detail::matrix(C));
    json coeff = nullptr;
    if (A.coeff) {
        json values = json::array();
        for (const auto& V : A.coeff->values)
            values.push_back(detail::matrix(V));
        coeff = {{"T", A.coeff->T}, {"M", A.coeff->M}, {"values", values}};
    }
    return {{"dim", A.dim}, {"symbol", symbol}, {"coeff", coeff}};
}

inline OperatorSpec operator_from_json(const json& j) {
    OperatorSpec A;
    A.dim = j.value("dim", 1);
    for (const auto& C : j.at("symbol"))
        A.symbol.push_back(detail::read_matrix(C, A.dim));
    if (j.contains("coeff") && !j.at("coeff").is_null()) {
        const auto& c = j.at("coeff");
        PeriodicCoefficient pc;
        pc.T = c.at("T").get<double>();
        pc.M = c.at("M").get<int>();
        for (const auto& V : c.at("values"))
            pc.values.push_back(detail::read_matrix(V, A.dim));
        A.coeff = std::move(pc);
    }
    A.validate();
    return A;
}

inline json to_json(const lle::LLEParams& p) {
    return {{"alpha", p.alpha}, {"beta", p.beta}, {"F", p.F}, {"T", p.T}};
}

inline lle::LLEParams params_from_json(const json& j) {
    lle::LLEParams p;
    p.alpha = j.at("alpha").get<double>();
    p.beta = j.value("beta", -1.0);
    p.F = j.at("F").get<double>();
    p.T = j.value("T", 2.0 * pi);
    return p;
}

inline json to_json(const lle::PeriodicWave& w) {
    json phi_r = json::array(), phi_i = json::array();
    for (std::size_t j = 0; j < w.phi.grid.size(); ++j) {
        phi_r.push_back(w.phi.at(0, j).real());
        phi_i.push_back(w.phi.at(1, j).real());
    }
    return {{"params", to_json(w.params)}, {"M", w.phi.grid.M()}, {"x0", w.phi.grid.x(0)},
            {"phi_r", phi_r},              {"phi_i", phi_i},      {"residual", w.residual},
            {"converged", w.converged},    {"newton_steps", w.newton_steps}};
}

inline lle::PeriodicWave wave_from_json(const json& j) {
    const auto params = params_from_json(j.at("params"));
    const auto r = j.at("phi_r").get<std::vector<double>>();
    const auto i = j.at("phi_i").get<std::vector<double>>();
    if (r.size() != i.size())
        throw std::invalid_argument("wave JSON: phi_r and phi_i lengths differ");
    const int M = static_cast<int>(r.size());
    auto phi = PeriodicFunction::zeros(PeriodicGrid(params.T, 1, M), 2);
    for (int k = 0; k < M; ++k) {
        phi.at(0, static_cast<std::size_t>(k)) = r[static_cast<std::size_t>(k)];
        phi.at(1, static_cast<std::size_t>(k)) = i[static_cast<std::size_t>(k)];
    }
    return {params, std::move(phi), j.value("residual", 0.0), j.value("converged", false), j.value("newton_steps", 0)};
}

inline json to_json(const lle::StabilityVerdict& v) {
    json samples = json::array();
    for (const auto& s : v.samples)
        samples.push_back({{"xi", s.xi}, {"max_re", s.max_re}, {"slack", s.slack}});
    return {{"cond1_spectrum_margin", v.cond1_spectrum_margin},
            {"zero_block_margin", v.zero_block_margin},
            {"cond2_theta", v.cond2_theta},
            {"cond3_zero_eig_error", v.cond3_zero_eig_error},
            {"lambda0", {v.lambda0.real(), v.lambda0.imag()}},
            {"eigenfunction_residual", v.eigenfunction_residual},
            {"alignment", v.alignment},
            {"gap", v.gap},
            {"cond1", v.cond1},
            {"cond2", v.cond2},
            {"cond3", v.cond3},
            {"verdict", lle::to_string(v.verdict)},
            {"reason", v.reason},
            {"samples", samples}};
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

inline void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << text;
}

// CSV tables. Numbers use 17 significant digits so values round-trip.

inline std::string norm_table_csv(const NormConvergenceReport& rep) {
    std::ostringstream os;
    os << std::setprecision(17) << "k,n_k,delta_L1,delta_L2,delta_Hs\n";
    for (const auto& r : rep.rows)
        os << r.k << ',' << r.n << ',' << r.l1 << ',' << r.l2 << ',' << r.hs << '\n';
    return os.str();
}

inline std::string convergence_csv(const ConvergenceReport& rep) {
    std::ostringstream os;
    os << std::setprecision(17) << "n,t,E,leg1,leg2,delta_n\n";
    for (std::size_t k = 0; k < rep.schedule.size(); ++k)
        for (std::size_t i = 0; i < rep.times.size(); ++i)
            os << rep.schedule[k] << ',' << rep.times[i] << ',' << rep.E[k][i] << ',' << rep.leg1[k][i] << ','
               << rep.leg2[k][i] << ',' << rep.delta[k] << '\n';
    return os.str();
}

inline std::string stability_csv(const lle::StabilityVerdict& v) {
    std::ostringstream os;
    os << std::setprecision(17) << "xi,max_re\n";
    for (const auto& s : v.samples)
        os << s.xi << ',' << s.max_re << '\n';
    return os.str();
}

/// Two-column (x, y) series for plotting.
inline std::string series_csv(const std::string& xname, const std::string& yname, const std::vector<double>& x,
                              const std::vector<double>& y) {
    std::ostringstream os;
    os << std::setprecision(17) << xname << ',' << yname << '\n';
    for (std::size_t k = 0; k < std::min(x.size(), y.size()); ++k)
        os << x[k] << ',' << y[k] << '\n';
    return os.str();
}

} // namespace blochconv::io
