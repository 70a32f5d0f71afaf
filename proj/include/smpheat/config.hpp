#pragma once

// Line-oriented run configuration:
//
//   # comment
//   model.preset = heat
//   model.K = 16
//   run.experiment = rates
//   rates.t0 = 0.0625
//
// Lists are comma separated. Every violation is collected before reporting.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "smpheat/error.hpp"
#include "smpheat/model.hpp"

namespace smpheat {

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"simulate", "variation-check", "adjoint",      "duality-check",
                                                "optimize", "rates",           "schatten-test", "gronwall-check"};
    return names;
}

/// Named coefficient families used by the shipped configurations.
///   default, tanh: tanh diffusion with control in drift and diffusion
///   heat:          b = 0, sigma = s0 + s2 u (control enters the noise only)
///   affine:        sigma linear in r, so the control-to-state map is affine
///   quadratic:     control enters only the running cost, l = w_u (u - u_ref)^2 + w_l (r - r_ref)^2
inline ModelSpec model_preset(const std::string& name) {
    ModelSpec s;
    if (name == "default" || name == "tanh") return s;
    if (name == "heat") {
        s.drift_enabled = false;
        s.b0 = s.b1 = s.b2 = 0.0;
        s.s0 = 0.2;
        s.s1 = 0.0;
        s.s2 = 0.5;
        return s;
    }
    if (name == "affine") {
        s.sigma_shape = SigmaShape::Linear;
        s.s1 = 0.3;
        return s;
    }
    if (name == "quadratic") {
        s.b2 = 0.0;
        s.s2 = 0.0;
        s.w_u = 1.0;
        s.u_ref = 0.3;
        return s;
    }
    throw ConfigError({"unknown model preset '" + name + "'"});
}

struct RunConfig {
    ModelSpec model;
    std::string preset = "default";
    std::string experiment = "simulate";
    std::size_t paths = 4096;
    std::uint64_t seed = 1;
    std::size_t threads = 0;  // 0: hardware parallelism
    std::string out = "out";

    double u_bar = 0.0;       // reference control (constant)
    double v = 1.0;           // comparison control (constant)
    std::size_t export_paths = 8;

    // simulate
    std::size_t moment_power = 2;

    // rates
    double rates_t0 = 0.0625;
    std::size_t rates_m_min = 4;
    std::size_t rates_m_max = 9;
    double rates_slope_lo = 0.15;
    double rates_slope_hi = 0.35;
    double rates_min_r2 = 0.9;

    // variation-check
    std::vector<double> eps{0.4, 0.2, 0.1, 0.05, 0.025};
    double min_slope = 1.7;
    bool expect_exact = false;
    double exact_tol = 1e-10;

    // adjoint
    bool adjoint_compare = true;
    double adjoint_max_error = 1e-2;
    double adjoint_max_constant = 2.0;
    std::size_t trace_paths = 1024;

    // duality-check
    std::string duality_case = "full";  // zero | semigroup | full
    std::size_t adjoint_N = static_cast<std::size_t>(-1);  // default: model.N
    double duality_rel = 1e-2;
    double duality_widths = 3.0;
    bool duality_scaling = false;

    // optimize
    bool gradient_check = true;
    bool solve = true;
    std::size_t max_iter = 200;
    double sup_tol = 1e-3;
    double perturbation = 0.05;
    std::size_t vi_random = 16;

    // schatten-test
    std::size_t instances = 1000;
    std::size_t max_dim = 16;

    // gronwall-check
    double gronwall_c = 1.0;
    double gronwall_T = 1.0;
    std::size_t gronwall_steps = 400;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct Setter {
    std::function<void(RunConfig&, const std::string&)> apply;
};

template <class T>
T parse_number(const std::string& text) {
    std::istringstream is(text);
    T value{};
    is >> value;
    if (!is || !(is >> std::ws).eof()) throw std::invalid_argument("expected a number, got '" + text + "'");
    if constexpr (std::is_unsigned_v<T>)
        if (!text.empty() && text[0] == '-') throw std::invalid_argument("expected a non-negative integer");
    return value;
}

inline bool parse_bool(const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw std::invalid_argument("expected true or false, got '" + text + "'");
}

inline std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<double>(trim(item)));
    return out;
}

inline ModeVector parse_modes(const std::string& text) {
    const auto v = parse_list(text);
    return Eigen::Map<const ModeVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <class T, class Obj>
Setter number(T Obj::*field) {
    return {[field](RunConfig& c, const std::string& v) {
        if constexpr (std::is_same_v<Obj, ModelSpec>) c.model.*field = parse_number<T>(v);
        else c.*field = parse_number<T>(v);
    }};
}

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        t["model.alpha"] = number(&ModelSpec::alpha);
        t["model.T"] = number(&ModelSpec::T);
        t["model.K"] = number(&ModelSpec::K);
        t["model.n_x"] = number(&ModelSpec::n_x);
        t["model.n_steps"] = number(&ModelSpec::n_steps);
        t["model.M"] = number(&ModelSpec::M);
        t["model.N"] = number(&ModelSpec::N);
        t["model.drift"] = {[](RunConfig& c, const std::string& v) { c.model.drift_enabled = parse_bool(v); }};
        t["model.b0"] = number(&ModelSpec::b0);
        t["model.b1"] = number(&ModelSpec::b1);
        t["model.b2"] = number(&ModelSpec::b2);
        t["model.sigma_shape"] = {[](RunConfig& c, const std::string& v) {
            if (v == "tanh") c.model.sigma_shape = SigmaShape::Tanh;
            else if (v == "linear") c.model.sigma_shape = SigmaShape::Linear;
            else throw std::invalid_argument("sigma_shape must be tanh or linear");
        }};
        t["model.s0"] = number(&ModelSpec::s0);
        t["model.s1"] = number(&ModelSpec::s1);
        t["model.s2"] = number(&ModelSpec::s2);
        t["model.l0"] = number(&ModelSpec::l0);
        t["model.w_l"] = number(&ModelSpec::w_l);
        t["model.w_u"] = number(&ModelSpec::w_u);
        t["model.u_ref"] = number(&ModelSpec::u_ref);
        t["model.w_h"] = number(&ModelSpec::w_h);
        t["model.u_min"] = number(&ModelSpec::u_min);
        t["model.u_max"] = number(&ModelSpec::u_max);
        t["model.r_ref"] = {[](RunConfig& c, const std::string& v) { c.model.r_ref = parse_modes(v); }};
        t["model.r_T"] = {[](RunConfig& c, const std::string& v) { c.model.r_T = parse_modes(v); }};
        t["model.h_lin"] = {[](RunConfig& c, const std::string& v) { c.model.h_lin = parse_modes(v); }};
        t["model.x0"] = {[](RunConfig& c, const std::string& v) { c.model.x0 = parse_modes(v); }};

        t["run.experiment"] = {[](RunConfig& c, const std::string& v) { c.experiment = v; }};
        t["run.paths"] = number(&RunConfig::paths);
        t["run.seed"] = number(&RunConfig::seed);
        t["run.threads"] = number(&RunConfig::threads);
        t["run.out"] = {[](RunConfig& c, const std::string& v) { c.out = v; }};
        t["run.export_paths"] = number(&RunConfig::export_paths);

        t["control.u_bar"] = number(&RunConfig::u_bar);
        t["control.v"] = number(&RunConfig::v);

        t["simulate.moment_power"] = number(&RunConfig::moment_power);

        t["rates.t0"] = number(&RunConfig::rates_t0);
        t["rates.m_min"] = number(&RunConfig::rates_m_min);
        t["rates.m_max"] = number(&RunConfig::rates_m_max);
        t["rates.slope_lo"] = number(&RunConfig::rates_slope_lo);
        t["rates.slope_hi"] = number(&RunConfig::rates_slope_hi);
        t["rates.min_r2"] = number(&RunConfig::rates_min_r2);

        t["variation.eps"] = {[](RunConfig& c, const std::string& v) { c.eps = parse_list(v); }};
        t["variation.min_slope"] = number(&RunConfig::min_slope);
        t["variation.expect_exact"] = {[](RunConfig& c, const std::string& v) { c.expect_exact = parse_bool(v); }};
        t["variation.exact_tol"] = number(&RunConfig::exact_tol);

        t["adjoint.compare"] = {[](RunConfig& c, const std::string& v) { c.adjoint_compare = parse_bool(v); }};
        t["adjoint.max_error"] = number(&RunConfig::adjoint_max_error);
        t["adjoint.max_constant"] = number(&RunConfig::adjoint_max_constant);
        t["adjoint.trace_paths"] = number(&RunConfig::trace_paths);

        t["duality.case"] = {[](RunConfig& c, const std::string& v) {
            if (v != "zero" && v != "semigroup" && v != "full")
                throw std::invalid_argument("duality.case must be zero, semigroup or full");
            c.duality_case = v;
        }};
        t["duality.adjoint_N"] = number(&RunConfig::adjoint_N);
        t["duality.rel_tol"] = number(&RunConfig::duality_rel);
        t["duality.widths"] = number(&RunConfig::duality_widths);
        t["duality.scaling"] = {[](RunConfig& c, const std::string& v) { c.duality_scaling = parse_bool(v); }};

        t["optimize.gradient_check"] = {[](RunConfig& c, const std::string& v) { c.gradient_check = parse_bool(v); }};
        t["optimize.solve"] = {[](RunConfig& c, const std::string& v) { c.solve = parse_bool(v); }};
        t["optimize.max_iter"] = number(&RunConfig::max_iter);
        t["optimize.sup_tol"] = number(&RunConfig::sup_tol);
        t["optimize.perturbation"] = number(&RunConfig::perturbation);
        t["optimize.vi_random"] = number(&RunConfig::vi_random);

        t["schatten.instances"] = number(&RunConfig::instances);
        t["schatten.max_dim"] = number(&RunConfig::max_dim);

        t["gronwall.c"] = number(&RunConfig::gronwall_c);
        t["gronwall.T"] = number(&RunConfig::gronwall_T);
        t["gronwall.steps"] = number(&RunConfig::gronwall_steps);
        return t;
    }();
    return table;
}

}  // namespace detail

/// Semantic checks on a config; returns every violation.
inline std::vector<std::string> config_violations(const RunConfig& c) {
    std::vector<std::string> out = c.model.violations();
    bool known = false;
    for (const auto& e : experiment_names()) known = known || e == c.experiment;
    if (!known) out.push_back("unknown experiment '" + c.experiment + "'");
    if (c.paths == 0) out.emplace_back("paths must be positive");
    auto in_box = [&](double x) { return x >= c.model.u_min && x <= c.model.u_max; };
    if (!in_box(c.u_bar)) out.emplace_back("control.u_bar must lie in [u_min, u_max]");
    if (!in_box(c.v)) out.emplace_back("control.v must lie in [u_min, u_max]");
    if (c.rates_m_min > c.rates_m_max || c.rates_m_max - c.rates_m_min < 2)
        out.emplace_back("rates needs at least three dyadic deltas (m_max >= m_min + 2)");
    if (!(c.rates_t0 >= 0.0)) out.emplace_back("rates.t0 must be non-negative");
    if (c.eps.size() < 3) out.emplace_back("variation.eps needs at least three values");
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
        if (!(c.eps[i] > 0.0 && c.eps[i] <= 1.0)) out.emplace_back("variation.eps values must lie in (0, 1]");
        if (i > 0 && !(c.eps[i] < c.eps[i - 1])) out.emplace_back("variation.eps must be decreasing");
    }
    if (c.adjoint_N != static_cast<std::size_t>(-1) && c.adjoint_N > c.model.M)
        out.emplace_back("duality.adjoint_N must not exceed M");
    if (c.max_dim == 0) out.emplace_back("schatten.max_dim must be positive");
    if (!(c.gronwall_T > 0.0)) out.emplace_back("gronwall.T must be positive");
    if (c.gronwall_steps < 2) out.emplace_back("gronwall.steps must be at least 2");
    if (!(c.perturbation > 0.0 && c.perturbation <= 1.0)) out.emplace_back("optimize.perturbation must lie in (0, 1]");
    return out;
}

/// Parses and validates; throws ConfigError listing every syntax and semantic violation.
inline RunConfig parse_config(std::string_view text) {
    struct Entry {
        std::string value;
        std::size_t line;
    };
    std::vector<std::string> errors;
    std::map<std::string, Entry> entries;
    std::vector<std::string> order;
    std::istringstream is{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(line_no) + ": syntax error, expected 'section.key = value'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || key.find('.') == std::string::npos || key.front() == '.' || key.back() == '.') {
            errors.push_back("line " + std::to_string(line_no) + ": syntax error, key must have the form section.key");
            continue;
        }
        if (value.empty()) {
            errors.push_back("line " + std::to_string(line_no) + ": syntax error, empty value for '" + key + "'");
            continue;
        }
        if (auto it = entries.find(key); it != entries.end()) {
            errors.push_back("duplicate key '" + key + "' on lines " + std::to_string(it->second.line) + " and " +
                             std::to_string(line_no));
            continue;
        }
        entries.emplace(key, Entry{value, line_no});
        order.push_back(key);
    }

    RunConfig cfg;
    if (auto it = entries.find("model.preset"); it != entries.end()) {
        try {
            cfg.model = model_preset(it->second.value);
            cfg.preset = it->second.value;
        } catch (const ConfigError& e) {
            errors.push_back("line " + std::to_string(it->second.line) + ": " + e.what());
        }
    }
    const auto& table = detail::setters();
    for (const auto& key : order) {
        if (key == "model.preset") continue;
        const Entry& e = entries.at(key);
        const auto it = table.find(key);
        if (it == table.end()) {
            errors.push_back("line " + std::to_string(e.line) + ": unknown key '" + key + "'");
            continue;
        }
        try {
            it->second.apply(cfg, e.value);
        } catch (const std::exception& ex) {
            errors.push_back("line " + std::to_string(e.line) + ": " + key + ": " + ex.what());
        }
    }
    for (auto& v : config_violations(cfg)) errors.push_back(std::move(v));
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return cfg;
}

}  // namespace smpheat
