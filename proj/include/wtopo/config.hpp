#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wtopo/adamw.hpp"
#include "wtopo/errors.hpp"
#include "wtopo/nlstd.hpp"
#include "wtopo/topo_energy.hpp"

namespace wtopo {

// Minimal TOML reader covering the config surface used here: [section]
// headers, `key = value` lines, numbers, booleans, quoted strings and flat
// number arrays, with '#' comments. No nested tables, no multiline values.
class ConfigFile {
public:
    struct Value {
        enum class Kind { number, boolean, string, array } kind = Kind::number;
        double number = 0.0;
        bool boolean = false;
        std::string text;
        std::vector<double> array;
    };

    static ConfigFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open config " + path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        return parse_string(buffer.str());
    }

    static ConfigFile parse_string(const std::string& text) {
        ConfigFile cfg;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            strip_comment(line);
            trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw config_error("config line " + std::to_string(lineno) +
                                       ": unterminated section header");
                section = line.substr(1, line.size() - 2);
                trim(section);
                continue;
            }
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw config_error("config line " + std::to_string(lineno) + ": expected key = value");
            std::string key = line.substr(0, eq);
            std::string raw = line.substr(eq + 1);
            trim(key);
            trim(raw);
            if (key.empty() || raw.empty())
                throw config_error("config line " + std::to_string(lineno) + ": empty key or value");
            cfg.values_[section][key] = parse_value(raw, lineno);
        }
        return cfg;
    }

    bool has(const std::string& section, const std::string& key) const {
        auto s = values_.find(section);
        return s != values_.end() && s->second.count(key) > 0;
    }

    double require_number(const std::string& section, const std::string& key) const {
        const Value& v = require(section, key);
        if (v.kind != Value::Kind::number)
            throw config_error("config key " + section + "." + key + " must be a number");
        return v.number;
    }

    double number_or(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? require_number(section, key) : fallback;
    }

    int require_int(const std::string& section, const std::string& key) const {
        const double v = require_number(section, key);
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw config_error("config key " + section + "." + key + " must be an integer");
        return i;
    }

    int int_or(const std::string& section, const std::string& key, int fallback) const {
        return has(section, key) ? require_int(section, key) : fallback;
    }

    std::string string_or(const std::string& section, const std::string& key,
                          const std::string& fallback) const {
        if (!has(section, key)) return fallback;
        const Value& v = require(section, key);
        if (v.kind != Value::Kind::string)
            throw config_error("config key " + section + "." + key + " must be a string");
        return v.text;
    }

    // Accepts a scalar (returned as a one-element vector) or a number array.
    std::vector<double> require_numbers(const std::string& section, const std::string& key) const {
        const Value& v = require(section, key);
        if (v.kind == Value::Kind::number) return {v.number};
        if (v.kind == Value::Kind::array) return v.array;
        throw config_error("config key " + section + "." + key + " must be a number or array");
    }

    std::vector<double> numbers_or(const std::string& section, const std::string& key,
                                   std::vector<double> fallback) const {
        return has(section, key) ? require_numbers(section, key) : std::move(fallback);
    }

private:
    const Value& require(const std::string& section, const std::string& key) const {
        auto s = values_.find(section);
        if (s == values_.end() || !s->second.count(key))
            throw config_error("missing config key: " + section + "." + key);
        return s->second.at(key);
    }

    static void trim(std::string& s) {
        size_t a = 0, b = s.size();
        while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
        while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
        s = s.substr(a, b - a);
    }

    static void strip_comment(std::string& s) {
        bool in_string = false;
        for (size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') in_string = !in_string;
            if (s[i] == '#' && !in_string) {
                s.resize(i);
                return;
            }
        }
    }

    static double parse_number(const std::string& raw, int lineno) {
        char* end = nullptr;
        const double v = std::strtod(raw.c_str(), &end);
        if (end != raw.c_str() + raw.size())
            throw config_error("config line " + std::to_string(lineno) + ": bad number '" + raw + "'");
        return v;
    }

    static Value parse_value(const std::string& raw, int lineno) {
        Value v;
        if (raw.front() == '"') {
            if (raw.size() < 2 || raw.back() != '"')
                throw config_error("config line " + std::to_string(lineno) + ": unterminated string");
            v.kind = Value::Kind::string;
            v.text = raw.substr(1, raw.size() - 2);
            return v;
        }
        if (raw == "true" || raw == "false") {
            v.kind = Value::Kind::boolean;
            v.boolean = raw == "true";
            return v;
        }
        if (raw.front() == '[') {
            if (raw.back() != ']')
                throw config_error("config line " + std::to_string(lineno) + ": unterminated array");
            v.kind = Value::Kind::array;
            std::string inner = raw.substr(1, raw.size() - 2);
            std::istringstream items(inner);
            std::string item;
            while (std::getline(items, item, ',')) {
                trim(item);
                if (item.empty()) continue;
                v.array.push_back(parse_number(item, lineno));
            }
            return v;
        }
        v.kind = Value::Kind::number;
        v.number = parse_number(raw, lineno);
        return v;
    }

    std::map<std::string, std::map<std::string, Value>> values_;
};

namespace detail {

inline NeighborhoodSpec::Shape shape_from_string(const std::string& name) {
    if (name == "square") return NeighborhoodSpec::Shape::square;
    if (name == "disc") return NeighborhoodSpec::Shape::disc;
    throw config_error("config key topo.shape must be \"square\" or \"disc\"");
}

} // namespace detail

inline TopoParams load_topo_params(const ConfigFile& cfg) {
    TopoParams topo;
    topo.smooth.epsilon = cfg.require_number("topo", "epsilon");
    topo.smooth.nb.radius = cfg.require_int("topo", "r");
    topo.smooth.nb.shape = detail::shape_from_string(cfg.string_or("topo", "shape", "square"));
    topo.mu0 = cfg.require_number("topo", "mu0");
    topo.mu1 = cfg.require_number("topo", "mu1");
    topo.beta0 = cfg.require_int("topo", "beta0");
    topo.beta1 = cfg.require_int("topo", "beta1");
    if (topo.smooth.epsilon <= 0.0) throw config_error("config key topo.epsilon must be > 0");
    if (topo.smooth.nb.radius < 1) throw config_error("config key topo.r must be >= 1");
    if (topo.mu0 < 0.0 || topo.mu1 < 0.0 || topo.beta0 < 0 || topo.beta1 < 0)
        throw config_error("config keys topo.mu*/beta* must be >= 0");
    return topo;
}

inline AdamWParams load_adamw_params(const ConfigFile& cfg) {
    AdamWParams hp;
    hp.weight_decay = cfg.require_number("adamw", "nu");
    hp.learning_rate = cfg.require_number("adamw", "tau");
    hp.rho1 = cfg.number_or("adamw", "rho1", 0.9);
    hp.rho2 = cfg.number_or("adamw", "rho2", 0.999);
    hp.eps_stab = cfg.number_or("adamw", "eps_stab", 1e-8);
    return hp;
}

struct MinimizeConfig {
    TopoParams topo;
    AdamWParams adamw;
};

inline MinimizeConfig load_minimize_config(const std::string& path) {
    const ConfigFile cfg = ConfigFile::parse_file(path);
    return MinimizeConfig{load_topo_params(cfg), load_adamw_params(cfg)};
}

// Full solver config; the weight model's reference image is attached later
// by the caller.
inline SolverConfig load_solver_config(const std::string& path) {
    const ConfigFile cfg = ConfigFile::parse_file(path);
    SolverConfig sc;
    sc.lambda = cfg.require_numbers("nlstd", "lambda");
    sc.gamma = cfg.require_number("nlstd", "gamma");
    sc.eta = cfg.require_number("nlstd", "eta");
    sc.zeta = cfg.numbers_or("nlstd", "zeta", {});
    sc.topo_channel = cfg.int_or("nlstd", "topo_channel", 0);
    sc.max_iters = cfg.int_or("nlstd", "max_iters", 300);
    sc.tol = cfg.number_or("nlstd", "tol", 1e-4);
    sc.v_init_steps = cfg.int_or("nlstd", "v_init_steps", 25);
    sc.recompute_every = cfg.int_or("nlstd", "recompute_every", 1);
    sc.topo = load_topo_params(cfg);
    sc.adamw = load_adamw_params(cfg);
    sc.weights.omega0 = cfg.require_numbers("weights", "omega0");
    sc.weights.omega1 = cfg.require_numbers("weights", "omega1");
    sc.weights.alpha1 = cfg.require_numbers("weights", "alpha1");
    sc.weights.alpha2 = cfg.require_numbers("weights", "alpha2");
    sc.weights.alpha3 = cfg.require_numbers("weights", "alpha3");
    sc.weights.window_radius = cfg.int_or("weights", "window", 7);
    size_t n = 1;
    for (const auto* v : {&sc.weights.omega0, &sc.weights.omega1, &sc.weights.alpha1,
                          &sc.weights.alpha2, &sc.weights.alpha3})
        n = std::max(n, v->size());
    for (auto* v : {&sc.weights.omega0, &sc.weights.omega1, &sc.weights.alpha1,
                    &sc.weights.alpha2, &sc.weights.alpha3})
        if (v->size() == 1 && n > 1) v->assign(n, (*v)[0]);
    return sc;
}

} // namespace wtopo
