#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "nvpoly/radial_ode.hpp"
#include "nvpoly/steady_state.hpp"

namespace nvpoly {

/// Single-document JSON run configuration. Dotted paths address nested keys;
/// command-line flags override file values, which override built-in defaults.
class RunConfig {
public:
    RunConfig() : doc_(nlohmann::json::object()) {}
    explicit RunConfig(nlohmann::json doc) : doc_(std::move(doc)) {}

    /// Loads the file at `path`, or at $NVPOLY_CONFIG when `path` is empty,
    /// or returns an empty configuration when neither names a file.
    static RunConfig load(const std::string& path) {
        std::string p = path;
        if (p.empty()) {
            if (const char* env = std::getenv("NVPOLY_CONFIG")) p = env;
        }
        if (p.empty()) return RunConfig{};
        std::ifstream in(p);
        if (!in) throw std::runtime_error("config: cannot read " + p);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("config: parse failure: ") + e.what());
        }
        return RunConfig(std::move(doc));
    }

    template <class T>
    T value(const std::string& dotted, T fallback) const {
        const nlohmann::json* cur = &doc_;
        std::size_t begin = 0;
        while (true) {
            const std::size_t dot = dotted.find('.', begin);
            const std::string key = dotted.substr(begin, dot - begin);
            if (!cur->is_object() || !cur->contains(key)) return fallback;
            cur = &(*cur)[key];
            if (dot == std::string::npos) break;
            begin = dot + 1;
        }
        return cur->get<T>();
    }

    template <class T>
    void set(const std::string& dotted, T v) {
        nlohmann::json* cur = &doc_;
        std::size_t begin = 0;
        while (true) {
            const std::size_t dot = dotted.find('.', begin);
            const std::string key = dotted.substr(begin, dot - begin);
            if (dot == std::string::npos) {
                (*cur)[key] = v;
                return;
            }
            if (!cur->contains(key) || !(*cur)[key].is_object())
                (*cur)[key] = nlohmann::json::object();
            cur = &(*cur)[key];
            begin = dot + 1;
        }
    }

    const nlohmann::json& doc() const { return doc_; }

    QuadratureConfig quadrature() const {
        QuadratureConfig q;
        q.abs_tol = value("quadrature.abs_tol", q.abs_tol);
        q.rel_tol = value("quadrature.rel_tol", q.rel_tol);
        q.max_depth = value("quadrature.max_depth", q.max_depth);
        q.max_intervals = value<long>("quadrature.max_intervals", q.max_intervals);
        return q;
    }

    SolverConfig solver() const {
        SolverConfig s;
        s.epsilon = value("ode.epsilon", s.epsilon);
        s.rel_tol = value("ode.rel_tol", s.rel_tol);
        s.abs_tol = value("ode.abs_tol", s.abs_tol);
        s.r_max = value("ode.r_max", s.r_max);
        s.max_steps = value<long>("ode.max_steps", s.max_steps);
        s.use_mu_table = value("ode.mu_table", s.use_mu_table);
        s.mu_table_nodes = value("ode.mu_table_nodes", s.mu_table_nodes);
        s.taylor_start = value("ode.taylor_start", s.taylor_start);
        s.quadrature = quadrature();
        return s;
    }

    GreensConfig greens() const {
        GreensConfig g;
        g.tol = value("greens.tol", g.tol);
        g.max_iter = value<long>("greens.max_iter", g.max_iter);
        g.damping = value("greens.damping", g.damping);
        return g;
    }

private:
    nlohmann::json doc_;
};

} // namespace nvpoly
