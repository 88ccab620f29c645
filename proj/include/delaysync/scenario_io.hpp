#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "delaysync/engine.hpp"
#include "delaysync/matrix.hpp"

namespace delaysync {

namespace io {

using nlohmann::json;

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed for " + path.string());
}

/// Decimal rendering with 17 significant digits: round-trip exact for
/// IEEE-754 doubles.
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline const json& field(const json& j, const std::string& key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) throw ParseError(where + ": missing field '" + key + "'");
    return *it;
}

inline RealMatrix parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ParseError(where + ": expected a nested array of numbers (rows of columns)");
    const std::size_t rows = j.size(), cols = j[0].size();
    RealMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw ParseError(where + ": row " + std::to_string(i + 1) + " has " +
                             std::to_string(j[i].size()) + " entries, expected " +
                             std::to_string(cols));
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[i][c].is_number())
                throw ParseError(where + ": entry (" + std::to_string(i + 1) + "," +
                                 std::to_string(c + 1) + ") is not a number");
            m(i, c) = j[i][c].get<double>();
        }
    }
    return m;
}

inline Vec parse_vector(const json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": expected an array of numbers");
    Vec v(j.size(), 1);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw ParseError(where + ": entry " + std::to_string(i + 1) + " is not a number");
        v[i] = j[i].get<double>();
    }
    return v;
}

inline json dump_matrix(const RealMatrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json dump_vector(const Vec& v) {
    json a = json::array();
    for (std::size_t i = 0; i < v.rows(); ++i) a.push_back(v[i]);
    return a;
}

inline AgentModel parse_agent(const json& j, const std::string& where) {
    AgentModel m;
    m.a = parse_matrix(field(j, "a", where), where + ".a");
    m.b = parse_matrix(field(j, "b", where), where + ".b");
    m.c = parse_matrix(field(j, "c", where), where + ".c");
    if (j.contains("c_m")) m.c_m = parse_matrix(j["c_m"], where + ".c_m");
    m.check_dimensions();
    return m;
}

} // namespace detail

/// Parses a scenario document. Diagnostics name the offending field.
inline Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("scenario: top level must be an object");

    Scenario s;
    s.name = doc.value("name", "scenario");

    const std::string variant = detail::field(doc, "variant", "scenario").get<std::string>();
    if (variant == "full_state") s.variant = ProtocolVariant::full_state;
    else if (variant == "partial_state") s.variant = ProtocolVariant::partial_state;
    else if (variant == "heterogeneous") s.variant = ProtocolVariant::heterogeneous;
    else throw ParseError("scenario.variant: unknown variant '" + variant + "'");

    const json& agents = detail::field(doc, "agents", "scenario");
    if (!agents.is_array() || agents.empty())
        throw ParseError("scenario.agents: expected a non-empty array of agent blocks");
    for (std::size_t i = 0; i < agents.size(); ++i)
        s.agents.push_back(
            detail::parse_agent(agents[i], "agents[" + std::to_string(i + 1) + "]"));

    const json& exo = detail::field(doc, "exosystem", "scenario");
    s.exo.a_r = detail::parse_matrix(detail::field(exo, "a_r", "exosystem"), "exosystem.a_r");
    s.exo.c_r = detail::parse_matrix(detail::field(exo, "c_r", "exosystem"), "exosystem.c_r");
    s.exo.x_r0 = detail::parse_vector(detail::field(exo, "x_r0", "exosystem"), "exosystem.x_r0");

    const json& topo = detail::field(doc, "topology", "scenario");
    const std::size_t nodes = detail::field(topo, "nodes", "topology").get<std::size_t>();
    s.topology = NetworkTopology::make(nodes);
    const json& root = detail::field(topo, "root", "topology");
    const std::size_t root_node = detail::field(root, "node", "topology.root").get<std::size_t>();
    if (root_node < 1 || root_node > nodes)
        throw ParseError("topology.root.node: out of range");
    s.topology.root_links[root_node - 1] = 1;
    s.topology.root_exo_delay = root.value("kappa", 0L);
    for (const json& e : detail::field(topo, "edges", "topology")) {
        const std::size_t from = detail::field(e, "from", "topology.edges").get<std::size_t>();
        const std::size_t to = detail::field(e, "to", "topology.edges").get<std::size_t>();
        if (from < 1 || from > nodes || to < 1 || to > nodes)
            throw ParseError("topology.edges: node index out of range in edge " +
                             std::to_string(from) + " -> " + std::to_string(to));
        s.topology.add_edge(from - 1, to - 1, e.value("weight", 1.0), e.value("kappa", 0L),
                            e.value("kappa_hat", 0L));
    }

    if (doc.contains("gains")) {
        const json& g = doc["gains"];
        if (g.contains("k")) s.gains.k = detail::parse_matrix(g["k"], "gains.k");
        if (g.contains("h")) s.gains.h = detail::parse_matrix(g["h"], "gains.h");
        if (g.contains("q")) s.gains.q = detail::parse_matrix(g["q"], "gains.q");
        if (g.contains("r")) s.gains.r = detail::parse_matrix(g["r"], "gains.r");
    }

    if (doc.contains("run")) {
        const json& r = doc["run"];
        s.horizon = r.value("horizon", s.horizon);
        s.tolerance = r.value("tolerance", s.tolerance);
        s.seed = r.value("seed", s.seed);
        s.initial_scale = r.value("initial_scale", s.initial_scale);
        s.divergence_threshold = r.value("divergence_threshold", s.divergence_threshold);
        const std::string prefill = r.value("prefill", std::string("zeros"));
        if (prefill == "zeros") s.prefill = PrefillPolicy::zeros;
        else if (prefill == "hold_initial") s.prefill = PrefillPolicy::hold_initial;
        else throw ParseError("run.prefill: unknown policy '" + prefill + "'");
        if (r.contains("initial_states"))
            for (const json& v : r["initial_states"])
                s.initial_states.push_back(detail::parse_vector(v, "run.initial_states"));
    }
    return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    return parse_scenario(read_file(path));
}

/// Inverse of parse_scenario up to field ordering; parse(serialize(s)) is
/// matrix-equal to s.
inline json serialize_scenario(const Scenario& s) {
    json doc;
    doc["name"] = s.name;
    doc["variant"] = to_string(s.variant);
    doc["agents"] = json::array();
    for (const auto& a : s.agents) {
        json ja;
        ja["a"] = detail::dump_matrix(a.a);
        ja["b"] = detail::dump_matrix(a.b);
        ja["c"] = detail::dump_matrix(a.c);
        if (a.introspective()) ja["c_m"] = detail::dump_matrix(a.c_m);
        doc["agents"].push_back(std::move(ja));
    }
    doc["exosystem"] = {{"a_r", detail::dump_matrix(s.exo.a_r)},
                        {"c_r", detail::dump_matrix(s.exo.c_r)},
                        {"x_r0", detail::dump_vector(s.exo.x_r0)}};
    json topo;
    topo["nodes"] = s.topology.agent_count;
    for (std::size_t i = 0; i < s.topology.agent_count; ++i)
        if (s.topology.root_links[i] == 1)
            topo["root"] = {{"node", i + 1}, {"kappa", s.topology.root_exo_delay}};
    topo["edges"] = json::array();
    for (std::size_t i = 0; i < s.topology.agent_count; ++i)
        for (std::size_t j = 0; j < s.topology.agent_count; ++j)
            if (s.topology.weights(i, j) != 0.0)
                topo["edges"].push_back(
                    {{"from", j + 1},
                     {"to", i + 1},
                     {"weight", s.topology.weights(i, j)},
                     {"kappa", delaysync::detail::delay_entry(s.topology.plant_delays, i, j)},
                     {"kappa_hat",
                      delaysync::detail::delay_entry(s.topology.protocol_delays, i, j)}});
    doc["topology"] = std::move(topo);
    json gains;
    if (!s.gains.k.empty()) gains["k"] = detail::dump_matrix(s.gains.k);
    if (!s.gains.h.empty()) gains["h"] = detail::dump_matrix(s.gains.h);
    if (!s.gains.q.empty()) gains["q"] = detail::dump_matrix(s.gains.q);
    if (!s.gains.r.empty()) gains["r"] = detail::dump_matrix(s.gains.r);
    doc["gains"] = std::move(gains);
    json run;
    run["horizon"] = s.horizon;
    run["tolerance"] = s.tolerance;
    run["seed"] = s.seed;
    run["initial_scale"] = s.initial_scale;
    run["divergence_threshold"] = s.divergence_threshold;
    run["prefill"] = s.prefill == PrefillPolicy::zeros ? "zeros" : "hold_initial";
    if (!s.initial_states.empty()) {
        run["initial_states"] = json::array();
        for (const auto& v : s.initial_states)
            run["initial_states"].push_back(detail::dump_vector(v));
    }
    doc["run"] = std::move(run);
    return doc;
}

/// trajectories.csv: one row per (step, agent). Ragged dimensions (the
/// heterogeneous variant) are padded to the widest agent with empty fields.
inline std::string trajectories_csv(const ResolvedScenario& rs, const SimResult& r) {
    std::size_t max_x = 0, max_u = 0, max_y = 0;
    for (std::size_t i = 0; i < r.agent_count; ++i) {
        max_x = std::max(max_x, r.states[i][0].rows());
        max_u = std::max(max_u, r.inputs[i][0].rows());
        max_y = std::max(max_y, r.outputs[i][0].rows());
    }
    std::string out = "step,agent";
    for (std::size_t c = 0; c < max_x; ++c) out += ",x" + std::to_string(c + 1);
    for (std::size_t c = 0; c < max_y; ++c) out += ",y" + std::to_string(c + 1);
    for (std::size_t c = 0; c < max_u; ++c) out += ",u" + std::to_string(c + 1);
    for (std::size_t c = 0; c < max_y; ++c) out += ",yr_delayed" + std::to_string(c + 1);
    out += "\n";
    const bool full = r.variant == ProtocolVariant::full_state;
    for (std::size_t k = 0; k < r.horizon; ++k)
        for (std::size_t i = 0; i < r.agent_count; ++i) {
            out += std::to_string(k) + "," + std::to_string(i + 1);
            const auto pad = [&](const Vec& v, std::size_t width) {
                for (std::size_t c = 0; c < width; ++c)
                    out += "," + (c < v.rows() ? format_number(v[c]) : std::string());
            };
            pad(r.states[i][k], max_x);
            pad(r.outputs[i][k], max_y);
            pad(r.inputs[i][k], max_u);
            // For the full-state variant the exchanged reference is the state;
            // report its output image so the column is comparable to y.
            const Vec yref = full ? Vec(rs.source.exo.c_r * r.delayed_reference[i][k])
                                  : r.delayed_reference[i][k];
            pad(yref, max_y);
            out += "\n";
        }
    return out;
}

/// errors.csv: step, agent, ||e_i(k)||, and whether k >= kappa_ir.
inline std::string errors_csv(const SimResult& r) {
    std::string out = "step,agent,error_norm,valid\n";
    for (std::size_t k = 0; k < r.horizon; ++k)
        for (std::size_t i = 0; i < r.agent_count; ++i)
            out += std::to_string(k) + "," + std::to_string(i + 1) + "," +
                   format_number(r.error_norms[i][k]) + "," +
                   (k >= r.error_valid_from[i] ? "1" : "0") + "\n";
    return out;
}

/// reference.csv: step, reference state and output.
inline std::string reference_csv(const SimResult& r) {
    std::string out = "step";
    for (std::size_t c = 0; c < r.reference_states[0].rows(); ++c)
        out += ",xr" + std::to_string(c + 1);
    for (std::size_t c = 0; c < r.reference_outputs[0].rows(); ++c)
        out += ",yr" + std::to_string(c + 1);
    out += "\n";
    for (std::size_t k = 0; k < r.horizon; ++k) {
        out += std::to_string(k);
        for (std::size_t c = 0; c < r.reference_states[k].rows(); ++c)
            out += "," + format_number(r.reference_states[k][c]);
        for (std::size_t c = 0; c < r.reference_outputs[k].rows(); ++c)
            out += "," + format_number(r.reference_outputs[k][c]);
        out += "\n";
    }
    return out;
}

inline std::string certificate_csv(const CertificateReport& rep) {
    std::string out = "omega,min_unit_circle_distance\n";
    for (const auto& p : rep.points)
        out += format_number(p.omega) + "," + format_number(p.min_distance) + "\n";
    return out;
}

/// FNV-1a, enough to fingerprint a scenario file in the run manifest.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline json run_manifest(const std::string& scenario_text, const Scenario& s,
                         const SimResult& r) {
    json m;
    m["tool"] = "delaysync";
    m["version"] = "0.1.0";
    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a(scenario_text)));
    m["scenario_hash"] = hash;
    m["scenario_name"] = s.name;
    m["variant"] = to_string(s.variant);
    m["seed"] = r.seed;
    m["horizon"] = r.horizon;
    m["agents"] = r.agent_count;
    m["final_max_error"] = r.final_max_error;
    m["converged"] = r.converged;
    return m;
}

} // namespace io

} // namespace delaysync
