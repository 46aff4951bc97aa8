#pragma once

// JSON document format for network models. Top-level keys: `version`,
// `bases`, `power`, `gas`, `coupling`, `measurement_plan`. All element ids
// are strings; cross-references use ids, resolved to indices at load. The
// measurement plan is either an explicit entry list or the preset
// {"preset": "full", "std": s} which expands to the standard meter set:
// both-end power flows, all injections, all voltages, PMU angles, all gas
// flows, all gas injections, all pressures.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "iegs/model.hpp"

namespace iegs {

namespace detail {

using nlohmann::json;

inline double num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

inline double num_req(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ParseError("missing field '" + std::string(key) + "' in " + where);
    if (!j.at(key).is_number()) throw ParseError("field '" + std::string(key) + "' must be a number in " + where);
    return j.at(key).get<double>();
}

inline std::string str_req(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw ParseError("missing string field '" + std::string(key) + "' in " + where);
    return j.at(key).get<std::string>();
}

template <class T>
int resolve(const std::vector<T>& xs, const std::string& id, const std::string& where) {
    for (int i = 0; i < static_cast<int>(xs.size()); ++i)
        if (xs[i].id == id) return i;
    throw ParseError("unknown id '" + id + "' referenced by " + where);
}

inline Eigen::Vector3d vec3(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 3)
        throw ParseError("field '" + std::string(key) + "' must be a 3-array in " + where);
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) v[i] = j.at(key).at(i).get<double>();
    return v;
}

inline Eigen::Matrix3d mat3(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 3)
        throw ParseError("field '" + std::string(key) + "' must be a 3x3 array in " + where);
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r) {
        const auto& row = j.at(key).at(r);
        if (!row.is_array() || row.size() != 3)
            throw ParseError("field '" + std::string(key) + "' must be a 3x3 array in " + where);
        for (int c = 0; c < 3; ++c) m(r, c) = row.at(c).get<double>();
    }
    return m;
}

inline DetailedCompressorParams parse_detailed(const json& j, const std::string& where) {
    DetailedCompressorParams p;
    const std::string kind = str_req(j, "kind", where);
    if (kind == "turbo") p.kind = CompressorKind::Turbo;
    else if (kind == "piston") p.kind = CompressorKind::Piston;
    else throw ParseError("compressor kind must be 'turbo' or 'piston' in " + where);
    p.r_s = num_req(j, "r_s", where);
    p.t = num_req(j, "t", where);
    p.t_c = num_req(j, "t_c", where);
    p.t_a = num_req(j, "t_a", where);
    p.pi_c = num_req(j, "pi_c", where);
    p.kappa = num_req(j, "kappa", where);
    p.v0 = num(j, "v0", 0.5);
    p.eta_bar = num(j, "eta_bar", 0.8);
    p.n_min = num_req(j, "n_min", where);
    p.n_max = num_req(j, "n_max", where);
    p.a1 = vec3(j, "a1", where);
    p.a2 = vec3(j, "a2", where);
    p.a3 = vec3(j, "a3", where);
    p.A1 = mat3(j, "A1", where);
    p.A2 = mat3(j, "A2", where);
    p.A3 = mat3(j, "A3", where);
    return p;
}

inline json detailed_to_json(const DetailedCompressorParams& p) {
    json j;
    j["kind"] = p.kind == CompressorKind::Turbo ? "turbo" : "piston";
    j["r_s"] = p.r_s;
    j["t"] = p.t;
    j["t_c"] = p.t_c;
    j["t_a"] = p.t_a;
    j["pi_c"] = p.pi_c;
    j["kappa"] = p.kappa;
    j["v0"] = p.v0;
    j["eta_bar"] = p.eta_bar;
    j["n_min"] = p.n_min;
    j["n_max"] = p.n_max;
    j["a1"] = {p.a1[0], p.a1[1], p.a1[2]};
    j["a2"] = {p.a2[0], p.a2[1], p.a2[2]};
    j["a3"] = {p.a3[0], p.a3[1], p.a3[2]};
    auto m3 = [](const Eigen::Matrix3d& m) {
        return json::array({{m(0, 0), m(0, 1), m(0, 2)},
                            {m(1, 0), m(1, 1), m(1, 2)},
                            {m(2, 0), m(2, 1), m(2, 2)}});
    };
    j["A1"] = m3(p.A1);
    j["A2"] = m3(p.A2);
    j["A3"] = m3(p.A3);
    return j;
}

// Standard full meter set, in a fixed order that is part of the format.
inline void expand_full_plan(Model& m, double sigma) {
    auto& es = m.plan.entries;
    es.clear();
    const int nb = static_cast<int>(m.power.buses.size());
    const int nl = static_cast<int>(m.power.lines.size());
    const int nn = static_cast<int>(m.gas.nodes.size());
    for (int l = 0; l < nl; ++l) {
        es.push_back({MeasurementKind::PFlowFwd, l, sigma});
        es.push_back({MeasurementKind::PFlowRev, l, sigma});
        es.push_back({MeasurementKind::QFlowFwd, l, sigma});
        es.push_back({MeasurementKind::QFlowRev, l, sigma});
    }
    for (int b = 0; b < nb; ++b) es.push_back({MeasurementKind::PInj, b, sigma});
    for (int b = 0; b < nb; ++b) es.push_back({MeasurementKind::QInj, b, sigma});
    for (int b = 0; b < nb; ++b) es.push_back({MeasurementKind::VMag, b, sigma});
    for (int b = 0; b < nb; ++b)
        if (m.power.buses[b].pmu) es.push_back({MeasurementKind::ThetaPmu, b, sigma});
    for (int p = 0; p < static_cast<int>(m.gas.pipelines.size()); ++p)
        es.push_back({MeasurementKind::GFlowPipe, p, sigma});
    for (int c = 0; c < static_cast<int>(m.gas.compressors.size()); ++c)
        es.push_back({MeasurementKind::GFlowComp, c, sigma});
    for (int n = 0; n < nn; ++n) es.push_back({MeasurementKind::GInj, n, sigma});
    for (int n = 0; n < nn; ++n) es.push_back({MeasurementKind::Pressure, n, sigma});
}

}  // namespace detail

// ---------------------------------------------------------------------- parse

inline Model parse_model(const nlohmann::json& doc) {
    using nlohmann::json;
    using namespace detail;
    if (!doc.is_object()) throw ParseError("model document must be a JSON object");
    Model m;
    m.version = doc.contains("version") ? doc.at("version").get<int>() : 1;
    if (doc.contains("bases")) {
        const auto& b = doc.at("bases");
        m.bases.mva = num(b, "mva", 100.0);
        if (b.contains("pressure_unit")) m.bases.pressure_unit = b.at("pressure_unit").get<std::string>();
        if (b.contains("flow_unit")) m.bases.flow_unit = b.at("flow_unit").get<std::string>();
    }

    const json power = doc.value("power", json::object());
    for (const auto& jb : power.value("buses", json::array())) {
        Bus b;
        b.id = str_req(jb, "id", "bus");
        b.v_min = num(jb, "v_min", b.v_min);
        b.v_max = num(jb, "v_max", b.v_max);
        b.theta_max = num(jb, "theta_max", b.theta_max);
        b.p_min = num(jb, "p_min", b.p_min);
        b.p_max = num(jb, "p_max", b.p_max);
        b.q_min = num(jb, "q_min", b.q_min);
        b.q_max = num(jb, "q_max", b.q_max);
        b.pmu = jb.value("pmu", false);
        m.power.buses.push_back(b);
    }
    for (const auto& jl : power.value("lines", json::array())) {
        Line l;
        l.id = str_req(jl, "id", "line");
        l.from = resolve(m.power.buses, str_req(jl, "from", "line " + l.id), "line " + l.id);
        l.to = resolve(m.power.buses, str_req(jl, "to", "line " + l.id), "line " + l.id);
        l.g = num_req(jl, "g", "line " + l.id);
        l.b = num_req(jl, "b", "line " + l.id);
        l.s_max = num(jl, "s_max", l.s_max);
        m.power.lines.push_back(l);
    }

    const json gas = doc.value("gas", json::object());
    for (const auto& jn : gas.value("nodes", json::array())) {
        GasNode n;
        n.id = str_req(jn, "id", "gas node");
        n.pi_min = num(jn, "pi_min", n.pi_min);
        n.pi_max = num(jn, "pi_max", n.pi_max);
        n.g_min = num(jn, "g_min", n.g_min);
        n.g_max = num(jn, "g_max", n.g_max);
        m.gas.nodes.push_back(n);
    }
    for (const auto& jp : gas.value("pipelines", json::array())) {
        Pipeline p;
        p.id = str_req(jp, "id", "pipeline");
        p.from = resolve(m.gas.nodes, str_req(jp, "from", "pipeline " + p.id), "pipeline " + p.id);
        p.to = resolve(m.gas.nodes, str_req(jp, "to", "pipeline " + p.id), "pipeline " + p.id);
        p.w = num_req(jp, "w", "pipeline " + p.id);
        p.g_max = num(jp, "g_max", p.g_max);
        m.gas.pipelines.push_back(p);
    }
    for (const auto& jc : gas.value("compressors", json::array())) {
        Compressor c;
        c.id = str_req(jc, "id", "compressor");
        c.from = resolve(m.gas.nodes, str_req(jc, "from", "compressor " + c.id), "compressor " + c.id);
        c.to = resolve(m.gas.nodes, str_req(jc, "to", "compressor " + c.id), "compressor " + c.id);
        c.alpha = num(jc, "alpha", c.alpha);
        c.c_max = num(jc, "c_max", c.c_max);
        if (jc.contains("detailed"))
            c.detailed = parse_detailed(jc.at("detailed"), "compressor " + c.id);
        m.gas.compressors.push_back(c);
    }
    for (const auto& jw : gas.value("wells", json::array())) {
        GasWell w;
        w.id = str_req(jw, "id", "well");
        w.node = resolve(m.gas.nodes, str_req(jw, "node", "well " + w.id), "well " + w.id);
        w.g_max = num(jw, "g_max", w.g_max);
        m.gas.wells.push_back(w);
    }
    for (const auto& jd : gas.value("loads", json::array())) {
        GasLoad d;
        d.id = str_req(jd, "id", "gas load");
        d.node = resolve(m.gas.nodes, str_req(jd, "node", "gas load " + d.id), "gas load " + d.id);
        d.demand = num_req(jd, "demand", "gas load " + d.id);
        m.gas.loads.push_back(d);
    }

    // generators and power loads may reference gas nodes, so parse them after
    for (const auto& jg : power.value("generators", json::array())) {
        Generator g;
        g.id = str_req(jg, "id", "generator");
        g.bus = resolve(m.power.buses, str_req(jg, "bus", "generator " + g.id), "generator " + g.id);
        const std::string kind = jg.value("kind", std::string("coal-fired"));
        if (kind == "coal-fired") g.kind = GeneratorKind::CoalFired;
        else if (kind == "gas-fired") g.kind = GeneratorKind::GasFired;
        else throw ParseError("generator kind must be 'coal-fired' or 'gas-fired' in generator " + g.id);
        if (g.kind == GeneratorKind::GasFired) {
            g.gamma = num_req(jg, "gamma", "generator " + g.id);
            g.gas_node = resolve(m.gas.nodes, str_req(jg, "gas_node", "generator " + g.id),
                                 "generator " + g.id);
        }
        g.p_max = num(jg, "p_max", g.p_max);
        m.power.generators.push_back(g);
    }
    for (const auto& jd : power.value("loads", json::array())) {
        PowerLoad d;
        d.id = str_req(jd, "id", "power load");
        d.bus = resolve(m.power.buses, str_req(jd, "bus", "power load " + d.id), "power load " + d.id);
        d.p = num_req(jd, "p", "power load " + d.id);
        d.q = num(jd, "q", 0.0);
        m.power.loads.push_back(d);
    }
    if (power.contains("reference_bus"))
        m.reference_bus = resolve(m.power.buses, power.at("reference_bus").get<std::string>(),
                                  "reference_bus");

    const json coupling = doc.value("coupling", json::object());
    for (const auto& jf : coupling.value("p2g", json::array())) {
        P2gFacility f;
        f.id = str_req(jf, "id", "p2g facility");
        f.bus = resolve(m.power.buses, str_req(jf, "bus", "p2g " + f.id), "p2g " + f.id);
        f.node = resolve(m.gas.nodes, str_req(jf, "node", "p2g " + f.id), "p2g " + f.id);
        f.chi = num_req(jf, "chi", "p2g " + f.id);
        m.coupling.p2g.push_back(f);
    }

    m.finalize();

    if (doc.contains("measurement_plan")) {
        const auto& jp = doc.at("measurement_plan");
        if (jp.is_object() && jp.value("preset", std::string()) == "full") {
            detail::expand_full_plan(m, num(jp, "std", 0.01));
        } else if (jp.is_array()) {
            for (const auto& je : jp) {
                Measurement e;
                const std::string ks = str_req(je, "kind", "measurement plan entry");
                const auto kind = kind_from_name(ks);
                if (!kind) throw ParseError("unknown measurement kind '" + ks + "'");
                e.kind = *kind;
                const std::string el = str_req(je, "element", "measurement " + ks);
                switch (e.kind) {
                    case MeasurementKind::PInj:
                    case MeasurementKind::QInj:
                    case MeasurementKind::VMag:
                    case MeasurementKind::ThetaPmu:
                        e.element = resolve(m.power.buses, el, "measurement " + ks); break;
                    case MeasurementKind::PFlowFwd:
                    case MeasurementKind::PFlowRev:
                    case MeasurementKind::QFlowFwd:
                    case MeasurementKind::QFlowRev:
                        e.element = resolve(m.power.lines, el, "measurement " + ks); break;
                    case MeasurementKind::GInj:
                    case MeasurementKind::Pressure:
                        e.element = resolve(m.gas.nodes, el, "measurement " + ks); break;
                    case MeasurementKind::GFlowPipe:
                        e.element = resolve(m.gas.pipelines, el, "measurement " + ks); break;
                    case MeasurementKind::GFlowComp:
                        e.element = resolve(m.gas.compressors, el, "measurement " + ks); break;
                }
                e.sigma = num_req(je, "std", "measurement " + ks + " " + el);
                m.plan.entries.push_back(e);
            }
        } else {
            throw ParseError("measurement_plan must be an entry array or {\"preset\":\"full\"}");
        }
    }

    return m;
}

// Loads, validates, and rejects invalid documents.
inline Model load_model_from_json(const nlohmann::json& doc) {
    Model m = parse_model(doc);
    const auto violations = validate_model(m);
    if (!violations.empty()) {
        std::ostringstream os;
        os << "model validation failed:";
        for (const auto& v : violations) os << "\n  " << v.path << ": " << v.message;
        throw ValidationError(os.str());
    }
    return m;
}

inline Model load_model(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model document: ") + e.what());
    }
    return load_model_from_json(doc);
}

inline Model load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_model(ss.str());
}

// ------------------------------------------------------------------ serialize

inline nlohmann::json model_to_json(const Model& m) {
    using nlohmann::json;
    json doc;
    doc["version"] = m.version;
    doc["bases"] = {{"mva", m.bases.mva},
                    {"pressure_unit", m.bases.pressure_unit},
                    {"flow_unit", m.bases.flow_unit}};

    json power;
    power["buses"] = json::array();
    for (const auto& b : m.power.buses)
        power["buses"].push_back({{"id", b.id}, {"v_min", b.v_min}, {"v_max", b.v_max},
                                  {"theta_max", b.theta_max}, {"p_min", b.p_min},
                                  {"p_max", b.p_max}, {"q_min", b.q_min}, {"q_max", b.q_max},
                                  {"pmu", b.pmu}});
    power["lines"] = json::array();
    for (const auto& l : m.power.lines)
        power["lines"].push_back({{"id", l.id}, {"from", m.power.buses[l.from].id},
                                  {"to", m.power.buses[l.to].id}, {"g", l.g}, {"b", l.b},
                                  {"s_max", l.s_max}});
    power["generators"] = json::array();
    for (const auto& g : m.power.generators) {
        json jg = {{"id", g.id}, {"bus", m.power.buses[g.bus].id},
                   {"kind", g.kind == GeneratorKind::CoalFired ? "coal-fired" : "gas-fired"},
                   {"p_max", g.p_max}};
        if (g.kind == GeneratorKind::GasFired) {
            jg["gamma"] = g.gamma;
            jg["gas_node"] = m.gas.nodes[g.gas_node].id;
        }
        power["generators"].push_back(jg);
    }
    power["loads"] = json::array();
    for (const auto& d : m.power.loads)
        power["loads"].push_back({{"id", d.id}, {"bus", m.power.buses[d.bus].id},
                                  {"p", d.p}, {"q", d.q}});
    if (m.reference_bus) power["reference_bus"] = m.power.buses[*m.reference_bus].id;
    doc["power"] = power;

    json gas;
    gas["nodes"] = json::array();
    for (const auto& n : m.gas.nodes)
        gas["nodes"].push_back({{"id", n.id}, {"pi_min", n.pi_min}, {"pi_max", n.pi_max},
                                {"g_min", n.g_min}, {"g_max", n.g_max}});
    gas["pipelines"] = json::array();
    for (const auto& p : m.gas.pipelines)
        gas["pipelines"].push_back({{"id", p.id}, {"from", m.gas.nodes[p.from].id},
                                    {"to", m.gas.nodes[p.to].id}, {"w", p.w},
                                    {"g_max", p.g_max}});
    gas["compressors"] = json::array();
    for (const auto& c : m.gas.compressors) {
        json jc = {{"id", c.id}, {"from", m.gas.nodes[c.from].id},
                   {"to", m.gas.nodes[c.to].id}, {"alpha", c.alpha}, {"c_max", c.c_max}};
        if (c.detailed) jc["detailed"] = detail::detailed_to_json(*c.detailed);
        gas["compressors"].push_back(jc);
    }
    gas["wells"] = json::array();
    for (const auto& w : m.gas.wells)
        gas["wells"].push_back({{"id", w.id}, {"node", m.gas.nodes[w.node].id},
                                {"g_max", w.g_max}});
    gas["loads"] = json::array();
    for (const auto& d : m.gas.loads)
        gas["loads"].push_back({{"id", d.id}, {"node", m.gas.nodes[d.node].id},
                                {"demand", d.demand}});
    doc["gas"] = gas;

    json coupling;
    coupling["p2g"] = json::array();
    for (const auto& f : m.coupling.p2g)
        coupling["p2g"].push_back({{"id", f.id}, {"bus", m.power.buses[f.bus].id},
                                   {"node", m.gas.nodes[f.node].id}, {"chi", f.chi}});
    doc["coupling"] = coupling;

    doc["measurement_plan"] = nlohmann::json::array();
    for (const auto& e : m.plan.entries)
        doc["measurement_plan"].push_back({{"kind", kind_name(e.kind)},
                                           {"element", element_id(m, e)},
                                           {"std", e.sigma}});
    return doc;
}

inline std::string serialize_model(const Model& m) { return model_to_json(m).dump(2) + "\n"; }

}  // namespace iegs
