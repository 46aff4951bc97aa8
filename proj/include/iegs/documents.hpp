#pragma once

// JSON document formats for the batch pipeline: scenario inputs, measurement
// sets, estimation results, attack vectors, verification reports, and
// partition audits. Everything round-trips through nlohmann::json with
// stable key ordering, so repeated runs produce byte-identical files.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iegs/attack.hpp"
#include "iegs/compressor.hpp"
#include "iegs/estimation.hpp"
#include "iegs/local_attack.hpp"
#include "iegs/model_io.hpp"
#include "iegs/scenario.hpp"
#include "iegs/topology_attack.hpp"

namespace iegs {

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed document " + path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const nlohmann::json& doc) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    out << doc.dump(2) << "\n";
}

// ------------------------------------------------------------------- scenario

inline DispatchSpec parse_dispatch(const nlohmann::json& d) {
    DispatchSpec dispatch;
    dispatch.slack_bus = d.value("slack_bus", std::string());
    dispatch.slack_v = d.value("slack_v", 1.0);
    dispatch.slack_node = d.value("slack_node", std::string());
    dispatch.slack_pressure = d.value("slack_pressure", 50.0);
    for (const auto& g : d.value("generators", nlohmann::json::array())) {
        GeneratorSetpoint sp;
        sp.generator = g.at("generator");
        sp.p = g.value("p", 0.0);
        sp.q = g.value("q", 0.0);
        if (g.contains("v_set")) sp.v_set = g.at("v_set").get<double>();
        dispatch.generators.push_back(sp);
    }
    for (const auto& w : d.value("wells", nlohmann::json::array()))
        dispatch.wells.push_back({w.at("well"), w.at("g")});
    for (const auto& c : d.value("compressors", nlohmann::json::array())) {
        CompressorSetpoint sp;
        sp.compressor = c.at("compressor");
        sp.mode = c.value("mode", std::string("ratio")) == "flow"
                      ? CompressorSetpoint::Mode::Flow
                      : CompressorSetpoint::Mode::Ratio;
        sp.value = c.at("value");
        dispatch.compressors.push_back(sp);
    }
    for (const auto& f : d.value("p2g", nlohmann::json::array()))
        dispatch.p2g.push_back({f.at("facility"), f.at("p_intake")});
    return dispatch;
}

inline NoiseModel parse_noise(const nlohmann::json& n) {
    NoiseModel noise;
    const std::string mode = n.value("mode", std::string("none"));
    if (mode == "none") noise.mode = NoiseModel::Mode::None;
    else if (mode == "preset_low") noise.mode = NoiseModel::Mode::PresetLow;
    else if (mode == "preset_high") noise.mode = NoiseModel::Mode::PresetHigh;
    else if (mode == "scalar") noise.mode = NoiseModel::Mode::Scalar;
    else if (mode == "plan") noise.mode = NoiseModel::Mode::Plan;
    else throw ParseError("unknown noise mode: " + mode);
    noise.sigma = n.value("sigma", 0.0);
    noise.seed = n.value("seed", std::uint64_t{0});
    return noise;
}

inline const char* noise_mode_name(NoiseModel::Mode mode) {
    switch (mode) {
        case NoiseModel::Mode::None: return "none";
        case NoiseModel::Mode::PresetLow: return "preset_low";
        case NoiseModel::Mode::PresetHigh: return "preset_high";
        case NoiseModel::Mode::Scalar: return "scalar";
        case NoiseModel::Mode::Plan: return "plan";
    }
    return "?";
}

// ------------------------------------------------------------------- vectors

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[i] = j.at(i).get<double>();
    return v;
}

inline nlohmann::json state_to_json(const StateVector& s, const Model& m) {
    nlohmann::json out;
    nlohmann::json v = nlohmann::json::array(), th = nlohmann::json::array(),
                   c = nlohmann::json::array(), pi = nlohmann::json::array();
    for (int b = 0; b < s.layout.n_bus; ++b) {
        v.push_back({{"bus", m.power.buses[b].id}, {"value", s.v(b)}});
        th.push_back({{"bus", m.power.buses[b].id}, {"value", s.theta(b)}});
    }
    for (int k = 0; k < s.layout.n_comp; ++k)
        c.push_back({{"compressor", m.gas.compressors[k].id}, {"value", s.c(k)}});
    for (int n = 0; n < s.layout.n_node; ++n)
        pi.push_back({{"node", m.gas.nodes[n].id}, {"value", s.pi(n)}});
    out["v"] = v;
    out["theta"] = th;
    out["c"] = c;
    out["pi"] = pi;
    out["x"] = vector_to_json(s.x);  // flat array in state order
    return out;
}

inline StateVector state_from_json(const nlohmann::json& j, const Model& m) {
    StateVector s(m.layout());
    for (const auto& e : j.at("v")) s.v(m.bus_index(e.at("bus"))) = e.at("value");
    for (const auto& e : j.at("theta")) s.theta(m.bus_index(e.at("bus"))) = e.at("value");
    for (const auto& e : j.at("c")) s.c(m.compressor_index(e.at("compressor"))) = e.at("value");
    for (const auto& e : j.at("pi")) s.pi(m.node_index(e.at("node"))) = e.at("value");
    return s;
}

// ----------------------------------------------------------------- documents

inline nlohmann::json measurements_to_json(const MeasurementVector& z, const Model& m,
                                           const NoiseModel& noise) {
    nlohmann::json doc;
    doc["plan"] = nlohmann::json::array();
    for (const auto& e : m.plan.entries)
        doc["plan"].push_back({{"kind", kind_name(e.kind)},
                               {"element", element_id(m, e)},
                               {"std", e.sigma}});
    doc["values"] = vector_to_json(z.values);
    doc["variance"] = vector_to_json(z.variance);
    doc["noise"] = {{"mode", noise_mode_name(noise.mode)},
                    {"seed", noise.seed},
                    {"sigma", noise.sigma}};
    return doc;
}

// Checks the plan echo against the model so mismatched documents fail fast.
inline MeasurementVector measurements_from_json(const nlohmann::json& doc, const Model& m) {
    const auto& plan = doc.at("plan");
    if (static_cast<int>(plan.size()) != m.plan.size())
        throw ParseError("measurement document plan length does not match the model");
    for (int k = 0; k < m.plan.size(); ++k) {
        const auto& e = m.plan.entries[k];
        if (plan.at(k).at("kind") != kind_name(e.kind) ||
            plan.at(k).at("element") != element_id(m, e))
            throw ParseError("measurement document plan entry " + std::to_string(k) +
                             " does not match the model plan");
    }
    MeasurementVector z;
    z.values = vector_from_json(doc.at("values"));
    z.variance = vector_from_json(doc.at("variance"));
    if (z.values.size() != m.plan.size() || z.variance.size() != m.plan.size())
        throw ParseError("measurement document vector length mismatch");
    return z;
}

inline nlohmann::json verdict_to_json(const DetectionVerdict& v) {
    return {{"r_norm", v.r_norm},
            {"weighted_r_norm", v.weighted_r_norm},
            {"rc_norm", v.rc_norm},
            {"tau", v.tau},
            {"tau_is_weighted", v.tau_is_weighted},
            {"epsilon", v.epsilon},
            {"global_bad_data", v.global_bad_data},
            {"coupling_inconsistency", v.coupling_inconsistency}};
}

inline nlohmann::json result_to_json(const EstimationResult& r, const Model& m,
                                     const DetectionVerdict& verdict,
                                     const std::string& mode) {
    nlohmann::json doc;
    doc["mode"] = mode;
    doc["converged"] = r.converged;
    doc["iterations"] = r.iterations;
    doc["objective"] = r.objective;
    doc["state"] = state_to_json(r.state, m);
    doc["residual"] = vector_to_json(r.residual);
    doc["r_norm"] = r.r_norm;
    doc["weighted_r_norm"] = r.weighted_r_norm;
    doc["coupling_residual"] = vector_to_json(r.coupling_residual);
    doc["rc_norm"] = r.coupling_residual.size() ? r.coupling_residual.norm() : 0.0;
    doc["multipliers"] = vector_to_json(r.multipliers);
    doc["verdict"] = verdict_to_json(verdict);
    doc["trace"] = nlohmann::json::array();
    for (const auto& t : r.trace)
        doc["trace"].push_back({{"iter", t.iter},
                                {"objective", t.objective},
                                {"step_norm", t.step_norm},
                                {"lambda", t.lambda},
                                {"constraint_norm", t.constraint_norm}});
    nlohmann::json ext = nlohmann::json::array();
    for (const auto& entry : extended_compressor_states(r.state, m)) {
        const auto& s = entry.state;
        ext.push_back({{"compressor", entry.compressor},
                       {"kind", entry.kind == CompressorKind::Turbo ? "turbo" : "piston"},
                       {"rho", s.rho},
                       {"u", s.u},
                       {"v", s.v},
                       {"h", s.h},
                       {"p_c", s.p_c},
                       {"eta", s.eta},
                       {"b", s.b},
                       {"n", s.n},
                       {"p_c_max", s.p_c_max},
                       {"m", s.m},
                       {"power_limit_ok", s.power_limit_ok},
                       {"enthalpy_range_ok", s.enthalpy_range_ok},
                       {"speed_range_ok", s.speed_range_ok}});
    }
    doc["extended_compressors"] = ext;
    return doc;
}

inline std::string state_label(const Model& m, int idx) {
    const StateLayout L = m.layout();
    if (idx < L.n_bus) return "v:" + m.power.buses[idx].id;
    if (idx < 2 * L.n_bus) return "theta:" + m.power.buses[idx - L.n_bus].id;
    if (idx < 2 * L.n_bus + L.n_comp) return "c:" + m.gas.compressors[idx - 2 * L.n_bus].id;
    return "pi:" + m.gas.nodes[idx - 2 * L.n_bus - L.n_comp].id;
}

inline nlohmann::json attack_to_json(const AttackVector& a, const Model& m) {
    nlohmann::json doc;
    doc["provenance"] = provenance_name(a.provenance);
    doc["delta_z"] = nlohmann::json::array();
    for (int k = 0; k < a.delta_z.size(); ++k) {
        if (a.delta_z[k] == 0.0) continue;
        const auto& e = m.plan.entries[k];
        doc["delta_z"].push_back({{"index", k},
                                  {"kind", kind_name(e.kind)},
                                  {"element", element_id(m, e)},
                                  {"delta", a.delta_z[k]}});
    }
    doc["delta_x"] = nlohmann::json::array();
    for (int i = 0; i < a.delta_x.size(); ++i) {
        if (a.delta_x[i] == 0.0) continue;
        doc["delta_x"].push_back(
            {{"index", i}, {"state", state_label(m, i)}, {"delta", a.delta_x[i]}});
    }
    doc["certificate"] = {{"predicted_residual_delta", a.certificate.predicted_residual_delta},
                          {"predicted_coupling_norm", a.certificate.predicted_coupling_norm},
                          {"stealthy", a.certificate.stealthy}};
    return doc;
}

inline AttackVector attack_from_json(const nlohmann::json& doc, const Model& m) {
    AttackVector a;
    const std::string prov = doc.value("provenance", std::string("complete"));
    if (prov == "complete") a.provenance = AttackProvenance::Complete;
    else if (prov == "local") a.provenance = AttackProvenance::Local;
    else if (prov == "topology") a.provenance = AttackProvenance::Topology;
    else if (prov == "naive") a.provenance = AttackProvenance::Naive;
    a.delta_z = Eigen::VectorXd::Zero(m.plan.size());
    for (const auto& e : doc.value("delta_z", nlohmann::json::array()))
        a.delta_z[e.at("index").get<int>()] = e.at("delta");
    a.delta_x = Eigen::VectorXd::Zero(m.layout().size());
    for (const auto& e : doc.value("delta_x", nlohmann::json::array()))
        a.delta_x[e.at("index").get<int>()] = e.at("delta");
    if (doc.contains("certificate")) {
        a.certificate.predicted_residual_delta =
            doc["certificate"].value("predicted_residual_delta", 0.0);
        a.certificate.predicted_coupling_norm =
            doc["certificate"].value("predicted_coupling_norm", 0.0);
        a.certificate.stealthy = doc["certificate"].value("stealthy", false);
    }
    return a;
}

// Verification report in the before/after layout used throughout the study
// tables: target, affected states, residual norms on both sides.
inline nlohmann::json verification_to_json(const std::string& scenario,
                                           const std::string& target,
                                           const std::string& knowledge,
                                           const AttackVector& a, const StealthReport& rep,
                                           const Model& m) {
    nlohmann::json doc;
    doc["scenario"] = scenario;
    doc["attack_target"] = target;
    doc["knowledge"] = knowledge;
    nlohmann::json aps = nlohmann::json::array(), ags = nlohmann::json::array();
    const StateLayout L = m.layout();
    for (int i = 0; i < a.delta_x.size(); ++i) {
        if (std::abs(a.delta_x[i]) <= 1e-12) continue;
        (L.is_power_index(i) ? aps : ags).push_back(state_label(m, i));
    }
    doc["affected_power_states"] = aps;
    doc["affected_gas_states"] = ags;
    nlohmann::json meas = nlohmann::json::array();
    for (int k : a.touched_measurements(1e-12)) {
        const auto& e = m.plan.entries[k];
        meas.push_back(std::string(kind_name(e.kind)) + ":" + element_id(m, e));
    }
    doc["affected_measurements"] = meas;
    doc["residual_before"] = rep.r_norm_before;
    doc["residual_after"] = rep.r_norm_after;
    doc["rc_before"] = rep.rc_norm_before;
    doc["rc_after"] = rep.rc_norm_after;
    doc["verdict_before"] = verdict_to_json(rep.verdict_before);
    doc["verdict_after"] = verdict_to_json(rep.verdict_after);
    doc["stealthy"] = !rep.verdict_after.global_bad_data &&
                      !rep.verdict_after.coupling_inconsistency;
    return doc;
}

inline nlohmann::json partition_to_json(const RegionPartition& p, const Model& m) {
    nlohmann::json doc;
    auto bus_ids = [&](const std::vector<int>& v) {
        nlohmann::json out = nlohmann::json::array();
        for (int b : v) out.push_back(m.power.buses[b].id);
        return out;
    };
    auto node_ids = [&](const std::vector<int>& v) {
        nlohmann::json out = nlohmann::json::array();
        for (int n : v) out.push_back(m.gas.nodes[n].id);
        return out;
    };
    doc["attacking"] = {{"buses", bus_ids(p.attacking.buses)},
                        {"nodes", node_ids(p.attacking.nodes)}};
    doc["boundary"] = {{"tie_buses", bus_ids(p.boundary_tie_buses)},
                       {"gen_buses", bus_ids(p.boundary_gen_buses)},
                       {"tie_nodes", node_ids(p.boundary_tie_nodes)},
                       {"gen_nodes", node_ids(p.boundary_gen_nodes)}};
    nlohmann::json ties;
    ties["lines"] = nlohmann::json::array();
    for (int l : p.tie_lines) ties["lines"].push_back(m.power.lines[l].id);
    ties["pipelines"] = nlohmann::json::array();
    for (int q : p.tie_pipes) ties["pipelines"].push_back(m.gas.pipelines[q].id);
    ties["compressors"] = nlohmann::json::array();
    for (int c : p.tie_comps) ties["compressors"].push_back(m.gas.compressors[c].id);
    doc["tie"] = ties;
    doc["z_A"] = p.z_A;
    doc["z_B"] = p.z_B;
    doc["z_N"] = p.z_N;
    doc["x_A"] = p.x_A;
    doc["x_B"] = p.x_B;
    doc["x_N"] = p.x_N;
    return doc;
}

}  // namespace iegs
