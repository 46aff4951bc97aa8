#pragma once

// Local-knowledge attacks: the attacking/boundary/non-attacking partition,
// measurement falsification computed purely from attacking-region knowledge,
// and the intruder-side state estimate built from revised boundary
// injections.
//
// The knowledge firewall is structural: every local computation runs on a
// submodel that contains only attacking-region elements, so non-attacking
// parameters cannot leak into the result.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "iegs/attack.hpp"
#include "iegs/estimation.hpp"
#include "iegs/measurement.hpp"
#include "iegs/model.hpp"

namespace iegs {

struct RegionSpec {
    std::vector<int> buses;
    std::vector<int> nodes;
};

struct RegionPartition {
    RegionSpec attacking;
    std::vector<char> bus_in;   // per bus
    std::vector<char> node_in;  // per node
    std::vector<int> tie_lines, tie_pipes, tie_comps;

    // boundary membership by rule: tie endpoints inside the region, buses
    // hosting gas-fired generators, nodes feeding gas-fired generators
    std::vector<int> boundary_tie_buses;
    std::vector<int> boundary_gen_buses;
    std::vector<int> boundary_tie_nodes;
    std::vector<int> boundary_gen_nodes;
    std::vector<int> boundary_buses;  // union, sorted
    std::vector<int> boundary_nodes;

    std::vector<int> z_A, z_B, z_N;  // plan rows
    std::vector<int> x_A, x_B, x_N;  // state indices

    bool is_boundary_bus(int b) const {
        return std::binary_search(boundary_buses.begin(), boundary_buses.end(), b);
    }
    bool is_boundary_node(int n) const {
        return std::binary_search(boundary_nodes.begin(), boundary_nodes.end(), n);
    }
};

// ---------------------------------------------------------------- partition

inline RegionPartition partition_model(const Model& m, const RegionSpec& region) {
    const int nb = static_cast<int>(m.power.buses.size());
    const int nn = static_cast<int>(m.gas.nodes.size());
    if (region.buses.empty() && region.nodes.empty())
        throw std::invalid_argument("attacking region is empty");
    RegionPartition p;
    p.attacking = region;
    p.bus_in.assign(nb, 0);
    p.node_in.assign(nn, 0);
    for (int b : region.buses) {
        if (b < 0 || b >= nb) throw std::invalid_argument("unknown bus in attacking region");
        p.bus_in[b] = 1;
    }
    for (int n : region.nodes) {
        if (n < 0 || n >= nn) throw std::invalid_argument("unknown node in attacking region");
        p.node_in[n] = 1;
    }

    auto note_boundary_bus = [&](std::vector<int>& kind, int b) {
        kind.push_back(b);
        p.boundary_buses.push_back(b);
    };
    auto note_boundary_node = [&](std::vector<int>& kind, int n) {
        kind.push_back(n);
        p.boundary_nodes.push_back(n);
    };

    for (int l = 0; l < static_cast<int>(m.power.lines.size()); ++l) {
        const auto& ln = m.power.lines[l];
        const int inside = p.bus_in[ln.from] + p.bus_in[ln.to];
        if (inside == 1) {
            p.tie_lines.push_back(l);
            note_boundary_bus(p.boundary_tie_buses, p.bus_in[ln.from] ? ln.from : ln.to);
        }
    }
    for (int q = 0; q < static_cast<int>(m.gas.pipelines.size()); ++q) {
        const auto& pl = m.gas.pipelines[q];
        const int inside = p.node_in[pl.from] + p.node_in[pl.to];
        if (inside == 1) {
            p.tie_pipes.push_back(q);
            note_boundary_node(p.boundary_tie_nodes, p.node_in[pl.from] ? pl.from : pl.to);
        }
    }
    for (int c = 0; c < static_cast<int>(m.gas.compressors.size()); ++c) {
        const auto& cp = m.gas.compressors[c];
        const int inside = p.node_in[cp.from] + p.node_in[cp.to];
        if (inside == 1) {
            p.tie_comps.push_back(c);
            note_boundary_node(p.boundary_tie_nodes, p.node_in[cp.from] ? cp.from : cp.to);
        }
    }
    for (int b = 0; b < nb; ++b) {
        if (!p.bus_in[b]) continue;
        for (int g : m.bus_generators[b])
            if (m.power.generators[g].kind == GeneratorKind::GasFired) {
                note_boundary_bus(p.boundary_gen_buses, b);
                break;
            }
    }
    for (int n = 0; n < nn; ++n)
        if (p.node_in[n] && !m.node_generators[n].empty())
            note_boundary_node(p.boundary_gen_nodes, n);

    auto dedup = [](std::vector<int>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    dedup(p.boundary_buses);
    dedup(p.boundary_nodes);
    dedup(p.boundary_tie_buses);
    dedup(p.boundary_tie_nodes);
    dedup(p.boundary_gen_buses);
    dedup(p.boundary_gen_nodes);

    std::vector<char> internal_line(m.power.lines.size(), 0);
    for (int l = 0; l < static_cast<int>(m.power.lines.size()); ++l)
        internal_line[l] = p.bus_in[m.power.lines[l].from] && p.bus_in[m.power.lines[l].to];
    std::vector<char> internal_pipe(m.gas.pipelines.size(), 0);
    for (int q = 0; q < static_cast<int>(m.gas.pipelines.size()); ++q)
        internal_pipe[q] = p.node_in[m.gas.pipelines[q].from] && p.node_in[m.gas.pipelines[q].to];
    std::vector<char> internal_comp(m.gas.compressors.size(), 0);
    for (int c = 0; c < static_cast<int>(m.gas.compressors.size()); ++c)
        internal_comp[c] =
            p.node_in[m.gas.compressors[c].from] && p.node_in[m.gas.compressors[c].to];

    for (int k = 0; k < m.plan.size(); ++k) {
        const auto& e = m.plan.entries[k];
        switch (e.kind) {
            case MeasurementKind::PInj:
            case MeasurementKind::QInj:
                if (!p.bus_in[e.element]) p.z_N.push_back(k);
                else if (p.is_boundary_bus(e.element)) p.z_B.push_back(k);
                else p.z_A.push_back(k);
                break;
            case MeasurementKind::VMag:
            case MeasurementKind::ThetaPmu:
                (p.bus_in[e.element] ? p.z_A : p.z_N).push_back(k);
                break;
            case MeasurementKind::PFlowFwd:
            case MeasurementKind::PFlowRev:
            case MeasurementKind::QFlowFwd:
            case MeasurementKind::QFlowRev:
                (internal_line[e.element] ? p.z_A : p.z_N).push_back(k);
                break;
            case MeasurementKind::GInj:
                if (!p.node_in[e.element]) p.z_N.push_back(k);
                else if (p.is_boundary_node(e.element)) p.z_B.push_back(k);
                else p.z_A.push_back(k);
                break;
            case MeasurementKind::Pressure:
                (p.node_in[e.element] ? p.z_A : p.z_N).push_back(k);
                break;
            case MeasurementKind::GFlowPipe:
                (internal_pipe[e.element] ? p.z_A : p.z_N).push_back(k);
                break;
            case MeasurementKind::GFlowComp:
                (internal_comp[e.element] ? p.z_A : p.z_N).push_back(k);
                break;
        }
    }

    const StateLayout L = m.layout();
    for (int b = 0; b < nb; ++b) {
        auto& dst = !p.bus_in[b] ? p.x_N : (p.is_boundary_bus(b) ? p.x_B : p.x_A);
        dst.push_back(L.v(b));
        dst.push_back(L.theta(b));
    }
    for (int c = 0; c < static_cast<int>(m.gas.compressors.size()); ++c)
        (internal_comp[c] ? p.x_A : p.x_N).push_back(L.c(c));
    for (int n = 0; n < nn; ++n) {
        auto& dst = !p.node_in[n] ? p.x_N : (p.is_boundary_node(n) ? p.x_B : p.x_A);
        dst.push_back(L.pi(n));
    }
    return p;
}

// ----------------------------------------------------------------- submodel

// The attacking region as a standalone network. All external elements are
// absent, so any evaluation on it is independent of non-attacking
// parameters by construction. Gas-fired generators whose supply node lies
// outside the region keep their electrical role but lose the coupling
// reference (the pair is not locally checkable).
struct RegionSubmodel {
    Model model;
    std::vector<int> bus_map, node_map, comp_map;      // sub index -> full index
    std::vector<int> state_map;                        // sub state -> full state
    std::vector<int> row_map;                          // sub plan row -> full plan row
    std::vector<char> row_is_boundary_injection;       // aligned with sub plan
    std::vector<std::string> notes;

    int full_to_sub_state(int full_idx) const {
        for (size_t i = 0; i < state_map.size(); ++i)
            if (state_map[i] == full_idx) return static_cast<int>(i);
        return -1;
    }
};

inline RegionSubmodel build_region_submodel(const Model& m, const RegionPartition& p) {
    RegionSubmodel sub;
    Model& s = sub.model;
    s.bases = m.bases;

    std::vector<int> bus_to_sub(m.power.buses.size(), -1);
    std::vector<int> node_to_sub(m.gas.nodes.size(), -1);
    std::vector<int> line_to_sub(m.power.lines.size(), -1);
    std::vector<int> pipe_to_sub(m.gas.pipelines.size(), -1);
    std::vector<int> comp_to_sub(m.gas.compressors.size(), -1);

    for (int b = 0; b < static_cast<int>(m.power.buses.size()); ++b) {
        if (!p.bus_in[b]) continue;
        bus_to_sub[b] = static_cast<int>(s.power.buses.size());
        s.power.buses.push_back(m.power.buses[b]);
        sub.bus_map.push_back(b);
    }
    for (int l = 0; l < static_cast<int>(m.power.lines.size()); ++l) {
        const auto& ln = m.power.lines[l];
        if (bus_to_sub[ln.from] < 0 || bus_to_sub[ln.to] < 0) continue;
        Line copy = ln;
        copy.from = bus_to_sub[ln.from];
        copy.to = bus_to_sub[ln.to];
        line_to_sub[l] = static_cast<int>(s.power.lines.size());
        s.power.lines.push_back(copy);
    }
    for (int n = 0; n < static_cast<int>(m.gas.nodes.size()); ++n) {
        if (!p.node_in[n]) continue;
        node_to_sub[n] = static_cast<int>(s.gas.nodes.size());
        s.gas.nodes.push_back(m.gas.nodes[n]);
        sub.node_map.push_back(n);
    }
    for (int q = 0; q < static_cast<int>(m.gas.pipelines.size()); ++q) {
        const auto& pl = m.gas.pipelines[q];
        if (node_to_sub[pl.from] < 0 || node_to_sub[pl.to] < 0) continue;
        Pipeline copy = pl;
        copy.from = node_to_sub[pl.from];
        copy.to = node_to_sub[pl.to];
        pipe_to_sub[q] = static_cast<int>(s.gas.pipelines.size());
        s.gas.pipelines.push_back(copy);
    }
    for (int c = 0; c < static_cast<int>(m.gas.compressors.size()); ++c) {
        const auto& cp = m.gas.compressors[c];
        if (node_to_sub[cp.from] < 0 || node_to_sub[cp.to] < 0) continue;
        Compressor copy = cp;
        copy.from = node_to_sub[cp.from];
        copy.to = node_to_sub[cp.to];
        comp_to_sub[c] = static_cast<int>(s.gas.compressors.size());
        s.gas.compressors.push_back(copy);
        sub.comp_map.push_back(c);
    }
    for (const auto& g : m.power.generators) {
        if (bus_to_sub[g.bus] < 0) continue;
        Generator copy = g;
        copy.bus = bus_to_sub[g.bus];
        if (g.kind == GeneratorKind::GasFired) {
            if (g.gas_node >= 0 && node_to_sub[g.gas_node] >= 0) {
                copy.gas_node = node_to_sub[g.gas_node];
            } else {
                copy.kind = GeneratorKind::CoalFired;
                copy.gas_node = -1;
                copy.gamma = 0.0;
                sub.notes.push_back("generator " + g.id +
                                    ": supply node outside the region, coupling not "
                                    "locally checkable");
            }
        }
        s.power.generators.push_back(copy);
    }
    for (const auto& d : m.power.loads) {
        if (bus_to_sub[d.bus] < 0) continue;
        PowerLoad copy = d;
        copy.bus = bus_to_sub[d.bus];
        s.power.loads.push_back(copy);
    }
    for (const auto& w : m.gas.wells) {
        if (node_to_sub[w.node] < 0) continue;
        GasWell copy = w;
        copy.node = node_to_sub[w.node];
        s.gas.wells.push_back(copy);
    }
    for (const auto& d : m.gas.loads) {
        if (node_to_sub[d.node] < 0) continue;
        GasLoad copy = d;
        copy.node = node_to_sub[d.node];
        s.gas.loads.push_back(copy);
    }
    for (const auto& f : m.coupling.p2g) {
        if (bus_to_sub[f.bus] < 0 || node_to_sub[f.node] < 0) {
            if (bus_to_sub[f.bus] >= 0 || node_to_sub[f.node] >= 0)
                sub.notes.push_back("p2g " + f.id + ": pair straddles the region boundary");
            continue;
        }
        P2gFacility copy = f;
        copy.bus = bus_to_sub[f.bus];
        copy.node = node_to_sub[f.node];
        s.coupling.p2g.push_back(copy);
    }

    s.finalize();

    // the sub plan keeps the full plan's ordering over z_A and z_B rows
    auto in = [](const std::vector<int>& v, int k) {
        return std::binary_search(v.begin(), v.end(), k);
    };
    std::vector<int> zA = p.z_A, zB = p.z_B;
    std::sort(zA.begin(), zA.end());
    std::sort(zB.begin(), zB.end());
    for (int k = 0; k < m.plan.size(); ++k) {
        const bool in_a = in(zA, k);
        const bool in_b = in(zB, k);
        if (!in_a && !in_b) continue;
        Measurement e = m.plan.entries[k];
        switch (e.kind) {
            case MeasurementKind::PInj:
            case MeasurementKind::QInj:
            case MeasurementKind::VMag:
            case MeasurementKind::ThetaPmu:
                e.element = bus_to_sub[e.element];
                break;
            case MeasurementKind::PFlowFwd:
            case MeasurementKind::PFlowRev:
            case MeasurementKind::QFlowFwd:
            case MeasurementKind::QFlowRev:
                e.element = line_to_sub[e.element];
                break;
            case MeasurementKind::GInj:
            case MeasurementKind::Pressure:
                e.element = node_to_sub[e.element];
                break;
            case MeasurementKind::GFlowPipe:
                e.element = pipe_to_sub[e.element];
                break;
            case MeasurementKind::GFlowComp:
                e.element = comp_to_sub[e.element];
                break;
        }
        s.plan.entries.push_back(e);
        sub.row_map.push_back(k);
        sub.row_is_boundary_injection.push_back(in_b ? 1 : 0);
    }

    const StateLayout sl = s.layout();
    const StateLayout fl = m.layout();
    sub.state_map.resize(sl.size());
    for (int b = 0; b < sl.n_bus; ++b) {
        sub.state_map[sl.v(b)] = fl.v(sub.bus_map[b]);
        sub.state_map[sl.theta(b)] = fl.theta(sub.bus_map[b]);
    }
    for (int c = 0; c < sl.n_comp; ++c) sub.state_map[sl.c(c)] = fl.c(sub.comp_map[c]);
    for (int n = 0; n < sl.n_node; ++n) sub.state_map[sl.pi(n)] = fl.pi(sub.node_map[n]);
    return sub;
}

// ---------------------------------------------------------------- forge local

// State indices inside x_A that an admissible local shift may touch: the
// supports of the region's own coupled injections stay frozen so the
// consistency rows survive re-estimation untouched.
inline std::vector<int> admissible_local_states(const Model& m, const RegionPartition& p,
                                                const RegionSubmodel& sub) {
    const auto sel = coupling_state_selectors(sub.model);
    std::vector<char> blocked(m.layout().size(), 0);
    for (int i : sel.power_states) blocked[sub.state_map[i]] = 1;
    for (int i : sel.gas_states) blocked[sub.state_map[i]] = 1;
    std::vector<int> out;
    for (int i : p.x_A)
        if (!blocked[i]) out.push_back(i);
    return out;
}

inline std::vector<int> admissible_local_states(const Model& m, const RegionPartition& p) {
    const RegionSubmodel sub = build_region_submodel(m, p);
    return admissible_local_states(m, p, sub);
}

// Falsification from a shift of interior attacking-region states. Reads only
// attacking-region knowledge: the forged rows are evaluated on the region
// submodel, boundary injections therefore move by exactly their
// attacking-side share, and every non-attacking row stays zero.
inline AttackVector forge_local(const StateVector& x_hat, const Eigen::VectorXd& delta_x,
                                const RegionPartition& part, const Model& m) {
    const RegionSubmodel sub = build_region_submodel(m, part);

    std::vector<char> allowed(m.layout().size(), 0);
    for (int i : admissible_local_states(m, part, sub)) allowed[i] = 1;
    std::vector<char> in_xa(m.layout().size(), 0);
    for (int i : part.x_A) in_xa[i] = 1;
    for (int i = 0; i < delta_x.size(); ++i) {
        if (delta_x[i] == 0.0) continue;
        if (!in_xa[i])
            throw std::invalid_argument(
                "local shift touches boundary or non-attacking states (index " +
                std::to_string(i) + ")");
        if (!allowed[i])
            throw std::invalid_argument(
                "local shift touches the support of a coupled injection (index " +
                std::to_string(i) + "); the consistency check would fire");
    }

    StateVector s0(sub.model.layout());
    for (int i = 0; i < s0.layout.size(); ++i) s0.x[i] = x_hat.x[sub.state_map[i]];
    StateVector s1 = s0;
    for (int i = 0; i < s1.layout.size(); ++i) s1.x[i] += delta_x[sub.state_map[i]];

    const Eigen::VectorXd h0 = h_full(s0, sub.model);
    const Eigen::VectorXd h1 = h_full(s1, sub.model);

    AttackVector a;
    a.provenance = AttackProvenance::Local;
    a.delta_x = delta_x;
    a.delta_z = Eigen::VectorXd::Zero(m.plan.size());
    for (size_t r = 0; r < sub.row_map.size(); ++r) a.delta_z[sub.row_map[r]] = h1[r] - h0[r];
    // admissibility keeps every coupled injection untouched, so the
    // coupling residual is unchanged by construction
    a.certificate.predicted_coupling_norm = 0.0;
    a.certificate.predicted_residual_delta = 0.0;
    a.certificate.stealthy = true;
    return a;
}

// Min-norm local shift achieving in-region targets, synthesized entirely on
// the region submodel.
inline AttackVector forge_local_targeted(const StateVector& x_hat, const TargetSpec& target,
                                         const RegionPartition& part, const Model& m) {
    const RegionSubmodel sub = build_region_submodel(m, part);
    detail::SynthWork work{sub.model, JacobianOptions{}, {}};
    for (const auto& item : target.items) {
        if (item.is_state) {
            const int sub_idx = sub.full_to_sub_state(item.state_index);
            if (sub_idx < 0)
                throw InfeasibleTargetError("target state " + item.label +
                                                " lies outside the attacking region",
                                            {item.label});
            work.constraints.push_back({detail::ScalarConstraint::Kind::StateValue, sub_idx,
                                        item.value, item.label});
        } else {
            int sub_row = -1;
            for (size_t r = 0; r < sub.row_map.size(); ++r)
                if (sub.row_map[r] == item.row) sub_row = static_cast<int>(r);
            if (sub_row < 0)
                throw InfeasibleTargetError("target measurement " + item.label +
                                                " lies outside the attacking region",
                                            {item.label});
            work.constraints.push_back({detail::ScalarConstraint::Kind::MeasurementValue,
                                        sub_row, item.value, item.label});
        }
    }
    const int n_pairs = static_cast<int>(sub.model.coupling.gas_fired.size() +
                                         sub.model.coupling.p2g_pairs.size());
    for (int q = 0; q < n_pairs; ++q)
        work.constraints.push_back({detail::ScalarConstraint::Kind::Coupling, q, 0.0,
                                    "coupling[" + std::to_string(q) + "]"});

    // only interior region states may move
    std::vector<char> in_xa(m.layout().size(), 0);
    for (int i : part.x_A) in_xa[i] = 1;
    std::vector<int> free_sub;
    for (int i = 0; i < sub.model.layout().size(); ++i)
        if (in_xa[sub.state_map[i]]) free_sub.push_back(i);

    StateVector s0(sub.model.layout());
    for (int i = 0; i < s0.layout.size(); ++i) s0.x[i] = x_hat.x[sub.state_map[i]];
    const auto dx_sub = detail::min_norm_shift(work, s0, free_sub);
    if (!dx_sub)
        throw InfeasibleTargetError("local targeted synthesis did not converge", {});

    Eigen::VectorXd delta_x = Eigen::VectorXd::Zero(m.layout().size());
    for (int i = 0; i < sub.model.layout().size(); ++i)
        delta_x[sub.state_map[i]] = (*dx_sub)[i];

    StateVector s1 = s0;
    s1.x += *dx_sub;
    const Eigen::VectorXd h0 = h_full(s0, sub.model);
    const Eigen::VectorXd h1 = h_full(s1, sub.model);
    AttackVector a;
    a.provenance = AttackProvenance::Local;
    a.delta_x = delta_x;
    a.delta_z = Eigen::VectorXd::Zero(m.plan.size());
    for (size_t r = 0; r < sub.row_map.size(); ++r) a.delta_z[sub.row_map[r]] = h1[r] - h0[r];
    a.certificate.predicted_coupling_norm = coupling_residual(s1, sub.model).norm();
    a.certificate.stealthy = a.certificate.predicted_coupling_norm <= 1e-5;
    return a;
}

// --------------------------------------------------------- intruder local SE

struct LocalSeResult {
    EstimationResult estimate;                 // over the submodel
    std::vector<std::pair<int, double>> states;  // full state index -> value
    std::vector<std::string> notes;
};

namespace detail {

// Attacking-side flow reading of a tie element incident to a boundary
// element, with the sign it contributes to that boundary injection.
inline double tie_reading(const Model& m, const Eigen::VectorXd& z, MeasurementKind fwd,
                          MeasurementKind rev, int element, bool at_from,
                          const std::string& what) {
    const MeasurementKind want = at_from ? fwd : rev;
    for (int k = 0; k < m.plan.size(); ++k)
        if (m.plan.entries[k].kind == want && m.plan.entries[k].element == element)
            return z[k];
    throw UnobservableError("no attacking-side flow meter for tie " + what);
}

}  // namespace detail

// The intruder's own estimate of the attacking-region states: boundary
// injections are revised by subtracting the tie-line flow readings, then a
// standard coupled WLS runs on the region submodel. Angle references: PMU
// rows inside the region anchor absolutely; otherwise each connected power
// component pins its lowest bus angle to zero (recorded in the notes).
inline LocalSeResult intruder_local_se(const MeasurementVector& z, const RegionPartition& part,
                                       const Model& m, const EstimatorConfig& cfg = {}) {
    RegionSubmodel sub = build_region_submodel(m, part);
    LocalSeResult out;
    out.notes = sub.notes;
    out.notes.push_back(
        "tie-line flow readings taken from attacking-side meters of non-attacking-region "
        "elements");

    Eigen::VectorXd values(sub.row_map.size());
    Eigen::VectorXd variance(sub.row_map.size());
    for (size_t r = 0; r < sub.row_map.size(); ++r) {
        const int k = sub.row_map[r];
        values[r] = z.values[k];
        variance[r] = z.variance[k];
        if (!sub.row_is_boundary_injection[r]) continue;
        const auto& e = m.plan.entries[k];
        if (e.kind == MeasurementKind::PInj || e.kind == MeasurementKind::QInj) {
            const bool reactive = e.kind == MeasurementKind::QInj;
            for (int l : part.tie_lines) {
                const auto& ln = m.power.lines[l];
                if (ln.from != e.element && ln.to != e.element) continue;
                const bool at_from = ln.from == e.element;
                values[r] -= detail::tie_reading(
                    m, z.values,
                    reactive ? MeasurementKind::QFlowFwd : MeasurementKind::PFlowFwd,
                    reactive ? MeasurementKind::QFlowRev : MeasurementKind::PFlowRev, l,
                    at_from, "line " + ln.id);
            }
        } else if (e.kind == MeasurementKind::GInj) {
            for (int q : part.tie_pipes) {
                const auto& pl = m.gas.pipelines[q];
                if (pl.from != e.element && pl.to != e.element) continue;
                // the pipe meter reads the from-side flow; its contribution
                // to the to-side injection carries a minus sign
                double reading = 0.0;
                bool found = false;
                for (int k2 = 0; k2 < m.plan.size(); ++k2)
                    if (m.plan.entries[k2].kind == MeasurementKind::GFlowPipe &&
                        m.plan.entries[k2].element == q) {
                        reading = z.values[k2];
                        found = true;
                    }
                if (!found)
                    throw UnobservableError("no flow meter for tie pipeline " + pl.id);
                values[r] -= (pl.from == e.element ? reading : -reading);
            }
            for (int c : part.tie_comps) {
                const auto& cp = m.gas.compressors[c];
                if (cp.from != e.element && cp.to != e.element) continue;
                double reading = 0.0;
                bool found = false;
                for (int k2 = 0; k2 < m.plan.size(); ++k2)
                    if (m.plan.entries[k2].kind == MeasurementKind::GFlowComp &&
                        m.plan.entries[k2].element == c) {
                        reading = z.values[k2];
                        found = true;
                    }
                if (!found)
                    throw UnobservableError("no flow meter for tie compressor " + cp.id);
                values[r] -= (cp.from == e.element ? reading : -reading);
            }
        }
    }

    // free states with per-component angle references
    detail::WlsSetup setup;
    setup.rows.resize(sub.row_map.size());
    for (size_t r = 0; r < sub.row_map.size(); ++r) setup.rows[r] = static_cast<int>(r);
    const StateLayout sl = sub.model.layout();
    bool any_theta_row = false;
    for (const auto& e : sub.model.plan.entries)
        if (e.kind == MeasurementKind::ThetaPmu) any_theta_row = true;
    for (int b = 0; b < sl.n_bus; ++b) setup.free_idx.push_back(sl.v(b));
    if (any_theta_row) {
        for (int b = 0; b < sl.n_bus; ++b) setup.free_idx.push_back(sl.theta(b));
    } else {
        // pin the lowest bus of each connected component
        std::vector<int> comp_id(sl.n_bus, -1);
        int n_comp = 0;
        for (int seed = 0; seed < sl.n_bus; ++seed) {
            if (comp_id[seed] >= 0) continue;
            std::vector<int> stack{seed};
            comp_id[seed] = n_comp;
            while (!stack.empty()) {
                const int u = stack.back();
                stack.pop_back();
                for (const auto& end : sub.model.bus_lines[u]) {
                    const auto& ln = sub.model.power.lines[end.line];
                    const int v = end.at_from ? ln.to : ln.from;
                    if (comp_id[v] < 0) {
                        comp_id[v] = n_comp;
                        stack.push_back(v);
                    }
                }
            }
            ++n_comp;
        }
        std::vector<int> pinned(n_comp, -1);
        for (int b = 0; b < sl.n_bus; ++b)
            if (pinned[comp_id[b]] < 0) pinned[comp_id[b]] = b;
        for (int b = 0; b < sl.n_bus; ++b) {
            bool is_pinned = false;
            for (int q : pinned) is_pinned = is_pinned || q == b;
            if (!is_pinned) setup.free_idx.push_back(sl.theta(b));
            else
                out.notes.push_back("no PMU in region: angle of bus " +
                                    sub.model.power.buses[b].id + " pinned to zero");
        }
    }
    for (int c = 0; c < sl.n_comp; ++c) setup.free_idx.push_back(sl.c(c));
    for (int n = 0; n < sl.n_node; ++n) setup.free_idx.push_back(sl.pi(n));
    setup.with_coupling = !sub.model.coupling.gas_fired.empty() ||
                          !sub.model.coupling.p2g_pairs.empty();

    out.estimate = detail::solve_wls(sub.model, values, variance, setup, cfg,
                                     initial_state(sub.model, cfg.singularity_floor));
    for (int i = 0; i < sl.size(); ++i)
        out.states.emplace_back(sub.state_map[i], out.estimate.state.x[i]);
    return out;
}

}  // namespace iegs
