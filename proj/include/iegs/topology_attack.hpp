#pragma once

// Topology-only attacks against the gas side: load redistribution across a
// compressor joining two loaded nodes, and flow redistribution around meshed
// compressors. Enumeration and forging read nothing but connectivity, load
// placement, and the intruder's own measurement readings, so they work with
// zero parameter knowledge. A demonstrator shows why the same information
// level fails against power-side measurements.

#include <random>
#include <string>
#include <vector>

#include "iegs/attack.hpp"
#include "iegs/estimation.hpp"
#include "iegs/local_attack.hpp"
#include "iegs/measurement.hpp"
#include "iegs/model.hpp"

namespace iegs {

// Region gas nodes with passive pipelines removed: only compressors remain
// as edges. Meshes in this multigraph are exactly the flow-redistribution
// opportunities.
struct CompressorGraph {
    std::vector<int> nodes;                      // region node indices
    std::vector<int> edges;                      // in-region compressor indices
    std::vector<int> component;                  // per entry of `nodes`
    int n_components = 0;
    // fundamental cycles from a spanning forest; each entry is a list of
    // (compressor index, traversal sign)
    std::vector<std::vector<std::pair<int, int>>> cycles;
};

inline CompressorGraph compressor_graph(const Model& m, const std::vector<int>& region_nodes) {
    CompressorGraph g;
    g.nodes = region_nodes;
    std::vector<int> node_slot(m.gas.nodes.size(), -1);
    for (size_t i = 0; i < region_nodes.size(); ++i) node_slot[region_nodes[i]] = static_cast<int>(i);
    for (int c = 0; c < static_cast<int>(m.gas.compressors.size()); ++c) {
        const auto& cp = m.gas.compressors[c];
        if (node_slot[cp.from] >= 0 && node_slot[cp.to] >= 0) g.edges.push_back(c);
    }

    // spanning forest by BFS over the compressor multigraph
    const int n = static_cast<int>(region_nodes.size());
    g.component.assign(n, -1);
    std::vector<int> parent_edge(n, -1);   // edge used to reach the node
    std::vector<int> parent_node(n, -1);
    std::vector<char> tree_edge(g.edges.size(), 0);
    for (int seed = 0; seed < n; ++seed) {
        if (g.component[seed] >= 0) continue;
        g.component[seed] = g.n_components;
        std::vector<int> queue{seed};
        for (size_t q = 0; q < queue.size(); ++q) {
            const int u = queue[q];
            for (size_t e = 0; e < g.edges.size(); ++e) {
                const auto& cp = m.gas.compressors[g.edges[e]];
                const int a = node_slot[cp.from], b = node_slot[cp.to];
                int other = -1;
                if (a == u) other = b;
                else if (b == u) other = a;
                else continue;
                if (g.component[other] < 0) {
                    g.component[other] = g.n_components;
                    parent_edge[other] = static_cast<int>(e);
                    parent_node[other] = u;
                    tree_edge[e] = 1;
                    queue.push_back(other);
                }
            }
        }
        ++g.n_components;
    }

    // each non-tree edge closes one fundamental cycle through the forest
    auto path_to_root = [&](int v) {
        std::vector<int> path{v};
        while (parent_node[path.back()] >= 0) path.push_back(parent_node[path.back()]);
        return path;
    };
    for (size_t e = 0; e < g.edges.size(); ++e) {
        if (tree_edge[e]) continue;
        const auto& cp = m.gas.compressors[g.edges[e]];
        const int u = node_slot[cp.from], v = node_slot[cp.to];
        if (g.component[u] != g.component[v]) continue;  // cannot happen, by construction
        // walk v and u up to their lowest common ancestor; the non-tree edge
        // is traversed u -> v (+1), the v-side path child -> parent, the
        // u-side path parent -> child
        std::vector<int> pv = path_to_root(v), pu = path_to_root(u);
        int tail_v = static_cast<int>(pv.size()), tail_u = static_cast<int>(pu.size());
        while (tail_v > 0 && tail_u > 0 && pv[tail_v - 1] == pu[tail_u - 1]) {
            --tail_v;
            --tail_u;
        }
        std::vector<std::pair<int, int>> cycle{{g.edges[e], +1}};
        for (int i = 0; i < tail_v; ++i) {
            const int child = pv[i];
            const int eidx = parent_edge[child];
            const auto& te = m.gas.compressors[g.edges[eidx]];
            // moving child -> parent; +1 when that matches the edge orientation
            cycle.push_back({g.edges[eidx], node_slot[te.from] == child ? +1 : -1});
        }
        for (int i = tail_u - 1; i >= 0; --i) {
            const int child = pu[i];
            const int eidx = parent_edge[child];
            const auto& te = m.gas.compressors[g.edges[eidx]];
            // moving parent -> child
            cycle.push_back({g.edges[eidx], node_slot[te.to] == child ? +1 : -1});
        }
        g.cycles.push_back(cycle);
    }
    return g;
}

// ---------------------------------------------------------------- candidates

struct TopoAttackCandidate {
    enum class Kind { LoadRedistribution, FlowRedistribution };
    Kind kind = Kind::LoadRedistribution;
    int compressor = -1;                          // load kind
    std::vector<std::pair<int, int>> cycle;       // flow kind: (compressor, sign)
    std::vector<int> rows;                        // touched plan rows
    std::vector<double> pattern;                  // signed unit pattern over `rows`
    std::vector<std::pair<int, double>> state_pattern;  // (state index, sign)
    std::string label;
};

namespace detail {

inline int find_row(const Model& m, MeasurementKind kind, int element) {
    for (int k = 0; k < m.plan.size(); ++k)
        if (m.plan.entries[k].kind == kind && m.plan.entries[k].element == element) return k;
    return -1;
}

}  // namespace detail

// All load-redistribution triples (compressor joining two loaded nodes) and
// all flow-redistribution cycle patterns within the region. Reads topology
// and load placement only; an empty list means the region offers no
// topology-only attack surface.
inline std::vector<TopoAttackCandidate> enumerate_candidates(
    const Model& m, const std::vector<int>& region_nodes) {
    std::vector<TopoAttackCandidate> out;
    std::vector<char> in_region(m.gas.nodes.size(), 0);
    for (int n : region_nodes) {
        if (n < 0 || n >= static_cast<int>(m.gas.nodes.size()))
            throw std::invalid_argument("unknown node in region");
        in_region[n] = 1;
    }
    const StateLayout L = m.layout();

    for (int c = 0; c < static_cast<int>(m.gas.compressors.size()); ++c) {
        const auto& cp = m.gas.compressors[c];
        if (!in_region[cp.from] || !in_region[cp.to]) continue;
        if (m.node_loads[cp.from].empty() || m.node_loads[cp.to].empty()) continue;
        TopoAttackCandidate cand;
        cand.kind = TopoAttackCandidate::Kind::LoadRedistribution;
        cand.compressor = c;
        const int row_gi = detail::find_row(m, MeasurementKind::GInj, cp.from);
        const int row_gj = detail::find_row(m, MeasurementKind::GInj, cp.to);
        const int row_c = detail::find_row(m, MeasurementKind::GFlowComp, c);
        if (row_gi < 0 || row_gj < 0 || row_c < 0) continue;  // meters unavailable
        cand.rows = {row_gi, row_gj, row_c};
        cand.pattern = {+1.0, -1.0, +1.0};
        cand.state_pattern = {{L.c(c), +1.0}};
        cand.label = "load-redistribution via " + cp.id;
        out.push_back(cand);
    }

    const CompressorGraph graph = compressor_graph(m, region_nodes);
    for (const auto& cycle : graph.cycles) {
        TopoAttackCandidate cand;
        cand.kind = TopoAttackCandidate::Kind::FlowRedistribution;
        cand.cycle = cycle;
        bool metered = true;
        for (const auto& [c, sign] : cycle) {
            const int row = detail::find_row(m, MeasurementKind::GFlowComp, c);
            if (row < 0) {
                metered = false;
                break;
            }
            cand.rows.push_back(row);
            cand.pattern.push_back(static_cast<double>(sign));
            cand.state_pattern.emplace_back(L.c(c), static_cast<double>(sign));
            cand.label += (cand.label.empty() ? "flow-redistribution via " : "+") +
                          m.gas.compressors[c].id;
        }
        if (metered) out.push_back(cand);
    }
    return out;
}

// Admissible magnitude interval [lo, hi] for a candidate given the current
// readings: falsified loads keep their sign and falsified compressor flows
// stay nonnegative. Transmission limits need parameters the intruder lacks,
// so only sign plausibility is enforced.
struct AdmissibleRange {
    double lo = 0.0;
    double hi = 0.0;
};

inline AdmissibleRange admissible_range(const TopoAttackCandidate& cand,
                                        const Eigen::VectorXd& z_values) {
    AdmissibleRange r;
    if (cand.kind == TopoAttackCandidate::Kind::LoadRedistribution) {
        const double gi = z_values[cand.rows[0]];
        const double gj = z_values[cand.rows[1]];
        const double c = z_values[cand.rows[2]];
        const double cap = std::min(std::abs(gi), std::abs(gj));
        r.lo = std::max(-cap, -c);
        r.hi = cap;
    } else {
        r.lo = -1e300;
        r.hi = 1e300;
        for (size_t i = 0; i < cand.rows.size(); ++i) {
            const double c = z_values[cand.rows[i]];
            if (cand.pattern[i] > 0) r.lo = std::max(r.lo, -c);  // c + delta >= 0
            else r.hi = std::min(r.hi, c);                       // c - delta >= 0
        }
    }
    return r;
}

// Exact integer null-space check for flow patterns: the compressor incidence
// matrix applied to the signed pattern must vanish at every node.
inline bool flow_pattern_in_nullspace(const TopoAttackCandidate& cand, const Model& m) {
    if (cand.kind != TopoAttackCandidate::Kind::FlowRedistribution) return false;
    std::vector<long long> balance(m.gas.nodes.size(), 0);
    for (const auto& [c, sign] : cand.cycle) {
        balance[m.gas.compressors[c].from] += sign;
        balance[m.gas.compressors[c].to] -= sign;
    }
    for (long long b : balance)
        if (b != 0) return false;
    return true;
}

// Scales the candidate's signed pattern by delta. The state shift touches
// only the involved compressor-flow states; pressures and the power side
// stay untouched.
inline AttackVector forge_topo(const TopoAttackCandidate& cand, double delta,
                               const Eigen::VectorXd& z_values, const Model& m) {
    const auto range = admissible_range(cand, z_values);
    if (delta < range.lo - 1e-12 || delta > range.hi + 1e-12)
        throw std::invalid_argument("magnitude " + std::to_string(delta) +
                                    " outside the admissible range [" +
                                    std::to_string(range.lo) + ", " +
                                    std::to_string(range.hi) + "] of " + cand.label);
    AttackVector a;
    a.provenance = AttackProvenance::Topology;
    a.delta_z = Eigen::VectorXd::Zero(m.plan.size());
    a.delta_x = Eigen::VectorXd::Zero(m.layout().size());
    for (size_t i = 0; i < cand.rows.size(); ++i)
        a.delta_z[cand.rows[i]] += cand.pattern[i] * delta;
    for (const auto& [idx, sign] : cand.state_pattern) a.delta_x[idx] += sign * delta;
    a.certificate.predicted_residual_delta = 0.0;
    a.certificate.predicted_coupling_norm = 0.0;  // injections at coupled nodes unchanged
    a.certificate.stealthy = true;
    return a;
}

// --------------------------------------------------------------- lemma 1 demo

struct Lemma1Report {
    // uniform shift of every reachable phase-angle meter
    bool all_pmus_in_region = false;
    double special_r_before = 0.0;
    double special_r_after = 0.0;
    bool special_preserved = false;  // norms equal to 1e-10

    // random parameterless single-meter falsifications
    int random_trials = 0;
    int random_detected = 0;  // residual norm strictly increased
};

// Empirical demonstration that topology-only knowledge does not yield
// stealthy power-side attacks: (a) the uniform-angle special case survives
// re-estimation only when every PMU lies inside the region, and (b) random
// unquantified flow falsifications raise the residual.
inline Lemma1Report demonstrate_lemma1(const MeasurementVector& z, const RegionSpec& region,
                                       const Model& m, int random_trials = 100,
                                       std::uint64_t seed = 1, double theta_shift = 0.02) {
    Lemma1Report rep;
    const auto base = estimate_iegs(z, m);
    const double r0 = base.r_norm;

    std::vector<char> bus_in(m.power.buses.size(), 0);
    for (int b : region.buses) bus_in[b] = 1;
    rep.all_pmus_in_region = true;
    for (int b = 0; b < static_cast<int>(m.power.buses.size()); ++b)
        if (m.power.buses[b].pmu && !bus_in[b]) rep.all_pmus_in_region = false;

    MeasurementVector shifted = z;
    for (int k = 0; k < m.plan.size(); ++k)
        if (m.plan.entries[k].kind == MeasurementKind::ThetaPmu &&
            bus_in[m.plan.entries[k].element])
            shifted.values[k] += theta_shift;
    const auto after = estimate_iegs(shifted, m);
    rep.special_r_before = r0;
    rep.special_r_after = after.r_norm;
    rep.special_preserved = std::abs(after.r_norm - r0) <= 1e-10;

    // unquantified single-meter falsifications on in-region power rows
    std::vector<int> power_rows;
    for (int k = 0; k < m.plan.size(); ++k) {
        const auto& e = m.plan.entries[k];
        if (e.kind == MeasurementKind::PFlowFwd || e.kind == MeasurementKind::PFlowRev) {
            const auto& ln = m.power.lines[e.element];
            if (bus_in[ln.from] && bus_in[ln.to]) power_rows.push_back(k);
        } else if (e.kind == MeasurementKind::PInj && bus_in[e.element]) {
            power_rows.push_back(k);
        }
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(0.05, 0.2);
    std::uniform_int_distribution<size_t> pick(0, power_rows.empty() ? 0 : power_rows.size() - 1);
    rep.random_trials = power_rows.empty() ? 0 : random_trials;
    for (int t = 0; t < rep.random_trials; ++t) {
        MeasurementVector bad = z;
        const int row = power_rows[pick(rng)];
        const double delta = (rng() % 2 ? 1.0 : -1.0) * mag(rng);
        bad.values[row] += delta;
        const auto est = estimate_iegs(bad, m);
        if (est.r_norm > r0) ++rep.random_detected;
    }
    return rep;
}

}  // namespace iegs
