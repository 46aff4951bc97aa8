#pragma once

// Network data model for integrated electricity-gas systems: power buses and
// lines, gas nodes, passive pipelines and compressors, coupling between the
// two sides (gas-fired generators, power-to-gas facilities), and the
// measurement plan that fixes the ordering of every measurement vector.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace iegs {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ----------------------------------------------------------------- power side

struct Bus {
    std::string id;
    double v_min = 0.9;      // p.u.
    double v_max = 1.1;      // p.u.
    double theta_max = 0.6;  // rad, symmetric box
    double p_min = -100.0;   // net injection bounds, p.u.
    double p_max = 100.0;
    double q_min = -100.0;
    double q_max = 100.0;
    bool pmu = false;
};

struct Line {
    std::string id;
    int from = -1;
    int to = -1;
    double g = 0.0;  // series conductance, p.u.
    double b = 0.0;  // series susceptance, p.u.
    double s_max = 100.0;
};

enum class GeneratorKind { CoalFired, GasFired };

struct Generator {
    std::string id;
    int bus = -1;
    GeneratorKind kind = GeneratorKind::CoalFired;
    double gamma = 0.0;  // gas consumed per unit electric output (gas-fired)
    int gas_node = -1;   // supplying node (gas-fired)
    double p_max = 100.0;
};

struct PowerLoad {
    std::string id;
    int bus = -1;
    double p = 0.0;
    double q = 0.0;
};

struct PowerNetwork {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    std::vector<Generator> generators;
    std::vector<PowerLoad> loads;
};

// ------------------------------------------------------------------- gas side

struct GasNode {
    std::string id;
    double pi_min = 1.0;
    double pi_max = 100.0;
    double g_min = -1000.0;  // net injection bounds
    double g_max = 1000.0;
};

struct Pipeline {
    std::string id;
    int from = -1;  // orientation: steady flow runs from -> to
    int to = -1;
    double w = 1.0;  // Weymouth constant, > 0
    double g_max = 1000.0;
};

enum class CompressorKind { Turbo, Piston };

// Physics constants and coefficient maps for the detailed compressor model.
// f1(x; a) = a2 x^2 + a1 x + a0 with a = (a2, a1, a0);
// f2(x, y; A) = [x^2 x 1] A [y^2 y 1]^T.
struct DetailedCompressorParams {
    CompressorKind kind = CompressorKind::Turbo;
    double r_s = 500.0;    // gas constant
    double t = 290.0;      // gas temperature during the study window
    double t_c = 200.0;    // pseudocritical temperature
    double t_a = 280.0;    // ambient temperature
    double pi_c = 46.0;    // pseudocritical pressure
    double kappa = 1.3;    // isentropic exponent, > 1
    double v0 = 0.5;       // operating volume (piston)
    double eta_bar = 0.8;  // constant adiabatic efficiency (piston)
    double n_min = 0.0;
    double n_max = 1e4;
    Eigen::Vector3d a1 = Eigen::Vector3d::Zero();  // energy-consumption map
    Eigen::Vector3d a2 = Eigen::Vector3d::Zero();  // lower enthalpy envelope
    Eigen::Vector3d a3 = Eigen::Vector3d::Zero();  // upper enthalpy envelope
    Eigen::Matrix3d A1 = Eigen::Matrix3d::Zero();  // power ceiling map
    Eigen::Matrix3d A2 = Eigen::Matrix3d::Zero();  // enthalpy/speed map
    Eigen::Matrix3d A3 = Eigen::Matrix3d::Zero();  // efficiency map
};

struct Compressor {
    std::string id;
    int from = -1;  // boost direction: from -> to, flow c >= 0
    int to = -1;
    double alpha = 1.0;  // max compression ratio, >= 1
    double c_max = 1000.0;
    std::optional<DetailedCompressorParams> detailed;
};

struct GasWell {
    std::string id;
    int node = -1;
    double g_max = 1000.0;
};

struct GasLoad {
    std::string id;
    int node = -1;
    double demand = 0.0;  // offtake, >= 0
};

struct GasNetwork {
    std::vector<GasNode> nodes;
    std::vector<Pipeline> pipelines;
    std::vector<Compressor> compressors;
    std::vector<GasWell> wells;
    std::vector<GasLoad> loads;
};

// ------------------------------------------------------------------- coupling

struct P2gFacility {
    std::string id;
    int bus = -1;   // bus the facility draws from
    int node = -1;  // node it injects into
    double chi = 0.0;  // gas produced per unit electric input
};

// A coupled pair ties the electric output of one gas-fired generator (or the
// electric intake of one P2G facility) to the gas offtake (injection) at its
// supplying (receiving) node. Pairs that fail the qualifying conditions are
// kept as "soft" pairs: they still enter nodal gas balances but contribute no
// consistency-constraint row.
struct CoupledPair {
    int bus = -1;
    int node = -1;
    int element = -1;  // generator index (gas-fired) or facility index (P2G)
    double ratio = 0.0;  // gamma_g or chi_f
};

struct CouplingMap {
    std::vector<P2gFacility> p2g;          // declared facilities
    std::vector<CoupledPair> gas_fired;    // qualified generator pairs
    std::vector<CoupledPair> p2g_pairs;    // qualified facility pairs
    std::vector<int> soft_gas_fired;       // generator indices, unqualified
    std::vector<int> soft_p2g;             // facility indices, unqualified
};

// ----------------------------------------------------------- measurement plan

enum class MeasurementKind {
    PInj,       // real power injection at a bus
    QInj,       // reactive power injection at a bus
    PFlowFwd,   // real power flow, from-side meter of a line
    PFlowRev,   // real power flow, to-side meter of a line
    QFlowFwd,
    QFlowRev,
    VMag,       // voltage magnitude at a bus
    ThetaPmu,   // phase angle at a PMU bus
    GInj,       // gas injection at a node
    GFlowPipe,  // gas flow in a passive pipeline (from-side convention)
    GFlowComp,  // gas flow in a compressor
    Pressure,   // nodal pressure
};

inline bool is_power_kind(MeasurementKind k) {
    switch (k) {
        case MeasurementKind::PInj:
        case MeasurementKind::QInj:
        case MeasurementKind::PFlowFwd:
        case MeasurementKind::PFlowRev:
        case MeasurementKind::QFlowFwd:
        case MeasurementKind::QFlowRev:
        case MeasurementKind::VMag:
        case MeasurementKind::ThetaPmu:
            return true;
        default:
            return false;
    }
}

inline const char* kind_name(MeasurementKind k) {
    switch (k) {
        case MeasurementKind::PInj: return "p_inj";
        case MeasurementKind::QInj: return "q_inj";
        case MeasurementKind::PFlowFwd: return "p_flow_fwd";
        case MeasurementKind::PFlowRev: return "p_flow_rev";
        case MeasurementKind::QFlowFwd: return "q_flow_fwd";
        case MeasurementKind::QFlowRev: return "q_flow_rev";
        case MeasurementKind::VMag: return "v_mag";
        case MeasurementKind::ThetaPmu: return "theta_pmu";
        case MeasurementKind::GInj: return "g_inj";
        case MeasurementKind::GFlowPipe: return "g_flow_pipe";
        case MeasurementKind::GFlowComp: return "g_flow_comp";
        case MeasurementKind::Pressure: return "pressure";
    }
    return "?";
}

inline std::optional<MeasurementKind> kind_from_name(const std::string& s) {
    static const std::pair<const char*, MeasurementKind> table[] = {
        {"p_inj", MeasurementKind::PInj},       {"q_inj", MeasurementKind::QInj},
        {"p_flow_fwd", MeasurementKind::PFlowFwd}, {"p_flow_rev", MeasurementKind::PFlowRev},
        {"q_flow_fwd", MeasurementKind::QFlowFwd}, {"q_flow_rev", MeasurementKind::QFlowRev},
        {"v_mag", MeasurementKind::VMag},       {"theta_pmu", MeasurementKind::ThetaPmu},
        {"g_inj", MeasurementKind::GInj},       {"g_flow_pipe", MeasurementKind::GFlowPipe},
        {"g_flow_comp", MeasurementKind::GFlowComp}, {"pressure", MeasurementKind::Pressure},
    };
    for (const auto& [name, kind] : table)
        if (s == name) return kind;
    return std::nullopt;
}

// One planned meter. `element` indexes buses/nodes for injection-style kinds
// and lines/pipelines/compressors for flow kinds. `sigma` is the declared
// noise standard deviation; its square is the diagonal covariance entry.
struct Measurement {
    MeasurementKind kind = MeasurementKind::VMag;
    int element = -1;
    double sigma = 1e-2;
};

struct MeasurementPlan {
    std::vector<Measurement> entries;
    int size() const { return static_cast<int>(entries.size()); }
};

// ------------------------------------------------------------- state ordering

// State vector layout contract: x = [v (per bus), theta (per bus),
// c (per compressor), pi (per node)], each block in declaration order.
struct StateLayout {
    int n_bus = 0;
    int n_comp = 0;
    int n_node = 0;
    int size() const { return 2 * n_bus + n_comp + n_node; }
    int v(int bus) const { return bus; }
    int theta(int bus) const { return n_bus + bus; }
    int c(int comp) const { return 2 * n_bus + comp; }
    int pi(int node) const { return 2 * n_bus + n_comp + node; }
    bool is_power_index(int i) const { return i < 2 * n_bus; }
};

struct Bases {
    double mva = 100.0;            // power base behind the p.u. quantities
    std::string pressure_unit = "normalized";
    std::string flow_unit = "normalized";
};

// ---------------------------------------------------------------------- model

struct Violation {
    std::string path;     // offending element, e.g. "gas.pipelines[2]"
    std::string message;
};

// Immutable after load; adjacency tables and the coupling map are derived
// once by finalize(). Safe for concurrent reads.
struct Model {
    int version = 1;
    Bases bases;
    PowerNetwork power;
    GasNetwork gas;
    CouplingMap coupling;
    MeasurementPlan plan;
    std::optional<int> reference_bus;

    // adjacency, derived
    struct LineEnd { int line; bool at_from; };
    struct PipeEnd { int pipe; bool at_from; };
    struct CompEnd { int comp; bool at_from; };
    std::vector<std::vector<LineEnd>> bus_lines;
    std::vector<std::vector<PipeEnd>> node_pipes;
    std::vector<std::vector<CompEnd>> node_comps;
    std::vector<std::vector<int>> bus_generators;
    std::vector<std::vector<int>> bus_loads;
    std::vector<std::vector<int>> bus_p2g;
    std::vector<std::vector<int>> node_wells;
    std::vector<std::vector<int>> node_loads;
    std::vector<std::vector<int>> node_generators;  // gas-fired fed by node
    std::vector<std::vector<int>> node_p2g;

    StateLayout layout() const {
        return StateLayout{static_cast<int>(power.buses.size()),
                           static_cast<int>(gas.compressors.size()),
                           static_cast<int>(gas.nodes.size())};
    }

    int bus_index(const std::string& id) const { return find_id(power.buses, id); }
    int node_index(const std::string& id) const { return find_id(gas.nodes, id); }
    int line_index(const std::string& id) const { return find_id(power.lines, id); }
    int pipeline_index(const std::string& id) const { return find_id(gas.pipelines, id); }
    int compressor_index(const std::string& id) const { return find_id(gas.compressors, id); }
    int generator_index(const std::string& id) const { return find_id(power.generators, id); }

    void finalize();

private:
    template <class T>
    static int find_id(const std::vector<T>& xs, const std::string& id) {
        for (int i = 0; i < static_cast<int>(xs.size()); ++i)
            if (xs[i].id == id) return i;
        return -1;
    }
};

// Readable element id for a plan entry.
inline std::string element_id(const Model& m, const Measurement& e) {
    switch (e.kind) {
        case MeasurementKind::PInj:
        case MeasurementKind::QInj:
        case MeasurementKind::VMag:
        case MeasurementKind::ThetaPmu:
            return m.power.buses[e.element].id;
        case MeasurementKind::PFlowFwd:
        case MeasurementKind::PFlowRev:
        case MeasurementKind::QFlowFwd:
        case MeasurementKind::QFlowRev:
            return m.power.lines[e.element].id;
        case MeasurementKind::GInj:
        case MeasurementKind::Pressure:
            return m.gas.nodes[e.element].id;
        case MeasurementKind::GFlowPipe:
            return m.gas.pipelines[e.element].id;
        case MeasurementKind::GFlowComp:
            return m.gas.compressors[e.element].id;
    }
    return "?";
}

// ------------------------------------------------------------- coupling rules

// Qualifying conditions for a gas-fired generator pair (bus i, node j):
//   i)   bus i hosts exactly one generator, which is gas-fired;
//   ii)  that generator is supplied by node j;
//   iii) node j has no wells and no gas loads.
// P2G pairs additionally require the bus to carry no generator or load and
// the node to carry nothing but the facility.
inline CouplingMap derive_coupling(const Model& m) {
    CouplingMap out;
    out.p2g = m.coupling.p2g;
    for (int g = 0; g < static_cast<int>(m.power.generators.size()); ++g) {
        const auto& gen = m.power.generators[g];
        if (gen.kind != GeneratorKind::GasFired) continue;
        const int i = gen.bus;
        const int j = gen.gas_node;
        const bool sole_generator = m.bus_generators[i].size() == 1;
        const bool node_clean = j >= 0 && m.node_wells[j].empty() &&
                                m.node_loads[j].empty() &&
                                m.node_p2g[j].empty() &&
                                m.node_generators[j].size() == 1;
        if (sole_generator && node_clean && m.bus_p2g[i].empty())
            out.gas_fired.push_back({i, j, g, gen.gamma});
        else
            out.soft_gas_fired.push_back(g);
    }
    for (int f = 0; f < static_cast<int>(out.p2g.size()); ++f) {
        const auto& fac = out.p2g[f];
        const int i = fac.bus;
        const int j = fac.node;
        const bool bus_clean = m.bus_generators[i].empty() &&
                               m.bus_loads[i].empty() &&
                               m.bus_p2g[i].size() == 1;
        const bool node_clean = m.node_wells[j].empty() && m.node_loads[j].empty() &&
                                m.node_generators[j].empty() &&
                                m.node_p2g[j].size() == 1;
        if (bus_clean && node_clean)
            out.p2g_pairs.push_back({i, j, f, fac.chi});
        else
            out.soft_p2g.push_back(f);
    }
    return out;
}

inline void Model::finalize() {
    const int nb = static_cast<int>(power.buses.size());
    const int nn = static_cast<int>(gas.nodes.size());
    bus_lines.assign(nb, {});
    bus_generators.assign(nb, {});
    bus_loads.assign(nb, {});
    bus_p2g.assign(nb, {});
    node_pipes.assign(nn, {});
    node_comps.assign(nn, {});
    node_wells.assign(nn, {});
    node_loads.assign(nn, {});
    node_generators.assign(nn, {});
    node_p2g.assign(nn, {});
    for (int l = 0; l < static_cast<int>(power.lines.size()); ++l) {
        bus_lines[power.lines[l].from].push_back({l, true});
        bus_lines[power.lines[l].to].push_back({l, false});
    }
    for (int g = 0; g < static_cast<int>(power.generators.size()); ++g) {
        bus_generators[power.generators[g].bus].push_back(g);
        if (power.generators[g].kind == GeneratorKind::GasFired &&
            power.generators[g].gas_node >= 0)
            node_generators[power.generators[g].gas_node].push_back(g);
    }
    for (int d = 0; d < static_cast<int>(power.loads.size()); ++d)
        bus_loads[power.loads[d].bus].push_back(d);
    for (int p = 0; p < static_cast<int>(gas.pipelines.size()); ++p) {
        node_pipes[gas.pipelines[p].from].push_back({p, true});
        node_pipes[gas.pipelines[p].to].push_back({p, false});
    }
    for (int c = 0; c < static_cast<int>(gas.compressors.size()); ++c) {
        node_comps[gas.compressors[c].from].push_back({c, true});
        node_comps[gas.compressors[c].to].push_back({c, false});
    }
    for (int w = 0; w < static_cast<int>(gas.wells.size()); ++w)
        node_wells[gas.wells[w].node].push_back(w);
    for (int d = 0; d < static_cast<int>(gas.loads.size()); ++d)
        node_loads[gas.loads[d].node].push_back(d);
    for (int f = 0; f < static_cast<int>(coupling.p2g.size()); ++f) {
        bus_p2g[coupling.p2g[f].bus].push_back(f);
        node_p2g[coupling.p2g[f].node].push_back(f);
    }
    const auto declared_p2g = coupling.p2g;
    coupling = derive_coupling(*this);
    coupling.p2g = declared_p2g;
}

// Qualified gas-fired pairs, in generator declaration order.
inline std::vector<CoupledPair> coupling_pairs(const Model& m) {
    return m.coupling.gas_fired;
}

// --------------------------------------------------------------- connectivity

namespace detail {

inline bool connected(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n <= 1) return true;
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (auto [a, b] : edges) parent[find(a)] = find(b);
    const int root = find(0);
    for (int i = 1; i < n; ++i)
        if (find(i) != root) return false;
    return true;
}

}  // namespace detail

// ----------------------------------------------------------------- validation

// Violations are data, not errors: an empty list means the model satisfies
// every structural invariant.
inline std::vector<Violation> validate_model(const Model& m) {
    std::vector<Violation> out;
    auto add = [&](const std::string& path, const std::string& msg) {
        out.push_back({path, msg});
    };

    const int nb = static_cast<int>(m.power.buses.size());
    const int nn = static_cast<int>(m.gas.nodes.size());

    for (int i = 0; i < nb; ++i) {
        const auto& b = m.power.buses[i];
        const std::string path = "power.buses[" + std::to_string(i) + "]";
        if (!(b.v_min > 0 && b.v_min < b.v_max)) add(path, "voltage bounds must satisfy 0 < V_min < V_max");
        if (!(b.theta_max > 0)) add(path, "theta_max must be positive");
        if (!(b.p_min <= b.p_max) || !(b.q_min <= b.q_max)) add(path, "injection bounds inverted");
    }
    std::vector<std::pair<int, int>> power_edges;
    for (int l = 0; l < static_cast<int>(m.power.lines.size()); ++l) {
        const auto& ln = m.power.lines[l];
        const std::string path = "power.lines[" + std::to_string(l) + "]";
        if (ln.from < 0 || ln.from >= nb || ln.to < 0 || ln.to >= nb || ln.from == ln.to) {
            add(path, "line endpoints invalid");
            continue;
        }
        if (!std::isfinite(ln.g) || !std::isfinite(ln.b)) add(path, "admittance must be finite");
        if (!(ln.s_max > 0)) add(path, "thermal limit must be positive");
        power_edges.emplace_back(ln.from, ln.to);
    }
    if (!detail::connected(nb, power_edges)) add("power", "power graph disconnected");

    bool any_pmu = false;
    for (const auto& b : m.power.buses) any_pmu = any_pmu || b.pmu;
    if (nb > 0 && !any_pmu && !m.reference_bus)
        add("power", "need at least one PMU bus or a designated reference bus");
    if (m.reference_bus && (*m.reference_bus < 0 || *m.reference_bus >= nb))
        add("power", "reference bus out of range");

    for (int g = 0; g < static_cast<int>(m.power.generators.size()); ++g) {
        const auto& gen = m.power.generators[g];
        const std::string path = "power.generators[" + std::to_string(g) + "]";
        if (gen.bus < 0 || gen.bus >= nb) add(path, "generator bus invalid");
        if (gen.kind == GeneratorKind::GasFired) {
            if (gen.gas_node < 0 || gen.gas_node >= nn)
                add(path, "gas-fired generator must reference a gas node");
            if (!(gen.gamma > 0)) add(path, "conversion ratio must be positive");
        }
    }
    for (int d = 0; d < static_cast<int>(m.power.loads.size()); ++d)
        if (m.power.loads[d].bus < 0 || m.power.loads[d].bus >= nb)
            add("power.loads[" + std::to_string(d) + "]", "load bus invalid");

    for (int i = 0; i < nn; ++i) {
        const auto& n = m.gas.nodes[i];
        const std::string path = "gas.nodes[" + std::to_string(i) + "]";
        if (!(n.pi_min > 0 && n.pi_min < n.pi_max)) add(path, "pressure bounds must satisfy 0 < Pi_min < Pi_max");
    }
    std::vector<std::pair<int, int>> gas_edges;
    for (int p = 0; p < static_cast<int>(m.gas.pipelines.size()); ++p) {
        const auto& pl = m.gas.pipelines[p];
        const std::string path = "gas.pipelines[" + std::to_string(p) + "]";
        if (pl.from < 0 || pl.from >= nn || pl.to < 0 || pl.to >= nn || pl.from == pl.to) {
            add(path, "pipeline endpoints invalid");
            continue;
        }
        if (!(pl.w > 0)) add(path, "pipeline {" + m.gas.nodes[pl.from].id + "," +
                                       m.gas.nodes[pl.to].id + "}: Weymouth constant must be positive");
        gas_edges.emplace_back(pl.from, pl.to);
    }
    for (int c = 0; c < static_cast<int>(m.gas.compressors.size()); ++c) {
        const auto& cp = m.gas.compressors[c];
        const std::string path = "gas.compressors[" + std::to_string(c) + "]";
        if (cp.from < 0 || cp.from >= nn || cp.to < 0 || cp.to >= nn || cp.from == cp.to) {
            add(path, "compressor endpoints invalid");
            continue;
        }
        if (!(cp.alpha >= 1.0)) add(path, "compression ratio < 1");
        if (!(cp.c_max > 0)) add(path, "compressor limit must be positive");
        if (cp.detailed) {
            if (!(cp.detailed->kappa > 1.0)) add(path, "isentropic exponent must exceed 1");
            if (!(cp.detailed->n_min <= cp.detailed->n_max)) add(path, "speed limits inverted");
            if (!(cp.detailed->v0 > 0)) add(path, "operating volume must be positive");
        }
        gas_edges.emplace_back(cp.from, cp.to);
    }
    if (!detail::connected(nn, gas_edges)) add("gas", "gas graph disconnected");

    for (int w = 0; w < static_cast<int>(m.gas.wells.size()); ++w)
        if (m.gas.wells[w].node < 0 || m.gas.wells[w].node >= nn)
            add("gas.wells[" + std::to_string(w) + "]", "well node invalid");
    for (int d = 0; d < static_cast<int>(m.gas.loads.size()); ++d)
        if (m.gas.loads[d].node < 0 || m.gas.loads[d].node >= nn)
            add("gas.loads[" + std::to_string(d) + "]", "load node invalid");
    for (int f = 0; f < static_cast<int>(m.coupling.p2g.size()); ++f) {
        const auto& fac = m.coupling.p2g[f];
        const std::string path = "coupling.p2g[" + std::to_string(f) + "]";
        if (fac.bus < 0 || fac.bus >= nb || fac.node < 0 || fac.node >= nn)
            add(path, "facility endpoints invalid");
        if (!(fac.chi > 0)) add(path, "conversion ratio must be positive");
    }

    // pair disjointness: no bus or node may appear in two qualified pairs
    {
        std::vector<int> bus_hits(nb, 0), node_hits(nn, 0);
        for (const auto& p : m.coupling.gas_fired) { ++bus_hits[p.bus]; ++node_hits[p.node]; }
        for (const auto& p : m.coupling.p2g_pairs) { ++bus_hits[p.bus]; ++node_hits[p.node]; }
        for (int i = 0; i < nb; ++i)
            if (bus_hits[i] > 1) add("coupling", "bus " + m.power.buses[i].id + " appears in two coupled pairs");
        for (int i = 0; i < nn; ++i)
            if (node_hits[i] > 1) add("coupling", "node " + m.gas.nodes[i].id + " appears in two coupled pairs");
    }

    const int n_meas = m.plan.size();
    for (int k = 0; k < n_meas; ++k) {
        const auto& e = m.plan.entries[k];
        const std::string path = "measurement_plan[" + std::to_string(k) + "]";
        int limit = 0;
        switch (e.kind) {
            case MeasurementKind::PInj:
            case MeasurementKind::QInj:
            case MeasurementKind::VMag:
            case MeasurementKind::ThetaPmu: limit = nb; break;
            case MeasurementKind::PFlowFwd:
            case MeasurementKind::PFlowRev:
            case MeasurementKind::QFlowFwd:
            case MeasurementKind::QFlowRev: limit = static_cast<int>(m.power.lines.size()); break;
            case MeasurementKind::GInj:
            case MeasurementKind::Pressure: limit = nn; break;
            case MeasurementKind::GFlowPipe: limit = static_cast<int>(m.gas.pipelines.size()); break;
            case MeasurementKind::GFlowComp: limit = static_cast<int>(m.gas.compressors.size()); break;
        }
        if (e.element < 0 || e.element >= limit) add(path, "element out of range");
        if (!(e.sigma > 0)) add(path, "noise std must be positive");
        if (e.kind == MeasurementKind::ThetaPmu && e.element >= 0 && e.element < nb &&
            !m.power.buses[e.element].pmu)
            add(path, "phase angle meter on a bus without PMU");
    }

    return out;
}

// ----------------------------------------------------------------- incidence

struct IncidenceMatrices {
    Eigen::MatrixXi power;     // buses x lines
    Eigen::MatrixXi gas_pipe;  // nodes x pipelines
    Eigen::MatrixXi gas_comp;  // nodes x compressors
};

// Signed incidence: +1 at the tail (flow leaves the element's `from` node),
// -1 at the head. Columns therefore sum to zero.
inline IncidenceMatrices incidence_matrices(const Model& m) {
    IncidenceMatrices out;
    const int nb = static_cast<int>(m.power.buses.size());
    const int nn = static_cast<int>(m.gas.nodes.size());
    out.power = Eigen::MatrixXi::Zero(nb, static_cast<int>(m.power.lines.size()));
    out.gas_pipe = Eigen::MatrixXi::Zero(nn, static_cast<int>(m.gas.pipelines.size()));
    out.gas_comp = Eigen::MatrixXi::Zero(nn, static_cast<int>(m.gas.compressors.size()));
    for (int l = 0; l < static_cast<int>(m.power.lines.size()); ++l) {
        out.power(m.power.lines[l].from, l) = 1;
        out.power(m.power.lines[l].to, l) = -1;
    }
    for (int p = 0; p < static_cast<int>(m.gas.pipelines.size()); ++p) {
        out.gas_pipe(m.gas.pipelines[p].from, p) = 1;
        out.gas_pipe(m.gas.pipelines[p].to, p) = -1;
    }
    for (int c = 0; c < static_cast<int>(m.gas.compressors.size()); ++c) {
        out.gas_comp(m.gas.compressors[c].from, c) = 1;
        out.gas_comp(m.gas.compressors[c].to, c) = -1;
    }
    return out;
}

}  // namespace iegs
