#pragma once

// Measurement functions h(x) mapping system states to metered quantities,
// the coupling sub-maps tying the power and gas sides together, and their
// analytic Jacobians. All functions here are pure in (x, model) and safe to
// evaluate concurrently.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iegs/model.hpp"

namespace iegs {

class ReversedPressureError : public std::runtime_error {
public:
    explicit ReversedPressureError(const std::string& pipeline_id)
        : std::runtime_error("pressure order reversed on pipeline " + pipeline_id +
                             " (state outside the declared flow orientation)"),
          pipeline(pipeline_id) {}
    std::string pipeline;
};

class JacobianSingularityError : public std::runtime_error {
public:
    explicit JacobianSingularityError(const std::string& pipeline_id)
        : std::runtime_error("pressure difference on pipeline " + pipeline_id +
                             " below the singularity floor"),
          pipeline(pipeline_id) {}
    std::string pipeline;
};

// State vector x = [v, theta, c, pi]; see StateLayout for the ordering
// contract.
struct StateVector {
    StateLayout layout;
    Eigen::VectorXd x;

    StateVector() = default;
    explicit StateVector(const StateLayout& lay)
        : layout(lay), x(Eigen::VectorXd::Zero(lay.size())) {}

    double v(int bus) const { return x[layout.v(bus)]; }
    double theta(int bus) const { return x[layout.theta(bus)]; }
    double c(int comp) const { return x[layout.c(comp)]; }
    double pi(int node) const { return x[layout.pi(node)]; }
    double& v(int bus) { return x[layout.v(bus)]; }
    double& theta(int bus) { return x[layout.theta(bus)]; }
    double& c(int comp) { return x[layout.c(comp)]; }
    double& pi(int node) { return x[layout.pi(node)]; }
};

struct MeasurementVector {
    Eigen::VectorXd values;     // aligned to the plan
    Eigen::VectorXd variance;   // diagonal covariance entries
};

// --------------------------------------------------------------- branch flows

struct LineFlow {
    double p = 0.0;
    double q = 0.0;
};

// AC branch flow measured at the i-side of a line with series admittance
// g + jb. Note p_ij != -p_ji in general; the j-side value is obtained by
// swapping the roles of the endpoints.
inline LineFlow line_flow(double v_i, double v_j, double theta_i, double theta_j,
                          double g, double b) {
    const double d = theta_i - theta_j;
    const double cs = std::cos(d);
    const double sn = std::sin(d);
    LineFlow f;
    f.p = v_i * v_i * g - v_i * v_j * (g * cs + b * sn);
    f.q = -v_i * v_i * b - v_i * v_j * (g * sn - b * cs);
    return f;
}

// Partials of (p_ij, q_ij) with respect to (v_i, v_j, theta_i, theta_j).
struct LineFlowJacobian {
    double dp_dvi, dp_dvj, dp_dti, dp_dtj;
    double dq_dvi, dq_dvj, dq_dti, dq_dtj;
};

inline LineFlowJacobian line_flow_jacobian(double v_i, double v_j, double theta_i,
                                           double theta_j, double g, double b) {
    const double d = theta_i - theta_j;
    const double cs = std::cos(d);
    const double sn = std::sin(d);
    LineFlowJacobian J;
    J.dp_dvi = 2.0 * v_i * g - v_j * (g * cs + b * sn);
    J.dp_dvj = -v_i * (g * cs + b * sn);
    J.dp_dti = -v_i * v_j * (-g * sn + b * cs);
    J.dp_dtj = v_i * v_j * (-g * sn + b * cs);
    J.dq_dvi = -2.0 * v_i * b - v_j * (g * sn - b * cs);
    J.dq_dvj = -v_i * (g * sn - b * cs);
    J.dq_dti = -v_i * v_j * (g * cs + b * sn);
    J.dq_dtj = v_i * v_j * (g * cs + b * sn);
    return J;
}

// ------------------------------------------------------------- Weymouth flows

inline constexpr double kReversedPressureTol = 1e-9;

// Steady unidirectional Weymouth flow from the high-pressure end. The stored
// orientation must satisfy pi_i >= pi_j; the reverse-direction value is the
// negation.
inline double weymouth_flow(double pi_i, double pi_j, double w,
                            const std::string& pipeline_id = "?") {
    const double d = pi_i * pi_i - pi_j * pi_j;
    if (d < -kReversedPressureTol) throw ReversedPressureError(pipeline_id);
    return std::sqrt(w * std::max(d, 0.0));
}

// ------------------------------------------------------------------ h_full

namespace detail {

// Net real/reactive injection at a bus: the sum of flows leaving it.
inline LineFlow bus_injection(const Model& m, const StateVector& s, int bus) {
    LineFlow acc;
    for (const auto& e : m.bus_lines[bus]) {
        const Line& ln = m.power.lines[e.line];
        const int i = e.at_from ? ln.from : ln.to;
        const int j = e.at_from ? ln.to : ln.from;
        const LineFlow f = line_flow(s.v(i), s.v(j), s.theta(i), s.theta(j), ln.g, ln.b);
        acc.p += f.p;
        acc.q += f.q;
    }
    return acc;
}

// Net gas injection at a node: signed pipeline flows plus signed compressor
// flows leaving it.
inline double node_injection(const Model& m, const StateVector& s, int node) {
    double acc = 0.0;
    for (const auto& e : m.node_pipes[node]) {
        const Pipeline& p = m.gas.pipelines[e.pipe];
        const double flow = weymouth_flow(s.pi(p.from), s.pi(p.to), p.w, p.id);
        acc += e.at_from ? flow : -flow;
    }
    for (const auto& e : m.node_comps[node]) acc += e.at_from ? s.c(e.comp) : -s.c(e.comp);
    return acc;
}

}  // namespace detail

// Evaluates every planned measurement at state x. Throws
// ReversedPressureError when a pipeline's pressure ordering is violated.
inline Eigen::VectorXd h_full(const StateVector& s, const Model& m) {
    Eigen::VectorXd z(m.plan.size());
    for (int k = 0; k < m.plan.size(); ++k) {
        const Measurement& e = m.plan.entries[k];
        switch (e.kind) {
            case MeasurementKind::PInj:
                z[k] = detail::bus_injection(m, s, e.element).p;
                break;
            case MeasurementKind::QInj:
                z[k] = detail::bus_injection(m, s, e.element).q;
                break;
            case MeasurementKind::PFlowFwd: {
                const Line& ln = m.power.lines[e.element];
                z[k] = line_flow(s.v(ln.from), s.v(ln.to), s.theta(ln.from), s.theta(ln.to),
                                 ln.g, ln.b).p;
                break;
            }
            case MeasurementKind::PFlowRev: {
                const Line& ln = m.power.lines[e.element];
                z[k] = line_flow(s.v(ln.to), s.v(ln.from), s.theta(ln.to), s.theta(ln.from),
                                 ln.g, ln.b).p;
                break;
            }
            case MeasurementKind::QFlowFwd: {
                const Line& ln = m.power.lines[e.element];
                z[k] = line_flow(s.v(ln.from), s.v(ln.to), s.theta(ln.from), s.theta(ln.to),
                                 ln.g, ln.b).q;
                break;
            }
            case MeasurementKind::QFlowRev: {
                const Line& ln = m.power.lines[e.element];
                z[k] = line_flow(s.v(ln.to), s.v(ln.from), s.theta(ln.to), s.theta(ln.from),
                                 ln.g, ln.b).q;
                break;
            }
            case MeasurementKind::VMag:
                z[k] = s.v(e.element);
                break;
            case MeasurementKind::ThetaPmu:
                z[k] = s.theta(e.element);
                break;
            case MeasurementKind::GInj:
                z[k] = detail::node_injection(m, s, e.element);
                break;
            case MeasurementKind::GFlowPipe: {
                const Pipeline& p = m.gas.pipelines[e.element];
                z[k] = weymouth_flow(s.pi(p.from), s.pi(p.to), p.w, p.id);
                break;
            }
            case MeasurementKind::GFlowComp:
                z[k] = s.c(e.element);
                break;
            case MeasurementKind::Pressure:
                z[k] = s.pi(e.element);
                break;
        }
    }
    return z;
}

// --------------------------------------------------------------- h_coupling

// One coupled consistency pair evaluated from the two sides. For a gas-fired
// pair: left = gamma * (electric output inferred from power states), right =
// gas offtake at the supplying node inferred from gas states. For a P2G
// pair: left = chi * (electric intake inferred from power states), right =
// gas injection at the receiving node. A consistent state has left == right.
struct CouplingTerm {
    double left = 0.0;
    double right = 0.0;
};

inline double gas_fired_power_side(const Model& m, const StateVector& s,
                                   const CoupledPair& pair) {
    // generator output = net bus injection + local fixed demand
    double p = detail::bus_injection(m, s, pair.bus).p;
    for (int d : m.bus_loads[pair.bus]) p += m.power.loads[d].p;
    return p;
}

inline std::vector<CouplingTerm> h_coupling(const StateVector& s, const Model& m) {
    std::vector<CouplingTerm> out;
    out.reserve(m.coupling.gas_fired.size() + m.coupling.p2g_pairs.size());
    for (const auto& pair : m.coupling.gas_fired) {
        CouplingTerm t;
        t.left = pair.ratio * gas_fired_power_side(m, s, pair);
        t.right = -detail::node_injection(m, s, pair.node);  // offtake
        out.push_back(t);
    }
    for (const auto& pair : m.coupling.p2g_pairs) {
        CouplingTerm t;
        t.left = pair.ratio * (-detail::bus_injection(m, s, pair.bus).p);  // intake
        t.right = detail::node_injection(m, s, pair.node);
        out.push_back(t);
    }
    return out;
}

// Coupling residual vector r_c, one entry (left - right) per qualified pair.
inline Eigen::VectorXd coupling_residual(const StateVector& s, const Model& m) {
    const auto terms = h_coupling(s, m);
    Eigen::VectorXd r(terms.size());
    for (size_t i = 0; i < terms.size(); ++i) r[i] = terms[i].left - terms[i].right;
    return r;
}

// ------------------------------------------------------------------ Jacobians

struct JacobianOptions {
    // Minimum |pi_i^2 - pi_j^2| before the Weymouth partials are considered
    // singular. Refusing such states keeps the estimator honest instead of
    // silently regularizing.
    double singularity_floor = 1e-6;
};

namespace detail {

inline void add_line_flow_partials(const Model& m, const StateVector& s, int i, int j,
                                   double g, double b, double wp, double wq,
                                   Eigen::MatrixXd& J, int row_p, int row_q) {
    const auto lj = line_flow_jacobian(s.v(i), s.v(j), s.theta(i), s.theta(j), g, b);
    const StateLayout& L = s.layout;
    if (row_p >= 0) {
        J(row_p, L.v(i)) += wp * lj.dp_dvi;
        J(row_p, L.v(j)) += wp * lj.dp_dvj;
        J(row_p, L.theta(i)) += wp * lj.dp_dti;
        J(row_p, L.theta(j)) += wp * lj.dp_dtj;
    }
    if (row_q >= 0) {
        J(row_q, L.v(i)) += wq * lj.dq_dvi;
        J(row_q, L.v(j)) += wq * lj.dq_dvj;
        J(row_q, L.theta(i)) += wq * lj.dq_dti;
        J(row_q, L.theta(j)) += wq * lj.dq_dtj;
    }
}

struct WeymouthPartials {
    double dfrom;
    double dto;
};

inline WeymouthPartials weymouth_partials(const Model& m, const StateVector& s, int pipe,
                                          double floor) {
    const Pipeline& p = m.gas.pipelines[pipe];
    const double pi_i = s.pi(p.from);
    const double pi_j = s.pi(p.to);
    const double d = pi_i * pi_i - pi_j * pi_j;
    if (std::abs(d) < floor) throw JacobianSingularityError(p.id);
    if (d < 0) throw ReversedPressureError(p.id);
    const double flow = std::sqrt(p.w * d);
    return {p.w * pi_i / flow, -p.w * pi_j / flow};
}

}  // namespace detail

// Analytic Jacobian dh/dx of every planned measurement. Rows follow the plan
// ordering; columns follow the state layout.
inline Eigen::MatrixXd jacobian_h(const StateVector& s, const Model& m,
                                  const JacobianOptions& opt = {}) {
    const StateLayout& L = s.layout;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m.plan.size(), L.size());
    for (int k = 0; k < m.plan.size(); ++k) {
        const Measurement& e = m.plan.entries[k];
        switch (e.kind) {
            case MeasurementKind::PInj:
            case MeasurementKind::QInj: {
                const bool is_p = e.kind == MeasurementKind::PInj;
                for (const auto& end : m.bus_lines[e.element]) {
                    const Line& ln = m.power.lines[end.line];
                    const int i = end.at_from ? ln.from : ln.to;
                    const int j = end.at_from ? ln.to : ln.from;
                    detail::add_line_flow_partials(m, s, i, j, ln.g, ln.b, is_p ? 1.0 : 0.0,
                                                   is_p ? 0.0 : 1.0, J, is_p ? k : -1,
                                                   is_p ? -1 : k);
                }
                break;
            }
            case MeasurementKind::PFlowFwd:
            case MeasurementKind::QFlowFwd: {
                const Line& ln = m.power.lines[e.element];
                const bool is_p = e.kind == MeasurementKind::PFlowFwd;
                detail::add_line_flow_partials(m, s, ln.from, ln.to, ln.g, ln.b,
                                               is_p ? 1.0 : 0.0, is_p ? 0.0 : 1.0, J,
                                               is_p ? k : -1, is_p ? -1 : k);
                break;
            }
            case MeasurementKind::PFlowRev:
            case MeasurementKind::QFlowRev: {
                const Line& ln = m.power.lines[e.element];
                const bool is_p = e.kind == MeasurementKind::PFlowRev;
                detail::add_line_flow_partials(m, s, ln.to, ln.from, ln.g, ln.b,
                                               is_p ? 1.0 : 0.0, is_p ? 0.0 : 1.0, J,
                                               is_p ? k : -1, is_p ? -1 : k);
                break;
            }
            case MeasurementKind::VMag:
                J(k, L.v(e.element)) = 1.0;
                break;
            case MeasurementKind::ThetaPmu:
                J(k, L.theta(e.element)) = 1.0;
                break;
            case MeasurementKind::GInj: {
                for (const auto& end : m.node_pipes[e.element]) {
                    const Pipeline& p = m.gas.pipelines[end.pipe];
                    const auto wp = detail::weymouth_partials(m, s, end.pipe,
                                                              opt.singularity_floor);
                    const double sign = end.at_from ? 1.0 : -1.0;
                    J(k, L.pi(p.from)) += sign * wp.dfrom;
                    J(k, L.pi(p.to)) += sign * wp.dto;
                }
                for (const auto& end : m.node_comps[e.element])
                    J(k, L.c(end.comp)) += end.at_from ? 1.0 : -1.0;
                break;
            }
            case MeasurementKind::GFlowPipe: {
                const Pipeline& p = m.gas.pipelines[e.element];
                const auto wp = detail::weymouth_partials(m, s, e.element,
                                                          opt.singularity_floor);
                J(k, L.pi(p.from)) = wp.dfrom;
                J(k, L.pi(p.to)) = wp.dto;
                break;
            }
            case MeasurementKind::GFlowComp:
                J(k, L.c(e.element)) = 1.0;
                break;
            case MeasurementKind::Pressure:
                J(k, L.pi(e.element)) = 1.0;
                break;
        }
    }
    return J;
}

// Jacobian of the coupling residual vector (left - right per pair) with
// respect to the full state.
inline Eigen::MatrixXd jacobian_coupling(const StateVector& s, const Model& m,
                                         const JacobianOptions& opt = {}) {
    const StateLayout& L = s.layout;
    const int n_pairs = static_cast<int>(m.coupling.gas_fired.size() +
                                         m.coupling.p2g_pairs.size());
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n_pairs, L.size());
    int row = 0;
    auto add_node_injection = [&](int node, double scale, int r) {
        for (const auto& end : m.node_pipes[node]) {
            const Pipeline& p = m.gas.pipelines[end.pipe];
            const auto wp = detail::weymouth_partials(m, s, end.pipe, opt.singularity_floor);
            const double sign = (end.at_from ? 1.0 : -1.0) * scale;
            C(r, L.pi(p.from)) += sign * wp.dfrom;
            C(r, L.pi(p.to)) += sign * wp.dto;
        }
        for (const auto& end : m.node_comps[node])
            C(r, L.c(end.comp)) += (end.at_from ? 1.0 : -1.0) * scale;
    };
    auto add_bus_injection = [&](int bus, double scale, int r) {
        for (const auto& end : m.bus_lines[bus]) {
            const Line& ln = m.power.lines[end.line];
            const int i = end.at_from ? ln.from : ln.to;
            const int j = end.at_from ? ln.to : ln.from;
            detail::add_line_flow_partials(m, s, i, j, ln.g, ln.b, scale, 0.0, C, r, -1);
        }
    };
    for (const auto& pair : m.coupling.gas_fired) {
        add_bus_injection(pair.bus, pair.ratio, row);       // d(left)
        add_node_injection(pair.node, 1.0, row);            // -d(right) = +d(injection)
        ++row;
    }
    for (const auto& pair : m.coupling.p2g_pairs) {
        add_bus_injection(pair.bus, -pair.ratio, row);
        add_node_injection(pair.node, -1.0, row);
        ++row;
    }
    return C;
}

// Structural selectors for the states that enter any coupled injection.
// Derived from topology alone (lines incident to coupled buses; pipelines and
// compressors incident to coupled nodes), so accidental numeric zeros cannot
// hide a dependency.
struct CouplingSelectors {
    std::vector<int> power_states;  // indices into x, power block
    std::vector<int> gas_states;    // indices into x, gas block
};

inline CouplingSelectors coupling_state_selectors(const Model& m) {
    const StateLayout L = m.layout();
    std::vector<char> mark(L.size(), 0);
    auto mark_bus = [&](int bus) {
        for (const auto& end : m.bus_lines[bus]) {
            const Line& ln = m.power.lines[end.line];
            mark[L.v(ln.from)] = mark[L.v(ln.to)] = 1;
            mark[L.theta(ln.from)] = mark[L.theta(ln.to)] = 1;
        }
    };
    auto mark_node = [&](int node) {
        for (const auto& end : m.node_pipes[node]) {
            const Pipeline& p = m.gas.pipelines[end.pipe];
            mark[L.pi(p.from)] = mark[L.pi(p.to)] = 1;
        }
        for (const auto& end : m.node_comps[node]) mark[L.c(end.comp)] = 1;
    };
    for (const auto& pair : m.coupling.gas_fired) {
        mark_bus(pair.bus);
        mark_node(pair.node);
    }
    for (const auto& pair : m.coupling.p2g_pairs) {
        mark_bus(pair.bus);
        mark_node(pair.node);
    }
    CouplingSelectors out;
    for (int i = 0; i < L.size(); ++i) {
        if (!mark[i]) continue;
        if (L.is_power_index(i)) out.power_states.push_back(i);
        else out.gas_states.push_back(i);
    }
    return out;
}

}  // namespace iegs
