#pragma once

// Ground-truth generation: a coupled power/gas steady-state solve from a
// dispatch specification, and reproducible noisy measurement sampling.
//
// The solve works on an extended unknown vector [v, theta, g_pipe, c, s]
// with s = pi^2, so the Weymouth relation enters as the smooth residual
// g|g| - W (s_i - s_j) = 0 and the flat start (zero flows, uniform squared
// pressure) is a regular point. Compressors carry no pressure-flow law; the
// dispatch pins each one by a ratio or flow setpoint.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iegs/measurement.hpp"
#include "iegs/model.hpp"
#include "iegs/random.hpp"

namespace iegs {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ----------------------------------------------------------------- dispatch

struct GeneratorSetpoint {
    std::string generator;
    double p = 0.0;
    double q = 0.0;                    // used when v_set is absent (PQ bus)
    std::optional<double> v_set;       // hold the bus voltage (PV bus)
};

struct WellSetpoint {
    std::string well;
    double g = 0.0;
};

struct CompressorSetpoint {
    std::string compressor;
    enum class Mode { Ratio, Flow } mode = Mode::Ratio;
    double value = 1.0;  // pressure ratio pi_to/pi_from, or flow
};

struct P2gSetpoint {
    std::string facility;
    double p_intake = 0.0;  // electric power drawn, >= 0
};

struct DispatchSpec {
    std::vector<GeneratorSetpoint> generators;
    std::vector<WellSetpoint> wells;
    std::vector<CompressorSetpoint> compressors;
    std::vector<P2gSetpoint> p2g;
    std::string slack_bus;          // absorbs the power mismatch; v_set, theta = 0
    double slack_v = 1.0;
    std::string slack_node;         // absorbs the gas mismatch
    double slack_pressure = 50.0;
};

struct NoiseModel {
    enum class Mode { None, PresetLow, PresetHigh, Scalar, Plan } mode = Mode::None;
    double sigma = 0.0;             // used by Scalar
    std::uint64_t seed = 0;

    // Per-entry noise std actually applied.
    double applied_sigma(double plan_sigma) const {
        switch (mode) {
            case Mode::None: return 0.0;
            case Mode::PresetLow: return std::sqrt(2e-3);
            case Mode::PresetHigh: return std::sqrt(1e-2);
            case Mode::Scalar: return sigma;
            case Mode::Plan: return plan_sigma;
        }
        return 0.0;
    }
};

struct EnergyFlowResult {
    StateVector state;
    Eigen::VectorXd pipe_flows;         // aligned to pipeline declaration order
    double mismatch_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    double slack_generation_p = 0.0;    // net injection absorbed at the slack bus
    double slack_generation_q = 0.0;
    double slack_well_output = 0.0;     // injection absorbed at the slack node
    std::vector<std::string> violations;  // bound/orientation findings, informational
};

// ----------------------------------------------------------------- the solve

namespace detail {

struct DispatchTables {
    std::vector<double> gen_p, gen_q;           // per generator
    std::vector<std::optional<double>> gen_vset;
    std::vector<double> well_g;                 // per well
    std::vector<int> comp_mode;                 // 0 ratio, 1 flow
    std::vector<double> comp_value;
    std::vector<double> p2g_intake;             // per facility
    int slack_bus = -1;
    int slack_node = -1;
};

inline DispatchTables resolve_dispatch(const Model& m, const DispatchSpec& d) {
    DispatchTables t;
    t.gen_p.assign(m.power.generators.size(), 0.0);
    t.gen_q.assign(m.power.generators.size(), 0.0);
    t.gen_vset.assign(m.power.generators.size(), std::nullopt);
    t.well_g.assign(m.gas.wells.size(), 0.0);
    t.comp_mode.assign(m.gas.compressors.size(), 0);
    t.comp_value.assign(m.gas.compressors.size(), 1.0);
    t.p2g_intake.assign(m.coupling.p2g.size(), 0.0);
    for (const auto& g : d.generators) {
        const int idx = m.generator_index(g.generator);
        if (idx < 0) throw SolverError("dispatch references unknown generator " + g.generator);
        t.gen_p[idx] = g.p;
        t.gen_q[idx] = g.q;
        t.gen_vset[idx] = g.v_set;
    }
    for (const auto& w : d.wells) {
        int idx = -1;
        for (int i = 0; i < static_cast<int>(m.gas.wells.size()); ++i)
            if (m.gas.wells[i].id == w.well) idx = i;
        if (idx < 0) throw SolverError("dispatch references unknown well " + w.well);
        t.well_g[idx] = w.g;
    }
    for (const auto& c : d.compressors) {
        const int idx = m.compressor_index(c.compressor);
        if (idx < 0) throw SolverError("dispatch references unknown compressor " + c.compressor);
        t.comp_mode[idx] = c.mode == CompressorSetpoint::Mode::Flow ? 1 : 0;
        t.comp_value[idx] = c.value;
    }
    for (const auto& f : d.p2g) {
        int idx = -1;
        for (int i = 0; i < static_cast<int>(m.coupling.p2g.size()); ++i)
            if (m.coupling.p2g[i].id == f.facility) idx = i;
        if (idx < 0) throw SolverError("dispatch references unknown p2g facility " + f.facility);
        t.p2g_intake[idx] = f.p_intake;
    }
    t.slack_bus = m.bus_index(d.slack_bus);
    if (!m.power.buses.empty() && t.slack_bus < 0)
        throw SolverError("dispatch slack bus not found: " + d.slack_bus);
    if (!m.gas.nodes.empty()) {
        t.slack_node = m.node_index(d.slack_node);
        if (t.slack_node < 0) throw SolverError("dispatch slack node not found: " + d.slack_node);
    }
    return t;
}

}  // namespace detail

// Newton solve of the coupled steady state. Damped steps (halving on
// mismatch increase), flat start, max 50 iterations, tolerance 1e-10 on the
// mismatch norm. Bound violations at the solution are reported in
// `violations` but the state is still returned.
inline EnergyFlowResult solve_energy_flow(const Model& m, const DispatchSpec& dispatch) {
    const auto t = detail::resolve_dispatch(m, dispatch);
    const int nb = static_cast<int>(m.power.buses.size());
    const int nl = static_cast<int>(m.power.lines.size());
    const int np = static_cast<int>(m.gas.pipelines.size());
    const int nc = static_cast<int>(m.gas.compressors.size());
    const int nn = static_cast<int>(m.gas.nodes.size());

    // unknown layout: v(nb), theta(nb), gp(np), c(nc), s(nn)
    const int off_v = 0, off_t = nb, off_g = 2 * nb, off_c = 2 * nb + np,
              off_s = 2 * nb + np + nc;
    const int n = 2 * nb + np + nc + nn;

    // fixed injection part per bus / node (independent of the unknowns)
    std::vector<double> p_spec(nb, 0.0), q_spec(nb, 0.0), g_spec_fixed(nn, 0.0);
    for (int g = 0; g < static_cast<int>(m.power.generators.size()); ++g) {
        const auto& gen = m.power.generators[g];
        if (gen.bus == t.slack_bus) continue;  // slack output is implied
        p_spec[gen.bus] += t.gen_p[g];
        q_spec[gen.bus] += t.gen_q[g];
    }
    for (const auto& d : m.power.loads) {
        p_spec[d.bus] -= d.p;
        q_spec[d.bus] -= d.q;
    }
    for (int f = 0; f < static_cast<int>(m.coupling.p2g.size()); ++f) {
        const auto& fac = m.coupling.p2g[f];
        if (fac.bus == t.slack_bus)
            throw SolverError("p2g facility at the slack bus is not supported");
        p_spec[fac.bus] -= t.p2g_intake[f];
        g_spec_fixed[fac.node] += fac.chi * t.p2g_intake[f];
    }
    for (int w = 0; w < static_cast<int>(m.gas.wells.size()); ++w) {
        if (m.gas.wells[w].node == t.slack_node) continue;  // slack output is implied
        g_spec_fixed[m.gas.wells[w].node] += t.well_g[w];
    }
    for (const auto& d : m.gas.loads) g_spec_fixed[d.node] -= d.demand;
    // gas-fired offtake with known dispatch; slack-bus units are handled in
    // the residual because their output depends on (v, theta)
    std::vector<int> slack_gasfired;
    for (int g = 0; g < static_cast<int>(m.power.generators.size()); ++g) {
        const auto& gen = m.power.generators[g];
        if (gen.kind != GeneratorKind::GasFired) continue;
        if (gen.bus == t.slack_bus) slack_gasfired.push_back(g);
        else g_spec_fixed[gen.gas_node] -= gen.gamma * t.gen_p[g];
    }
    if (slack_gasfired.size() > 1)
        throw SolverError("multiple gas-fired generators at the slack bus are not supported");

    // voltage setpoints: PV buses hold v, PQ buses hold q
    std::vector<std::optional<double>> v_set(nb);
    if (t.slack_bus >= 0) v_set[t.slack_bus] = dispatch.slack_v;
    for (int g = 0; g < static_cast<int>(m.power.generators.size()); ++g)
        if (t.gen_vset[g] && m.power.generators[g].bus != t.slack_bus)
            v_set[m.power.generators[g].bus] = *t.gen_vset[g];

    Eigen::VectorXd y(n);
    for (int i = 0; i < nb; ++i) y[off_v + i] = v_set[i].value_or(1.0);
    for (int i = 0; i < nb; ++i) y[off_t + i] = 0.0;
    for (int i = 0; i < np; ++i) y[off_g + i] = 0.0;
    for (int i = 0; i < nc; ++i) y[off_c + i] = t.comp_mode[i] == 1 ? t.comp_value[i] : 0.0;
    const double s0 = dispatch.slack_pressure * dispatch.slack_pressure;
    for (int i = 0; i < nn; ++i) y[off_s + i] = nn > 0 ? s0 : 0.0;

    StateVector state(m.layout());
    auto unpack = [&](const Eigen::VectorXd& yy) {
        for (int i = 0; i < nb; ++i) state.v(i) = yy[off_v + i];
        for (int i = 0; i < nb; ++i) state.theta(i) = yy[off_t + i];
        for (int i = 0; i < nc; ++i) state.c(i) = yy[off_c + i];
        for (int i = 0; i < nn; ++i) state.pi(i) = std::sqrt(std::max(yy[off_s + i], 0.0));
    };

    // the implied output of a gas-fired unit at the slack bus
    auto slack_unit_output = [&](const Eigen::VectorXd& yy) {
        unpack(yy);
        double p = detail::bus_injection(m, state, t.slack_bus).p;
        for (int d : m.bus_loads[t.slack_bus]) p += m.power.loads[d].p;
        return p;
    };

    auto residual = [&](const Eigen::VectorXd& yy, Eigen::VectorXd& F) {
        unpack(yy);
        F.setZero(n);
        int row = 0;
        for (int i = 0; i < nb; ++i) {
            if (i == t.slack_bus) {
                F[row++] = yy[off_v + i] - dispatch.slack_v;
                F[row++] = yy[off_t + i];
                continue;
            }
            const LineFlow inj = detail::bus_injection(m, state, i);
            F[row++] = inj.p - p_spec[i];
            if (v_set[i]) F[row++] = yy[off_v + i] - *v_set[i];
            else F[row++] = inj.q - q_spec[i];
        }
        for (int p = 0; p < np; ++p) {
            const auto& pl = m.gas.pipelines[p];
            const double g = yy[off_g + p];
            F[row++] = g * std::abs(g) - pl.w * (yy[off_s + pl.from] - yy[off_s + pl.to]);
        }
        for (int c = 0; c < nc; ++c) {
            const auto& cp = m.gas.compressors[c];
            if (t.comp_mode[c] == 0) {
                const double r = t.comp_value[c];
                F[row++] = yy[off_s + cp.to] - r * r * yy[off_s + cp.from];
            } else {
                F[row++] = yy[off_c + c] - t.comp_value[c];
            }
        }
        for (int i = 0; i < nn; ++i) {
            if (i == t.slack_node) {
                F[row++] = yy[off_s + i] - s0;
                continue;
            }
            double balance = 0.0;
            for (const auto& e : m.node_pipes[i])
                balance += (e.at_from ? 1.0 : -1.0) * yy[off_g + e.pipe];
            for (const auto& e : m.node_comps[i])
                balance += (e.at_from ? 1.0 : -1.0) * yy[off_c + e.comp];
            double spec = g_spec_fixed[i];
            for (int g : slack_gasfired)
                if (m.power.generators[g].gas_node == i)
                    spec -= m.power.generators[g].gamma * slack_unit_output(yy);
            F[row++] = balance - spec;
        }
    };

    auto jacobian = [&](const Eigen::VectorXd& yy, Eigen::MatrixXd& J) {
        unpack(yy);
        J.setZero(n, n);
        int row = 0;
        auto add_injection_rows = [&](int bus, int rp, int rq) {
            for (const auto& e : m.bus_lines[bus]) {
                const Line& ln = m.power.lines[e.line];
                const int i = e.at_from ? ln.from : ln.to;
                const int j = e.at_from ? ln.to : ln.from;
                const auto lj = line_flow_jacobian(state.v(i), state.v(j), state.theta(i),
                                                   state.theta(j), ln.g, ln.b);
                if (rp >= 0) {
                    J(rp, off_v + i) += lj.dp_dvi;
                    J(rp, off_v + j) += lj.dp_dvj;
                    J(rp, off_t + i) += lj.dp_dti;
                    J(rp, off_t + j) += lj.dp_dtj;
                }
                if (rq >= 0) {
                    J(rq, off_v + i) += lj.dq_dvi;
                    J(rq, off_v + j) += lj.dq_dvj;
                    J(rq, off_t + i) += lj.dq_dti;
                    J(rq, off_t + j) += lj.dq_dtj;
                }
            }
        };
        for (int i = 0; i < nb; ++i) {
            if (i == t.slack_bus) {
                J(row++, off_v + i) = 1.0;
                J(row++, off_t + i) = 1.0;
                continue;
            }
            add_injection_rows(i, row, v_set[i] ? -1 : row + 1);
            ++row;
            if (v_set[i]) J(row++, off_v + i) = 1.0;
            else ++row;
        }
        for (int p = 0; p < np; ++p) {
            const auto& pl = m.gas.pipelines[p];
            J(row, off_g + p) = 2.0 * std::abs(yy[off_g + p]);
            J(row, off_s + pl.from) = -pl.w;
            J(row, off_s + pl.to) = pl.w;
            ++row;
        }
        for (int c = 0; c < nc; ++c) {
            const auto& cp = m.gas.compressors[c];
            if (t.comp_mode[c] == 0) {
                const double r = t.comp_value[c];
                J(row, off_s + cp.to) = 1.0;
                J(row, off_s + cp.from) = -r * r;
            } else {
                J(row, off_c + c) = 1.0;
            }
            ++row;
        }
        for (int i = 0; i < nn; ++i) {
            if (i == t.slack_node) {
                J(row++, off_s + i) = 1.0;
                continue;
            }
            for (const auto& e : m.node_pipes[i])
                J(row, off_g + e.pipe) += e.at_from ? 1.0 : -1.0;
            for (const auto& e : m.node_comps[i])
                J(row, off_c + e.comp) += e.at_from ? 1.0 : -1.0;
            for (int g : slack_gasfired) {
                if (m.power.generators[g].gas_node != i) continue;
                // d(spec)/dy = -gamma * d(slack injection)/dy, moved to the LHS
                const double gamma = m.power.generators[g].gamma;
                for (const auto& e : m.bus_lines[t.slack_bus]) {
                    const Line& ln = m.power.lines[e.line];
                    const int a = e.at_from ? ln.from : ln.to;
                    const int bidx = e.at_from ? ln.to : ln.from;
                    const auto lj = line_flow_jacobian(state.v(a), state.v(bidx),
                                                       state.theta(a), state.theta(bidx),
                                                       ln.g, ln.b);
                    J(row, off_v + a) += gamma * lj.dp_dvi;
                    J(row, off_v + bidx) += gamma * lj.dp_dvj;
                    J(row, off_t + a) += gamma * lj.dp_dti;
                    J(row, off_t + bidx) += gamma * lj.dp_dtj;
                }
            }
            ++row;
        }
    };

    EnergyFlowResult out;
    Eigen::VectorXd F(n), F_trial(n);
    Eigen::MatrixXd J(n, n);
    residual(y, F);
    double norm = F.norm();
    const double tol = 1e-10;
    const int max_iter = 50;
    int iter = 0;
    while (norm > tol && iter < max_iter) {
        jacobian(y, J);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible())
            throw SolverError("energy-flow Jacobian is singular; check compressor setpoints "
                              "(parallel compressors need one flow-mode setpoint)");
        const Eigen::VectorXd dy = lu.solve(-F);
        double step = 1.0;
        bool accepted = false;
        for (int half = 0; half < 30; ++half) {
            const Eigen::VectorXd y_trial = y + step * dy;
            residual(y_trial, F_trial);
            const double trial_norm = F_trial.norm();
            if (trial_norm < norm) {
                y = y_trial;
                F = F_trial;
                norm = trial_norm;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        ++iter;
        if (!accepted) break;
    }

    unpack(y);
    out.state = state;
    out.pipe_flows = y.segment(off_g, np);
    out.mismatch_norm = norm;
    out.iterations = iter;
    out.converged = norm <= tol;
    if (!out.converged)
        throw SolverError("energy-flow Newton did not converge; final mismatch norm " +
                          std::to_string(norm));

    if (t.slack_bus >= 0) {
        const LineFlow slack_inj = detail::bus_injection(m, state, t.slack_bus);
        double fixed_p = 0.0, fixed_q = 0.0;
        for (int d : m.bus_loads[t.slack_bus]) {
            fixed_p -= m.power.loads[d].p;
            fixed_q -= m.power.loads[d].q;
        }
        out.slack_generation_p = slack_inj.p - fixed_p;
        out.slack_generation_q = slack_inj.q - fixed_q;
    }
    if (t.slack_node >= 0) {
        double balance = detail::node_injection(m, state, t.slack_node);
        double fixed = g_spec_fixed[t.slack_node];
        out.slack_well_output = balance - fixed;
    }

    // post-solve feasibility findings
    for (int p = 0; p < np; ++p)
        if (out.pipe_flows[p] < -1e-9)
            out.violations.push_back("pipeline " + m.gas.pipelines[p].id +
                                     ": flow opposes the declared orientation");
        else if (out.pipe_flows[p] > m.gas.pipelines[p].g_max)
            out.violations.push_back("pipeline " + m.gas.pipelines[p].id + ": flow limit exceeded");
    for (int c = 0; c < nc; ++c) {
        if (state.c(c) < -1e-9)
            out.violations.push_back("compressor " + m.gas.compressors[c].id + ": negative flow");
        if (state.c(c) > m.gas.compressors[c].c_max)
            out.violations.push_back("compressor " + m.gas.compressors[c].id + ": flow limit exceeded");
        const double ratio = state.pi(m.gas.compressors[c].to) /
                             state.pi(m.gas.compressors[c].from);
        if (ratio > m.gas.compressors[c].alpha + 1e-9)
            out.violations.push_back("compressor " + m.gas.compressors[c].id +
                                     ": compression ratio exceeds alpha");
    }
    for (int i = 0; i < nb; ++i) {
        if (state.v(i) < m.power.buses[i].v_min - 1e-9 ||
            state.v(i) > m.power.buses[i].v_max + 1e-9)
            out.violations.push_back("bus " + m.power.buses[i].id + ": voltage outside bounds");
    }
    for (int i = 0; i < nn; ++i) {
        if (state.pi(i) < m.gas.nodes[i].pi_min - 1e-9 ||
            state.pi(i) > m.gas.nodes[i].pi_max + 1e-9)
            out.violations.push_back("node " + m.gas.nodes[i].id + ": pressure outside bounds");
    }
    return out;
}

// --------------------------------------------------------------- measurements

// z = h(x*) + e with e drawn entry-by-entry from the documented Gaussian
// stream. Identical (model, state, noise, seed) inputs produce identical
// vectors. The recorded variance is the applied one, except in noiseless
// mode where the plan's declared std is kept so downstream weighting stays
// defined.
inline MeasurementVector sample_measurements(const StateVector& x, const Model& m,
                                             const NoiseModel& noise) {
    MeasurementVector z;
    z.values = h_full(x, m);
    z.variance.resize(m.plan.size());
    GaussianStream stream(noise.seed);
    for (int k = 0; k < m.plan.size(); ++k) {
        const double sigma = noise.applied_sigma(m.plan.entries[k].sigma);
        const double draw = stream.next();  // consumed even when sigma == 0
        z.values[k] += sigma * draw;
        const double recorded = sigma > 0 ? sigma : m.plan.entries[k].sigma;
        z.variance[k] = recorded * recorded;
    }
    return z;
}

}  // namespace iegs
