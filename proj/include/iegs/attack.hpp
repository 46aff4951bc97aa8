#pragma once

// Complete-information attack synthesis: measurement falsifications built
// from a state shift so the estimation residual is preserved exactly, the
// min-norm targeted variant with operational-plausibility limits, the
// power-only counterexample, stealth verification against the two-tier
// detector, and the bias-robustness analysis for intruders whose estimated
// states differ from the operator's.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iegs/estimation.hpp"
#include "iegs/measurement.hpp"
#include "iegs/model.hpp"

namespace iegs {

class InfeasibleTargetError : public std::runtime_error {
public:
    InfeasibleTargetError(const std::string& msg, std::vector<std::string> active_set)
        : std::runtime_error(msg), active(std::move(active_set)) {}
    std::vector<std::string> active;
};

enum class AttackProvenance { Complete, Local, Topology, Naive };

inline const char* provenance_name(AttackProvenance p) {
    switch (p) {
        case AttackProvenance::Complete: return "complete";
        case AttackProvenance::Local: return "local";
        case AttackProvenance::Topology: return "topology";
        case AttackProvenance::Naive: return "naive";
    }
    return "?";
}

struct AttackCertificate {
    double predicted_residual_delta = 0.0;  // ||r_bad|| - ||r|| implied by construction
    double predicted_coupling_norm = 0.0;   // coupling residual at the shifted state
    bool stealthy = false;                  // coupling norm within epsilon
};

struct AttackVector {
    Eigen::VectorXd delta_z;  // plan-aligned; zero almost everywhere
    Eigen::VectorXd delta_x;  // state-layout-aligned
    AttackProvenance provenance = AttackProvenance::Complete;
    AttackCertificate certificate;

    std::vector<int> touched_measurements(double tol = 0.0) const {
        std::vector<int> out;
        for (int k = 0; k < delta_z.size(); ++k)
            if (std::abs(delta_z[k]) > tol) out.push_back(k);
        return out;
    }
};

// ------------------------------------------------------------ forge from shift

// delta_z = h(x + dx) - h(x). The certificate records the coupling residual
// at the shifted state; the attack is stealthy only when that stays within
// epsilon, since re-estimation pulls the operator onto the constraint
// manifold.
inline AttackVector forge_from_shift(const StateVector& x_hat, const Eigen::VectorXd& delta_x,
                                     const Model& m, double epsilon = 1e-5) {
    StateVector shifted = x_hat;
    shifted.x += delta_x;
    AttackVector a;
    a.delta_x = delta_x;
    a.delta_z = h_full(shifted, m) - h_full(x_hat, m);
    a.provenance = AttackProvenance::Complete;
    a.certificate.predicted_residual_delta = 0.0;
    a.certificate.predicted_coupling_norm = coupling_residual(shifted, m).norm();
    a.certificate.stealthy = a.certificate.predicted_coupling_norm <= epsilon;
    return a;
}

// Power-side-only falsification that ignores the gas subsystem: delta_z on
// power rows follows the classic residual-preserving rule, gas rows stay
// untouched. On coupled systems this leaves the consistency rows violated.
inline AttackVector naive_power_attack(const StateVector& x_hat,
                                       const Eigen::VectorXd& delta_x_power, const Model& m,
                                       double epsilon = 1e-5) {
    const StateLayout L = m.layout();
    for (int i = 2 * L.n_bus; i < L.size(); ++i)
        if (delta_x_power[i] != 0.0)
            throw std::invalid_argument("naive attack shift must touch power states only");
    StateVector shifted = x_hat;
    shifted.x += delta_x_power;
    const Eigen::VectorXd h0 = h_full(x_hat, m);
    const Eigen::VectorXd h1 = h_full(shifted, m);
    AttackVector a;
    a.delta_x = delta_x_power;
    a.delta_z = Eigen::VectorXd::Zero(m.plan.size());
    for (int k = 0; k < m.plan.size(); ++k)
        if (is_power_kind(m.plan.entries[k].kind)) a.delta_z[k] = h1[k] - h0[k];
    a.provenance = AttackProvenance::Naive;
    a.certificate.predicted_coupling_norm = coupling_residual(shifted, m).norm();
    a.certificate.stealthy = a.certificate.predicted_coupling_norm <= epsilon;
    // the power rows alone still preserve the power-block residual
    a.certificate.predicted_residual_delta = 0.0;
    return a;
}

// ------------------------------------------------------------------- targets

struct TargetItem {
    bool is_state = false;
    int row = -1;          // plan row when a measurement is targeted
    int state_index = -1;  // state index when a state is targeted
    double value = 0.0;    // desired falsified value (absolute)
    std::string label;
};

struct TargetSpec {
    std::vector<TargetItem> items;
    bool enforce_limits = false;  // operational-plausibility boxes
};

inline TargetItem measurement_target(const Model& m, MeasurementKind kind,
                                     const std::string& element, double value) {
    for (int k = 0; k < m.plan.size(); ++k) {
        const auto& e = m.plan.entries[k];
        if (e.kind == kind && element_id(m, e) == element)
            return {false, k, -1, value, std::string(kind_name(kind)) + ":" + element};
    }
    throw std::invalid_argument("no planned measurement " + std::string(kind_name(kind)) +
                                " at " + element);
}

inline TargetItem state_target(const Model& m, const std::string& block,
                               const std::string& element, double value) {
    const StateLayout L = m.layout();
    int idx = -1;
    if (block == "v") idx = L.v(m.bus_index(element));
    else if (block == "theta") idx = L.theta(m.bus_index(element));
    else if (block == "c") idx = L.c(m.compressor_index(element));
    else if (block == "pi") idx = L.pi(m.node_index(element));
    else throw std::invalid_argument("unknown state block " + block);
    if (idx < 0) throw std::invalid_argument("unknown element " + element);
    return {true, -1, idx, value, block + ":" + element};
}

// ------------------------------------------------------- plausibility limits

namespace detail {

struct Box {
    double lo;
    double hi;
    std::string label;
};

inline std::optional<Box> measurement_box(const Model& m, int row) {
    const auto& e = m.plan.entries[row];
    switch (e.kind) {
        case MeasurementKind::PInj: {
            const auto& b = m.power.buses[e.element];
            return Box{b.p_min, b.p_max, "p_inj:" + b.id};
        }
        case MeasurementKind::QInj: {
            const auto& b = m.power.buses[e.element];
            return Box{b.q_min, b.q_max, "q_inj:" + b.id};
        }
        case MeasurementKind::VMag: {
            const auto& b = m.power.buses[e.element];
            return Box{b.v_min, b.v_max, "v_mag:" + b.id};
        }
        case MeasurementKind::ThetaPmu: {
            const auto& b = m.power.buses[e.element];
            return Box{-b.theta_max, b.theta_max, "theta:" + b.id};
        }
        case MeasurementKind::GInj: {
            const auto& n = m.gas.nodes[e.element];
            return Box{n.g_min, n.g_max, "g_inj:" + n.id};
        }
        case MeasurementKind::GFlowPipe: {
            const auto& p = m.gas.pipelines[e.element];
            return Box{-p.g_max, p.g_max, "g_flow:" + p.id};
        }
        case MeasurementKind::GFlowComp: {
            const auto& c = m.gas.compressors[e.element];
            return Box{0.0, c.c_max, "c_flow:" + c.id};
        }
        case MeasurementKind::Pressure: {
            const auto& n = m.gas.nodes[e.element];
            return Box{n.pi_min, n.pi_max, "pressure:" + n.id};
        }
        default:
            return std::nullopt;  // line P/Q flows are covered by the thermal pairs
    }
}

inline std::optional<Box> state_box(const Model& m, int idx) {
    const StateLayout L = m.layout();
    if (idx < L.n_bus) {
        const auto& b = m.power.buses[idx];
        return Box{b.v_min, b.v_max, "v:" + b.id};
    }
    if (idx < 2 * L.n_bus) {
        const auto& b = m.power.buses[idx - L.n_bus];
        return Box{-b.theta_max, b.theta_max, "theta:" + b.id};
    }
    if (idx < 2 * L.n_bus + L.n_comp) {
        const auto& c = m.gas.compressors[idx - 2 * L.n_bus];
        return Box{0.0, c.c_max, "c:" + c.id};
    }
    const auto& n = m.gas.nodes[idx - 2 * L.n_bus - L.n_comp];
    return Box{n.pi_min, n.pi_max, "pi:" + n.id};
}

// Scalar equality constraints g(x) = 0 assembled for the synthesizer. Each
// knows its value and gradient at a state.
struct ScalarConstraint {
    enum class Kind { MeasurementValue, StateValue, Coupling, ThermalPair, CompressorRatio };
    Kind kind;
    int a = -1;      // plan row / state index / pair index / line / compressor
    double target = 0.0;
    std::string label;
};

struct SynthWork {
    const Model& m;
    JacobianOptions jopt;
    std::vector<ScalarConstraint> constraints;

    Eigen::VectorXd value(const StateVector& s) const {
        const Eigen::VectorXd h = h_full(s, m);
        const Eigen::VectorXd rc = coupling_residual(s, m);
        Eigen::VectorXd out(constraints.size());
        for (size_t i = 0; i < constraints.size(); ++i) {
            const auto& cn = constraints[i];
            switch (cn.kind) {
                case ScalarConstraint::Kind::MeasurementValue:
                    out[i] = h[cn.a] - cn.target;
                    break;
                case ScalarConstraint::Kind::StateValue:
                    out[i] = s.x[cn.a] - cn.target;
                    break;
                case ScalarConstraint::Kind::Coupling:
                    out[i] = rc[cn.a];
                    break;
                case ScalarConstraint::Kind::ThermalPair: {
                    // cn.a encodes 2*line + (0 fwd, 1 rev)
                    const Line& ln = m.power.lines[cn.a / 2];
                    const bool fwd = cn.a % 2 == 0;
                    const int i1 = fwd ? ln.from : ln.to;
                    const int j1 = fwd ? ln.to : ln.from;
                    const LineFlow f =
                        line_flow(s.v(i1), s.v(j1), s.theta(i1), s.theta(j1), ln.g, ln.b);
                    out[i] = std::sqrt(f.p * f.p + f.q * f.q) - cn.target;
                    break;
                }
                case ScalarConstraint::Kind::CompressorRatio: {
                    const Compressor& cp = m.gas.compressors[cn.a];
                    out[i] = s.pi(cp.to) - cp.alpha * s.pi(cp.from);
                    break;
                }
            }
        }
        return out;
    }

    Eigen::MatrixXd jacobian(const StateVector& s) const {
        const StateLayout L = s.layout;
        const Eigen::MatrixXd Jh = jacobian_h(s, m, jopt);
        const Eigen::MatrixXd Jc = jacobian_coupling(s, m, jopt);
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(constraints.size(), L.size());
        for (size_t i = 0; i < constraints.size(); ++i) {
            const auto& cn = constraints[i];
            switch (cn.kind) {
                case ScalarConstraint::Kind::MeasurementValue:
                    J.row(i) = Jh.row(cn.a);
                    break;
                case ScalarConstraint::Kind::StateValue:
                    J(i, cn.a) = 1.0;
                    break;
                case ScalarConstraint::Kind::Coupling:
                    J.row(i) = Jc.row(cn.a);
                    break;
                case ScalarConstraint::Kind::ThermalPair: {
                    const Line& ln = m.power.lines[cn.a / 2];
                    const bool fwd = cn.a % 2 == 0;
                    const int i1 = fwd ? ln.from : ln.to;
                    const int j1 = fwd ? ln.to : ln.from;
                    const LineFlow f =
                        line_flow(s.v(i1), s.v(j1), s.theta(i1), s.theta(j1), ln.g, ln.b);
                    const auto lj = line_flow_jacobian(s.v(i1), s.v(j1), s.theta(i1),
                                                       s.theta(j1), ln.g, ln.b);
                    const double mag = std::max(std::sqrt(f.p * f.p + f.q * f.q), 1e-12);
                    const double cp = f.p / mag, cq = f.q / mag;
                    J(i, L.v(i1)) = cp * lj.dp_dvi + cq * lj.dq_dvi;
                    J(i, L.v(j1)) = cp * lj.dp_dvj + cq * lj.dq_dvj;
                    J(i, L.theta(i1)) = cp * lj.dp_dti + cq * lj.dq_dti;
                    J(i, L.theta(j1)) = cp * lj.dp_dtj + cq * lj.dq_dtj;
                    break;
                }
                case ScalarConstraint::Kind::CompressorRatio: {
                    const Compressor& cp = m.gas.compressors[cn.a];
                    J(i, L.pi(cp.to)) = 1.0;
                    J(i, L.pi(cp.from)) = -cp.alpha;
                    break;
                }
            }
        }
        return J;
    }
};

// min ||dx||^2 subject to the assembled equalities, by damped Gauss-Newton
// on the KKT system (objective Hessian is the identity).
inline std::optional<Eigen::VectorXd> min_norm_shift(const SynthWork& work,
                                                     const StateVector& x_hat,
                                                     const std::vector<int>& free_idx,
                                                     int max_iter = 60) {
    const int n = static_cast<int>(free_idx.size());
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(x_hat.layout.size());
    double lambda = 1e-8;
    for (int iter = 0; iter < max_iter; ++iter) {
        StateVector s = x_hat;
        s.x += dx;
        Eigen::VectorXd cval;
        Eigen::MatrixXd cjac_full;
        try {
            cval = work.value(s);
            cjac_full = work.jacobian(s);
        } catch (const std::runtime_error&) {
            return std::nullopt;  // left the Weymouth domain
        }
        Eigen::MatrixXd C(cval.size(), n);
        for (int r = 0; r < cval.size(); ++r)
            for (int j = 0; j < n; ++j) C(r, j) = cjac_full(r, free_idx[j]);
        Eigen::VectorXd dx_red(n);
        for (int j = 0; j < n; ++j) dx_red[j] = dx[free_idx[j]];
        // objective 1/2||dx||^2: gradient is -dx in the step variable
        const auto step = kkt_step(Eigen::MatrixXd::Identity(n, n), C, -dx_red, cval, lambda);
        if (!step) {
            lambda *= 100.0;
            if (lambda > 1e8) return std::nullopt;
            continue;
        }
        Eigen::VectorXd delta = step->head(n);
        if (cval.norm() < 1e-10 && delta.norm() < 1e-10) return dx;
        for (int j = 0; j < n; ++j) dx[free_idx[j]] += delta[j];
    }
    return std::nullopt;
}

}  // namespace detail

// -------------------------------------------------------------- synth target

// Minimum-norm state shift achieving the falsified targets while keeping the
// coupling rows consistent, optionally inside the operational plausibility
// limits. Violated limits are pinned at their bounds and the solve repeats;
// targets that contradict their own limits are rejected outright.
inline AttackVector synth_targeted(const StateVector& x_hat, const TargetSpec& target,
                                   const Model& m, double epsilon = 1e-5) {
    for (size_t i = 0; i < target.items.size(); ++i)
        for (size_t j = i + 1; j < target.items.size(); ++j) {
            const auto& a = target.items[i];
            const auto& b = target.items[j];
            if (a.is_state == b.is_state && a.row == b.row && a.state_index == b.state_index &&
                a.value != b.value)
                throw InfeasibleTargetError("contradictory targets on " + a.label,
                                            {a.label, b.label});
        }

    detail::SynthWork work{m, JacobianOptions{}, {}};
    std::vector<std::string> active;
    for (const auto& item : target.items) {
        if (target.enforce_limits) {
            const auto box = item.is_state ? detail::state_box(m, item.state_index)
                                           : detail::measurement_box(m, item.row);
            if (box && (item.value < box->lo - 1e-12 || item.value > box->hi + 1e-12))
                throw InfeasibleTargetError(
                    "target " + item.label + " = " + std::to_string(item.value) +
                        " violates its plausibility box [" + std::to_string(box->lo) + ", " +
                        std::to_string(box->hi) + "]",
                    {box->label});
        }
        if (item.is_state)
            work.constraints.push_back({detail::ScalarConstraint::Kind::StateValue,
                                        item.state_index, item.value, item.label});
        else
            work.constraints.push_back({detail::ScalarConstraint::Kind::MeasurementValue,
                                        item.row, item.value, item.label});
    }
    const int n_pairs =
        static_cast<int>(m.coupling.gas_fired.size() + m.coupling.p2g_pairs.size());
    for (int p = 0; p < n_pairs; ++p)
        work.constraints.push_back(
            {detail::ScalarConstraint::Kind::Coupling, p, 0.0, "coupling[" + std::to_string(p) + "]"});

    // shift the same states the operator's estimator can move
    std::vector<int> free_idx = detail::power_free_indices(m, detail::rows_of(m, true, true));
    const auto gas_idx = detail::gas_free_indices(m);
    free_idx.insert(free_idx.end(), gas_idx.begin(), gas_idx.end());

    const size_t base_constraints = work.constraints.size();
    for (int round = 0; round < 8; ++round) {
        const auto dx = detail::min_norm_shift(work, x_hat, free_idx);
        if (!dx) {
            std::vector<std::string> labels;
            for (size_t i = base_constraints; i < work.constraints.size(); ++i)
                labels.push_back(work.constraints[i].label);
            throw InfeasibleTargetError("targeted attack synthesis did not converge", labels);
        }
        if (!target.enforce_limits) {
            AttackVector a = forge_from_shift(x_hat, *dx, m, epsilon);
            a.provenance = AttackProvenance::Complete;
            return a;
        }
        // audit every falsified quantity against its box
        StateVector s = x_hat;
        s.x += *dx;
        const Eigen::VectorXd h = h_full(s, m);
        bool clean = true;
        auto pin = [&](detail::ScalarConstraint cn) {
            for (const auto& existing : work.constraints)
                if (existing.kind == cn.kind && existing.a == cn.a) return;
            work.constraints.push_back(cn);
            active.push_back(cn.label);
            clean = false;
        };
        for (int k = 0; k < m.plan.size(); ++k) {
            const auto box = detail::measurement_box(m, k);
            if (!box) continue;
            if (h[k] < box->lo - 1e-9)
                pin({detail::ScalarConstraint::Kind::MeasurementValue, k, box->lo, box->label});
            else if (h[k] > box->hi + 1e-9)
                pin({detail::ScalarConstraint::Kind::MeasurementValue, k, box->hi, box->label});
        }
        for (int j = 0; j < s.layout.size(); ++j) {
            const auto box = detail::state_box(m, j);
            if (!box) continue;
            if (s.x[j] < box->lo - 1e-9)
                pin({detail::ScalarConstraint::Kind::StateValue, j, box->lo, box->label});
            else if (s.x[j] > box->hi + 1e-9)
                pin({detail::ScalarConstraint::Kind::StateValue, j, box->hi, box->label});
        }
        for (int l = 0; l < static_cast<int>(m.power.lines.size()); ++l) {
            const Line& ln = m.power.lines[l];
            for (int end = 0; end < 2; ++end) {
                const int i1 = end == 0 ? ln.from : ln.to;
                const int j1 = end == 0 ? ln.to : ln.from;
                const LineFlow f =
                    line_flow(s.v(i1), s.v(j1), s.theta(i1), s.theta(j1), ln.g, ln.b);
                if (std::sqrt(f.p * f.p + f.q * f.q) > ln.s_max + 1e-9)
                    pin({detail::ScalarConstraint::Kind::ThermalPair, 2 * l + end, ln.s_max,
                         "thermal:" + ln.id});
            }
        }
        for (int cidx = 0; cidx < static_cast<int>(m.gas.compressors.size()); ++cidx) {
            const Compressor& cp = m.gas.compressors[cidx];
            if (s.pi(cp.to) > cp.alpha * s.pi(cp.from) + 1e-9)
                pin({detail::ScalarConstraint::Kind::CompressorRatio, cidx, 0.0,
                     "ratio:" + cp.id});
        }
        if (clean) {
            AttackVector a = forge_from_shift(x_hat, *dx, m, epsilon);
            a.provenance = AttackProvenance::Complete;
            return a;
        }
        // a pinned bound that contradicts a target is a dead end
        for (const auto& cn : work.constraints)
            for (const auto& item : target.items) {
                const bool same =
                    (item.is_state && cn.kind == detail::ScalarConstraint::Kind::StateValue &&
                     cn.a == item.state_index && cn.target != item.value) ||
                    (!item.is_state &&
                     cn.kind == detail::ScalarConstraint::Kind::MeasurementValue &&
                     cn.a == item.row && cn.target != item.value);
                if (same)
                    throw InfeasibleTargetError(
                        "target " + item.label + " conflicts with limit " + cn.label, active);
            }
    }
    throw InfeasibleTargetError("plausibility limits kept binding after repeated pinning",
                                active);
}

// ------------------------------------------------------------ verify stealth

struct StealthReport {
    double r_norm_before = 0.0;
    double r_norm_after = 0.0;
    double rc_norm_before = 0.0;
    double rc_norm_after = 0.0;
    DetectionVerdict verdict_before;
    DetectionVerdict verdict_after;
    bool residual_preserved = false;  // |after - before| within 1e-6
};

// Runs the estimator on the clean and falsified measurements and compares
// the residual norms the detector sees.
inline StealthReport verify_stealth(const MeasurementVector& z, const AttackVector& attack,
                                    const Model& m, const DetectionConfig& det = {},
                                    SeMode mode = SeMode::Coupled,
                                    const EstimatorConfig& cfg = {}) {
    StealthReport rep;
    const auto before = estimate_iegs(z, m, mode, cfg);
    MeasurementVector bad = z;
    bad.values += attack.delta_z;
    const auto after = estimate_iegs(bad, m, mode, cfg);
    rep.r_norm_before = before.r_norm;
    rep.r_norm_after = after.r_norm;
    rep.rc_norm_before = before.coupling_residual.norm();
    rep.rc_norm_after = after.coupling_residual.norm();
    rep.verdict_before = detect_bad_data(z, before, det);
    rep.verdict_after = detect_bad_data(bad, after, det);
    rep.residual_preserved = std::abs(rep.r_norm_after - rep.r_norm_before) <= 1e-6;
    return rep;
}

// ------------------------------------------------------------- bias analysis

struct BiasReport {
    Eigen::VectorXd xi;
    double r_norm = 0.0;             // operator residual norm
    double exact = 0.0;              // exact attacked residual under the bias
    double bound = 0.0;              // first-order upper bound
    double jacobian_gap_norm = 0.0;  // spectral norm of J1 - J2
    bool xi_preserves_coupling = false;     // bias leaves coupled injections exact
    bool shift_preserves_coupling = false;  // attack leaves coupled injections alone
};

namespace detail {

// Largest singular value by power iteration on M^T M, to 1e-8.
inline double spectral_norm_power_iteration(const Eigen::MatrixXd& M, double tol = 1e-8,
                                            int max_iter = 10000) {
    if (M.size() == 0) return 0.0;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(M.cols());
    for (int i = 0; i < v.size(); ++i) v[i] += 1e-3 * (i + 1);  // break symmetry
    v.normalize();
    double sigma = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd w = M.transpose() * (M * v);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        w /= norm;
        const double next = std::sqrt(norm);
        if (std::abs(next - sigma) <= tol * std::max(1.0, next)) return next;
        sigma = next;
        v = w;
    }
    return sigma;
}

}  // namespace detail

// Residual impact of an intruder-side state bias xi: the exact expansion,
// its affine upper bound through the Jacobian gap between the shifted and
// unshifted linearizations, and whether bias/shift leave the coupled
// injections untouched (checked on the structural support of the coupled
// injections).
inline BiasReport bias_analysis(const MeasurementVector& z, const StateVector& x_hat,
                                const Eigen::VectorXd& xi, const Eigen::VectorXd& delta_x,
                                const Model& m) {
    StateVector x_shift = x_hat, x_bias = x_hat, x_both = x_hat;
    x_shift.x += delta_x;
    x_bias.x += xi;
    x_both.x += delta_x + xi;

    const Eigen::VectorXd h0 = h_full(x_hat, m);
    const Eigen::VectorXd r = z.values - h0;
    const Eigen::VectorXd exact_vec =
        r + (h_full(x_both, m) - h_full(x_shift, m)) - (h_full(x_bias, m) - h0);

    const Eigen::MatrixXd j1 = jacobian_h(x_shift, m);
    const Eigen::MatrixXd j2 = jacobian_h(x_hat, m);

    BiasReport rep;
    rep.xi = xi;
    rep.r_norm = r.norm();
    rep.exact = exact_vec.norm();
    rep.jacobian_gap_norm = detail::spectral_norm_power_iteration(j1 - j2);
    rep.bound = rep.r_norm + rep.jacobian_gap_norm * xi.norm();

    const auto selectors = coupling_state_selectors(m);
    auto untouched = [&](const Eigen::VectorXd& vec) {
        for (int i : selectors.power_states)
            if (vec[i] != 0.0) return false;
        for (int i : selectors.gas_states)
            if (vec[i] != 0.0) return false;
        return true;
    };
    rep.xi_preserves_coupling = untouched(xi);
    rep.shift_preserves_coupling = untouched(delta_x);
    return rep;
}

}  // namespace iegs
