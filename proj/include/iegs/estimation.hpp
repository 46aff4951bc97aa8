#pragma once

// Weighted least-squares state estimation: power-only, gas-only, and the
// coupled formulation with the gas-fired/P2G consistency rows enforced as
// equality constraints. One damped Gauss-Newton core serves all variants;
// the constrained variant solves a KKT system per iteration with Levenberg
// regularization on the Hessian block.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "iegs/measurement.hpp"
#include "iegs/model.hpp"

namespace iegs {

class UnobservableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class KktSingularError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EstimatorConfig {
    int max_iterations = 50;
    double step_tol = 1e-8;        // Gauss-Newton convergence on the step norm
    double lm_init = 1e-6;         // Levenberg parameter; x10 on rejected steps
    double feas_tol = 1e-8;        // required constraint norm at convergence
    double singularity_floor = 1e-6;
};

struct IterationRecord {
    int iter = 0;
    double objective = 0.0;
    double step_norm = 0.0;
    double lambda = 0.0;
    double constraint_norm = 0.0;
};

struct EstimationResult {
    StateVector state;                   // x-hat over the full layout
    double objective = 0.0;              // weighted sum of squared residuals
    Eigen::VectorXd residual;            // z - h(x-hat) over `rows`
    Eigen::VectorXd coupling_residual;   // per qualified pair (empty for subsystem SE)
    Eigen::VectorXd multipliers;         // per constraint row
    std::vector<int> rows;               // plan rows the estimate used
    std::vector<int> free_states;        // state indices that were estimated
    int iterations = 0;
    bool converged = false;
    double r_norm = 0.0;                 // plain l2 norm of `residual`
    double weighted_r_norm = 0.0;
    std::vector<IterationRecord> trace;
};

enum class SeMode { Coupled, Unconstrained };  // P-SE vs O-SE

// ------------------------------------------------------------------ start

// Flat start: v = 1, theta = 0, c = 0, pi at the midpoint of each node's
// bounds. When midpoints leave a pipeline without a usable pressure gap, the
// gas side is re-seeded by a ramp that walks the gas graph and steps the
// pressure down across each pipeline in its declared orientation.
inline StateVector initial_state(const Model& m, double floor = 1e-6) {
    StateVector s(m.layout());
    for (int b = 0; b < static_cast<int>(m.power.buses.size()); ++b) s.v(b) = 1.0;
    const int nn = static_cast<int>(m.gas.nodes.size());
    for (int i = 0; i < nn; ++i)
        s.pi(i) = 0.5 * (m.gas.nodes[i].pi_min + m.gas.nodes[i].pi_max);
    bool degenerate = false;
    for (const auto& p : m.gas.pipelines) {
        const double d = s.pi(p.from) * s.pi(p.from) - s.pi(p.to) * s.pi(p.to);
        if (d < floor) degenerate = true;
    }
    if (degenerate && nn > 0) {
        std::vector<int> depth(nn, -1);
        std::vector<int> queue{0};
        depth[0] = 0;
        for (size_t q = 0; q < queue.size(); ++q) {
            const int u = queue[q];
            auto visit = [&](int v) {
                if (depth[v] < 0) {
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                }
            };
            for (const auto& e : m.node_pipes[u])
                visit(e.at_from ? m.gas.pipelines[e.pipe].to : m.gas.pipelines[e.pipe].from);
            for (const auto& e : m.node_comps[u])
                visit(e.at_from ? m.gas.compressors[e.comp].to : m.gas.compressors[e.comp].from);
        }
        for (int i = 0; i < nn; ++i) {
            const double mid = 0.5 * (m.gas.nodes[i].pi_min + m.gas.nodes[i].pi_max);
            s.pi(i) = mid;
        }
        // walk pipelines in BFS order and force a downhill gap
        for (size_t q = 0; q < queue.size(); ++q) {
            const int u = queue[q];
            for (const auto& e : m.node_pipes[u]) {
                const auto& p = m.gas.pipelines[e.pipe];
                if (e.at_from && depth[p.to] > depth[u]) s.pi(p.to) = s.pi(u) * 0.995;
                if (!e.at_from && depth[p.from] > depth[u]) s.pi(p.from) = s.pi(u) / 0.995;
            }
            for (const auto& e : m.node_comps[u]) {
                const auto& c = m.gas.compressors[e.comp];
                if (e.at_from && depth[c.to] > depth[u]) s.pi(c.to) = s.pi(u);
                if (!e.at_from && depth[c.from] > depth[u]) s.pi(c.from) = s.pi(u);
            }
        }
    }
    return s;
}

// ------------------------------------------------------------------ core

namespace detail {

// One damped KKT step shared by the estimator and the attack synthesizer:
//   [H + lambda I, C^T; C, 0] [dx; nu] = [g; -c].
// Empty solution signals a singular system at this damping level.
inline std::optional<Eigen::VectorXd> kkt_step(const Eigen::MatrixXd& H,
                                               const Eigen::MatrixXd& C,
                                               const Eigen::VectorXd& g,
                                               const Eigen::VectorXd& c, double lambda) {
    const int n = static_cast<int>(H.rows());
    const int k = static_cast<int>(C.rows());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = H + lambda * Eigen::MatrixXd::Identity(n, n);
    if (k > 0) {
        kkt.topRightCorner(n, k) = C.transpose();
        kkt.bottomLeftCorner(k, n) = C;
    }
    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = g;
    if (k > 0) rhs.tail(k) = -c;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) return std::nullopt;
    return lu.solve(rhs);
}

struct WlsSetup {
    std::vector<int> rows;         // plan rows entering the objective
    std::vector<int> free_idx;     // state indices being estimated
    bool with_coupling = false;    // enforce the consistency rows
};

inline EstimationResult solve_wls(const Model& m, const Eigen::VectorXd& values,
                                  const Eigen::VectorXd& variance, const WlsSetup& setup,
                                  const EstimatorConfig& cfg, const StateVector& x0) {
    const int n_rows = static_cast<int>(setup.rows.size());
    const int n_free = static_cast<int>(setup.free_idx.size());
    const JacobianOptions jopt{cfg.singularity_floor};

    Eigen::VectorXd w(n_rows);  // 1/sigma per row
    for (int k = 0; k < n_rows; ++k) {
        const double var = variance[setup.rows[k]];
        if (!(var > 0)) throw UnobservableError("measurement variance must be positive");
        w[k] = 1.0 / std::sqrt(var);
    }

    EstimationResult out;
    out.rows = setup.rows;
    out.free_states = setup.free_idx;
    out.state = x0;

    const int n_cons = setup.with_coupling
                           ? static_cast<int>(m.coupling.gas_fired.size() +
                                              m.coupling.p2g_pairs.size())
                           : 0;

    auto eval_residual = [&](const StateVector& s, Eigen::VectorXd& r) {
        const Eigen::VectorXd h = h_full(s, m);
        r.resize(n_rows);
        for (int k = 0; k < n_rows; ++k) r[k] = values[setup.rows[k]] - h[setup.rows[k]];
    };
    auto eval_constraint = [&](const StateVector& s, Eigen::VectorXd& c) {
        if (n_cons == 0) { c.resize(0); return; }
        c = coupling_residual(s, m);
    };

    StateVector x = x0;
    Eigen::VectorXd r, c;
    eval_residual(x, r);
    eval_constraint(x, c);
    double obj = (w.asDiagonal() * r).squaredNorm();
    // l1 exact-penalty merit; mu stays above the multiplier scale so walking
    // onto the constraint manifold is always profitable
    double mu = 10.0;
    auto merit = [&](double o, const Eigen::VectorXd& cc) {
        return o + mu * cc.lpNorm<1>();
    };

    double lambda = cfg.lm_init;
    Eigen::VectorXd multipliers = Eigen::VectorXd::Zero(n_cons);
    bool rank_checked = false;
    int iter = 0;
    bool converged = false;

    for (; iter < cfg.max_iterations; ++iter) {
        Eigen::MatrixXd J_full = jacobian_h(x, m, jopt);
        Eigen::MatrixXd J(n_rows, n_free);
        for (int k = 0; k < n_rows; ++k)
            for (int j = 0; j < n_free; ++j) J(k, j) = J_full(setup.rows[k], setup.free_idx[j]);
        for (int k = 0; k < n_rows; ++k) J.row(k) *= w[k];

        if (!rank_checked) {
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
            Eigen::MatrixXd stacked;
            if (n_cons > 0) {
                Eigen::MatrixXd C_full = jacobian_coupling(x, m, jopt);
                stacked.resize(n_rows + n_cons, n_free);
                stacked.topRows(n_rows) = J;
                for (int k = 0; k < n_cons; ++k)
                    for (int j = 0; j < n_free; ++j)
                        stacked(n_rows + k, j) = C_full(k, setup.free_idx[j]);
                qr.compute(stacked);
            }
            if (qr.rank() < n_free)
                throw UnobservableError(
                    "system unobservable under this plan: Jacobian column rank " +
                    std::to_string(qr.rank()) + " < " + std::to_string(n_free));
            rank_checked = true;
        }

        Eigen::MatrixXd C(n_cons, n_free);
        if (n_cons > 0) {
            Eigen::MatrixXd C_full = jacobian_coupling(x, m, jopt);
            for (int k = 0; k < n_cons; ++k)
                for (int j = 0; j < n_free; ++j) C(k, j) = C_full(k, setup.free_idx[j]);
        }

        const Eigen::VectorXd rw = w.asDiagonal() * r;
        const Eigen::MatrixXd H = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * rw;

        bool accepted = false;
        bool tiny_step = false;
        double step_norm = 0.0;
        for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
            const auto step = kkt_step(H, C, g, c, lambda);
            if (!step) {
                if (lambda > 1e12) throw KktSingularError("KKT system singular");
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd& sol = *step;
            StateVector x_trial = x;
            for (int j = 0; j < n_free; ++j) x_trial.x[setup.free_idx[j]] += sol[j];
            Eigen::VectorXd r_trial, c_trial;
            try {
                eval_residual(x_trial, r_trial);
                eval_constraint(x_trial, c_trial);
                // probe the Jacobian domain too, so the next iteration is safe
                (void)jacobian_h(x_trial, m, jopt);
            } catch (const std::runtime_error&) {
                lambda *= 10.0;
                continue;
            }
            if (n_cons > 0) {
                const double nu_scale = sol.tail(n_cons).lpNorm<Eigen::Infinity>();
                if (mu < 2.0 * nu_scale) mu = 2.0 * nu_scale + 1.0;
            }
            const double obj_trial = (w.asDiagonal() * r_trial).squaredNorm();
            step_norm = sol.head(n_free).norm();
            // a proposed step below tolerance at an undamped model means the
            // iterate is stationary; take it and let the feasibility polish
            // finish the job (a damped-to-death step does not count)
            tiny_step = step_norm < cfg.step_tol && lambda <= cfg.lm_init * 100.0;
            if (tiny_step ||
                merit(obj_trial, c_trial) <= merit(obj, c) + 1e-12 * (1.0 + merit(obj, c))) {
                x = x_trial;
                r = r_trial;
                c = c_trial;
                obj = obj_trial;
                if (n_cons > 0) multipliers = sol.tail(n_cons);
                lambda = std::max(cfg.lm_init, lambda / 10.0);
                accepted = true;
            } else {
                lambda *= 10.0;
            }
        }

        out.trace.push_back({iter + 1, obj, step_norm, lambda, c.norm()});
        if (!accepted) break;
        if (tiny_step || (step_norm < cfg.step_tol && (n_cons == 0 || c.norm() <= cfg.feas_tol))) {
            converged = true;
            break;
        }
    }

    // feasibility polish: a few least-norm corrections onto the constraint
    // manifold; second-order effect on the objective
    if (n_cons > 0) {
        for (int k = 0; k < 5 && c.norm() > 1e-12; ++k) {
            Eigen::MatrixXd C_full = jacobian_coupling(x, m, jopt);
            Eigen::MatrixXd C(n_cons, n_free);
            for (int a = 0; a < n_cons; ++a)
                for (int j = 0; j < n_free; ++j) C(a, j) = C_full(a, setup.free_idx[j]);
            const Eigen::MatrixXd gram = C * C.transpose();
            Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
            if (!lu.isInvertible()) break;
            const Eigen::VectorXd dx = -C.transpose() * lu.solve(c);
            StateVector x_trial = x;
            for (int j = 0; j < n_free; ++j) x_trial.x[setup.free_idx[j]] += dx[j];
            try {
                Eigen::VectorXd c_trial;
                eval_constraint(x_trial, c_trial);
                if (c_trial.norm() >= c.norm()) break;
                x = x_trial;
                c = c_trial;
                eval_residual(x, r);
                obj = (w.asDiagonal() * r).squaredNorm();
            } catch (const std::runtime_error&) {
                break;
            }
        }
        converged = converged && c.norm() <= cfg.feas_tol;
    }

    out.state = x;
    out.objective = obj;
    out.residual = r;
    out.coupling_residual = Eigen::VectorXd(0);  // filled by the coupled frontend
    out.multipliers = multipliers;
    out.iterations = iter + 1;
    out.converged = converged;
    out.r_norm = r.norm();
    out.weighted_r_norm = (w.asDiagonal() * r).norm();
    return out;
}

// Free-state index sets with reference handling: PMU angle measurements
// anchor theta when present in the used rows; otherwise the designated
// reference bus angle is pinned to its current value and removed from the
// unknowns.
inline std::vector<int> power_free_indices(const Model& m, const std::vector<int>& rows) {
    const StateLayout L = m.layout();
    bool pmu_row = false;
    for (int k : rows)
        if (m.plan.entries[k].kind == MeasurementKind::ThetaPmu) pmu_row = true;
    std::vector<int> idx;
    for (int b = 0; b < L.n_bus; ++b) idx.push_back(L.v(b));
    for (int b = 0; b < L.n_bus; ++b) {
        if (!pmu_row && m.reference_bus && b == *m.reference_bus) continue;
        idx.push_back(L.theta(b));
    }
    if (!pmu_row && !m.reference_bus && L.n_bus > 0)
        throw UnobservableError("no PMU rows in the plan and no reference bus designated");
    return idx;
}

inline std::vector<int> gas_free_indices(const Model& m) {
    const StateLayout L = m.layout();
    std::vector<int> idx;
    for (int c = 0; c < L.n_comp; ++c) idx.push_back(L.c(c));
    for (int n = 0; n < L.n_node; ++n) idx.push_back(L.pi(n));
    return idx;
}

inline std::vector<int> rows_of(const Model& m, bool power, bool gas) {
    std::vector<int> rows;
    for (int k = 0; k < m.plan.size(); ++k) {
        const bool p = is_power_kind(m.plan.entries[k].kind);
        if ((p && power) || (!p && gas)) rows.push_back(k);
    }
    return rows;
}

}  // namespace detail

// ----------------------------------------------------------------- frontends

inline EstimationResult estimate_power(const MeasurementVector& z, const Model& m,
                                       const EstimatorConfig& cfg = {}) {
    detail::WlsSetup setup;
    setup.rows = detail::rows_of(m, true, false);
    setup.free_idx = detail::power_free_indices(m, setup.rows);
    setup.with_coupling = false;
    return detail::solve_wls(m, z.values, z.variance, setup, cfg,
                             initial_state(m, cfg.singularity_floor));
}

inline EstimationResult estimate_gas(const MeasurementVector& z, const Model& m,
                                     const EstimatorConfig& cfg = {}) {
    detail::WlsSetup setup;
    setup.rows = detail::rows_of(m, false, true);
    setup.free_idx = detail::gas_free_indices(m);
    setup.with_coupling = false;
    return detail::solve_wls(m, z.values, z.variance, setup, cfg,
                             initial_state(m, cfg.singularity_floor));
}

inline EstimationResult estimate_iegs(const MeasurementVector& z, const Model& m,
                                      SeMode mode = SeMode::Coupled,
                                      const EstimatorConfig& cfg = {}) {
    detail::WlsSetup setup;
    setup.rows = detail::rows_of(m, true, true);
    auto p_idx = detail::power_free_indices(m, setup.rows);
    auto g_idx = detail::gas_free_indices(m);
    setup.free_idx = p_idx;
    setup.free_idx.insert(setup.free_idx.end(), g_idx.begin(), g_idx.end());
    setup.with_coupling = mode == SeMode::Coupled;
    EstimationResult res = detail::solve_wls(m, z.values, z.variance, setup, cfg,
                                             initial_state(m, cfg.singularity_floor));
    // (10b) is evaluated for both modes; the unconstrained mode simply did
    // not enforce it
    res.coupling_residual = coupling_residual(res.state, m);
    return res;
}

// ----------------------------------------------------------------- detection

struct DetectionConfig {
    std::optional<double> tau;  // absolute threshold on ||r||; chi-square default when unset
    double epsilon = 1e-5;      // coupling-consistency tolerance
    double quantile = 0.99;
};

struct DetectionVerdict {
    double r_norm = 0.0;
    double weighted_r_norm = 0.0;
    double rc_norm = 0.0;
    double tau = 0.0;
    double epsilon = 0.0;
    bool tau_is_weighted = false;  // true when tau came from the chi-square default
    bool global_bad_data = false;
    bool coupling_inconsistency = false;
};

// Two-tier test: the global residual against tau and the coupling residual
// against epsilon. With no explicit tau, the threshold is the chi-square
// quantile of the weighted residual with |z| - |x| + #constraints degrees of
// freedom.
inline DetectionVerdict detect_bad_data(const MeasurementVector& /*z*/,
                                        const EstimationResult& result,
                                        const DetectionConfig& cfg = {}) {
    DetectionVerdict v;
    v.r_norm = result.r_norm;
    v.weighted_r_norm = result.weighted_r_norm;
    v.rc_norm = result.coupling_residual.size() ? result.coupling_residual.norm() : 0.0;
    v.epsilon = cfg.epsilon;
    if (cfg.tau) {
        v.tau = *cfg.tau;
        v.global_bad_data = v.r_norm > v.tau;
    } else {
        const int dof = std::max(1, static_cast<int>(result.rows.size()) -
                                        static_cast<int>(result.free_states.size()) +
                                        static_cast<int>(result.multipliers.size()));
        boost::math::chi_squared dist(dof);
        v.tau = std::sqrt(boost::math::quantile(dist, cfg.quantile));
        v.tau_is_weighted = true;
        v.global_bad_data = v.weighted_r_norm > v.tau;
    }
    v.coupling_inconsistency = v.rc_norm > v.epsilon;
    return v;
}

}  // namespace iegs
