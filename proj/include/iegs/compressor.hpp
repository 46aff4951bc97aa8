#pragma once

// Detailed turbo/piston compressor physics resolved from estimated flows and
// pressures. The estimator never carries these quantities as unknowns: after
// the network-level estimate converges, each instrumented compressor's
// extended state is cascaded out of its (c, pi_from, pi_to) triple, and the
// physics equations are re-checked as residuals.

#include <cmath>
#include <string>
#include <vector>

#include "iegs/measurement.hpp"
#include "iegs/model.hpp"

namespace iegs {

class TurboInfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// f1(x; a) = a0 x^2 + a1 x + a2 with a = (quadratic, linear, constant)
inline double poly_f1(double x, const Eigen::Vector3d& a) {
    return a[0] * x * x + a[1] * x + a[2];
}

// f2(x, y; A) = [x^2 x 1] A [y^2 y 1]^T
inline double poly_f2(double x, double y, const Eigen::Matrix3d& A) {
    const Eigen::Vector3d vx(x * x, x, 1.0);
    const Eigen::Vector3d vy(y * y, y, 1.0);
    return vx.dot(A * vy);
}

struct ExtendedCompressorState {
    double rho = 0.0;      // suction gas density
    double u = 0.0;        // compressibility factor
    double v = 0.0;        // volumetric flow rate
    double h = 0.0;        // adiabatic enthalpy change
    double p_c = 0.0;      // input power
    double eta = 0.0;      // adiabatic efficiency
    double b = 0.0;        // energy consumption rate
    double n = 0.0;        // speed
    double p_c_max = 0.0;  // speed-dependent power ceiling
    double m = 0.0;        // shaft torque (piston only)

    bool power_limit_ok = true;     // p_c <= p_c_max
    bool enthalpy_range_ok = true;  // turbo envelope on h
    bool speed_range_ok = true;     // n within the limits
};

// Resolves the full chain for one compressor operating point. For a turbo
// unit the speed comes from the quadratic enthalpy map (smaller in-range
// root when two exist); a piston unit runs at fixed efficiency with speed
// tied to the volumetric flow.
inline ExtendedCompressorState solve_detailed_state(double c, double pi_from, double pi_to,
                                                    const DetailedCompressorParams& p) {
    if (!(pi_from > 0.0) || !(pi_to > 0.0))
        throw std::invalid_argument("detailed compressor model needs positive pressures");
    if (c < 0.0) throw std::invalid_argument("compressor flow must be nonnegative");

    ExtendedCompressorState s;
    s.u = 1.0 + 0.257 * (pi_from / p.pi_c) - 0.533 * (p.t_c / p.t) * (pi_from / p.pi_c);
    s.rho = pi_from / (p.r_s * p.t * s.u);
    s.v = c / s.rho;
    s.h = p.r_s * p.t * (p.kappa / (p.kappa - 1.0)) *
          (std::pow(pi_to / pi_from, (p.kappa - 1.0) / p.kappa) - 1.0) * s.u;

    if (p.kind == CompressorKind::Turbo) {
        // f2(v, n; A2) = h is quadratic in n for fixed v
        const Eigen::Vector3d vx(s.v * s.v, s.v, 1.0);
        const Eigen::Vector3d coef = p.A2.transpose() * vx;  // (n^2, n, 1) coefficients
        const double qa = coef[0], qb = coef[1], qc = coef[2] - s.h;
        double root = 0.0;
        bool found = false;
        const double span_tol = 1e-9 * std::max(1.0, std::abs(p.n_max));
        auto consider = [&](double candidate) {
            if (candidate < p.n_min - span_tol || candidate > p.n_max + span_tol) return;
            if (!found || candidate < root) root = candidate;
            found = true;
        };
        if (std::abs(qa) < 1e-14) {
            if (std::abs(qb) < 1e-14)
                throw TurboInfeasibleError("enthalpy map degenerate in speed");
            consider(-qc / qb);
        } else {
            const double disc = qb * qb - 4.0 * qa * qc;
            if (disc >= 0.0) {
                // cancellation-free form: q/qa and qc/q are the two roots
                const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
                consider(q / qa);
                if (q != 0.0) consider(qc / q);
            }
        }
        if (!found)
            throw TurboInfeasibleError(
                "no feasible speed solves the enthalpy map within the limits");
        // Newton polish against the map; the enthalpy magnitudes make raw
        // root formulas lose a few digits
        for (int polish = 0; polish < 3; ++polish) {
            const double f = qa * root * root + qb * root + qc;
            const double df = 2.0 * qa * root + qb;
            if (df == 0.0) break;
            root -= f / df;
        }
        s.n = root;
        s.eta = poly_f2(s.v, s.n, p.A3);
        s.enthalpy_range_ok =
            poly_f1(s.v, p.a2) <= s.h + 1e-9 && s.h <= poly_f1(s.v, p.a3) + 1e-9;
    } else {
        s.eta = p.eta_bar;
        s.n = s.v / p.v0;
        s.enthalpy_range_ok = true;
    }

    s.p_c = c * s.h / s.eta;
    s.b = poly_f1(s.p_c, p.a1);
    s.p_c_max = poly_f2(s.n, p.t_a, p.A1);
    if (p.kind == CompressorKind::Piston)
        s.m = (p.v0 * s.h / (2.0 * M_PI * s.eta)) * s.rho;

    s.power_limit_ok = s.p_c <= s.p_c_max + 1e-9;
    s.speed_range_ok = s.n >= p.n_min - 1e-9 && s.n <= p.n_max + 1e-9;
    return s;
}

// Extended states for every instrumented compressor at the estimated
// operating point; appended to estimation reports.
struct CompressorReportEntry {
    std::string compressor;
    CompressorKind kind = CompressorKind::Turbo;
    ExtendedCompressorState state;
};

inline std::vector<CompressorReportEntry> extended_compressor_states(const StateVector& x,
                                                                     const Model& m) {
    std::vector<CompressorReportEntry> out;
    for (int c = 0; c < static_cast<int>(m.gas.compressors.size()); ++c) {
        const auto& cp = m.gas.compressors[c];
        if (!cp.detailed) continue;
        CompressorReportEntry entry;
        entry.compressor = cp.id;
        entry.kind = cp.detailed->kind;
        entry.state = solve_detailed_state(std::max(x.c(c), 0.0), x.pi(cp.from),
                                           x.pi(cp.to), *cp.detailed);
        out.push_back(entry);
    }
    return out;
}

// Per-pair power-to-gas consistency residuals |g_j - chi_f * intake_i| at an
// estimated state. These are the P2G rows of the coupling residual vector.
inline Eigen::VectorXd p2g_residual(const StateVector& x, const Model& m) {
    const auto terms = h_coupling(x, m);
    const size_t n_gasfired = m.coupling.gas_fired.size();
    Eigen::VectorXd out(m.coupling.p2g_pairs.size());
    for (size_t i = 0; i < m.coupling.p2g_pairs.size(); ++i)
        out[i] = std::abs(terms[n_gasfired + i].left - terms[n_gasfired + i].right);
    return out;
}

}  // namespace iegs
