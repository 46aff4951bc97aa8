#include <gtest/gtest.h>

#include <cmath>

#include "iegs/model_io.hpp"
#include "iegs/scenario.hpp"
#include "support/toys.hpp"

using namespace iegs;

namespace {

DispatchSpec dispatch_9_7() {
    DispatchSpec d;
    d.slack_bus = "b1";
    d.slack_v = 1.04;
    d.slack_node = "n1";
    d.slack_pressure = 55.0;
    d.generators = {{"G2", 0.65, 0.0, 1.025}, {"G3", 0.10, 0.0, 1.025}};
    d.wells = {{"GW2", 1.35}};
    d.compressors = {{"c1", CompressorSetpoint::Mode::Ratio, 1.25},
                     {"c2", CompressorSetpoint::Mode::Flow, 0.39},
                     {"c3", CompressorSetpoint::Mode::Ratio, 1.10}};
    return d;
}

}  // namespace

TEST(SolveEnergyFlow, ZeroInjectionFixedPoint) {
    nlohmann::json doc = model_to_json(iegs::testing::coupled_toy_model());
    doc["power"]["loads"] = nlohmann::json::array();
    const Model m = load_model_from_json(doc);
    DispatchSpec d;
    d.slack_bus = "b1";
    d.slack_v = 1.0;
    d.slack_node = "n1";
    d.slack_pressure = 50.0;
    d.generators = {{"G1", 0.0, 0.0, std::nullopt}};
    const auto r = solve_energy_flow(m, d);
    EXPECT_TRUE(r.converged);
    for (int b = 0; b < 2; ++b) {
        EXPECT_NEAR(r.state.v(b), 1.0, 1e-12);
        EXPECT_NEAR(r.state.theta(b), 0.0, 1e-12);
    }
    EXPECT_NEAR(r.state.pi(0), 50.0, 1e-12);
    EXPECT_NEAR(r.state.pi(1), 50.0, 1e-12);
    EXPECT_NEAR(r.state.c(0), 0.0, 1e-12);
}

// Hand-solved oracle: single line with g = 0, b = B, slack at bus 1 held at
// 1.0 p.u., load (P_d, Q_d) at bus 2. Eliminating theta_2 from the two
// injection balances leaves a quadratic in u = v_2^2:
//   B^2 u^2 - (2 B Q_d + B^2) u + (P_d^2 + Q_d^2) = 0,
// and the operating point is the high-voltage root.
TEST(SolveEnergyFlow, MatchesHandSolvedTwoBusQuadratic) {
    const double B = -5.0, Pd = 0.4, Qd = 0.1;
    const Model m = iegs::testing::two_bus_model(0.0, B);
    DispatchSpec d;
    d.slack_bus = "b1";
    d.slack_v = 1.0;
    const auto r = solve_energy_flow(m, d);
    ASSERT_TRUE(r.converged);

    const double bb = 2.0 * B * Qd + B * B;
    const double disc = bb * bb - 4.0 * B * B * (Pd * Pd + Qd * Qd);
    ASSERT_GT(disc, 0.0);
    const double u = (bb + std::sqrt(disc)) / (2.0 * B * B);
    const double v2 = std::sqrt(u);
    const double theta2 = std::asin(Pd / (v2 * B));

    EXPECT_NEAR(r.state.v(1), v2, 1e-8);
    EXPECT_NEAR(r.state.theta(1), theta2, 1e-8);
}

TEST(SolveEnergyFlow, ShippedNineSevenDispatchBalances) {
    const Model m = load_model_file(std::string(IEGS_DATA_DIR) + "/iegs-9-7.json");
    const auto r = solve_energy_flow(m, dispatch_9_7());
    EXPECT_TRUE(r.converged);
    EXPECT_LT(r.mismatch_norm, 1e-8);
    EXPECT_TRUE(r.violations.empty());
    // coupled pairs balance side-by-side
    const auto terms = h_coupling(r.state, m);
    ASSERT_EQ(terms.size(), 2u);
    for (const auto& t : terms) EXPECT_NEAR(t.left, t.right, 1e-8);
    // and the power-side inference equals the dispatched outputs
    EXPECT_NEAR(terms[0].left / 1.2, 0.65, 1e-6);
    EXPECT_NEAR(terms[1].left / 1.5, 0.10, 1e-6);
}

TEST(SolveEnergyFlow, P2gFixtureSatisfiesCouplingIdentity) {
    const Model m = load_model_file(std::string(IEGS_DATA_DIR) + "/p2g-toy.json");
    DispatchSpec d;
    d.slack_bus = "b1";
    d.slack_v = 1.03;
    d.slack_node = "n1";
    d.slack_pressure = 52.0;
    d.p2g = {{"F1", 0.30}};
    const auto r = solve_energy_flow(m, d);
    ASSERT_TRUE(r.converged);
    const auto terms = h_coupling(r.state, m);
    ASSERT_EQ(terms.size(), 1u);
    EXPECT_NEAR(terms[0].left, terms[0].right, 1e-8);
    EXPECT_NEAR(terms[0].left, 1.2 * 0.30, 1e-8);  // chi * intake
}

TEST(SolveEnergyFlow, MeasurementFunctionsReproduceSolverFlows) {
    const Model m = load_model_file(std::string(IEGS_DATA_DIR) + "/iegs-9-7.json");
    const auto r = solve_energy_flow(m, dispatch_9_7());
    const Eigen::VectorXd h = h_full(r.state, m);
    for (int k = 0; k < m.plan.size(); ++k) {
        const auto& e = m.plan.entries[k];
        if (e.kind == MeasurementKind::GFlowPipe)
            EXPECT_NEAR(h[k], r.pipe_flows[e.element], 1e-8);
    }
}

TEST(SampleMeasurements, NoiselessModeReturnsExactValues) {
    const Model m = load_model_file(std::string(IEGS_DATA_DIR) + "/iegs-9-7.json");
    const auto r = solve_energy_flow(m, dispatch_9_7());
    NoiseModel noise;
    noise.mode = NoiseModel::Mode::None;
    noise.seed = 7;
    const auto z = sample_measurements(r.state, m, noise);
    const Eigen::VectorXd exact = h_full(r.state, m);
    EXPECT_NEAR((z.values - exact).lpNorm<Eigen::Infinity>(), 0.0, 0.0);
    for (int k = 0; k < m.plan.size(); ++k) EXPECT_GT(z.variance[k], 0.0);
}

TEST(SampleMeasurements, SameSeedSameVector) {
    const Model m = load_model_file(std::string(IEGS_DATA_DIR) + "/iegs-9-7.json");
    const auto r = solve_energy_flow(m, dispatch_9_7());
    NoiseModel noise;
    noise.mode = NoiseModel::Mode::PresetLow;
    noise.seed = 12345;
    const auto z1 = sample_measurements(r.state, m, noise);
    const auto z2 = sample_measurements(r.state, m, noise);
    EXPECT_TRUE(z1.values == z2.values);
    noise.seed = 12346;
    const auto z3 = sample_measurements(r.state, m, noise);
    EXPECT_FALSE(z1.values == z3.values);
}

TEST(SampleMeasurements, SampleVarianceTracksPreset) {
    const Model m = load_model_file(std::string(IEGS_DATA_DIR) + "/iegs-9-7.json");
    const auto r = solve_energy_flow(m, dispatch_9_7());
    const Eigen::VectorXd exact = h_full(r.state, m);
    NoiseModel noise;
    noise.mode = NoiseModel::Mode::PresetLow;
    const int samples = 10000;
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < samples; ++s) {
        noise.seed = 1000 + s;
        const auto z = sample_measurements(r.state, m, noise);
        const double e = z.values[0] - exact[0];
        sum += e;
        sumsq += e * e;
    }
    const double mean = sum / samples;
    const double var = sumsq / samples - mean * mean;
    EXPECT_NEAR(var, 2e-3, 0.05 * 2e-3);
}
