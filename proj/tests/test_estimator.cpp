#include <gtest/gtest.h>

#include <cmath>

#include "iegs/estimation.hpp"
#include "iegs/model_io.hpp"
#include "iegs/scenario.hpp"
#include "support/toys.hpp"

using namespace iegs;

namespace {

Model fixture_9_7() {
    return load_model_file(std::string(IEGS_DATA_DIR) + "/iegs-9-7.json");
}

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

MeasurementVector noiseless_9_7(const Model& m, StateVector* truth = nullptr) {
    const auto flow = solve_energy_flow(m, dispatch_9_7());
    if (truth) *truth = flow.state;
    NoiseModel noise;  // Mode::None
    return sample_measurements(flow.state, m, noise);
}

MeasurementVector noisy_9_7(const Model& m, NoiseModel::Mode mode, std::uint64_t seed,
                            StateVector* truth = nullptr) {
    const auto flow = solve_energy_flow(m, dispatch_9_7());
    if (truth) *truth = flow.state;
    NoiseModel noise;
    noise.mode = mode;
    noise.seed = seed;
    return sample_measurements(flow.state, m, noise);
}

double max_abs_state_error(const EstimationResult& r, const StateVector& truth) {
    double worst = 0.0;
    for (int i : r.free_states) worst = std::max(worst, std::abs(r.state.x[i] - truth.x[i]));
    return worst;
}

// Gas toy with deliberately tight pressure boxes so an exhaustive grid over
// the full declared state box is affordable at 1e-3 resolution.
Model tight_gas_toy() {
    nlohmann::json doc = {
        {"gas",
         {{"nodes", {{{"id", "n1"}, {"pi_min", 4.98}, {"pi_max", 5.02}},
                     {{"id", "n2"}, {"pi_min", 3.98}, {"pi_max", 4.02}},
                     {{"id", "n3"}, {"pi_min", 2.98}, {"pi_max", 3.02}}}},
          {"pipelines", {{{"id", "p1"}, {"from", "n1"}, {"to", "n2"}, {"w", 1.0}},
                         {{"id", "p2"}, {"from", "n2"}, {"to", "n3"}, {"w", 1.0}}}},
          {"wells", {{{"id", "GW1"}, {"node", "n1"}, {"g_max", 10.0}}}},
          {"loads", {{{"id", "GL1"}, {"node", "n3"}, {"demand", 1.0}}}}}},
        {"measurement_plan", {{"preset", "full"}, {"std", 0.02}}},
    };
    return load_model_from_json(doc);
}

}  // namespace

TEST(EstimatePower, RecoversTrueStateFromNoiselessData) {
    const Model m = fixture_9_7();
    StateVector truth;
    const auto z = noiseless_9_7(m, &truth);
    const auto r = estimate_power(z, m);
    ASSERT_TRUE(r.converged);
    EXPECT_LT(max_abs_state_error(r, truth), 1e-6);
    EXPECT_LT(r.objective, 1e-12);
}

TEST(EstimatePower, FlatMeasurementsGiveFlatState) {
    const Model m = iegs::testing::two_bus_model();
    StateVector flat(m.layout());
    flat.v(0) = flat.v(1) = 1.0;
    NoiseModel none;
    const auto z = sample_measurements(flat, m, none);
    const auto r = estimate_power(z, m);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.state.v(0), 1.0, 1e-9);
    EXPECT_NEAR(r.state.v(1), 1.0, 1e-9);
    EXPECT_NEAR(r.state.theta(1), 0.0, 1e-9);
    EXPECT_LT(r.objective, 1e-16);
}

TEST(EstimatePower, GrossCorruptionRaisesObjective) {
    const Model m = fixture_9_7();
    auto z = noisy_9_7(m, NoiseModel::Mode::PresetLow, 42);
    const auto clean = estimate_power(z, m);
    MeasurementVector bad = z;
    bad.values[0] += 10.0 * std::sqrt(bad.variance[0]);
    const auto corrupted = estimate_power(bad, m);
    EXPECT_GT(corrupted.objective, clean.objective);
}

TEST(EstimatePower, StrippedPlanIsUnobservable) {
    nlohmann::json doc = model_to_json(iegs::testing::two_bus_model());
    doc["measurement_plan"] = nlohmann::json::array(
        {{{"kind", "v_mag"}, {"element", "b1"}, {"std", 0.01}},
         {{"kind", "v_mag"}, {"element", "b2"}, {"std", 0.01}}});
    const Model m = load_model_from_json(doc);
    StateVector flat(m.layout());
    flat.v(0) = flat.v(1) = 1.0;
    NoiseModel none;
    const auto z = sample_measurements(flat, m, none);
    EXPECT_THROW(estimate_power(z, m), UnobservableError);
}

TEST(EstimateGas, RecoversTrueStateFromNoiselessData) {
    const Model m = fixture_9_7();
    StateVector truth;
    const auto z = noiseless_9_7(m, &truth);
    const auto r = estimate_gas(z, m);
    ASSERT_TRUE(r.converged);
    EXPECT_LT(max_abs_state_error(r, truth), 1e-6);
}

TEST(EstimateGas, UniformPressureZeroFlowSystemRecoveredExactly) {
    // compressor-only gas side: no Weymouth term, so the uniform-pressure
    // zero-flow state is estimable without touching the singular region
    const Model m = iegs::testing::coupled_toy_model();
    StateVector s(m.layout());
    s.v(0) = s.v(1) = 1.0;
    s.pi(0) = s.pi(1) = 50.0;
    s.c(0) = 0.0;
    NoiseModel none;
    const auto z = sample_measurements(s, m, none);
    const auto r = estimate_gas(z, m);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.state.pi(0), 50.0, 1e-9);
    EXPECT_NEAR(r.state.pi(1), 50.0, 1e-9);
    EXPECT_NEAR(r.state.c(0), 0.0, 1e-9);
    EXPECT_LT(r.objective, 1e-16);
}

TEST(EstimateGas, MatchesBruteForceGridSearch) {
    const Model m = tight_gas_toy();
    StateVector truth(m.layout());
    truth.pi(0) = 5.0;
    truth.pi(1) = 4.0;
    truth.pi(2) = 3.0;
    NoiseModel noise;
    noise.mode = NoiseModel::Mode::Scalar;
    noise.sigma = 5e-3;
    noise.seed = 77;
    const auto z = sample_measurements(truth, m, noise);
    const auto r = estimate_gas(z, m);
    ASSERT_TRUE(r.converged);

    // exhaustive search over the full declared box at 1e-3 resolution
    const double res = 1e-3;
    Eigen::Vector3d best;
    double best_obj = 1e300;
    StateVector probe(m.layout());
    std::vector<int> rows;
    for (int k = 0; k < m.plan.size(); ++k)
        if (!is_power_kind(m.plan.entries[k].kind)) rows.push_back(k);
    for (double a = m.gas.nodes[0].pi_min; a <= m.gas.nodes[0].pi_max + 1e-12; a += res)
        for (double b = m.gas.nodes[1].pi_min; b <= m.gas.nodes[1].pi_max + 1e-12; b += res)
            for (double c = m.gas.nodes[2].pi_min; c <= m.gas.nodes[2].pi_max + 1e-12;
                 c += res) {
                probe.pi(0) = a;
                probe.pi(1) = b;
                probe.pi(2) = c;
                const Eigen::VectorXd h = h_full(probe, m);
                double obj = 0.0;
                for (int k : rows) {
                    const double e = z.values[k] - h[k];
                    obj += e * e / z.variance[k];
                }
                if (obj < best_obj) {
                    best_obj = obj;
                    best << a, b, c;
                }
            }

    for (int n = 0; n < 3; ++n) {
        EXPECT_GT(best[n], m.gas.nodes[n].pi_min + res);  // interior minimizer
        EXPECT_LT(best[n], m.gas.nodes[n].pi_max - res);
        EXPECT_NEAR(r.state.pi(n), best[n], res);
    }
}

TEST(EstimateIegs, NoiselessRecoveryWithZeroCouplingResidual) {
    const Model m = fixture_9_7();
    StateVector truth;
    const auto z = noiseless_9_7(m, &truth);
    const auto r = estimate_iegs(z, m);
    ASSERT_TRUE(r.converged);
    EXPECT_LT(max_abs_state_error(r, truth), 1e-6);
    EXPECT_LT(r.coupling_residual.norm(), 1e-8);
}

TEST(EstimateIegs, CoupledModeEnforcesConsistencyUnconstrainedDoesNot) {
    const Model m = fixture_9_7();
    for (const auto mode : {NoiseModel::Mode::PresetLow, NoiseModel::Mode::PresetHigh}) {
        const auto z = noisy_9_7(m, mode, 2024);
        const auto pse = estimate_iegs(z, m, SeMode::Coupled);
        const auto ose = estimate_iegs(z, m, SeMode::Unconstrained);
        ASSERT_TRUE(pse.converged);
        ASSERT_TRUE(ose.converged);
        EXPECT_LE(pse.coupling_residual.norm(), 1e-8);
        EXPECT_GT(ose.coupling_residual.norm(), 1e-5);
    }
}

TEST(EstimateIegs, EmptyCouplingMatchesIndependentSubsystemRuns) {
    nlohmann::json doc = model_to_json(iegs::testing::coupled_toy_model());
    doc["power"]["generators"].push_back(
        {{"id", "G2"}, {"bus", "b2"}, {"kind", "coal-fired"}});  // spoils condition A.i
    const Model m = load_model_from_json(doc);
    ASSERT_TRUE(coupling_pairs(m).empty());
    StateVector s(m.layout());
    s.v(0) = 1.0;
    s.v(1) = 0.99;
    s.theta(1) = -0.03;
    s.pi(0) = 50.0;
    s.pi(1) = 55.0;
    s.c(0) = 0.4;
    NoiseModel noise;
    noise.mode = NoiseModel::Mode::Scalar;
    noise.sigma = 0.01;
    noise.seed = 5;
    const auto z = sample_measurements(s, m, noise);
    const auto full = estimate_iegs(z, m);
    const auto p = estimate_power(z, m);
    const auto g = estimate_gas(z, m);
    ASSERT_TRUE(full.converged && p.converged && g.converged);
    for (int i : p.free_states) EXPECT_NEAR(full.state.x[i], p.state.x[i], 1e-10);
    for (int i : g.free_states) EXPECT_NEAR(full.state.x[i], g.state.x[i], 1e-10);
}

TEST(EstimateIegs, ReEstimatingOwnPredictionIsIdempotent) {
    const Model m = fixture_9_7();
    const auto z = noisy_9_7(m, NoiseModel::Mode::PresetLow, 314);
    const auto first = estimate_iegs(z, m);
    ASSERT_TRUE(first.converged);
    MeasurementVector z2;
    z2.values = h_full(first.state, m);
    z2.variance = z.variance;
    const auto second = estimate_iegs(z2, m);
    ASSERT_TRUE(second.converged);
    EXPECT_LT(second.objective, 1e-8);
    for (int i : second.free_states)
        EXPECT_NEAR(second.state.x[i], first.state.x[i], 1e-8);
}

TEST(DetectBadData, MonotoneUnderGrowingBias) {
    const Model m = fixture_9_7();
    const auto z = noisy_9_7(m, NoiseModel::Mode::PresetLow, 99);
    double previous = -1.0;
    for (const double scale : {0.0, 5.0, 10.0, 50.0}) {
        MeasurementVector biased = z;
        biased.values[3] += scale * std::sqrt(biased.variance[3]);
        const auto r = estimate_iegs(biased, m);
        ASSERT_TRUE(r.converged);
        EXPECT_GE(r.r_norm, previous - 1e-12);
        previous = r.r_norm;
    }
}

TEST(DetectBadData, NoiselessMeasurementsPassForAnyReasonableThreshold) {
    const Model m = fixture_9_7();
    const auto z = noiseless_9_7(m);
    const auto r = estimate_iegs(z, m);
    ASSERT_TRUE(r.converged);
    for (const double tau : {1e-6, 1.0, 100.0}) {
        DetectionConfig cfg;
        cfg.tau = tau;
        const auto v = detect_bad_data(z, r, cfg);
        EXPECT_FALSE(v.global_bad_data) << "tau = " << tau;
        EXPECT_FALSE(v.coupling_inconsistency);
    }
}

TEST(DetectBadData, LargeSpikeTripsChiSquareDefault) {
    const Model m = fixture_9_7();
    auto z = noisy_9_7(m, NoiseModel::Mode::PresetLow, 4242);
    const auto clean = estimate_iegs(z, m);
    const auto clean_verdict = detect_bad_data(z, clean, {});
    EXPECT_FALSE(clean_verdict.global_bad_data);
    z.values[10] += 50.0 * std::sqrt(z.variance[10]);
    const auto r = estimate_iegs(z, m);
    ASSERT_TRUE(r.converged);
    const auto v = detect_bad_data(z, r, {});
    EXPECT_TRUE(v.global_bad_data);
}

TEST(DetectBadData, UnconstrainedEstimateExposesCouplingInconsistency) {
    const Model m = fixture_9_7();
    const auto z = noisy_9_7(m, NoiseModel::Mode::PresetHigh, 11);
    const auto ose = estimate_iegs(z, m, SeMode::Unconstrained);
    const auto v = detect_bad_data(z, ose, {});
    EXPECT_TRUE(v.coupling_inconsistency);
    const auto pse = estimate_iegs(z, m, SeMode::Coupled);
    const auto vp = detect_bad_data(z, pse, {});
    EXPECT_FALSE(vp.coupling_inconsistency);
}
