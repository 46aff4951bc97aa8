#include <gtest/gtest.h>

#include <random>

#include "iegs/local_attack.hpp"
#include "iegs/model_io.hpp"
#include "iegs/scenario.hpp"
#include "support/toys.hpp"

using namespace iegs;

namespace {

// Mirrors the canonical two-region sketch: tie line {i,j}, tie pipe {m,n},
// tie compressor {u,v}, gas-fired generator at bus k supplied by node o.
Model fig1_model() {
    nlohmann::json doc = {
        {"power",
         {{"buses", {{{"id", "i"}}, {{"id", "j"}}, {{"id", "k"}}}},
          {"lines",
           {{{"id", "t_ij"}, {"from", "i"}, {"to", "j"}, {"g", 1.0}, {"b", -8.0}},
            {{"id", "l_ik"}, {"from", "i"}, {"to", "k"}, {"g", 1.0}, {"b", -8.0}}}},
          {"generators",
           {{{"id", "Gk"}, {"bus", "k"}, {"kind", "gas-fired"}, {"gamma", 1.0},
             {"gas_node", "o"}}}},
          {"loads", {{{"id", "PLj"}, {"bus", "j"}, {"p", 0.4}, {"q", 0.1}}}},
          {"reference_bus", "j"}}},
        {"gas",
         {{"nodes",
           {{{"id", "m"}, {"pi_min", 40.0}, {"pi_max", 60.0}},
            {{"id", "n"}, {"pi_min", 40.0}, {"pi_max", 62.0}},
            {{"id", "o"}, {"pi_min", 40.0}, {"pi_max", 58.0}},
            {{"id", "u"}, {"pi_min", 40.0}, {"pi_max", 56.0}},
            {{"id", "v"}, {"pi_min", 40.0}, {"pi_max", 64.0}}}},
          {"pipelines",
           {{{"id", "t_mn"}, {"from", "n"}, {"to", "m"}, {"w", 0.01}},
            {{"id", "p_mo"}, {"from", "m"}, {"to", "o"}, {"w", 0.01}},
            {{"id", "p_ou"}, {"from", "o"}, {"to", "u"}, {"w", 0.01}}}},
          {"compressors",
           {{{"id", "t_uv"}, {"from", "u"}, {"to", "v"}, {"alpha", 1.4}}}},
          {"wells", {{{"id", "GWn"}, {"node", "n"}, {"g_max", 10.0}}}},
          {"loads", {{{"id", "GLv"}, {"node", "v"}, {"demand", 0.2}}}}}},
        {"measurement_plan", {{"preset", "full"}, {"std", 0.02}}},
    };
    return load_model_from_json(doc);
}

struct Fixture {
    Model model;
    StateVector truth;
    MeasurementVector z;
    EstimationResult estimate;
};

Fixture fixture_9_7(NoiseModel::Mode mode, std::uint64_t seed) {
    Fixture f{load_model_file(std::string(IEGS_DATA_DIR) + "/iegs-9-7.json"),
              StateVector{}, MeasurementVector{}, EstimationResult{}};
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
    f.truth = solve_energy_flow(f.model, d).state;
    NoiseModel noise;
    noise.mode = mode;
    noise.seed = seed;
    f.z = sample_measurements(f.truth, f.model, noise);
    f.estimate = estimate_iegs(f.z, f.model);
    EXPECT_TRUE(f.estimate.converged);
    return f;
}

RegionSpec mixed_region_9_7(const Model& m) {
    RegionSpec r;
    for (const char* b : {"b4", "b5", "b6", "b9"}) r.buses.push_back(m.bus_index(b));
    for (const char* n : {"n1", "n4", "n5"}) r.nodes.push_back(m.node_index(n));
    return r;
}

Eigen::VectorXd random_admissible_shift(const Model& m, const RegionPartition& part,
                                        std::mt19937_64& rng, double scale) {
    const auto allowed = admissible_local_states(m, part);
    std::normal_distribution<double> dist(0.0, scale);
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(m.layout().size());
    for (int i : allowed) dx[i] = dist(rng);
    return dx;
}

}  // namespace

TEST(PartitionModel, Fig1BoundaryKinds) {
    const Model m = fig1_model();
    RegionSpec region;
    region.buses = {m.bus_index("i"), m.bus_index("k")};
    region.nodes = {m.node_index("m"), m.node_index("o"), m.node_index("u")};
    const auto p = partition_model(m, region);

    EXPECT_EQ(p.boundary_tie_buses, std::vector<int>{m.bus_index("i")});
    EXPECT_EQ(p.boundary_gen_buses, std::vector<int>{m.bus_index("k")});
    const std::vector<int> tie_nodes{m.node_index("m"), m.node_index("u")};
    EXPECT_EQ(p.boundary_tie_nodes, tie_nodes);
    EXPECT_EQ(p.boundary_gen_nodes, std::vector<int>{m.node_index("o")});

    // tie flow meters sit in z_N, and the tie compressor's state in x_N
    for (int k : p.z_B) {
        const auto kind = m.plan.entries[k].kind;
        EXPECT_TRUE(kind == MeasurementKind::PInj || kind == MeasurementKind::QInj ||
                    kind == MeasurementKind::GInj);
    }
    const int tie_comp_state = m.layout().c(m.compressor_index("t_uv"));
    EXPECT_TRUE(std::find(p.x_N.begin(), p.x_N.end(), tie_comp_state) != p.x_N.end());
    for (int k = 0; k < m.plan.size(); ++k) {
        const auto& e = m.plan.entries[k];
        if (e.kind == MeasurementKind::PFlowFwd && element_id(m, e) == "t_ij")
            EXPECT_TRUE(std::find(p.z_N.begin(), p.z_N.end(), k) != p.z_N.end());
        if (e.kind == MeasurementKind::GFlowComp && element_id(m, e) == "t_uv")
            EXPECT_TRUE(std::find(p.z_N.begin(), p.z_N.end(), k) != p.z_N.end());
    }
}

TEST(PartitionModel, WholeSystemRegionHasOnlyCoupledBoundary) {
    const Model m = load_model_file(std::string(IEGS_DATA_DIR) + "/iegs-9-7.json");
    RegionSpec region;
    for (int b = 0; b < 9; ++b) region.buses.push_back(b);
    for (int n = 0; n < 7; ++n) region.nodes.push_back(n);
    const auto p = partition_model(m, region);
    EXPECT_TRUE(p.z_N.empty());
    EXPECT_TRUE(p.x_N.empty());
    EXPECT_TRUE(p.tie_lines.empty());
    const std::vector<int> buses{m.bus_index("b2"), m.bus_index("b3")};
    const std::vector<int> nodes{m.node_index("n2"), m.node_index("n3")};
    EXPECT_EQ(p.boundary_buses, buses);
    EXPECT_EQ(p.boundary_nodes, nodes);
}

TEST(PartitionModel, NoTiesNoGasFiredMeansEmptyBoundary) {
    nlohmann::json doc = model_to_json(iegs::testing::gas_path_model());
    doc["power"] = {{"buses", {{{"id", "b1"}}, {{"id", "b2"}}}},
                    {"lines", {{{"id", "l1"}, {"from", "b1"}, {"to", "b2"},
                                {"g", 1.0}, {"b", -4.0}}}},
                    {"reference_bus", "b1"}};
    doc["measurement_plan"] = {{"preset", "full"}, {"std", 0.02}};
    const Model m = load_model_from_json(doc);
    RegionSpec region;
    region.buses = {0, 1};
    region.nodes = {0, 1, 2};
    const auto p = partition_model(m, region);
    EXPECT_TRUE(p.boundary_buses.empty());
    EXPECT_TRUE(p.boundary_nodes.empty());
    EXPECT_TRUE(p.z_N.empty());
    EXPECT_TRUE(p.z_B.empty());
}

TEST(PartitionModel, IndexSetsPartitionExactly) {
    const auto f = fixture_9_7(NoiseModel::Mode::PresetLow, 50);
    const auto p = partition_model(f.model, mixed_region_9_7(f.model));
    EXPECT_EQ(p.z_A.size() + p.z_B.size() + p.z_N.size(),
              static_cast<size_t>(f.model.plan.size()));
    EXPECT_EQ(p.x_A.size() + p.x_B.size() + p.x_N.size(),
              static_cast<size_t>(f.model.layout().size()));
    std::vector<char> seen(f.model.plan.size(), 0);
    for (const auto* set : {&p.z_A, &p.z_B, &p.z_N})
        for (int k : *set) {
            EXPECT_FALSE(seen[k]);
            seen[k] = 1;
        }
}

TEST(ForgeLocal, ZeroShiftZeroAttack) {
    const auto f = fixture_9_7(NoiseModel::Mode::PresetLow, 51);
    const auto p = partition_model(f.model, mixed_region_9_7(f.model));
    const Eigen::VectorXd dx = Eigen::VectorXd::Zero(f.model.layout().size());
    const auto a = forge_local(f.estimate.state, dx, p, f.model);
    EXPECT_EQ(a.delta_z.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(ForgeLocal, ZeroFootprintOutsideTheRegion) {
    const auto f = fixture_9_7(NoiseModel::Mode::PresetLow, 52);
    const auto p = partition_model(f.model, mixed_region_9_7(f.model));
    std::mt19937_64 rng(3);
    const Eigen::VectorXd dx = random_admissible_shift(f.model, p, rng, 2e-3);
    ASSERT_GT(dx.norm(), 0.0);
    const auto a = forge_local(f.estimate.state, dx, p, f.model);
    for (int k : p.z_N) EXPECT_EQ(a.delta_z[k], 0.0);
    for (int i : p.x_B) EXPECT_EQ(a.delta_x[i], 0.0);
    for (int i : p.x_N) EXPECT_EQ(a.delta_x[i], 0.0);
    EXPECT_GT(a.delta_z.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(ForgeLocal, BoundaryShiftRejected) {
    const auto f = fixture_9_7(NoiseModel::Mode::PresetLow, 53);
    const auto p = partition_model(f.model, mixed_region_9_7(f.model));
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(f.model.layout().size());
    dx[f.model.layout().v(f.model.bus_index("b4"))] = 1e-3;  // boundary bus
    EXPECT_THROW(forge_local(f.estimate.state, dx, p, f.model), std::invalid_argument);
}

TEST(ForgeLocal, CoupledInjectionSupportRejected) {
    const auto f = fixture_9_7(NoiseModel::Mode::PresetLow, 54);
    RegionSpec whole;
    for (int b = 0; b < 9; ++b) whole.buses.push_back(b);
    for (int n = 0; n < 7; ++n) whole.nodes.push_back(n);
    const auto p = partition_model(f.model, whole);
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(f.model.layout().size());
    // b8 neighbors the coupled bus b2, so its states feed b2's inferred output
    dx[f.model.layout().v(f.model.bus_index("b8"))] = 1e-3;
    EXPECT_THROW(forge_local(f.estimate.state, dx, p, f.model), std::invalid_argument);
}

TEST(ForgeLocal, ResidualPreservedExactlyOnReconstruction) {
    const auto f = fixture_9_7(NoiseModel::Mode::PresetLow, 55);
    const auto p = partition_model(f.model, mixed_region_9_7(f.model));
    std::mt19937_64 rng(5);
    const Eigen::VectorXd dx = random_admissible_shift(f.model, p, rng, 2e-3);
    const auto a = forge_local(f.estimate.state, dx, p, f.model);
    StateVector shifted = f.estimate.state;
    shifted.x += dx;
    const double before = (f.z.values - h_full(f.estimate.state, f.model)).norm();
    const double after = (f.z.values + a.delta_z - h_full(shifted, f.model)).norm();
    EXPECT_NEAR(after, before, 1e-10);
}

TEST(ForgeLocal, SurvivesFullReEstimationOnNoisyData) {
    const auto f = fixture_9_7(NoiseModel::Mode::PresetLow, 56);
    const auto p = partition_model(f.model, mixed_region_9_7(f.model));
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::VectorXd dx = random_admissible_shift(f.model, p, rng, 1e-3);
        const auto a = forge_local(f.estimate.state, dx, p, f.model);
        const auto rep = verify_stealth(f.z, a, f.model);
        EXPECT_LE(std::abs(rep.r_norm_after - rep.r_norm_before), 1e-6);
        EXPECT_FALSE(rep.verdict_after.coupling_inconsistency);
    }
}

TEST(ForgeLocal, KnowledgeFirewallBitIdenticalOutput) {
    const auto f = fixture_9_7(NoiseModel::Mode::PresetLow, 57);
    const auto p = partition_model(f.model, mixed_region_9_7(f.model));
    std::mt19937_64 rng(11);
    const Eigen::VectorXd dx = random_admissible_shift(f.model, p, rng, 2e-3);
    const auto a = forge_local(f.estimate.state, dx, p, f.model);

    // scramble every non-attacking parameter; the forged attack must not move
    nlohmann::json doc = model_to_json(f.model);
    for (auto& jl : doc["power"]["lines"]) {
        const std::string id = jl["id"];
        const int l = f.model.line_index(id);
        const bool internal = p.bus_in[f.model.power.lines[l].from] &&
                              p.bus_in[f.model.power.lines[l].to];
        if (!internal) {
            jl["g"] = jl["g"].get<double>() * 3.7 + 0.1;
            jl["b"] = jl["b"].get<double>() * 0.4 - 2.0;
        }
    }
    for (auto& jp : doc["gas"]["pipelines"]) {
        const std::string id = jp["id"];
        const int q = f.model.pipeline_index(id);
        const bool internal = p.node_in[f.model.gas.pipelines[q].from] &&
                              p.node_in[f.model.gas.pipelines[q].to];
        if (!internal) jp["w"] = jp["w"].get<double>() * 5.1;
    }
    for (auto& jc : doc["gas"]["compressors"]) {
        const std::string id = jc["id"];
        const int c = f.model.compressor_index(id);
        const bool internal = p.node_in[f.model.gas.compressors[c].from] &&
                              p.node_in[f.model.gas.compressors[c].to];
        if (!internal) jc["alpha"] = jc["alpha"].get<double>() + 0.17;
    }
    const Model scrambled = load_model_from_json(doc);
    const auto p2 = partition_model(scrambled, mixed_region_9_7(scrambled));
    const auto a2 = forge_local(f.estimate.state, dx, p2, scrambled);
    for (int k = 0; k < f.model.plan.size(); ++k)
        EXPECT_EQ(a.delta_z[k], a2.delta_z[k]) << "row " << k;
}

TEST(ForgeLocal, GasFiredFreeAreaTouchesOnlyPowerRows) {
    const Model m = load_model_file(std::string(IEGS_DATA_DIR) + "/iegs-39-20.json");
    DispatchSpec d;
    d.slack_bus = "b30";
    d.slack_v = 1.03;
    d.slack_node = "n1";
    d.slack_pressure = 60.0;
    for (int k = 1; k < 10; ++k) {
        double pw = 0.82;
        if (k == 2) pw = 0.90;
        if (k == 5) pw = 0.85;
        if (k == 8) pw = 0.80;
        d.generators.push_back({"G" + std::to_string(30 + k), pw, 0.0, 1.02});
    }
    d.wells = {{"GW2", 1.20}};
    d.compressors = {{"c910a", CompressorSetpoint::Mode::Ratio, 1.20},
                     {"c910b", CompressorSetpoint::Mode::Flow, 1.00},
                     {"c1416", CompressorSetpoint::Mode::Ratio, 1.1458333333333333},
                     {"c1718", CompressorSetpoint::Mode::Ratio, 1.0754716981132075}};
    const auto truth = solve_energy_flow(m, d).state;
    NoiseModel noise;
    noise.mode = NoiseModel::Mode::PresetLow;
    noise.seed = 77;
    const auto z = sample_measurements(truth, m, noise);
    const auto est = estimate_iegs(z, m);
    ASSERT_TRUE(est.converged);

    RegionSpec area1;
    for (int b : {16, 19, 20, 21, 22, 23, 24, 33, 34, 35, 36})
        area1.buses.push_back(m.bus_index("b" + std::to_string(b)));
    const auto p = partition_model(m, area1);
    std::mt19937_64 rng(13);
    const Eigen::VectorXd dx = random_admissible_shift(m, p, rng, 1e-3);
    ASSERT_GT(dx.norm(), 0.0);
    // no gas state is touched, and no gas measurement moves
    const StateLayout L = m.layout();
    for (int i = 2 * L.n_bus; i < L.size(); ++i) EXPECT_EQ(dx[i], 0.0);
    const auto a = forge_local(est.state, dx, p, m);
    for (int k = 0; k < m.plan.size(); ++k)
        if (!is_power_kind(m.plan.entries[k].kind)) EXPECT_EQ(a.delta_z[k], 0.0);
    const auto rep = verify_stealth(z, a, m);
    EXPECT_LE(std::abs(rep.r_norm_after - rep.r_norm_before), 1e-6);
}

TEST(IntruderLocalSe, NoiselessEstimateMatchesOperator) {
    const auto m = load_model_file(std::string(IEGS_DATA_DIR) + "/iegs-9-7.json");
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
    const auto truth = solve_energy_flow(m, d).state;
    NoiseModel none;
    const auto z = sample_measurements(truth, m, none);
    const auto op = estimate_iegs(z, m);
    ASSERT_TRUE(op.converged);

    const auto p = partition_model(m, mixed_region_9_7(m));
    const auto local = intruder_local_se(z, p, m);
    ASSERT_TRUE(local.estimate.converged);
    for (const auto& [idx, value] : local.states)
        EXPECT_NEAR(value, op.state.x[idx], 1e-6) << "state " << idx;
    bool flagged = false;
    for (const auto& note : local.notes)
        flagged = flagged || note.find("tie-line flow readings") != std::string::npos;
    EXPECT_TRUE(flagged);
}

TEST(IntruderLocalSe, NoisyBiasFeedsBiasAnalysis) {
    const auto f = fixture_9_7(NoiseModel::Mode::PresetLow, 60);
    const auto p = partition_model(f.model, mixed_region_9_7(f.model));
    const auto local = intruder_local_se(f.z, p, f.model);
    ASSERT_TRUE(local.estimate.converged);
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(f.model.layout().size());
    for (const auto& [idx, value] : local.states) xi[idx] = value - f.estimate.state.x[idx];
    EXPECT_GT(xi.norm(), 0.0);
    std::mt19937_64 rng(2);
    const Eigen::VectorXd dx = random_admissible_shift(f.model, p, rng, 1e-3);
    const auto rep = bias_analysis(f.z, f.estimate.state, xi, dx, f.model);
    EXPECT_LE(rep.exact, rep.bound + 1e-6);
}
