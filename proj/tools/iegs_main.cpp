// Batch pipeline driver: simulate -> estimate -> attack -> report, all file
// based and deterministic for a given (inputs, seed) pair.
//
// Exit codes: 0 success, 2 input error, 3 solver failure, 4 infeasible
// attack. Set IEGS_LOG=debug for solver traces on stderr.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iegs/documents.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;
constexpr int kExitInfeasible = 4;

bool log_enabled() {
    const char* env = std::getenv("IEGS_LOG");
    return env != nullptr && *env != '\0';
}

void log_trace(const iegs::EstimationResult& r, const std::string& what) {
    if (!log_enabled()) return;
    std::cerr << what << ": converged=" << r.converged << " iterations=" << r.iterations
              << " objective=" << r.objective << "\n";
    for (const auto& t : r.trace)
        std::cerr << "  iter " << t.iter << " obj " << t.objective << " step " << t.step_norm
                  << " lambda " << t.lambda << " |c| " << t.constraint_norm << "\n";
}

struct CommonArgs {
    std::string model_path;
    std::string out_dir = ".";
    double epsilon = 1e-5;
    std::optional<double> tau;
};

iegs::Model load_model_checked(const std::string& path) {
    return iegs::load_model_file(path);
}

iegs::DetectionConfig detection_config(const CommonArgs& args) {
    iegs::DetectionConfig cfg;
    cfg.epsilon = args.epsilon;
    cfg.tau = args.tau;
    return cfg;
}

// ----------------------------------------------------------------- simulate

int cmd_simulate(const CommonArgs& args, const std::string& scenario_path,
                 std::optional<std::uint64_t> seed_override) {
    const iegs::Model model = load_model_checked(args.model_path);
    const nlohmann::json scen = iegs::read_json_file(scenario_path);
    const iegs::DispatchSpec dispatch = iegs::parse_dispatch(scen.at("dispatch"));
    iegs::NoiseModel noise = iegs::parse_noise(scen.value("noise", nlohmann::json::object()));
    if (seed_override) noise.seed = *seed_override;

    const auto flow = iegs::solve_energy_flow(model, dispatch);
    if (log_enabled())
        std::cerr << "energy flow: mismatch " << flow.mismatch_norm << " in "
                  << flow.iterations << " iterations\n";
    const auto z = iegs::sample_measurements(flow.state, model, noise);

    std::filesystem::create_directories(args.out_dir);
    nlohmann::json state_doc;
    state_doc["state"] = iegs::state_to_json(flow.state, model);
    state_doc["mismatch_norm"] = flow.mismatch_norm;
    state_doc["iterations"] = flow.iterations;
    state_doc["slack"] = {{"generation_p", flow.slack_generation_p},
                          {"generation_q", flow.slack_generation_q},
                          {"well_output", flow.slack_well_output}};
    state_doc["violations"] = flow.violations;
    iegs::write_json_file(args.out_dir + "/state.json", state_doc);
    iegs::write_json_file(args.out_dir + "/measurements.json",
                          iegs::measurements_to_json(z, model, noise));
    std::cout << "simulate: mismatch " << flow.mismatch_norm << ", wrote " << args.out_dir
              << "/state.json and measurements.json\n";
    for (const auto& v : flow.violations) std::cout << "  note: " << v << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------- estimate

int cmd_estimate(const CommonArgs& args, const std::string& meas_path,
                 const std::string& mode) {
    const iegs::Model model = load_model_checked(args.model_path);
    const auto z = iegs::measurements_from_json(iegs::read_json_file(meas_path), model);
    const iegs::SeMode se_mode =
        mode == "ose" ? iegs::SeMode::Unconstrained : iegs::SeMode::Coupled;
    const auto result = iegs::estimate_iegs(z, model, se_mode);
    log_trace(result, "estimate(" + mode + ")");
    const auto verdict = iegs::detect_bad_data(z, result, detection_config(args));

    std::filesystem::create_directories(args.out_dir);
    iegs::write_json_file(args.out_dir + "/result.json",
                          iegs::result_to_json(result, model, verdict, mode));
    std::cout << "estimate(" << mode << "): r_norm " << result.r_norm << ", rc_norm "
              << (result.coupling_residual.size() ? result.coupling_residual.norm() : 0.0)
              << ", bad_data " << (verdict.global_bad_data ? "yes" : "no")
              << ", coupling_inconsistency "
              << (verdict.coupling_inconsistency ? "yes" : "no") << "\n";
    if (!result.converged) {
        std::cerr << "estimation did not converge after " << result.iterations
                  << " iterations\n";
        return kExitSolver;
    }
    return kExitOk;
}

// ------------------------------------------------------------------- attack

struct ParsedTargets {
    iegs::TargetSpec spec;
    std::string label;
};

// Targets come as absolute values or offsets from the current estimate
// (states) / reading (measurements).
ParsedTargets parse_targets(const nlohmann::json& spec, const iegs::Model& model,
                            const iegs::StateVector& reference_state,
                            const iegs::MeasurementVector& z) {
    ParsedTargets out;
    out.spec.enforce_limits = spec.value("enforce_limits", false);
    for (const auto& jt : spec.value("targets", nlohmann::json::array())) {
        const std::string type = jt.value("type", std::string("state"));
        iegs::TargetItem item;
        if (type == "state") {
            const std::string block = jt.at("block");
            const std::string element = jt.at("element");
            item = iegs::state_target(model, block, element, 0.0);
            const double current = reference_state.x[item.state_index];
            item.value = jt.contains("value") ? jt.at("value").get<double>()
                                              : current + jt.at("offset").get<double>();
        } else if (type == "measurement") {
            const auto kind = iegs::kind_from_name(jt.at("kind"));
            if (!kind) throw iegs::ParseError("unknown measurement kind in target");
            item = iegs::measurement_target(model, *kind, jt.at("element"), 0.0);
            const double current = z.values[item.row];
            item.value = jt.contains("value") ? jt.at("value").get<double>()
                                              : current + jt.at("offset").get<double>();
        } else {
            throw iegs::ParseError("target type must be 'state' or 'measurement'");
        }
        out.spec.items.push_back(item);
        if (!out.label.empty()) out.label += ", ";
        out.label += item.label;
    }
    if (out.spec.items.empty()) throw iegs::ParseError("attack spec lists no targets");
    return out;
}

iegs::RegionSpec parse_region(const nlohmann::json& spec, const iegs::Model& model) {
    if (!spec.contains("region"))
        throw iegs::ParseError("attack spec needs a 'region' for this knowledge level");
    iegs::RegionSpec region;
    for (const auto& b : spec.at("region").value("buses", nlohmann::json::array())) {
        const int idx = model.bus_index(b.get<std::string>());
        if (idx < 0) throw iegs::ParseError("unknown bus in region: " + b.get<std::string>());
        region.buses.push_back(idx);
    }
    for (const auto& n : spec.at("region").value("nodes", nlohmann::json::array())) {
        const int idx = model.node_index(n.get<std::string>());
        if (idx < 0) throw iegs::ParseError("unknown node in region: " + n.get<std::string>());
        region.nodes.push_back(idx);
    }
    return region;
}

int cmd_attack(const CommonArgs& args, const std::string& meas_path,
               const std::string& spec_path, const std::string& knowledge) {
    const iegs::Model model = load_model_checked(args.model_path);
    const auto z = iegs::measurements_from_json(iegs::read_json_file(meas_path), model);
    const nlohmann::json spec = iegs::read_json_file(spec_path);
    const std::string scenario = spec.value("scenario", std::string("attack"));
    std::filesystem::create_directories(args.out_dir);

    iegs::AttackVector attack;
    std::string target_label;
    try {
        if (knowledge == "complete") {
            const auto est = iegs::estimate_iegs(z, model);
            log_trace(est, "operator estimate");
            if (!est.converged) {
                std::cerr << "operator-side estimate did not converge\n";
                return kExitSolver;
            }
            const auto targets = parse_targets(spec, model, est.state, z);
            target_label = targets.label;
            attack = iegs::synth_targeted(est.state, targets.spec, model, args.epsilon);
        } else if (knowledge == "local") {
            const auto region = parse_region(spec, model);
            const auto part = iegs::partition_model(model, region);
            iegs::write_json_file(args.out_dir + "/partition.json",
                                  iegs::partition_to_json(part, model));
            const auto local = iegs::intruder_local_se(z, part, model);
            log_trace(local.estimate, "intruder local estimate");
            if (!local.estimate.converged) {
                std::cerr << "intruder-side local estimate did not converge\n";
                return kExitSolver;
            }
            iegs::StateVector reference(model.layout());
            for (const auto& [idx, value] : local.states) reference.x[idx] = value;
            const auto targets = parse_targets(spec, model, reference, z);
            target_label = targets.label;
            attack = iegs::forge_local_targeted(reference, targets.spec, part, model);
        } else if (knowledge == "topology") {
            const auto region = parse_region(spec, model);
            const auto candidates = iegs::enumerate_candidates(model, region.nodes);
            nlohmann::json catalog = nlohmann::json::array();
            for (const auto& cand : candidates) {
                const auto range = iegs::admissible_range(cand, z.values);
                nlohmann::json rows = nlohmann::json::array();
                for (size_t i = 0; i < cand.rows.size(); ++i) {
                    const auto& e = model.plan.entries[cand.rows[i]];
                    rows.push_back({{"kind", iegs::kind_name(e.kind)},
                                    {"element", iegs::element_id(model, e)},
                                    {"sign", cand.pattern[i]}});
                }
                catalog.push_back(
                    {{"kind", cand.kind == iegs::TopoAttackCandidate::Kind::LoadRedistribution
                                  ? "load_redistribution"
                                  : "flow_redistribution"},
                     {"label", cand.label},
                     {"pattern", rows},
                     {"admissible", {{"lo", range.lo}, {"hi", range.hi}}}});
            }
            iegs::write_json_file(args.out_dir + "/candidates.json", catalog);

            // pick a candidate touching the requested target, if any
            int chosen = -1;
            if (spec.contains("targets") && !spec.at("targets").empty()) {
                const auto& jt = spec.at("targets").at(0);
                if (jt.value("type", std::string()) != "measurement")
                    throw iegs::InfeasibleTargetError(
                        "no feasible FDIA: topology-only attacks reach gas measurements "
                        "only",
                        {});
                const auto kind = iegs::kind_from_name(jt.at("kind"));
                if (!kind) throw iegs::ParseError("unknown measurement kind in target");
                const auto item =
                    iegs::measurement_target(model, *kind, jt.at("element"), 0.0);
                target_label = item.label;
                for (size_t i = 0; i < candidates.size() && chosen < 0; ++i)
                    for (int row : candidates[i].rows)
                        if (row == item.row) chosen = static_cast<int>(i);
                if (chosen < 0)
                    throw iegs::InfeasibleTargetError(
                        "no feasible FDIA: no topology-only candidate touches " + item.label,
                        {});
            } else if (!candidates.empty()) {
                chosen = 0;
                target_label = candidates[0].label;
            }
            if (chosen < 0)
                throw iegs::InfeasibleTargetError(
                    "no feasible FDIA: the region has neither meshed compressors nor a "
                    "compressor joining two loaded nodes",
                    {});
            const auto range = iegs::admissible_range(candidates[chosen], z.values);
            double delta = spec.value("magnitude", 0.5 * range.hi);
            attack = iegs::forge_topo(candidates[chosen], delta, z.values, model);
        } else {
            throw iegs::ParseError("unknown knowledge level: " + knowledge);
        }
    } catch (const iegs::InfeasibleTargetError& e) {
        std::cerr << e.what() << "\n";
        for (const auto& a : e.active) std::cerr << "  active: " << a << "\n";
        nlohmann::json doc = {{"scenario", scenario}, {"feasible", false},
                              {"reason", e.what()}};
        iegs::write_json_file(args.out_dir + "/attack.json", doc);
        return kExitInfeasible;
    }

    iegs::write_json_file(args.out_dir + "/attack.json", iegs::attack_to_json(attack, model));
    const auto rep = iegs::verify_stealth(z, attack, model, detection_config(args));
    iegs::write_json_file(
        args.out_dir + "/verification.json",
        iegs::verification_to_json(scenario, target_label, knowledge, attack, rep, model));
    std::cout << "attack(" << knowledge << "): residual " << rep.r_norm_before << " -> "
              << rep.r_norm_after << ", "
              << (rep.verdict_after.global_bad_data ||
                          rep.verdict_after.coupling_inconsistency
                      ? "detected"
                      : "stealthy")
              << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------- report

int cmd_report(const std::vector<std::string>& verification_paths,
               const std::string& out_path) {
    std::vector<nlohmann::json> docs;
    for (const auto& path : verification_paths) docs.push_back(iegs::read_json_file(path));

    std::ostringstream table;
    auto join = [](const nlohmann::json& arr) {
        std::string out;
        for (const auto& e : arr) {
            if (!out.empty()) out += " ";
            out += e.get<std::string>();
        }
        return out.empty() ? std::string("-") : out;
    };
    table << std::left << std::setw(12) << "Scenario" << std::setw(24) << "Target"
          << std::setw(11) << "Knowledge" << std::setw(34) << "Affected power states"
          << std::setw(34) << "Affected gas states" << std::setw(15) << "||r|| before"
          << std::setw(15) << "||r|| after" << "Verdict\n";
    for (const auto& d : docs) {
        if (d.value("feasible", true) == false) {
            table << std::left << std::setw(12) << d.value("scenario", std::string("?"))
                  << std::setw(24) << "-" << std::setw(11) << "-" << std::setw(34) << "-"
                  << std::setw(34) << "-" << std::setw(15) << "-" << std::setw(15) << "NA"
                  << "infeasible\n";
            continue;
        }
        std::ostringstream rb, ra;
        rb << std::setprecision(6) << d.at("residual_before").get<double>();
        ra << std::setprecision(6) << d.at("residual_after").get<double>();
        table << std::left << std::setw(12) << d.value("scenario", std::string("?"))
              << std::setw(24) << d.value("attack_target", std::string("?")) << std::setw(11)
              << d.value("knowledge", std::string("?")) << std::setw(34)
              << join(d.at("affected_power_states")) << std::setw(34)
              << join(d.at("affected_gas_states")) << std::setw(15) << rb.str()
              << std::setw(15) << ra.str()
              << (d.at("stealthy").get<bool>() ? "stealthy" : "detected") << "\n";
    }
    std::cout << table.str();
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << table.str();
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"integrated electricity-gas system estimation and attack studies"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string scenario_path, meas_path, spec_path, mode = "pse", knowledge = "complete";
    std::optional<std::uint64_t> seed_override;
    std::vector<std::string> verification_paths;
    std::string report_out;

    auto add_common = [&](CLI::App* cmd, bool with_model = true) {
        if (with_model) cmd->add_option("--model", common.model_path, "model document")
                ->required();
        cmd->add_option("--out", common.out_dir, "output directory");
        cmd->add_option("--tau", [&common](const CLI::results_t& r) {
            common.tau = std::stod(r[0]);
            return true;
        }, "absolute residual-norm threshold (default: chi-square quantile)");
        cmd->add_option("--epsilon", common.epsilon, "coupling-consistency tolerance");
    };

    auto* sim = app.add_subcommand("simulate", "solve a dispatch and sample measurements");
    add_common(sim);
    sim->add_option("--scenario", scenario_path, "scenario document")->required();
    sim->add_option("--seed", [&seed_override](const CLI::results_t& r) {
        seed_override = std::stoull(r[0]);
        return true;
    }, "override the scenario noise seed");

    auto* est = app.add_subcommand("estimate", "run state estimation and bad-data detection");
    add_common(est);
    est->add_option("--measurements", meas_path, "measurement document")->required();
    est->add_option("--mode", mode, "pse (coupled) or ose (unconstrained)")
        ->check(CLI::IsMember({"pse", "ose"}));

    auto* atk = app.add_subcommand("attack", "synthesize and verify an attack");
    add_common(atk);
    atk->add_option("--measurements", meas_path, "measurement document")->required();
    atk->add_option("--spec", spec_path, "attack specification document")->required();
    atk->add_option("--knowledge", knowledge, "complete, local, or topology")
        ->check(CLI::IsMember({"complete", "local", "topology"}));

    auto* rep = app.add_subcommand("report", "tabulate verification documents");
    rep->add_option("--verification", verification_paths, "verification documents")
        ->required();
    rep->add_option("--out", report_out, "also write the table to a file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(common, scenario_path, seed_override);
        if (est->parsed()) return cmd_estimate(common, meas_path, mode);
        if (atk->parsed()) return cmd_attack(common, meas_path, spec_path, knowledge);
        if (rep->parsed()) return cmd_report(verification_paths, report_out);
    } catch (const iegs::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const iegs::ValidationError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const iegs::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const iegs::UnobservableError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const iegs::KktSingularError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
