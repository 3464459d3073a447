#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "teleos/certify.hpp"
#include "teleos/ledger.hpp"
#include "teleos/scenario.hpp"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 1 validation failure, 2 runtime failure,
// 3 verification/certification failure.
constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kRuntimeFailure = 2;
constexpr int kVerificationFailure = 3;

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

int cmd_run(const std::string& scenario_path, std::optional<uint64_t> seed_override,
            const std::string& out_dir) {
    teleos::scenario::ScenarioConfig cfg;
    try {
        cfg = teleos::scenario::load_scenario(scenario_path);
    } catch (const teleos::scenario::ScenarioValidationError& e) {
        std::cerr << e.what() << "\n";
        return kValidationFailure;
    }
    if (seed_override) cfg.seed = *seed_override;

    teleos::scenario::ScenarioOutputs outputs;
    try {
        outputs = teleos::scenario::run_scenario(cfg);
    } catch (const std::exception& e) {
        std::cerr << "scenario run failed: " << e.what() << "\n";
        return kRuntimeFailure;
    }

    try {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "report.json", outputs.report_json);
        write_file(fs::path(out_dir) / "rounds.csv", outputs.rounds_csv);
        write_file(fs::path(out_dir) / "ledger.log", outputs.ledger_text);
        write_file(fs::path(out_dir) / "trace.log", outputs.trace_text);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kRuntimeFailure;
    }

    const auto& r = outputs.result;
    std::cout << "report digest:           " << r.report_digest_hex << "\n"
              << "trace digest:            " << r.trace_digest_hex << "\n"
              << "sovereignty violations:  " << r.sovereignty_violations << "\n"
              << "rounds:                  " << r.rounds.size() << "\n"
              << "final model version:     " << r.final_model_version << "\n"
              << "ledger entries:          " << r.ledger_length << "\n";
    if (!r.clean()) {
        std::cerr << "run finished with violations or aborted rounds\n";
        return kVerificationFailure;
    }
    return kOk;
}

int cmd_ledger_verify(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot read " << path << "\n";
        return kRuntimeFailure;
    }
    std::stringstream ss;
    ss << in.rdbuf();

    std::vector<teleos::ledger::LedgerEntry> entries;
    try {
        entries = teleos::ledger::import_chain(ss.str());
    } catch (const teleos::ledger::ImportError& e) {
        std::cout << "first bad index: " << e.line_index << "\n";
        std::cerr << "import failed at " << e.what() << "\n";
        return kVerificationFailure;
    }
    auto verdict = teleos::ledger::verify_chain(entries);
    if (!verdict.ok) {
        std::cout << "first bad index: " << verdict.first_bad_index << "\n";
        return kVerificationFailure;
    }
    std::cout << "ok: " << entries.size() << " entries verified\n";
    return kOk;
}

int cmd_certify(const std::string& kind_name, const std::string& params_path,
                const std::string& out_dir) {
    std::string variant;
    std::string base_kind = kind_name;
    if (kind_name == "always-flag-detector") {
        base_kind = "anomaly-detector";
        variant = "always-flag";
    } else if (kind_name == "schema-violating-emitter") {
        base_kind = "anomaly-detector";
        variant = "schema-violating";
    }
    auto kind = teleos::kernel::agent_kind_from_name(base_kind);
    if (!kind) {
        std::cerr << "unknown agent kind: " << kind_name << "\n";
        return kValidationFailure;
    }

    teleos::agents::ReferenceAgentParams params;
    teleos::certify::SuiteConfig suite;
    if (!params_path.empty()) {
        std::ifstream in(params_path);
        if (!in) {
            std::cerr << "cannot read " << params_path << "\n";
            return kValidationFailure;
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            std::cerr << "bad params file: " << e.what() << "\n";
            return kValidationFailure;
        }
        params.window = j.value("window", params.window);
        params.threshold = j.value("threshold", params.threshold);
        params.alpha = j.value("alpha", params.alpha);
        params.beta = j.value("beta", params.beta);
        params.lambda = j.value("lambda", params.lambda);
        suite.seed = j.value("seed", suite.seed);
        suite.min_recall = j.value("min_recall", suite.min_recall);
        suite.max_false_positive_rate =
            j.value("max_false_positive_rate", suite.max_false_positive_rate);
        suite.max_forecast_mae = j.value("max_forecast_mae", suite.max_forecast_mae);
        suite.latency_budget = j.value("latency_budget", suite.latency_budget);
    }

    teleos::certify::CertificationReport report;
    try {
        report = teleos::certify::run_certification(*kind, params, suite, variant);
    } catch (const std::exception& e) {
        std::cerr << "certification could not run: " << e.what() << "\n";
        return kRuntimeFailure;
    }

    std::cout << teleos::certify::report_text(report);
    if (!out_dir.empty()) {
        try {
            fs::create_directories(out_dir);
            write_file(fs::path(out_dir) / "certification.json",
                       teleos::certify::report_json(report));
        } catch (const std::exception& e) {
            std::cerr << e.what() << "\n";
            return kRuntimeFailure;
        }
    }
    return report.overall ? kOk : kVerificationFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"teleos: federated telecom AI kernel simulator"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run a scenario and write its reports");
    std::string scenario_path;
    std::string out_dir = "out";
    std::optional<uint64_t> seed_override;
    run->add_option("--scenario", scenario_path, "scenario config file")->required();
    run->add_option("--seed", seed_override, "override the scenario seed");
    run->add_option("--out", out_dir, "output directory")->required();

    // ledger verify
    auto* ledger_cmd = app.add_subcommand("ledger", "ledger utilities");
    ledger_cmd->require_subcommand(1);
    auto* verify = ledger_cmd->add_subcommand("verify", "verify an exported ledger file");
    std::string ledger_path;
    verify->add_option("path", ledger_path, "exported ledger file")->required();

    // certify
    auto* certify = app.add_subcommand("certify", "run the agent certification suite");
    std::string kind;
    std::string params_path;
    std::string cert_out;
    certify->add_option("--kind", kind,
                        "agent kind (or always-flag-detector / schema-violating-emitter)")
        ->required();
    certify->add_option("--params", params_path, "JSON file with agent/suite parameters");
    certify->add_option("--out", cert_out, "output directory for certification.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_path, seed_override, out_dir);
        if (ledger_cmd->parsed() && verify->parsed()) return cmd_ledger_verify(ledger_path);
        if (certify->parsed()) return cmd_certify(kind, params_path, cert_out);
    } catch (const std::exception& e) {
        std::cerr << "unexpected failure: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return kValidationFailure;
}
