#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args, std::string* stdout_text = nullptr) {
    const std::string out_file = "cli_test_stdout.txt";
    const std::string cmd =
        std::string(TELEOS_CLI_PATH) + " " + args + " > " + out_file + " 2> /dev/null";
    const int status = std::system(cmd.c_str());
    if (stdout_text) {
        std::ifstream in(out_file);
        std::stringstream ss;
        ss << in.rdbuf();
        *stdout_text = ss.str();
    }
    return WEXITSTATUS(status);
}

std::string scenario(const char* name) {
    return std::string(TELEOS_SCENARIO_DIR) + "/" + name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("run writes the four outputs and exits 0 on the reference scenario") {
    fs::remove_all("cli_out_ref");
    CHECK(cli("run --scenario " + scenario("reference.json") + " --out cli_out_ref") == 0);
    for (const char* f : {"report.json", "rounds.csv", "ledger.log", "trace.log"})
        CHECK(fs::exists(fs::path("cli_out_ref") / f));
}

TEST_CASE("the fault scenario exits nonzero and reports the violation") {
    fs::remove_all("cli_out_fault");
    CHECK(cli("run --scenario " + scenario("fault_injection.json") + " --out cli_out_fault") == 3);
    auto report = slurp("cli_out_fault/report.json");
    CHECK(report.find("\"sovereignty_violations\": 1") != std::string::npos);
}

TEST_CASE("a seed override changes the report digest") {
    fs::remove_all("cli_out_a");
    fs::remove_all("cli_out_b");
    REQUIRE(cli("run --scenario " + scenario("reference.json") + " --out cli_out_a") == 0);
    REQUIRE(cli("run --scenario " + scenario("reference.json") +
                " --seed 999 --out cli_out_b") == 0);
    CHECK(slurp("cli_out_a/report.json") != slurp("cli_out_b/report.json"));
}

TEST_CASE("an invalid scenario exits 1 with a diagnostic") {
    std::ofstream("cli_bad_scenario.json") << R"({"seed": 1})";
    CHECK(cli("run --scenario cli_bad_scenario.json --out cli_out_bad") == 1);
    CHECK(cli("run --scenario does_not_exist.json --out cli_out_bad") == 1);
}

TEST_CASE("ledger verify accepts a run export and an empty file") {
    fs::remove_all("cli_out_l");
    REQUIRE(cli("run --scenario " + scenario("reference.json") + " --out cli_out_l") == 0);
    std::string out;
    CHECK(cli("ledger verify cli_out_l/ledger.log", &out) == 0);
    CHECK(out.find("ok:") != std::string::npos);

    std::ofstream("cli_empty_ledger.log");
    CHECK(cli("ledger verify cli_empty_ledger.log") == 0);
}

TEST_CASE("ledger verify flags a tampered file and prints the index") {
    fs::remove_all("cli_out_t");
    REQUIRE(cli("run --scenario " + scenario("reference.json") + " --out cli_out_t") == 0);
    auto text = slurp("cli_out_t/ledger.log");
    // Flip a hex digit somewhere inside line 5.
    size_t pos = 0;
    for (int i = 0; i < 5; ++i) pos = text.find('\n', pos) + 1;
    for (int spaces = 0; spaces < 3; ++spaces) pos = text.find(' ', pos) + 1;
    text[pos] = text[pos] == '0' ? '1' : '0';
    std::ofstream("cli_tampered_ledger.log") << text;

    std::string out;
    CHECK(cli("ledger verify cli_tampered_ledger.log", &out) == 3);
    CHECK(out.find("first bad index: 5") != std::string::npos);
}

TEST_CASE("certify passes the reference detector and fails the adversarial ones") {
    fs::remove_all("cli_cert");
    std::string out;
    CHECK(cli("certify --kind anomaly-detector --out cli_cert", &out) == 0);
    CHECK(out.find("overall: PASS") != std::string::npos);
    CHECK(fs::exists("cli_cert/certification.json"));

    CHECK(cli("certify --kind always-flag-detector --out cli_cert", &out) == 3);
    CHECK(out.find("[FAIL] behavioral-benchmark") != std::string::npos);
    CHECK(cli("certify --kind schema-violating-emitter --out cli_cert", &out) == 3);
    CHECK(out.find("[FAIL] contract-conformance") != std::string::npos);

    CHECK(cli("certify --kind crystal-ball --out cli_cert") == 1);
}

TEST_CASE("help is available on every command") {
    CHECK(cli("--help") == 0);
    CHECK(cli("run --help") == 0);
    CHECK(cli("ledger --help") == 0);
    CHECK(cli("certify --help") == 0);
}
