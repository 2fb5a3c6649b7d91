// plcforge: miniature PLC runtime testbed with a deliberately vulnerable
// legacy profile, a hardened aqua profile, and an attack harness.
//
//   plcforge install   --profile legacy|aqua --root DIR
//   plcforge serve     --root DIR [--http-port N] [--modbus-port N]
//   plcforge inspect-db --root DIR [--as other|root]
//   plcforge attack SCENARIO --profile legacy|aqua [--seed N] [--json]
//   plcforge matrix    [--seed N] [--json] [--expected FILE]
//
// PLCFORGE_ROOT provides the default store root. `matrix` exits 0 iff the
// outcome grid matches the expected matrix.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "plcforge/harness.hpp"

using namespace plcforge;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string default_root() {
    const char* env = std::getenv("PLCFORGE_ROOT");
    return env ? env : "";
}

int cmd_install(const std::string& root, const std::string& profile) {
    if (root.empty()) {
        std::cerr << "install: --root or PLCFORGE_ROOT required\n";
        return 2;
    }
    Profile p = profile_from_name(profile);
    aquasec::install(root, p);
    std::cout << "initialized " << profile << " store at " << root << "\n";
    if (p == Profile::Aqua) {
        std::cout << "tls fingerprint (sha256): "
                  << Runtime(RuntimeOptions{p, root}).tls_fingerprint() << "\n";
    }
    return 0;
}

int cmd_serve(const std::string& root, int http_port, int modbus_port) {
    if (root.empty()) {
        std::cerr << "serve: --root or PLCFORGE_ROOT required\n";
        return 2;
    }
    RuntimeOptions opt;
    opt.root = root;
    {
        Store probe = Store::open(root);
        opt.profile = probe.profile();
    }
    opt.http_port = http_port > 0 ? http_port : (opt.profile == Profile::Aqua ? 8443 : 8080);
    opt.modbus_port = modbus_port > 0 ? modbus_port : 10502;
    Runtime rt(std::move(opt));
    rt.start();
    std::cout << profile_name(rt.profile()) << " runtime on "
              << (rt.profile() == Profile::Aqua ? "https" : "http") << "://" << rt.host() << ":"
              << rt.http_port() << ", modbus on " << rt.modbus_port() << "\n";
    if (rt.profile() == Profile::Aqua)
        std::cout << "tls fingerprint (sha256): " << rt.tls_fingerprint() << "\n";
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    rt.stop();
    return 0;
}

int cmd_inspect_db(const std::string& root, const std::string& as) {
    if (root.empty()) {
        std::cerr << "inspect-db: --root or PLCFORGE_ROOT required\n";
        return 2;
    }
    FsIdentity id = FsIdentity::Other;
    if (as == "root")
        id = FsIdentity::Root;
    else if (as != "other") {
        std::cerr << "inspect-db: --as must be other or root\n";
        return 2;
    }
    try {
        std::cout << harness::inspect_db(root, id);
    } catch (const PermissionDenied& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}

void print_outcome(const harness::AttackOutcome& o, bool as_json) {
    if (as_json) {
        nlohmann::json ev = nlohmann::json::array();
        for (const auto& [k, v] : o.evidence) ev.push_back({{"label", k}, {"value", v}});
        nlohmann::json j{{"scenario", o.scenario},
                         {"profile", profile_name(o.profile)},
                         {"success", o.success},
                         {"evidence", ev}};
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::cout << o.scenario << " [" << profile_name(o.profile) << "]: "
              << (o.success ? "SUCCESS" : "no effect") << "\n";
    for (const auto& [k, v] : o.evidence) std::cout << "  " << k << ": " << v << "\n";
}

int cmd_attack(const std::string& scenario, const std::string& profile, uint64_t seed,
               bool as_json) {
    harness::EnvOptions opt;
    opt.seed = seed;
    auto outcome = harness::run_scenario(scenario, profile_from_name(profile), opt);
    print_outcome(outcome, as_json);
    return 0;
}

int cmd_matrix(uint64_t seed, bool as_json, const std::string& expected) {
    fs::path expected_file = expected;
    if (expected.empty() && fs::exists("data/expected_matrix.json"))
        expected_file = "data/expected_matrix.json";
    auto report = harness::run_matrix({Profile::Legacy, Profile::Aqua}, seed, expected_file);
    if (as_json)
        std::cout << report.to_json().dump(2) << "\n";
    else
        std::cout << report.render_text();
    return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"miniature OpenPLC-style runtime and attack harness"};
    app.require_subcommand(1);

    std::string root = default_root();
    std::string profile = "legacy";
    std::string as_identity = "other";
    std::string scenario;
    std::string expected;
    int http_port = 0;
    int modbus_port = 0;
    uint64_t seed = 0;
    bool as_json = false;

    auto* install = app.add_subcommand("install", "initialize a store");
    install->add_option("--root", root, "store root directory");
    install->add_option("--profile", profile, "legacy or aqua")->required();

    auto* serve = app.add_subcommand("serve", "run the web runtime and fieldbus");
    serve->add_option("--root", root, "store root directory");
    serve->add_option("--profile", profile, "legacy or aqua (informational; the store decides)");
    serve->add_option("--http-port", http_port, "HTTP(S) port (default 8080 / 8443)");
    serve->add_option("--modbus-port", modbus_port, "Modbus/TCP port (default 10502)");

    auto* inspect = app.add_subcommand("inspect-db", "dump users and programs");
    inspect->add_option("--root", root, "store root directory");
    inspect->add_option("--as", as_identity, "identity: other or root");

    auto* attack = app.add_subcommand("attack", "run one attack scenario");
    attack->add_option("scenario", scenario, "access|auth|replay|mitm|injection|psm-injection|"
                                             "deny-of-access|index-corruption|modbus-fci")
        ->required();
    attack->add_option("--profile", profile, "legacy or aqua")->required();
    attack->add_option("--seed", seed, "deterministic RNG seed");
    attack->add_flag("--json", as_json, "JSON output");

    auto* matrix = app.add_subcommand("matrix", "run the five core scenarios per profile");
    matrix->add_option("--seed", seed, "deterministic RNG seed");
    matrix->add_flag("--json", as_json, "JSON output");
    matrix->add_option("--expected", expected, "expected-matrix JSON file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (install->parsed()) return cmd_install(root, profile);
        if (serve->parsed()) return cmd_serve(root, http_port, modbus_port);
        if (inspect->parsed()) return cmd_inspect_db(root, as_identity);
        if (attack->parsed()) return cmd_attack(scenario, profile, seed, as_json);
        if (matrix->parsed()) return cmd_matrix(seed, as_json, expected);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
