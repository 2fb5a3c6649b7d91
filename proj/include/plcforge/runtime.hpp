#pragma once

// Operator-facing HTTP(S) service: authentication and sessions, the
// upload -> action -> compile -> start lifecycle, dashboard and program
// pages, the hardware hook, and the scan-loop driver. Legacy listens on
// plaintext HTTP and trusts stored plaintext credentials; aqua wraps the
// same surface in TLS and delegates credential handling, whitelisting,
// upload verification, purging and activity logging to aquasec.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>

#include "plcforge/aquasec.hpp"
#include "plcforge/common.hpp"
#include "plcforge/fieldbus.hpp"
#include "plcforge/netutil.hpp"
#include "plcforge/stlang.hpp"
#include "plcforge/store.hpp"

namespace plcforge {

constexpr int64_t kSessionLifetimeMs = 300 * 1000;  // absolute five-minute window

struct Session {
    std::string token;  // 32 random bytes, hex
    std::string username;
    std::string client_ip;
    int64_t created_at_ms = 0;
};

struct CompileJob {
    std::string target;
    bool done = false;
    bool auto_start = false;
    std::string log;
};

struct DashboardState {
    std::string running_title;
    bool plc_running = false;
    std::string runtime_log;
    std::string alert;
};

struct RuntimeOptions {
    Profile profile = Profile::Legacy;
    fs::path root;
    std::string host = "127.0.0.1";
    int http_port = 0;    // 0 picks an ephemeral port
    int modbus_port = 0;  // 0 picks an ephemeral port
    int scan_period_ms = 50;
    int compile_step_ms = 25;  // pause between observable log increments
    MsClock clock;             // session/log clock; defaults to steady time
    std::optional<uint64_t> seed;            // deterministic tokens + copy names
    std::optional<std::time_t> fixed_time;   // pins record upload dates
};

class Runtime {
public:
    explicit Runtime(RuntimeOptions opt)
        : opt_(std::move(opt)), store_(Store::open(opt_.root)) {
        if (!opt_.clock) opt_.clock = system_ms_clock();
        if (opt_.seed) {
            auto bytes = std::make_shared<SeededBytes>(*opt_.seed);
            token_source_ = [bytes] { return hex_encode(bytes->take(32)); };
            store_.set_copy_rng([bytes] { return bytes->next_u32(); });
        } else {
            token_source_ = [] { return hex_encode(csprng_bytes(32)); };
        }
        if (opt_.fixed_time) store_.set_clock([t = *opt_.fixed_time] { return t; });
        regs_ = std::make_shared<fieldbus::SharedRegs>();
        if (profile() == Profile::Aqua) {
            vault_ = aquasec::Vault::load(aquasec::vault_path(store_.root()));
            whitelist_ = aquasec::Whitelist::load(aquasec::whitelist_path(store_.root()));
            activity_ = std::make_unique<aquasec::ActivityLog>(
                aquasec::activity_log_path(store_.root()), opt_.clock);
            tls_fingerprint_ = read_cert_fingerprint(aquasec::tls_cert_path(store_.root()));
        }
    }

    ~Runtime() { stop(); }

    Profile profile() const { return store_.profile(); }
    Store& store() { return store_; }
    const Store& store() const { return store_; }
    fieldbus::SharedRegsPtr regs() { return regs_; }
    aquasec::Whitelist& whitelist() { return whitelist_; }
    const std::string& tls_fingerprint() const { return tls_fingerprint_; }
    int http_port() const { return http_port_; }
    int modbus_port() const { return modbus_ ? modbus_->port() : -1; }
    const std::string& host() const { return opt_.host; }

    void start() {
        if (profile() == Profile::Aqua) {
            auto cert = aquasec::tls_cert_path(store_.root()).string();
            auto key = aquasec::tls_key_path(store_.root()).string();
            auto ssl = std::make_unique<httplib::SSLServer>(cert.c_str(), key.c_str());
            if (!ssl->is_valid()) throw Error("TLS server init failed");
            server_ = std::move(ssl);
        } else {
            server_ = std::make_unique<httplib::Server>();
        }
        register_routes();
        if (opt_.http_port == 0) {
            http_port_ = server_->bind_to_any_port(opt_.host);
            if (http_port_ < 0) throw Error("bind failed");
        } else {
            if (!server_->bind_to_port(opt_.host, opt_.http_port)) throw Error("bind failed");
            http_port_ = opt_.http_port;
        }
        http_thread_ = std::thread([this] { server_->listen_after_bind(); });
        server_->wait_until_ready();

        modbus_ = std::make_unique<fieldbus::Server>(regs_, opt_.host, opt_.modbus_port);
        modbus_->start();

        scan_running_ = true;
        scan_thread_ = std::thread([this] { scan_loop(); });
    }

    void stop() {
        if (scan_running_.exchange(false)) {
            if (scan_thread_.joinable()) scan_thread_.join();
        }
        if (server_) {
            server_->stop();
            if (http_thread_.joinable()) http_thread_.join();
            server_.reset();
        }
        if (modbus_) {
            modbus_->stop();
            modbus_.reset();
        }
        join_job();
    }

    // ------------------------------------------------------------------
    // Introspection used by tests and the harness

    DashboardState dashboard() {
        std::lock_guard lk(state_mu_);
        DashboardState d = dash_;
        d.running_title = running_title_unlocked();
        return d;
    }

    size_t session_count() {
        std::lock_guard lk(state_mu_);
        return sessions_.size();
    }

    bool plc_running() {
        std::lock_guard lk(state_mu_);
        return dash_.plc_running;
    }

    // Completed scan cycles; lets callers wait for input writes to
    // propagate to the output image without guessing at sleeps.
    uint64_t scan_count() const { return scan_count_.load(); }

private:
    // ------------------------------------------------------------------
    // Sessions

    std::optional<Session> resolve_session(const httplib::Request& req) {
        std::string cookie = req.get_header_value("Cookie");
        auto pos = cookie.find("session=");
        if (pos == std::string::npos) return std::nullopt;
        auto end = cookie.find(';', pos);
        std::string token =
            cookie.substr(pos + 8, end == std::string::npos ? std::string::npos : end - pos - 8);
        std::lock_guard lk(state_mu_);
        auto it = sessions_.find(token);
        if (it == sessions_.end()) return std::nullopt;
        if (opt_.clock() - it->second.created_at_ms >= kSessionLifetimeMs) {
            sessions_.erase(it);  // absolute expiry; nothing extends the window
            return std::nullopt;
        }
        return it->second;
    }

    void kill_session(const std::string& token) {
        std::lock_guard lk(state_mu_);
        sessions_.erase(token);
    }

    static void unauthorized(httplib::Response& res) {
        res.status = 401;
        res.set_content("401 Unauthorized\n", "text/plain");
    }

    // ------------------------------------------------------------------
    // Page rendering (only the grep-able substrings are contractual)

    std::string running_title_unlocked() {
        std::string idx = store_.active_program();
        if (idx == kTemporalProgram) return kTemporalProgram;
        if (auto rec = store_.find_program_by_copy(idx)) return rec->title;
        return "";
    }

    std::string page_dashboard() {
        std::lock_guard lk(state_mu_);
        std::string body = "<html><body><h1>OpenPLC Dashboard</h1>\n";
        body += "Running: " + running_title_unlocked() + "\n";
        body += std::string("Status: ") + (dash_.plc_running ? "PLC running" : "PLC stopped") + "\n";
        body += "Alert: " + dash_.alert + "\n";
        body += "Runtime log:\n" + dash_.runtime_log;
        body += "</body></html>\n";
        return body;
    }

    std::string page_programs() {
        std::string body = "<html><body><h1>Programs</h1>\n";
        for (const auto& r : store_.programs()) {
            body += std::to_string(r.prog_id) + " | " + r.title + " | " + r.copy_name + " | " +
                    r.upload_date + "\n";
        }
        std::lock_guard lk(state_mu_);
        body += "Running: " + running_title_unlocked() + "\n";
        body += "</body></html>\n";
        return body;
    }

    // ------------------------------------------------------------------
    // Activity log (aqua only)

    void log_activity(const std::string& actor, const std::string& action,
                      const std::string& object, const std::string& detail = "") {
        if (activity_) activity_->append(actor, action, object, detail);
    }

    // ------------------------------------------------------------------
    // Routes

    void register_routes() {
        auto& s = *server_;

        s.Post("/login", [this](const httplib::Request& req, httplib::Response& res) {
            handle_login(req, res);
        });
        s.Get("/dashboard", [this](const httplib::Request& req, httplib::Response& res) {
            if (!resolve_session(req)) return unauthorized(res);
            res.set_content(page_dashboard(), "text/html");
        });
        s.Get("/programs", [this](const httplib::Request& req, httplib::Response& res) {
            if (!resolve_session(req)) return unauthorized(res);
            res.set_content(page_programs(), "text/html");
        });
        s.Post("/upload-program", [this](const httplib::Request& req, httplib::Response& res) {
            handle_upload_program(req, res);
        });
        s.Post("/upload-program-action",
               [this](const httplib::Request& req, httplib::Response& res) {
                   handle_upload_program_action(req, res);
               });
        s.Get("/compile-program", [this](const httplib::Request& req, httplib::Response& res) {
            handle_compile_program(req, res);
        });
        s.Get("/compilation-logs", [this](const httplib::Request& req, httplib::Response& res) {
            handle_compilation_logs(req, res);
        });
        s.Get("/start-plc", [this](const httplib::Request& req, httplib::Response& res) {
            handle_start_plc(req, res);
        });
        s.Get("/stop-plc", [this](const httplib::Request& req, httplib::Response& res) {
            handle_stop_plc(req, res);
        });
        s.Get("/reload-program", [this](const httplib::Request& req, httplib::Response& res) {
            handle_reload_program(req, res);
        });
        s.Get("/update-program", [this](const httplib::Request& req, httplib::Response& res) {
            handle_update_program(req, res);
        });
        s.Post("/update-program-action",
               [this](const httplib::Request& req, httplib::Response& res) {
                   handle_update_program_action(req, res);
               });
        s.Get("/remove-program", [this](const httplib::Request& req, httplib::Response& res) {
            handle_remove_program(req, res);
        });
        s.Post("/hardware", [this](const httplib::Request& req, httplib::Response& res) {
            handle_hardware(req, res);
        });
    }

    void handle_login(const httplib::Request& req, httplib::Response& res) {
        std::string username = req.get_param_value("username");
        std::string password = req.get_param_value("password");
        std::string ip = req.remote_addr;
        if (username.empty() || password.empty()) return unauthorized(res);

        bool credentials_ok = false;
        if (profile() == Profile::Legacy) {
            for (const auto& u : store_.users())
                credentials_ok = credentials_ok || (u.username == username && u.password == password);
        } else {
            // Compare ciphertexts: deterministic CBC with a fixed IV makes
            // equal plaintexts encrypt equal, and plaintext never touches
            // the stored records.
            std::string enc_u = aquasec::encrypt_field(aquasec::FieldKind::Username, username, vault_);
            std::string enc_p = aquasec::encrypt_field(aquasec::FieldKind::Password, password, vault_);
            for (const auto& u : store_.users())
                credentials_ok = credentials_ok || (u.username == enc_u && u.password == enc_p);
            if (credentials_ok && !whitelist_.check(username, ip))
                return unauthorized(res);  // indistinguishable from bad credentials
        }
        if (!credentials_ok) return unauthorized(res);

        Session sess;
        sess.token = token_source_();
        sess.username = username;
        sess.client_ip = ip;
        sess.created_at_ms = opt_.clock();
        {
            std::lock_guard lk(state_mu_);
            sessions_[sess.token] = sess;
        }
        log_activity(username, "login", "session", ip);
        res.set_header("Set-Cookie", "session=" + sess.token + "; Path=/");
        res.set_redirect("/dashboard", 302);
    }

    void handle_upload_program(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        Bytes content = to_bytes(req.body);
        if (profile() == Profile::Aqua) {
            Bytes active_bytes;
            std::string idx = store_.active_program();
            fs::path active_path = store_.webserver() / idx;
            if (!idx.empty() && fs::exists(active_path)) active_bytes = read_file_bytes(active_path);
            auto verdict = aquasec::verify_upload(active_bytes, content, sess->username,
                                                  req.remote_addr, whitelist_);
            if (!verdict.allowed) {
                if (verdict.terminate_session) kill_session(sess->token);
                log_activity(sess->username, "upload_rejected", "upload", req.remote_addr);
                res.status = 403;
                res.set_content("403 Forbidden\n", "text/plain");
                return;
            }
        }
        std::string copy = store_.save_copy(content);
        log_activity(sess->username, "upload", copy, req.remote_addr);
        res.set_content("<html><body>Upload OK\ncopy: " + copy + "\n</body></html>\n", "text/html");
    }

    void handle_upload_program_action(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        std::string prog_name = req.get_param_value("prog_name");
        std::string copy_name = req.get_param_value("copy_name");
        try {
            int id = store_.insert_program(prog_name, copy_name);
            res.set_content("<html><body>Program registered\n" + std::to_string(id) + " | " +
                                prog_name + " | " + copy_name + "\n</body></html>\n",
                            "text/html");
        } catch (const MissingCopy&) {
            res.status = 400;
            res.set_content("400 missing copy\n", "text/plain");
        }
    }

    void handle_compile_program(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        std::string file = req.get_param_value("file");
        if (file.empty() || file.find('/') != std::string::npos ||
            !fs::exists(store_.webserver() / file)) {
            res.status = 404;
            res.set_content("404 unknown copy\n", "text/plain");
            return;
        }
        start_compile_job(file, false);
        log_activity(sess->username, "compile", file);
        res.set_content("<html><body>Compiling " + file + "\n</body></html>\n", "text/html");
    }

    void handle_compilation_logs(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        std::lock_guard lk(state_mu_);
        if (!job_) {
            res.status = 404;
            res.set_content("404 no compile job\n", "text/plain");
            return;
        }
        res.set_content(job_->log, "text/plain");
    }

    void handle_start_plc(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        std::string idx = store_.active_program();
        if (profile() == Profile::Aqua && idx == kTemporalProgram) {
            // Asking to run the bogus placeholder is treated as hostile.
            kill_session(sess->token);
            log_activity(sess->username, "start_rejected", idx, req.remote_addr);
            res.status = 403;
            res.set_content("403 Forbidden\n", "text/plain");
            return;
        }
        auto fail = [&res]() {
            res.status = 500;
            res.set_content("500 operational error of the service\n", "text/plain");
        };
        if (idx.empty()) return fail();
        fs::path copy = store_.webserver() / idx;
        if (!fs::exists(copy)) return fail();
        std::shared_ptr<const stlang::CompiledProgram> prog;
        try {
            auto [compiled, log] = stlang::compile_source(read_file_text(copy));
            prog = std::make_shared<const stlang::CompiledProgram>(std::move(compiled));
        } catch (const stlang::SyntaxError&) {
            return fail();
        }
        {
            std::lock_guard lk(state_mu_);
            program_ = std::move(prog);
            dash_.plc_running = true;
        }
        log_activity(sess->username, "start", idx);
        res.set_redirect("/dashboard", 302);
    }

    void handle_stop_plc(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        {
            std::lock_guard lk(state_mu_);
            dash_.plc_running = false;
        }
        log_activity(sess->username, "stop", store_.active_program());
        res.set_redirect("/dashboard", 302);
    }

    void handle_reload_program(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        int id = std::atoi(req.get_param_value("table_id").c_str());
        auto rec = store_.find_program(id);
        if (!rec) {
            res.status = 404;
            res.set_content("404 unknown program\n", "text/plain");
            return;
        }
        std::string body = "<html><body><h1>Program Info</h1>\n";
        body += "Prog_ID: " + std::to_string(rec->prog_id) + "\n";
        body += "Program: " + rec->title + "\n";
        body += "File: " + rec->copy_name + "\n";
        body += "Uploaded: " + rec->upload_date + "\n";
        body += "</body></html>\n";
        res.set_content(body, "text/html");
    }

    void handle_update_program(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        int id = std::atoi(req.get_param_value("id").c_str());
        auto rec = store_.find_program(id);
        if (!rec) {
            res.status = 404;
            res.set_content("404 unknown program\n", "text/plain");
            return;
        }
        res.set_content("<html><body>Update " + rec->title + " (" + rec->copy_name +
                            ")\n<form action='/update-program-action'/></body></html>\n",
                        "text/html");
    }

    void handle_update_program_action(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        int id = std::atoi(req.get_param_value("id").c_str());
        std::string content = req.get_param_value("content");
        auto rec = store_.find_program(id);
        if (!rec) {
            res.status = 404;
            res.set_content("404 unknown program\n", "text/plain");
            return;
        }
        store_.overwrite_copy(id, to_bytes(content));
        log_activity(sess->username, "update", rec->copy_name);
        // The record keeps its original upload date; compile + start follow
        // automatically.
        start_compile_job(rec->copy_name, true);
        res.set_content("<html><body>Updated " + rec->copy_name + "\n</body></html>\n", "text/html");
    }

    void handle_remove_program(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        int id = std::atoi(req.get_param_value("id").c_str());
        auto rec = store_.find_program(id);
        if (!rec) {
            res.status = 404;
            res.set_content("404 unknown program\n", "text/plain");
            return;
        }
        if (profile() == Profile::Aqua) {
            auto outcome = aquasec::purge_program(store_, id);
            if (outcome.was_active) {
                std::lock_guard lk(state_mu_);
                dash_.alert = "Active program removed; compile the other programs.";
            }
        } else {
            store_.delete_program(id);  // the copy file stays behind
        }
        log_activity(sess->username, "remove", std::to_string(id));
        res.set_content("<html><body>Removed " + std::to_string(id) + "\n</body></html>\n",
                        "text/html");
    }

    void handle_hardware(const httplib::Request& req, httplib::Response& res) {
        auto sess = resolve_session(req);
        if (!sess) return unauthorized(res);
        std::string script = req.get_param_value("hook_script");

        struct HookCmd {
            bool is_log;
            std::string text;
            fs::path target;
            Bytes data;
        };
        std::vector<HookCmd> cmds;
        for (const auto& line : split_lines(script)) {
            if (line.empty()) continue;
            if (line.rfind("LOG ", 0) == 0) {
                cmds.push_back({true, line.substr(4), {}, {}});
            } else if (line.rfind("WRITE ", 0) == 0) {
                auto sp = line.find(' ', 6);
                if (sp == std::string::npos) return bad_script(res);
                std::string rel = line.substr(6, sp - 6);
                auto data = base64_decode(line.substr(sp + 1));
                if (!data || rel.empty() || rel.front() == '/' ||
                    rel.find("..") != std::string::npos)
                    return bad_script(res);
                if (profile() == Profile::Aqua && rel != "webserver/hook.psm") {
                    res.status = 403;
                    res.set_content("403 write refused\n", "text/plain");
                    return;
                }
                cmds.push_back({false, "", store_.root() / rel, *data});
            } else {
                return bad_script(res);
            }
        }

        for (const auto& c : cmds) {
            if (c.is_log) {
                std::lock_guard lk(state_mu_);
                dash_.runtime_log += c.text + "\n";
            } else {
                write_file_bytes(c.target, c.data);
            }
        }
        write_file_text(store_.webserver() / "hook.psm", script);
        log_activity(sess->username, "hook_save", "webserver/hook.psm");

        // Saving the hook recompiles the active program with no user-facing
        // notification; a fresh compile of mutated bytes goes live here.
        std::string idx = store_.active_program();
        fs::path copy = store_.webserver() / idx;
        if (!idx.empty() && idx != kTemporalProgram && fs::exists(copy)) {
            try {
                auto [compiled, log] = stlang::compile_source(read_file_text(copy));
                std::lock_guard lk(state_mu_);
                program_ = std::make_shared<const stlang::CompiledProgram>(std::move(compiled));
            } catch (const stlang::SyntaxError&) {
                // silent by design of the modeled flaw
            }
        }
        res.set_content("<html><body>Hook saved\n</body></html>\n", "text/html");
    }

    static void bad_script(httplib::Response& res) {
        res.status = 400;
        res.set_content("400 malformed script\n", "text/plain");
    }

    // ------------------------------------------------------------------
    // Compile job

    // One job at a time; a new request waits for the previous thread.
    void start_compile_job(const std::string& file, bool auto_start) {
        std::lock_guard lk(job_lifecycle_mu_);
        if (job_thread_.joinable()) job_thread_.join();
        {
            std::lock_guard slk(state_mu_);
            job_ = CompileJob{file, false, auto_start, ""};
        }
        job_thread_ = std::thread([this, file, auto_start] { run_compile_job(file, auto_start); });
    }

    void join_job() {
        std::lock_guard lk(job_lifecycle_mu_);
        if (job_thread_.joinable()) job_thread_.join();
    }

    void append_job_log(const std::string& text) {
        std::lock_guard lk(state_mu_);
        if (job_) job_->log += text;
    }

    void run_compile_job(const std::string& file, bool auto_start) {
        auto pause = [this] {
            std::this_thread::sleep_for(std::chrono::milliseconds(opt_.compile_step_ms));
        };
        std::string source;
        try {
            source = read_file_text(store_.webserver() / file);
            auto [compiled, log] = stlang::compile_source(source);
            // Emit in three visible increments: variable listing, progress
            // line, final sentinel.
            std::string vars;
            for (size_t i = 0; i + 2 < log.size(); ++i) vars += log[i] + "\n";
            append_job_log(vars);
            pause();
            append_job_log(log[log.size() - 2] + "\n");
            pause();
            store_.set_active_program(file);
            auto prog = std::make_shared<const stlang::CompiledProgram>(std::move(compiled));
            {
                std::lock_guard lk(state_mu_);
                program_ = std::move(prog);
                if (auto_start) dash_.plc_running = true;
                dash_.alert.clear();
                if (job_) {
                    job_->log += log.back() + "\n";
                    job_->done = true;
                }
            }
        } catch (const Error& e) {
            pause();
            std::lock_guard lk(state_mu_);
            if (job_) {
                job_->log += std::string("Error: ") + e.what() + "\n";
                job_->done = true;
            }
        }
    }

    // ------------------------------------------------------------------
    // Scan loop

    void scan_loop() {
        while (scan_running_) {
            std::shared_ptr<const stlang::CompiledProgram> prog;
            {
                std::lock_guard lk(state_mu_);
                if (dash_.plc_running) prog = program_;
            }
            if (prog) {
                {
                    std::lock_guard lk(regs_->mu);
                    regs_->regs = stlang::scan_cycle(*prog, regs_->regs).regs;
                }
                ++scan_count_;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(opt_.scan_period_ms));
        }
    }

    static std::string read_cert_fingerprint(const fs::path& cert_pem) {
        FILE* f = std::fopen(cert_pem.c_str(), "rb");
        if (!f) throw IoFailure("open " + cert_pem.string());
        X509* cert = PEM_read_X509(f, nullptr, nullptr, nullptr);
        std::fclose(f);
        if (!cert) throw Error("bad certificate " + cert_pem.string());
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int md_len = 0;
        bool ok = X509_digest(cert, EVP_sha256(), md, &md_len) == 1;
        X509_free(cert);
        if (!ok) throw Error("fingerprint failed");
        return hex_encode(md, md_len);
    }

    RuntimeOptions opt_;
    Store store_;
    aquasec::Vault vault_;
    aquasec::Whitelist whitelist_;
    std::unique_ptr<aquasec::ActivityLog> activity_;
    std::string tls_fingerprint_;
    std::function<std::string()> token_source_;

    std::mutex state_mu_;
    std::unordered_map<std::string, Session> sessions_;
    DashboardState dash_;
    std::optional<CompileJob> job_;
    std::shared_ptr<const stlang::CompiledProgram> program_;

    fieldbus::SharedRegsPtr regs_;
    std::unique_ptr<fieldbus::Server> modbus_;
    std::unique_ptr<httplib::Server> server_;
    std::thread http_thread_;
    std::mutex job_lifecycle_mu_;
    std::thread job_thread_;
    std::thread scan_thread_;
    std::atomic<bool> scan_running_{false};
    std::atomic<uint64_t> scan_count_{0};
    int http_port_ = -1;
};

}  // namespace plcforge
