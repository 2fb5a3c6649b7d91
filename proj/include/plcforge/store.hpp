#pragma once

// Project store: the webserver/ directory, the openplc.db record file, ST
// copies, the active_program index, and a simulated permission model.
//
// The record file is plain text, one record per line, fields separated by
// the unit separator (0x1f), under [users] / [programs] / [settings]
// headers. All state lives on disk; accessors parse the file fresh so that
// out-of-band edits (a file-level attacker) are observed, and every
// mutation rewrites it. Reads and writes are checked against a mode
// sidecar (.modes) instead of real OS accounts, which keeps the two
// profiles testable without multi-user setup; native permission bits are
// set best-effort on top.

#include <algorithm>
#include <ctime>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "plcforge/common.hpp"

namespace plcforge {

enum class Profile { Legacy, Aqua };

inline const char* profile_name(Profile p) { return p == Profile::Legacy ? "legacy" : "aqua"; }

inline Profile profile_from_name(std::string_view s) {
    if (s == "legacy") return Profile::Legacy;
    if (s == "aqua") return Profile::Aqua;
    throw Error("unknown profile '" + std::string(s) + "'");
}

enum class FsIdentity { Root, Service, Other };

enum class PermissionMode { Open, OwnerOnly };

class AlreadyInitialized : public Error {
public:
    explicit AlreadyInitialized(const std::string& p) : Error("already initialized: " + p) {}
};

class PermissionDenied : public Error {
public:
    explicit PermissionDenied(const std::string& p) : Error("permission denied: " + p) {}
};

class NotFound : public Error {
public:
    explicit NotFound(const std::string& p) : Error("not found: " + p) {}
};

class MissingCopy : public Error {
public:
    explicit MissingCopy(const std::string& n) : Error("missing copy: " + n) {}
};

class UnknownProgram : public Error {
public:
    explicit UnknownProgram(int id) : Error("unknown program id " + std::to_string(id)) {}
};

struct UserRecord {
    int user_id = 0;
    std::string name;
    std::string username;  // plaintext in legacy, Base64 ciphertext in aqua
    std::string password;  // same encoding rule
    std::string email;
    std::string picture_path;  // empty when unset

    bool operator==(const UserRecord&) const = default;
};

struct ProgramRecord {
    int prog_id = 0;
    std::string title;
    std::string copy_name;    // six decimal digits + ".st"
    std::string upload_date;  // asctime form

    bool operator==(const ProgramRecord&) const = default;
};

inline bool valid_copy_name(std::string_view n) {
    if (n.size() != 9 || n.substr(6) != ".st") return false;
    return std::all_of(n.begin(), n.begin() + 6,
                       [](char c) { return c >= '0' && c <= '9'; });
}

constexpr const char* kTemporalProgram = "temporal_program";

constexpr int kDefaultUserId = 10;

class Store {
public:
    // Creates <root>/webserver and <root>/openplc.db, seeds the default
    // account and the blank program. Aqua-side hardening (vault, modes,
    // re-encoded credentials) is applied afterwards by aquasec.
    static Store init(const fs::path& root, Profile profile) {
        if (fs::exists(root / "openplc.db")) throw AlreadyInitialized(root.string());
        std::error_code ec;
        fs::create_directories(root / "webserver", ec);
        if (ec) throw IoFailure("create " + root.string());
        Store s(root, profile);
        UserRecord seed;
        seed.user_id = kDefaultUserId;
        seed.name = "OpenPLC User";
        seed.username = "openplc";
        seed.password = "openplc";
        seed.email = "openplc@openplc.com";
        DbState db;
        db.users.push_back(seed);
        db.next_prog_id = 1;
        s.write_db(db);
        write_file_text(s.webserver() / "blank_program.st", kBlankProgram);
        write_file_text(s.webserver() / "active_program", "");
        write_file_text(root / ".modes", "");
        write_file_text(root / ".profile", profile_name(profile));
        return s;
    }

    // Opens an existing store, inferring the profile from the marker file.
    static Store open(const fs::path& root) {
        if (!fs::exists(root / "openplc.db")) throw NotFound(root.string() + "/openplc.db");
        std::string prof = "legacy";
        if (fs::exists(root / ".profile")) prof = read_file_text(root / ".profile");
        return Store(root, profile_from_name(prof));
    }

    Store(Store&&) = default;
    Store& operator=(Store&&) = default;

    const fs::path& root() const { return root_; }
    fs::path webserver() const { return root_ / "webserver"; }
    fs::path db_path() const { return root_ / "openplc.db"; }
    Profile profile() const { return profile_; }

    void set_copy_rng(std::function<uint32_t()> rng) { copy_rng_ = std::move(rng); }
    void set_clock(std::function<std::time_t()> now) { now_ = std::move(now); }

    // ------------------------------------------------------------------
    // Records

    std::vector<UserRecord> users() const {
        std::shared_lock lk(*mu_);
        return read_db().users;
    }

    std::vector<ProgramRecord> programs() const {
        std::shared_lock lk(*mu_);
        return read_db().programs;
    }

    std::optional<ProgramRecord> find_program(int prog_id) const {
        for (auto& r : programs())
            if (r.prog_id == prog_id) return r;
        return std::nullopt;
    }

    std::optional<ProgramRecord> find_program_by_copy(std::string_view copy_name) const {
        for (auto& r : programs())
            if (r.copy_name == copy_name) return r;
        return std::nullopt;
    }

    // Writes webserver/<6 digits>.st with a name drawn uniformly from
    // 000000-999999, redrawing on collision.
    std::string save_copy(const Bytes& content) {
        std::unique_lock lk(*mu_);
        DbState db = read_db();
        std::string name;
        for (;;) {
            uint32_t n = copy_rng_() % 1000000;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%06u.st", n);
            name = buf;
            bool taken = fs::exists(webserver() / name);
            for (auto& r : db.programs) taken = taken || r.copy_name == name;
            if (!taken) break;
        }
        write_file_bytes(webserver() / name, content);
        if (profile_ == Profile::Aqua) set_mode_locked("webserver/" + name, PermissionMode::OwnerOnly);
        return name;
    }

    int insert_program(const std::string& title, const std::string& copy_name,
                       std::optional<std::time_t> now = std::nullopt) {
        std::unique_lock lk(*mu_);
        if (!fs::exists(webserver() / copy_name)) throw MissingCopy(copy_name);
        DbState db = read_db();
        ProgramRecord rec;
        rec.prog_id = db.next_prog_id++;
        rec.title = title;
        rec.copy_name = copy_name;
        rec.upload_date = format_asctime(now ? *now : now_());
        db.programs.push_back(rec);
        write_db(db);
        return rec.prog_id;
    }

    // Replaces the copy file; the program record, including upload_date,
    // stays untouched in both profiles.
    void overwrite_copy(int prog_id, const Bytes& content) {
        std::unique_lock lk(*mu_);
        DbState db = read_db();
        auto it = std::find_if(db.programs.begin(), db.programs.end(),
                               [&](const ProgramRecord& r) { return r.prog_id == prog_id; });
        if (it == db.programs.end()) throw MissingCopy("prog_id " + std::to_string(prog_id));
        write_file_bytes(webserver() / it->copy_name, content);
    }

    // Removes the record. Legacy leaves the copy file orphaned on disk;
    // aqua removes it as well.
    void delete_program(int prog_id) {
        std::unique_lock lk(*mu_);
        DbState db = read_db();
        auto it = std::find_if(db.programs.begin(), db.programs.end(),
                               [&](const ProgramRecord& r) { return r.prog_id == prog_id; });
        if (it == db.programs.end()) throw UnknownProgram(prog_id);
        std::string copy = it->copy_name;
        db.programs.erase(it);
        write_db(db);
        if (profile_ == Profile::Aqua) {
            std::error_code ec;
            fs::remove(webserver() / copy, ec);
        }
    }

    void set_user_credentials(int user_id, const std::string& username, const std::string& password) {
        std::unique_lock lk(*mu_);
        DbState db = read_db();
        for (auto& u : db.users) {
            if (u.user_id == user_id) {
                u.username = username;
                u.password = password;
                write_db(db);
                return;
            }
        }
        throw NotFound("user " + std::to_string(user_id));
    }

    // ------------------------------------------------------------------
    // Active-program index

    std::string active_program() const {
        std::shared_lock lk(*mu_);
        return read_file_text(webserver() / "active_program");
    }

    void set_active_program(const std::string& copy_name) {
        std::unique_lock lk(*mu_);
        write_file_text(webserver() / "active_program", copy_name);
    }

    // ------------------------------------------------------------------
    // Permission-checked file access

    Bytes read_as(FsIdentity identity, const fs::path& path) const {
        std::shared_lock lk(*mu_);
        fs::path abs = resolve(path);
        if (!allowed(identity, abs)) throw PermissionDenied(path.string());
        if (!fs::exists(abs) || fs::is_directory(abs)) throw NotFound(path.string());
        return read_file_bytes(abs);
    }

    void write_as(FsIdentity identity, const fs::path& path, const Bytes& content) {
        std::unique_lock lk(*mu_);
        fs::path abs = resolve(path);
        if (!allowed(identity, abs)) throw PermissionDenied(path.string());
        write_file_bytes(abs, content);
    }

    void set_mode(const fs::path& path, PermissionMode mode, const std::string& owner = "service") {
        std::unique_lock lk(*mu_);
        set_mode_locked(rel_string(resolve(path)), mode, owner);
    }

    PermissionMode mode_of(const fs::path& path) const {
        std::shared_lock lk(*mu_);
        return mode_of_locked(rel_string(resolve(path)));
    }

private:
    struct DbState {
        std::vector<UserRecord> users;
        std::vector<ProgramRecord> programs;
        int next_prog_id = 1;
    };

    static constexpr char kUnitSep = '\x1f';
    static constexpr const char* kBlankProgram =
        "PROGRAM blank\nVAR\nEND_VAR\nEND_PROGRAM\n";

    Store(fs::path root, Profile profile)
        : root_(std::move(root)), profile_(profile), mu_(std::make_unique<std::shared_mutex>()) {
        std::mt19937 eng(static_cast<uint32_t>(std::random_device{}()));
        copy_rng_ = [eng]() mutable { return eng(); };
        now_ = [] { return std::time(nullptr); };
    }

    fs::path resolve(const fs::path& p) const {
        fs::path abs = p.is_absolute() ? p : root_ / p;
        fs::path norm = abs.lexically_normal();
        fs::path base = root_.lexically_normal();
        auto rel = norm.lexically_relative(base);
        if (rel.empty() || rel.native().starts_with(".."))
            throw Error("path escapes project root: " + p.string());
        return norm;
    }

    std::string rel_string(const fs::path& abs) const {
        return abs.lexically_relative(root_.lexically_normal()).generic_string();
    }

    bool allowed(FsIdentity identity, const fs::path& abs) const {
        if (identity == FsIdentity::Root || identity == FsIdentity::Service) return true;
        return mode_of_locked(rel_string(abs)) == PermissionMode::Open;
    }

    PermissionMode mode_of_locked(const std::string& rel) const {
        for (const auto& line : split_lines(read_file_text_or_empty(root_ / ".modes"))) {
            if (line.empty()) continue;
            auto f1 = line.find('\t');
            auto f2 = line.find('\t', f1 + 1);
            if (f1 == std::string::npos || f2 == std::string::npos) continue;
            if (line.substr(0, f1) == rel)
                return line.substr(f2 + 1) == "owner_only" ? PermissionMode::OwnerOnly
                                                           : PermissionMode::Open;
        }
        return PermissionMode::Open;
    }

    void set_mode_locked(const std::string& rel, PermissionMode mode,
                         const std::string& owner = "service") {
        auto lines = split_lines(read_file_text_or_empty(root_ / ".modes"));
        std::string entry =
            rel + "\t" + owner + "\t" + (mode == PermissionMode::OwnerOnly ? "owner_only" : "open");
        bool replaced = false;
        std::string out;
        for (auto& line : lines) {
            if (line.empty()) continue;
            if (line.substr(0, line.find('\t')) == rel) {
                out += entry + "\n";
                replaced = true;
            } else {
                out += line + "\n";
            }
        }
        if (!replaced) out += entry + "\n";
        write_file_text(root_ / ".modes", out);
        std::error_code ec;
        fs::permissions(root_ / rel,
                        mode == PermissionMode::OwnerOnly
                            ? (fs::perms::owner_read | fs::perms::owner_write)
                            : (fs::perms::owner_all | fs::perms::group_read | fs::perms::others_read),
                        ec);  // best effort
    }

    static std::string read_file_text_or_empty(const fs::path& p) {
        return fs::exists(p) ? read_file_text(p) : std::string();
    }

    DbState read_db() const {
        DbState db;
        std::string text = read_file_text_or_empty(db_path());
        int max_id = 0;
        std::string section;
        for (const auto& line : split_lines(text)) {
            if (line.empty()) continue;
            if (line.front() == '[') {
                section = line;
                continue;
            }
            std::vector<std::string> f;
            size_t start = 0;
            for (;;) {
                size_t sep = line.find(kUnitSep, start);
                if (sep == std::string::npos) {
                    f.push_back(line.substr(start));
                    break;
                }
                f.push_back(line.substr(start, sep - start));
                start = sep + 1;
            }
            if (section == "[users]" && f.size() >= 5) {
                UserRecord u;
                u.user_id = std::atoi(f[0].c_str());
                u.name = f[1];
                u.username = f[2];
                u.password = f[3];
                u.email = f[4];
                u.picture_path = f.size() > 5 ? f[5] : "";
                db.users.push_back(std::move(u));
            } else if (section == "[programs]" && f.size() >= 4) {
                ProgramRecord r;
                r.prog_id = std::atoi(f[0].c_str());
                r.title = f[1];
                r.copy_name = f[2];
                r.upload_date = f[3];
                max_id = std::max(max_id, r.prog_id);
                db.programs.push_back(std::move(r));
            } else if (section == "[settings]" && f.size() >= 2 && f[0] == "next_prog_id") {
                db.next_prog_id = std::atoi(f[1].c_str());
            }
        }
        db.next_prog_id = std::max(db.next_prog_id, max_id + 1);
        return db;
    }

    void write_db(const DbState& db) {
        std::string out = "[users]\n";
        for (const auto& u : db.users) {
            out += std::to_string(u.user_id);
            out += kUnitSep;
            out += u.name;
            out += kUnitSep;
            out += u.username;
            out += kUnitSep;
            out += u.password;
            out += kUnitSep;
            out += u.email;
            out += kUnitSep;
            out += u.picture_path;
            out += '\n';
        }
        out += "[programs]\n";
        for (const auto& r : db.programs) {
            out += std::to_string(r.prog_id);
            out += kUnitSep;
            out += r.title;
            out += kUnitSep;
            out += r.copy_name;
            out += kUnitSep;
            out += r.upload_date;
            out += '\n';
        }
        out += "[settings]\n";
        out += std::string("next_prog_id") + kUnitSep + std::to_string(db.next_prog_id) + "\n";
        fs::path tmp = db_path();
        tmp += ".tmp";
        write_file_text(tmp, out);
        fs::rename(tmp, db_path());
    }

    fs::path root_;
    Profile profile_;
    mutable std::unique_ptr<std::shared_mutex> mu_;
    std::function<uint32_t()> copy_rng_;
    std::function<std::time_t()> now_;
};

}  // namespace plcforge
