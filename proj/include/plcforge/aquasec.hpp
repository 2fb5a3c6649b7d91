#pragma once

// Aqua-profile countermeasures: credential cipher, whitelist, upload
// verifier, hardening installer (key material, certificate, permission
// modes), purge with temporal_program fallback, and the activity log.
//
// Credentials are AES-128-CBC with PKCS#7 padding, Base64-encoded for
// storage. One key/IV pair serves both fields: passwords use (key, iv) as
// generated, usernames swap them, so the same plaintext yields two
// different ciphertexts without extra key material.

#include <atomic>
#include <cstring>
#include <mutex>
#include <string>
#include <vector>

#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>
#include <openssl/x509.h>

#include "plcforge/common.hpp"
#include "plcforge/store.hpp"

namespace plcforge::aquasec {

class BadEncoding : public Error {
public:
    BadEncoding() : Error("ciphertext is not valid Base64 of whole AES blocks") {}
};

class BadPadding : public Error {
public:
    BadPadding() : Error("decryption failed: bad padding") {}
};

enum class FieldKind { Username, Password };

struct Vault {
    std::array<uint8_t, 16> key{};
    std::array<uint8_t, 16> iv{};

    static Vault generate() {
        Vault v;
        do {
            if (RAND_bytes(v.key.data(), 16) != 1 || RAND_bytes(v.iv.data(), 16) != 1)
                throw Error("RAND_bytes failed");
        } while (v.key == v.iv);  // keep the swap meaningful
        return v;
    }

    void save(const fs::path& p) const {
        Bytes raw(32);
        std::memcpy(raw.data(), key.data(), 16);
        std::memcpy(raw.data() + 16, iv.data(), 16);
        write_file_bytes(p, raw);
    }

    static Vault load(const fs::path& p) {
        Bytes raw = read_file_bytes(p);
        if (raw.size() != 32) throw Error("vault file must be 32 bytes");
        Vault v;
        std::memcpy(v.key.data(), raw.data(), 16);
        std::memcpy(v.iv.data(), raw.data() + 16, 16);
        return v;
    }
};

inline fs::path vault_path(const fs::path& root) { return root / "secret.key"; }
inline fs::path whitelist_path(const fs::path& root) { return root / "whitelist.txt"; }
inline fs::path activity_log_path(const fs::path& root) { return root / "activity.log"; }
inline fs::path tls_cert_path(const fs::path& root) { return root / "cert.pem"; }
inline fs::path tls_key_path(const fs::path& root) { return root / "key.pem"; }

namespace detail {

struct CipherCtx {
    EVP_CIPHER_CTX* ctx;
    CipherCtx() : ctx(EVP_CIPHER_CTX_new()) {
        if (!ctx) throw Error("EVP_CIPHER_CTX_new failed");
    }
    ~CipherCtx() { EVP_CIPHER_CTX_free(ctx); }
};

inline void key_iv_for(FieldKind kind, const Vault& v, const uint8_t*& key, const uint8_t*& iv) {
    if (kind == FieldKind::Password) {
        key = v.key.data();
        iv = v.iv.data();
    } else {
        key = v.iv.data();  // swapped on purpose
        iv = v.key.data();
    }
}

}  // namespace detail

inline std::string encrypt_field(FieldKind kind, std::string_view plaintext, const Vault& vault) {
    if (plaintext.empty() || plaintext.size() > 256)
        throw Error("credential must be 1..256 bytes");
    const uint8_t *key, *iv;
    detail::key_iv_for(kind, vault, key, iv);
    detail::CipherCtx c;
    if (EVP_EncryptInit_ex(c.ctx, EVP_aes_128_cbc(), nullptr, key, iv) != 1)
        throw Error("EVP_EncryptInit failed");
    Bytes out(plaintext.size() + 16);
    int len1 = 0, len2 = 0;
    if (EVP_EncryptUpdate(c.ctx, out.data(), &len1,
                          reinterpret_cast<const uint8_t*>(plaintext.data()),
                          static_cast<int>(plaintext.size())) != 1)
        throw Error("EVP_EncryptUpdate failed");
    if (EVP_EncryptFinal_ex(c.ctx, out.data() + len1, &len2) != 1)
        throw Error("EVP_EncryptFinal failed");
    out.resize(len1 + len2);
    return base64_encode(out);
}

inline std::string decrypt_field(FieldKind kind, std::string_view encoded, const Vault& vault) {
    auto raw = base64_decode(encoded);
    if (!raw || raw->empty() || raw->size() % 16 != 0) throw BadEncoding();
    const uint8_t *key, *iv;
    detail::key_iv_for(kind, vault, key, iv);
    detail::CipherCtx c;
    if (EVP_DecryptInit_ex(c.ctx, EVP_aes_128_cbc(), nullptr, key, iv) != 1)
        throw Error("EVP_DecryptInit failed");
    Bytes out(raw->size() + 16);
    int len1 = 0, len2 = 0;
    if (EVP_DecryptUpdate(c.ctx, out.data(), &len1, raw->data(), static_cast<int>(raw->size())) != 1)
        throw BadPadding();
    if (EVP_DecryptFinal_ex(c.ctx, out.data() + len1, &len2) != 1) throw BadPadding();
    out.resize(len1 + len2);
    return to_string(out);
}

inline Bytes md5_digest(const Bytes& data) {
    Bytes out(EVP_MAX_MD_SIZE);
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_md5(), nullptr) != 1)
        throw Error("MD5 digest failed");
    out.resize(len);
    return out;
}

// ---------------------------------------------------------------------------
// Whitelist

class Whitelist {
public:
    Whitelist() = default;
    Whitelist(Whitelist&& o) noexcept
        : entries_(std::move(o.entries_)), consultations_(o.consultations_.load()) {}
    Whitelist& operator=(Whitelist&& o) noexcept {
        entries_ = std::move(o.entries_);
        consultations_ = o.consultations_.load();
        return *this;
    }

    void add(const std::string& username, const std::string& ip) {
        for (auto& e : entries_)
            if (e.first == username && e.second == ip) return;
        entries_.emplace_back(username, ip);
    }

    // Exact (username, ip) pair match. The consultation counter exists so
    // callers can prove when the list was not consulted at all.
    bool check(const std::string& username, const std::string& ip) const {
        ++consultations_;
        for (auto& e : entries_)
            if (e.first == username && e.second == ip) return true;
        return false;
    }

    int consultations() const { return consultations_.load(); }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    void save(const fs::path& p) const {
        std::string out;
        for (auto& e : entries_) out += e.first + " " + e.second + "\n";
        write_file_text(p, out);
    }

    static Whitelist load(const fs::path& p) {
        Whitelist w;
        for (const auto& line : split_lines(read_file_text(p))) {
            auto sp = line.find(' ');
            if (sp == std::string::npos) continue;
            w.add(line.substr(0, sp), line.substr(sp + 1));
        }
        return w;
    }

    static Whitelist seeded() {
        Whitelist w;
        w.add("openplc", "127.0.0.1");
        return w;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
    mutable std::atomic<int> consultations_{0};
};

// ---------------------------------------------------------------------------
// Upload verifier

struct VerifyResult {
    bool allowed = false;
    bool terminate_session = false;
};

// MD5 both files first; on a digest mismatch run the byte-by-byte
// comparison, in that order. Identical content is allowed without
// consulting the whitelist; any difference requires the (username, ip)
// pair to be registered, and a miss rejects and terminates the session.
inline VerifyResult verify_upload(const Bytes& active_copy, const Bytes& uploaded,
                                  const std::string& username, const std::string& ip,
                                  const Whitelist& list) {
    Bytes digest_active = md5_digest(active_copy);
    Bytes digest_uploaded = md5_digest(uploaded);
    bool identical;
    if (digest_active != digest_uploaded) {
        // Digest mismatch: the byte-by-byte comparison still runs before
        // any whitelist consultation.
        identical = active_copy == uploaded;
    } else {
        identical = active_copy == uploaded;  // digest collision guard
    }
    if (identical) return {true, false};
    if (list.check(username, ip)) return {true, false};
    return {false, true};
}

// ---------------------------------------------------------------------------
// TLS material

struct TlsMaterial {
    fs::path cert_path;
    fs::path key_path;
    std::string fingerprint_sha256;  // hex, for client pinning
};

inline TlsMaterial generate_tls_material(const fs::path& root) {
    EVP_PKEY* pkey = EVP_RSA_gen(2048);
    if (!pkey) throw Error("RSA keygen failed");
    X509* cert = X509_new();
    if (!cert) {
        EVP_PKEY_free(pkey);
        throw Error("X509_new failed");
    }
    X509_set_version(cert, 2);
    ASN1_INTEGER_set(X509_get_serialNumber(cert), 1);
    X509_gmtime_adj(X509_getm_notBefore(cert), 0);
    X509_gmtime_adj(X509_getm_notAfter(cert), 60L * 60 * 24 * 730);  // two years
    X509_set_pubkey(cert, pkey);
    X509_NAME* name = X509_get_subject_name(cert);
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                               reinterpret_cast<const unsigned char*>("plcforge-aqua"), -1, -1, 0);
    X509_set_issuer_name(cert, name);  // self-signed
    if (X509_sign(cert, pkey, EVP_sha256()) == 0) {
        X509_free(cert);
        EVP_PKEY_free(pkey);
        throw Error("X509_sign failed");
    }
    TlsMaterial out;
    out.cert_path = tls_cert_path(root);
    out.key_path = tls_key_path(root);
    FILE* cf = std::fopen(out.cert_path.c_str(), "wb");
    FILE* kf = std::fopen(out.key_path.c_str(), "wb");
    bool ok = cf && kf && PEM_write_X509(cf, cert) == 1 &&
              PEM_write_PrivateKey(kf, pkey, nullptr, nullptr, 0, nullptr, nullptr) == 1;
    if (cf) std::fclose(cf);
    if (kf) std::fclose(kf);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int md_len = 0;
    if (ok) ok = X509_digest(cert, EVP_sha256(), md, &md_len) == 1;
    X509_free(cert);
    EVP_PKEY_free(pkey);
    if (!ok) throw IoFailure("writing TLS material");
    out.fingerprint_sha256 = hex_encode(md, md_len);
    return out;
}

// ---------------------------------------------------------------------------
// Activity log

struct ActivityEntry {
    int64_t t_ms = 0;
    std::string actor;
    std::string action;
    std::string object;
    std::string detail;
};

class ActivityLog {
public:
    ActivityLog() = default;
    explicit ActivityLog(fs::path path, MsClock clock = system_ms_clock())
        : path_(std::move(path)), clock_(std::move(clock)) {}

    void append(const std::string& actor, const std::string& action, const std::string& object,
                const std::string& detail = "") {
        std::lock_guard lk(mu_);
        int64_t t = clock_();
        if (t < last_ms_) t = last_ms_;  // keep timestamps monotone
        last_ms_ = t;
        FILE* f = std::fopen(path_.c_str(), "ab");
        if (!f) throw IoFailure("open " + path_.string());
        std::string line = std::to_string(t) + "\t" + actor + "\t" + action + "\t" + object + "\t" +
                           detail + "\n";
        std::fwrite(line.data(), 1, line.size(), f);
        std::fclose(f);
    }

    std::vector<ActivityEntry> entries() const {
        std::vector<ActivityEntry> out;
        if (!fs::exists(path_)) return out;
        for (const auto& line : split_lines(read_file_text(path_))) {
            if (line.empty()) continue;
            ActivityEntry e;
            size_t p0 = line.find('\t');
            size_t p1 = line.find('\t', p0 + 1);
            size_t p2 = line.find('\t', p1 + 1);
            size_t p3 = line.find('\t', p2 + 1);
            if (p3 == std::string::npos) continue;
            e.t_ms = std::atoll(line.substr(0, p0).c_str());
            e.actor = line.substr(p0 + 1, p1 - p0 - 1);
            e.action = line.substr(p1 + 1, p2 - p1 - 1);
            e.object = line.substr(p2 + 1, p3 - p2 - 1);
            e.detail = line.substr(p3 + 1);
            out.push_back(std::move(e));
        }
        return out;
    }

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    MsClock clock_ = system_ms_clock();
    std::mutex mu_;
    int64_t last_ms_ = 0;
};

// ---------------------------------------------------------------------------
// Installer

struct HardenResult {
    Vault vault;
    TlsMaterial tls;
    fs::path whitelist_file;
};

// Applies the aqua hardening to a freshly initialized store: key material,
// self-signed certificate, seeded whitelist, credential re-encode, the
// temporal_program fallback copy, and owner-only modes on everything an
// outsider could otherwise read.
inline HardenResult harden_install(Store& store) {
    if (store.profile() != Profile::Aqua) throw Error("harden_install requires an aqua store");
    const fs::path root = store.root();

    HardenResult out;
    out.vault = Vault::generate();
    out.vault.save(vault_path(root));
    out.tls = generate_tls_material(root);

    Whitelist wl = Whitelist::seeded();
    wl.save(whitelist_path(root));
    out.whitelist_file = whitelist_path(root);

    for (const auto& u : store.users()) {
        store.set_user_credentials(u.user_id,
                                   encrypt_field(FieldKind::Username, u.username, out.vault),
                                   encrypt_field(FieldKind::Password, u.password, out.vault));
    }

    fs::copy_file(store.webserver() / "blank_program.st", store.webserver() / kTemporalProgram,
                  fs::copy_options::overwrite_existing);
    write_file_text(activity_log_path(root), "");

    store.set_mode("openplc.db", PermissionMode::OwnerOnly);
    store.set_mode("whitelist.txt", PermissionMode::OwnerOnly);
    store.set_mode("secret.key", PermissionMode::OwnerOnly);
    store.set_mode("key.pem", PermissionMode::OwnerOnly);
    store.set_mode("activity.log", PermissionMode::OwnerOnly);
    store.set_mode("webserver/hook.psm", PermissionMode::OwnerOnly);
    store.set_mode("webserver/active_program", PermissionMode::OwnerOnly);
    store.set_mode(fs::path("webserver") / kTemporalProgram, PermissionMode::OwnerOnly);
    for (const auto& entry : fs::directory_iterator(store.webserver())) {
        if (entry.path().extension() == ".st")
            store.set_mode(entry.path(), PermissionMode::OwnerOnly);
    }
    return out;
}

// Full profile-aware installation: seed the store, then harden when aqua.
inline Store install(const fs::path& root, Profile profile) {
    Store s = Store::init(root, profile);
    if (profile == Profile::Aqua) harden_install(s);
    return s;
}

// ---------------------------------------------------------------------------
// Purge with temporal fallback

struct PurgeOutcome {
    bool was_active = false;
};

// Removes the record and its copy; when the purged copy was the active
// one, the index falls back to temporal_program. The caller owns the
// dashboard alert and the start-plc kick-out that follow.
inline PurgeOutcome purge_program(Store& store, int prog_id) {
    auto rec = store.find_program(prog_id);
    if (!rec) throw UnknownProgram(prog_id);
    bool was_active = store.active_program() == rec->copy_name;
    store.delete_program(prog_id);
    if (was_active) store.set_active_program(kTemporalProgram);
    return {was_active};
}

}  // namespace plcforge::aquasec
