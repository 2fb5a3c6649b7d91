#include "plcforge/aquasec.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace plcforge;
using namespace plcforge::aquasec;

namespace {

Vault vault_from_hex(const std::string& key_hex, const std::string& iv_hex) {
    Vault v;
    Bytes k = hex_decode(key_hex), i = hex_decode(iv_hex);
    std::copy(k.begin(), k.end(), v.key.begin());
    std::copy(i.begin(), i.end(), v.iv.begin());
    return v;
}

std::string random_credential(std::mt19937& rng) {
    static const char charset[] =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789!#%&";
    std::uniform_int_distribution<size_t> len(1, 32);
    std::uniform_int_distribution<size_t> pick(0, sizeof(charset) - 2);
    std::string s;
    size_t n = len(rng);
    for (size_t i = 0; i < n; ++i) s += charset[pick(rng)];
    return s;
}

}  // namespace

// NIST SP 800-38A, CBC-AES128.Encrypt (F.2.1): password mode uses the key
// and IV exactly as generated, so its output must match the vector.
TEST(Cipher, MatchesStandardCbcVectors) {
    Vault v = vault_from_hex("2b7e151628aed2a6abf7158809cf4f3c", "000102030405060708090a0b0c0d0e0f");
    Bytes plaintext = hex_decode(
        "6bc1bee22e409f96e93d7e117393172a"
        "ae2d8a571e03ac9c9eb76fac45af8e51"
        "30c81c46a35ce411e5fbc1191a0a52ef"
        "f69f2445df4f9b17ad2b417be66c3710");
    Bytes expected = hex_decode(
        "7649abac8119b246cee98e9b12e9197d"
        "5086cb9b507219ee95db113a917678b2"
        "73bed6b8e3c1743b7116e69e22229516"
        "3ff1caa1681fac09120eca307586e1a7");
    std::string cipher_b64 =
        encrypt_field(FieldKind::Password, std::string(plaintext.begin(), plaintext.end()), v);
    auto cipher = base64_decode(cipher_b64);
    ASSERT_TRUE(cipher.has_value());
    ASSERT_GE(cipher->size(), expected.size());
    EXPECT_TRUE(std::equal(expected.begin(), expected.end(), cipher->begin()));
    // PKCS#7 adds exactly one padding block for block-aligned input.
    EXPECT_EQ(cipher->size(), expected.size() + 16);
}

// Username mode swaps key and IV, so it must equal password mode under the
// swapped vault.
TEST(Cipher, UsernameModeIsKeyIvSwap) {
    Vault v = Vault::generate();
    Vault swapped;
    swapped.key = v.iv;
    swapped.iv = v.key;
    std::string p = "openplc";
    EXPECT_EQ(encrypt_field(FieldKind::Username, p, v), encrypt_field(FieldKind::Password, p, swapped));
}

TEST(Cipher, DistinctCiphersFromIdenticalString) {
    std::mt19937 rng(42);
    for (int i = 0; i < 200; ++i) {
        Vault v = Vault::generate();
        std::string p = random_credential(rng);
        EXPECT_NE(encrypt_field(FieldKind::Username, p, v), encrypt_field(FieldKind::Password, p, v));
    }
}

TEST(Cipher, RoundTrip) {
    std::mt19937 rng(7);
    Vault v = Vault::generate();
    for (int i = 0; i < 500; ++i) {
        std::string p = random_credential(rng);
        FieldKind kind = (i % 2 == 0) ? FieldKind::Username : FieldKind::Password;
        EXPECT_EQ(decrypt_field(kind, encrypt_field(kind, p, v), v), p);
    }
}

TEST(Cipher, CrossModeDecryptNeverSilentlySucceeds) {
    std::mt19937 rng(13);
    Vault v = Vault::generate();
    for (int i = 0; i < 100; ++i) {
        std::string p = random_credential(rng);
        std::string cipher = encrypt_field(FieldKind::Password, p, v);
        try {
            std::string wrong = decrypt_field(FieldKind::Username, cipher, v);
            EXPECT_NE(wrong, p);
        } catch (const BadPadding&) {
            // equally acceptable
        }
    }
}

TEST(Cipher, BadEncodingRejected) {
    Vault v = Vault::generate();
    EXPECT_THROW(decrypt_field(FieldKind::Password, "not base64!!", v), BadEncoding);
    // Valid Base64 of 5 bytes: not a whole number of AES blocks.
    EXPECT_THROW(decrypt_field(FieldKind::Password, base64_encode(std::string("hello")), v),
                 BadEncoding);
    EXPECT_THROW(decrypt_field(FieldKind::Password, "", v), BadEncoding);
}

TEST(Cipher, InputBoundsEnforced) {
    Vault v = Vault::generate();
    EXPECT_THROW(encrypt_field(FieldKind::Password, "", v), Error);
    EXPECT_THROW(encrypt_field(FieldKind::Password, std::string(257, 'x'), v), Error);
    EXPECT_NO_THROW(encrypt_field(FieldKind::Password, std::string(256, 'x'), v));
}

TEST(Vault, GenerateRejectsEqualKeyIv) {
    for (int i = 0; i < 32; ++i) {
        Vault v = Vault::generate();
        EXPECT_NE(v.key, v.iv);
    }
}

TEST(Vault, SaveLoadRoundTrip) {
    TempDir dir;
    Vault v = Vault::generate();
    v.save(dir.path() / "secret.key");
    EXPECT_EQ(fs::file_size(dir.path() / "secret.key"), 32u);
    Vault loaded = Vault::load(dir.path() / "secret.key");
    EXPECT_EQ(loaded.key, v.key);
    EXPECT_EQ(loaded.iv, v.iv);
}

TEST(Whitelist, PairSemantics) {
    Whitelist w = Whitelist::seeded();
    EXPECT_TRUE(w.check("openplc", "127.0.0.1"));
    EXPECT_FALSE(w.check("openplc", "10.0.0.5"));
    w.add("alice", "10.0.0.7");
    // A registered user from a different user's registered address is not a pair.
    EXPECT_FALSE(w.check("openplc", "10.0.0.7"));
    EXPECT_FALSE(w.check("alice", "127.0.0.1"));
    EXPECT_TRUE(w.check("alice", "10.0.0.7"));
    EXPECT_EQ(w.consultations(), 5);
}

TEST(Whitelist, SaveLoad) {
    TempDir dir;
    Whitelist w = Whitelist::seeded();
    w.add("alice", "10.0.0.7");
    w.save(dir.path() / "whitelist.txt");
    Whitelist loaded = Whitelist::load(dir.path() / "whitelist.txt");
    ASSERT_EQ(loaded.entries().size(), 2u);
    EXPECT_TRUE(loaded.check("alice", "10.0.0.7"));
}

TEST(VerifyUpload, IdenticalContentSkipsWhitelist) {
    Whitelist w = Whitelist::seeded();
    Bytes content = to_bytes("PROGRAM p VAR END_VAR END_PROGRAM");
    auto verdict = verify_upload(content, content, "nobody", "9.9.9.9", w);
    EXPECT_TRUE(verdict.allowed);
    EXPECT_FALSE(verdict.terminate_session);
    EXPECT_EQ(w.consultations(), 0);
}

TEST(VerifyUpload, DifferenceFromUnlistedPairRejectsAndTerminates) {
    Whitelist w = Whitelist::seeded();
    Bytes active = to_bytes("PROGRAM p VAR END_VAR END_PROGRAM");
    Bytes uploaded = active;
    uploaded[10] ^= 1;
    auto verdict = verify_upload(active, uploaded, "openplc", "10.0.0.5", w);
    EXPECT_FALSE(verdict.allowed);
    EXPECT_TRUE(verdict.terminate_session);
    EXPECT_EQ(w.consultations(), 1);
}

TEST(VerifyUpload, DifferenceFromListedPairAllowed) {
    Whitelist w = Whitelist::seeded();
    Bytes active = to_bytes("old");
    Bytes uploaded = to_bytes("new content entirely");
    auto verdict = verify_upload(active, uploaded, "openplc", "127.0.0.1", w);
    EXPECT_TRUE(verdict.allowed);
    EXPECT_FALSE(verdict.terminate_session);
}

TEST(VerifyUpload, TotalOverSizeCombos) {
    Whitelist w = Whitelist::seeded();
    std::vector<Bytes> samples = {Bytes{}, to_bytes("a"), to_bytes("ab"), to_bytes("abc")};
    for (const auto& a : samples) {
        for (const auto& u : samples) {
            auto verdict = verify_upload(a, u, "openplc", "127.0.0.1", w);
            EXPECT_EQ(verdict.allowed, true);  // pair is whitelisted, so always allowed
            auto verdict2 = verify_upload(a, u, "x", "0.0.0.0", w);
            EXPECT_EQ(verdict2.allowed, a == u);
        }
    }
}

TEST(HardenInstall, ProtectsSecretsAndSeedsFallback) {
    TempDir dir;
    Store store = Store::init(dir.path(), Profile::Aqua);
    HardenResult result = harden_install(store);

    EXPECT_THROW(store.read_as(FsIdentity::Other, "secret.key"), PermissionDenied);
    EXPECT_THROW(store.read_as(FsIdentity::Other, "whitelist.txt"), PermissionDenied);
    EXPECT_THROW(store.read_as(FsIdentity::Other, "key.pem"), PermissionDenied);
    EXPECT_NO_THROW(store.read_as(FsIdentity::Other, "cert.pem"));  // public material

    auto users = store.users();
    ASSERT_EQ(users.size(), 1u);
    EXPECT_EQ(decrypt_field(FieldKind::Username, users[0].username, result.vault), "openplc");
    EXPECT_EQ(decrypt_field(FieldKind::Password, users[0].password, result.vault), "openplc");

    fs::path temporal = store.webserver() / kTemporalProgram;
    ASSERT_TRUE(fs::exists(temporal));
    EXPECT_EQ(store.mode_of(temporal), PermissionMode::OwnerOnly);
    EXPECT_EQ(read_file_text(temporal), read_file_text(store.webserver() / "blank_program.st"));

    EXPECT_FALSE(result.tls.fingerprint_sha256.empty());
    EXPECT_TRUE(fs::exists(result.tls.cert_path));
    EXPECT_TRUE(fs::exists(result.tls.key_path));
}

// Hardening closure: nothing in the protected set stays world-readable.
TEST(HardenInstall, ClosureOverProtectedSet) {
    TempDir dir;
    Store store = Store::init(dir.path(), Profile::Aqua);
    harden_install(store);
    const char* protected_files[] = {"openplc.db", "whitelist.txt", "secret.key",
                                     "webserver/temporal_program"};
    for (const char* rel : protected_files) {
        EXPECT_THROW(store.read_as(FsIdentity::Other, rel), PermissionDenied) << rel;
    }
    // hook script mode applies even before the file exists
    EXPECT_EQ(store.mode_of(fs::path("webserver/hook.psm")), PermissionMode::OwnerOnly);
}

TEST(Purge, NonActiveProgram) {
    TempDir dir;
    Store store = aquasec::install(dir.path(), Profile::Aqua);
    std::string c1 = store.save_copy(to_bytes("one"));
    std::string c2 = store.save_copy(to_bytes("two"));
    int id1 = store.insert_program("p1", c1);
    store.insert_program("p2", c2);
    store.set_active_program(c2);
    auto outcome = purge_program(store, id1);
    EXPECT_FALSE(outcome.was_active);
    EXPECT_EQ(store.active_program(), c2);
    EXPECT_FALSE(fs::exists(store.webserver() / c1));
}

TEST(Purge, ActiveProgramFallsBackToTemporal) {
    TempDir dir;
    Store store = aquasec::install(dir.path(), Profile::Aqua);
    std::string c = store.save_copy(to_bytes("prog"));
    int id = store.insert_program("p", c);
    store.set_active_program(c);
    auto outcome = purge_program(store, id);
    EXPECT_TRUE(outcome.was_active);
    EXPECT_EQ(store.active_program(), kTemporalProgram);
    EXPECT_FALSE(fs::exists(store.webserver() / c));
    EXPECT_THROW(purge_program(store, id), UnknownProgram);
}

TEST(ActivityLog, AppendsWithMonotoneTimestamps) {
    TempDir dir;
    int64_t fake_now = 100;
    ActivityLog log(dir.path() / "activity.log", [&] { return fake_now; });
    log.append("openplc", "login", "session", "127.0.0.1");
    fake_now = 50;  // a clock going backwards must not produce out-of-order entries
    log.append("openplc", "upload", "898031.st");
    fake_now = 220;
    log.append("system", "purge", "5");
    auto entries = log.entries();
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].action, "login");
    EXPECT_EQ(entries[1].action, "upload");
    EXPECT_EQ(entries[1].object, "898031.st");
    for (size_t i = 1; i < entries.size(); ++i)
        EXPECT_GE(entries[i].t_ms, entries[i - 1].t_ms);
}
