#include "plcforge/store.hpp"

#include <gtest/gtest.h>

#include <regex>
#include <set>

#include "plcforge/aquasec.hpp"

using namespace plcforge;

namespace {

std::vector<std::string> record_fields(const std::string& line) {
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

}  // namespace

TEST(InitStore, LegacySeedsReadablePlaintext) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    ASSERT_TRUE(fs::exists(s.db_path()));
    ASSERT_TRUE(fs::exists(s.webserver() / "blank_program.st"));
    ASSERT_TRUE(fs::exists(s.webserver() / "active_program"));
    EXPECT_EQ(s.active_program(), "");

    std::string db = read_file_text(s.db_path());
    int openplc_fields = 0;
    for (const auto& line : split_lines(db)) {
        for (const auto& f : record_fields(line))
            if (f == "openplc") ++openplc_fields;
    }
    EXPECT_EQ(openplc_fields, 2);  // username and password, line-readable

    auto users = s.users();
    ASSERT_EQ(users.size(), 1u);
    EXPECT_EQ(users[0].user_id, kDefaultUserId);
    EXPECT_EQ(users[0].name, "OpenPLC User");
    EXPECT_EQ(users[0].username, "openplc");
    EXPECT_EQ(users[0].password, "openplc");
}

TEST(InitStore, AquaSeedsEncodedCredentials) {
    TempDir dir;
    Store s = aquasec::install(dir.path(), Profile::Aqua);
    auto users = s.users();
    ASSERT_EQ(users.size(), 1u);
    EXPECT_NE(users[0].username, "openplc");
    EXPECT_TRUE(is_base64_text(users[0].username));
    EXPECT_TRUE(is_base64_text(users[0].password));
}

TEST(InitStore, SecondInitFails) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    EXPECT_THROW(Store::init(dir.path(), Profile::Legacy), AlreadyInitialized);
}

TEST(SaveCopy, NameFormatAndUniqueness) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    std::regex name_re("^[0-9]{6}\\.st$");
    std::string a = s.save_copy(to_bytes("x"));
    std::string b = s.save_copy(to_bytes("x"));
    EXPECT_TRUE(std::regex_match(a, name_re));
    EXPECT_TRUE(std::regex_match(b, name_re));
    EXPECT_NE(a, b);
}

TEST(SaveCopy, PinnedRngYieldsPaperName) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    int calls = 0;
    std::mt19937 fallback(1);
    s.set_copy_rng([&]() -> uint32_t { return calls++ == 0 ? 898031u : fallback(); });
    EXPECT_EQ(s.save_copy(to_bytes("demo")), "898031.st");
}

TEST(SaveCopy, RedrawsOnCollision) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    int calls = 0;
    s.set_copy_rng([&]() -> uint32_t {
        static const uint32_t seq[] = {111111, 111111, 222222};
        return seq[std::min(calls++, 2)];
    });
    EXPECT_EQ(s.save_copy(to_bytes("a")), "111111.st");
    EXPECT_EQ(s.save_copy(to_bytes("b")), "222222.st");  // first draw collided
}

TEST(InsertProgram, MonotonicIdsNeverReused) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    std::string c1 = s.save_copy(to_bytes("a"));
    std::string c2 = s.save_copy(to_bytes("b"));
    std::string c3 = s.save_copy(to_bytes("c"));
    int id1 = s.insert_program("p1", c1);
    int id2 = s.insert_program("p2", c2);
    EXPECT_GT(id2, id1);
    s.delete_program(id2);
    int id3 = s.insert_program("p3", c3);
    EXPECT_NE(id3, id2);
    EXPECT_GT(id3, id2);
}

TEST(InsertProgram, SameTitleTwiceMakesTwoRecords) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    std::string c1 = s.save_copy(to_bytes("a"));
    std::string c2 = s.save_copy(to_bytes("b"));
    int id1 = s.insert_program("same", c1);
    int id2 = s.insert_program("same", c2);
    EXPECT_NE(id1, id2);
    EXPECT_EQ(s.programs().size(), 2u);
}

TEST(InsertProgram, MissingCopyRejected) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    EXPECT_THROW(s.insert_program("p", "000000.st"), MissingCopy);
}

TEST(InsertProgram, DateIsAsctimeForm) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    std::string c = s.save_copy(to_bytes("a"));
    std::tm tmv{};
    tmv.tm_year = 123;  // 2023
    tmv.tm_mon = 6;     // July
    tmv.tm_mday = 5;
    tmv.tm_hour = 14;
    tmv.tm_min = 54;
    tmv.tm_sec = 1;
    tmv.tm_isdst = -1;
    int id = s.insert_program("user_program", c, std::mktime(&tmv));
    EXPECT_EQ(s.find_program(id)->upload_date, "Wed Jul  5 14:54:01 2023");
}

TEST(ReadAs, LegacyOpenForEveryone) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    Bytes db = s.read_as(FsIdentity::Other, "openplc.db");
    EXPECT_FALSE(db.empty());
}

TEST(ReadAs, AquaDeniesOtherAllowsRoot) {
    TempDir dir;
    Store s = aquasec::install(dir.path(), Profile::Aqua);
    EXPECT_THROW(s.read_as(FsIdentity::Other, "openplc.db"), PermissionDenied);
    EXPECT_THROW(s.read_as(FsIdentity::Other, "webserver/active_program"), PermissionDenied);
    EXPECT_FALSE(s.read_as(FsIdentity::Root, "openplc.db").empty());
    EXPECT_NO_THROW(s.read_as(FsIdentity::Service, "openplc.db"));
}

TEST(ReadAs, MissingFileIsNotFound) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    EXPECT_THROW(s.read_as(FsIdentity::Other, "nope.txt"), NotFound);
}

TEST(ReadAs, PathEscapeRejected) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    EXPECT_THROW(s.read_as(FsIdentity::Other, "../outside"), Error);
}

TEST(ReadAs, EnumerableOverWholeTree) {
    TempDir legacy_dir;
    Store legacy = aquasec::install(legacy_dir.path(), Profile::Legacy);
    legacy.insert_program("p", legacy.save_copy(to_bytes("x")));
    for (const auto& e : fs::recursive_directory_iterator(legacy.root())) {
        if (!e.is_regular_file()) continue;
        EXPECT_NO_THROW(legacy.read_as(FsIdentity::Other, e.path())) << e.path();
    }

    TempDir aqua_dir;
    Store aqua = aquasec::install(aqua_dir.path(), Profile::Aqua);
    aqua.insert_program("p", aqua.save_copy(to_bytes("x")));
    for (const auto& e : fs::recursive_directory_iterator(aqua.root())) {
        if (!e.is_regular_file()) continue;
        bool owner_only = aqua.mode_of(e.path()) == PermissionMode::OwnerOnly;
        if (owner_only)
            EXPECT_THROW(aqua.read_as(FsIdentity::Other, e.path()), PermissionDenied) << e.path();
        else
            EXPECT_NO_THROW(aqua.read_as(FsIdentity::Other, e.path())) << e.path();
    }
}

TEST(OverwriteCopy, RecordAndDateUntouched) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    std::string c = s.save_copy(to_bytes("original"));
    int id = s.insert_program("p", c);
    auto before = *s.find_program(id);
    s.overwrite_copy(id, to_bytes("mutated"));
    auto after = *s.find_program(id);
    EXPECT_EQ(before, after);
    EXPECT_EQ(read_file_text(s.webserver() / c), "mutated");
    EXPECT_NO_THROW(s.overwrite_copy(id, to_bytes("mutated")));  // identical bytes, no error
    EXPECT_THROW(s.overwrite_copy(9999, to_bytes("x")), MissingCopy);
}

TEST(DeleteProgram, LegacyLeavesOrphanCopy) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    std::string c = s.save_copy(to_bytes("x"));
    int id = s.insert_program("p", c);
    s.delete_program(id);
    EXPECT_TRUE(fs::exists(s.webserver() / c));
    EXPECT_FALSE(s.find_program(id).has_value());
    EXPECT_THROW(s.delete_program(12345), UnknownProgram);
}

TEST(DeleteProgram, AquaRemovesCopyKeepsIndex) {
    TempDir dir;
    Store s = aquasec::install(dir.path(), Profile::Aqua);
    std::string c1 = s.save_copy(to_bytes("one"));
    std::string c2 = s.save_copy(to_bytes("two"));
    int id1 = s.insert_program("p1", c1);
    s.insert_program("p2", c2);
    s.set_active_program(c2);
    s.delete_program(id1);
    EXPECT_FALSE(fs::exists(s.webserver() / c1));
    EXPECT_EQ(s.active_program(), c2);
}

TEST(Property, OrphanCountEqualsInsertsMinusRecords) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    std::vector<int> ids;
    int inserts = 0;
    for (int i = 0; i < 6; ++i) {
        std::string c = s.save_copy(to_bytes("p" + std::to_string(i)));
        ids.push_back(s.insert_program("p", c));
        ++inserts;
    }
    s.delete_program(ids[1]);
    s.delete_program(ids[4]);

    int copy_files = 0;
    for (const auto& e : fs::directory_iterator(s.webserver()))
        if (valid_copy_name(e.path().filename().string())) ++copy_files;
    int records = static_cast<int>(s.programs().size());
    EXPECT_EQ(copy_files - records, inserts - records);  // every orphan stays on disk
    EXPECT_EQ(copy_files, inserts);
}

TEST(Property, ProgIdsStrictlyIncreaseAcrossInterleavings) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    std::vector<int> observed;
    std::mt19937 rng(7);
    for (int i = 0; i < 12; ++i) {
        std::string c = s.save_copy(to_bytes(std::to_string(i)));
        observed.push_back(s.insert_program("p", c));
        if (rng() % 3 == 0 && !s.programs().empty()) s.delete_program(s.programs().front().prog_id);
    }
    for (size_t i = 1; i < observed.size(); ++i) EXPECT_GT(observed[i], observed[i - 1]);
}

TEST(Db, RoundTripByteIdenticalFields) {
    TempDir dir;
    std::vector<ProgramRecord> written;
    {
        Store s = Store::init(dir.path(), Profile::Legacy);
        for (int i = 0; i < 3; ++i) {
            std::string c = s.save_copy(to_bytes("src" + std::to_string(i)));
            s.insert_program("title with spaces " + std::to_string(i), c);
        }
        written = s.programs();
    }
    Store reopened = Store::open(dir.path());
    auto readback = reopened.programs();
    ASSERT_EQ(readback.size(), written.size());
    for (size_t i = 0; i < written.size(); ++i) EXPECT_EQ(readback[i], written[i]);
    auto users = reopened.users();
    ASSERT_EQ(users.size(), 1u);
    EXPECT_EQ(users[0].username, "openplc");
}

TEST(WriteAs, FollowsPermissionModel) {
    TempDir legacy_dir;
    Store legacy = Store::init(legacy_dir.path(), Profile::Legacy);
    EXPECT_NO_THROW(legacy.write_as(FsIdentity::Other, "webserver/active_program", to_bytes("x")));

    TempDir aqua_dir;
    Store aqua = aquasec::install(aqua_dir.path(), Profile::Aqua);
    EXPECT_THROW(aqua.write_as(FsIdentity::Other, "webserver/active_program", to_bytes("x")),
                 PermissionDenied);
    EXPECT_NO_THROW(aqua.write_as(FsIdentity::Root, "webserver/active_program", to_bytes("x")));
}

TEST(ActiveProgram, HoldsEmptyOrCopyName) {
    TempDir dir;
    Store s = Store::init(dir.path(), Profile::Legacy);
    EXPECT_EQ(s.active_program(), "");
    s.set_active_program("898031.st");
    EXPECT_EQ(s.active_program(), "898031.st");
    // The referenced file may be absent; that is a modeled failure mode.
    EXPECT_FALSE(fs::exists(s.webserver() / "898031.st"));
}
