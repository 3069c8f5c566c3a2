#include "doctest.h"

#include "edgehr/access/access.hpp"
#include "edgehr/common/error.hpp"
#include "edgehr/common/rng.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace edgehr;
using namespace edgehr::access;
namespace fs = std::filesystem;

namespace {

class SeededRandom final : public vault::RandomSource {
public:
    explicit SeededRandom(std::uint64_t seed) : rng_(seed) {}
    void fill(std::span<std::uint8_t> out) override {
        for (auto& b : out) b = static_cast<std::uint8_t>(rng_.below(256));
    }

private:
    Rng rng_;
};

errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return errc::io;
}

std::string message_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

AccessConfig fast_config() {
    AccessConfig c;
    c.password_kdf = {1u << 10, 8, 1};
    return c;
}

struct Fixture {
    fs::path dir;
    SeededRandom rng{7};
    vault::KeySpec key;
    std::unique_ptr<vault::Store> store;
    std::unique_ptr<AuditLog> audit;
    std::unique_ptr<AccessControl> ac;
    std::int64_t now = 1'800'000'000'000;

    explicit Fixture(const std::string& name) {
        dir = fs::temp_directory_path() / ("edgehr_test_access_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
        vault::write_key_file(dir / "master.key", rng);
        key = vault::KeySpec::from_key_file(dir / "master.key");
        vault::Store::init(dir / "store", key);
        store = vault::Store::open(dir / "store", key);
        audit = std::make_unique<AuditLog>(dir / "audit.log");
        ac = std::make_unique<AccessControl>(*store, *audit, fast_config(), rng);
        ac->clock = [this] { return now; };
    }
};

} // namespace

TEST_CASE("password hashing") {
    SeededRandom rng(1);
    const vault::ScryptParams p{1u << 10, 8, 1};
    const auto a = hash_password("correct horse battery", p, rng);
    const auto b = hash_password("correct horse battery", p, rng);
    CHECK(a != b); // per-user salt
    CHECK(a.rfind("scrypt$1024$8$1$", 0) == 0);
    CHECK(verify_password("correct horse battery", a));
    CHECK(verify_password("correct horse battery", b));
    CHECK_FALSE(verify_password("correct horse batterY", a));
    CHECK_FALSE(verify_password("", a));
    CHECK_FALSE(verify_password("correct horse battery", "scrypt$1024$8$1$zz$00"));
    CHECK_FALSE(verify_password("correct horse battery", "plain$x"));
    CHECK(a.find("correct") == std::string::npos);
}

TEST_CASE("roles and permissions") {
    const auto& roles = default_roles();
    CHECK(roles.at("admin").permissions.size() == all_permissions().size());
    CHECK(roles.at("screener").permissions == std::set<Permission>{Permission::record_read, Permission::screening_run});
    CHECK(roles.at("clinician").permissions.count(Permission::record_write));
    CHECK_FALSE(roles.at("clinician").permissions.count(Permission::admin_users));
    for (auto p : all_permissions()) CHECK(parse_permission(to_string(p)) == p);
    CHECK(code_of([] { parse_permission("record.delete"); }) == errc::invalid_argument);
    CHECK(valid_username("nurse.amina-2"));
    CHECK_FALSE(valid_username(""));
    CHECK_FALSE(valid_username("a,b"));
    CHECK_FALSE(valid_username(std::string(65, 'a')));
}

TEST_CASE("screener can read but not write; denial causes are audited") {
    Fixture f("screener");
    f.ac->add_user("nurse", "longpassword1", {"screener"});
    const auto s = f.ac->authenticate("nurse", "longpassword1");
    CHECK(s.token.size() >= 22);
    CHECK(s.expires_at_ms - s.issued_at_ms == 8LL * 3600 * 1000);

    const auto ctx = f.ac->authorize(s.token, Permission::record_read);
    CHECK(ctx.username == "nurse");
    const auto e_write = message_of([&] { f.ac->authorize(s.token, Permission::record_write); });
    const auto e_bad = message_of([&] { f.ac->authorize("not-a-token", Permission::record_read); });
    CHECK(code_of([&] { f.ac->authorize(s.token, Permission::record_write); }) == errc::unauthorized);
    CHECK(e_write == e_bad);

    f.now += 8LL * 3600 * 1000;
    const auto e_expired = message_of([&] { f.ac->authorize(s.token, Permission::record_read); });
    CHECK(e_expired == e_bad);

    const auto log = slurp(f.dir / "audit.log");
    CHECK(log.find(",nurse,auth.login,allow\n") != std::string::npos);
    CHECK(log.find(",nurse,record.read,allow\n") != std::string::npos);
    CHECK(log.find(",nurse,record.write,deny:missing_permission\n") != std::string::npos);
    CHECK(log.find(",-,record.read,deny:bad_token\n") != std::string::npos);
    CHECK(log.find(",nurse,record.read,deny:expired\n") != std::string::npos);
    std::istringstream lines(log);
    for (std::string line; std::getline(lines, line);) {
        int commas = 0;
        for (char c : line) commas += c == ',';
        CHECK(commas == 3);
    }
}

TEST_CASE("login failures are uniform") {
    Fixture f("login");
    f.ac->add_user("doc", "a-long-password", {"clinician"});
    const auto wrong = message_of([&] { f.ac->authenticate("doc", "a-long-passworD"); });
    const auto unknown = message_of([&] { f.ac->authenticate("nobody", "a-long-password"); });
    CHECK(wrong == unknown);
    CHECK(code_of([&] { f.ac->authenticate("doc", ""); }) == errc::unauthenticated);
    f.ac->revoke("doc");
    CHECK(message_of([&] { f.ac->authenticate("doc", "a-long-password"); }) == wrong);
    const auto log = slurp(f.dir / "audit.log");
    CHECK(log.find("doc,auth.login,deny:bad_password") != std::string::npos);
    CHECK(log.find("nobody,auth.login,deny:unknown_user") != std::string::npos);
    CHECK(log.find("doc,auth.login,deny:revoked") != std::string::npos);
}

TEST_CASE("revoking a user kills live sessions") {
    Fixture f("revoke");
    f.ac->add_user("doc", "a-long-password", {"clinician"});
    const auto s = f.ac->authenticate("doc", "a-long-password");
    CHECK_NOTHROW(f.ac->authorize(s.token, Permission::record_write));
    f.ac->revoke("doc");
    CHECK(code_of([&] { f.ac->authorize(s.token, Permission::record_write); }) == errc::unauthorized);
    CHECK(slurp(f.dir / "audit.log").find("doc,record.write,deny:revoked") != std::string::npos);
    CHECK(code_of([&] { f.ac->revoke("ghost"); }) == errc::not_found);
}

TEST_CASE("user management rules") {
    Fixture f("manage");
    f.ac->add_user("root", "admin-password", {"admin"});
    CHECK(code_of([&] { f.ac->add_user("root", "admin-password", {"admin"}); }) == errc::conflict);
    CHECK(code_of([&] { f.ac->add_user("short", "123456789", {"admin"}); }) == errc::invalid_argument);
    CHECK(code_of([&] { f.ac->add_user("x", "long-enough-pw", {"janitor"}); }) == errc::invalid_argument);
    CHECK(code_of([&] { f.ac->add_user("x", "long-enough-pw", {}); }) == errc::invalid_argument);
    CHECK(code_of([&] { f.ac->add_user("bad name", "long-enough-pw", {"admin"}); }) == errc::invalid_argument);

    const auto admin = f.ac->authenticate("root", "admin-password");
    f.ac->create_user(admin.token, "nurse", "nurse-password", {"screener"});
    const auto nurse = f.ac->authenticate("nurse", "nurse-password");
    CHECK(code_of([&] { f.ac->create_user(nurse.token, "evil", "evil-password", {"admin"}); }) == errc::unauthorized);

    f.ac->set_roles("nurse", {"clinician"});
    CHECK_NOTHROW(f.ac->authorize(nurse.token, Permission::record_write));

    f.ac->logout(admin.token);
    CHECK(code_of([&] { f.ac->authorize(admin.token, Permission::record_read); }) == errc::unauthorized);
    CHECK(f.ac->users().size() == 2);
}

TEST_CASE("users persist encrypted and no password reaches disk") {
    Fixture f("sentinel");
    const std::string pw = "PW-SENTINEL-93f1";
    f.ac->add_user("sentinel-user", pw, {"clinician"});
    f.ac->authenticate("sentinel-user", pw);
    CHECK_THROWS(f.ac->authenticate("sentinel-user", pw + "x"));

    f.ac.reset();
    f.store.reset();
    f.store = vault::Store::open(f.dir / "store", f.key);
    AccessControl again(*f.store, *f.audit, fast_config(), f.rng);
    CHECK_NOTHROW(again.authenticate("sentinel-user", pw));

    for (const auto& e : fs::recursive_directory_iterator(f.dir)) {
        if (!e.is_regular_file()) continue;
        const auto data = slurp(e.path());
        CHECK_MESSAGE(data.find("PW-SENTINEL") == std::string::npos, e.path().string());
        if (e.path().filename() != "audit.log") {
            CHECK_MESSAGE(data.find("sentinel-user") == std::string::npos, e.path().string());
        }
    }
}

TEST_CASE("sessions tolerate concurrent use") {
    Fixture f("threads");
    f.ac->add_user("doc", "a-long-password", {"clinician"});
    const auto s = f.ac->authenticate("doc", "a-long-password");
    std::atomic<int> ok{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 25; ++i) {
                f.ac->authorize(s.token, Permission::record_read);
                ++ok;
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(ok == 100);
}
