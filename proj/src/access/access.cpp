#include "edgehr/access/access.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/time.hpp"

#include "json.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <charconv>
#include <cstring>

namespace edgehr::access {

using nlohmann::json;
using vault::Bytes;

namespace {

constexpr std::size_t kSaltBytes = 16;
constexpr std::size_t kHashBytes = 32;
constexpr std::size_t kTokenBytes = 24;

const std::vector<Permission> kAll{Permission::record_read,  Permission::record_write, Permission::screening_run,
                                   Permission::export_run,   Permission::sync_run,     Permission::admin_users};

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
bool parse_uint(std::string_view s, T& out) {
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

void check_roles(const std::set<std::string>& roles) {
    if (roles.empty()) throw Error(errc::invalid_argument, "a user needs at least one role");
    for (const auto& r : roles) {
        if (!default_roles().count(r)) throw Error(errc::invalid_argument, "unknown role '" + r + "'");
    }
}

json user_json(const User& u) {
    return {{"user_id", u.user_id}, {"username", u.username},   {"credential", u.credential},
            {"roles", u.roles},     {"revoked", u.revoked},     {"created_ms", u.created_ms}};
}

User user_from(const json& j) {
    User u;
    u.user_id = j.at("user_id").get<std::string>();
    u.username = j.at("username").get<std::string>();
    u.credential = j.at("credential").get<std::string>();
    u.roles = j.at("roles").get<std::set<std::string>>();
    u.revoked = j.at("revoked").get<bool>();
    u.created_ms = j.at("created_ms").get<std::int64_t>();
    return u;
}

} // namespace

std::string_view to_string(Permission p) noexcept {
    switch (p) {
    case Permission::record_read: return "record.read";
    case Permission::record_write: return "record.write";
    case Permission::screening_run: return "screening.run";
    case Permission::export_run: return "export.run";
    case Permission::sync_run: return "sync.run";
    case Permission::admin_users: return "admin.users";
    }
    return "unknown";
}

Permission parse_permission(std::string_view text) {
    for (auto p : kAll)
        if (to_string(p) == text) return p;
    throw Error(errc::invalid_argument, "unknown permission '" + std::string(text) + "'");
}

const std::vector<Permission>& all_permissions() { return kAll; }

const std::map<std::string, Role>& default_roles() {
    static const std::map<std::string, Role> roles{
        {"admin", {"admin", std::set<Permission>(kAll.begin(), kAll.end())}},
        {"clinician",
         {"clinician",
          {Permission::record_read, Permission::record_write, Permission::screening_run, Permission::export_run}}},
        {"screener", {"screener", {Permission::record_read, Permission::screening_run}}},
    };
    return roles;
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {}

void AuditLog::append(std::int64_t ts_ms, std::string_view user, std::string_view permission, std::string_view outcome) {
    std::string line = format_timestamp(ts_ms);
    line += ',';
    line += user.empty() ? "-" : user;
    line += ',';
    line += permission;
    line += ',';
    line += outcome;
    line += '\n';
    std::lock_guard lk(mu_);
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0600);
    if (fd < 0) throw Error(errc::io, "cannot open audit log " + path_.string());
    const ssize_t w = ::write(fd, line.data(), line.size());
    ::close(fd);
    if (w != static_cast<ssize_t>(line.size())) throw Error(errc::io, "short write to audit log");
}

bool valid_username(std::string_view name) noexcept {
    if (name.empty() || name.size() > 64) return false;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                        c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

std::string hash_password(std::string_view password, const vault::ScryptParams& params, vault::RandomSource& rng) {
    Bytes salt(kSaltBytes);
    rng.fill(salt);
    const auto hash = vault::scrypt(password, salt, params, kHashBytes);
    return "scrypt$" + std::to_string(params.n) + "$" + std::to_string(params.r) + "$" + std::to_string(params.p) + "$" +
           vault::to_hex(salt) + "$" + vault::to_hex(hash.view());
}

bool verify_password(std::string_view password, std::string_view credential) {
    const auto parts = split(credential, '$');
    if (parts.size() != 6 || parts[0] != "scrypt") return false;
    vault::ScryptParams params;
    if (!parse_uint(parts[1], params.n) || !parse_uint(parts[2], params.r) || !parse_uint(parts[3], params.p)) {
        return false;
    }
    try {
        const Bytes salt = vault::from_hex(parts[4]);
        const Bytes expected = vault::from_hex(parts[5]);
        const auto actual = vault::scrypt(password, salt, params, expected.size());
        return vault::equal_ct(actual.view(), expected);
    } catch (const Error&) {
        return false;
    }
}

AccessControl::AccessControl(vault::Store& store, AuditLog& audit, AccessConfig config, vault::RandomSource& rng)
    : clock(now_ms), store_(store), audit_(audit), config_(config), rng_(rng) {
    // Unknown usernames are checked against this so a miss costs one scrypt
    // like a hit does.
    dummy_credential_ = hash_password("unused dummy password", config_.password_kdf, rng_);
}

AccessControl::Table AccessControl::load() const {
    Table t;
    const auto bytes = store_.read_aux("users");
    if (!bytes) return t;
    const json j = json::parse(bytes->begin(), bytes->end());
    for (const auto& u : j.at("users")) t.users.push_back(user_from(u));
    return t;
}

void AccessControl::save(const Table& t) {
    json users = json::array();
    for (const auto& u : t.users) users.push_back(user_json(u));
    const std::string doc = json{{"users", users}}.dump();
    store_.write_aux("users", vault::as_bytes(doc));
}

User AccessControl::insert_user(const std::string& username, const std::string& password,
                                const std::set<std::string>& roles) {
    if (!valid_username(username)) throw Error(errc::invalid_argument, "username must be 1-64 characters of [A-Za-z0-9._-]");
    if (password.size() < config_.min_password_length) {
        throw Error(errc::invalid_argument,
                    "password must be at least " + std::to_string(config_.min_password_length) + " characters");
    }
    check_roles(roles);
    std::lock_guard lk(users_mu_);
    Table t = load();
    for (const auto& u : t.users) {
        if (u.username == username) throw Error(errc::conflict, "username '" + username + "' already exists");
    }
    User u;
    Bytes id(16);
    rng_.fill(id);
    u.user_id = vault::to_hex(id);
    u.username = username;
    u.credential = hash_password(password, config_.password_kdf, rng_);
    u.roles = roles;
    u.created_ms = clock();
    t.users.push_back(u);
    save(t);
    return u;
}

User AccessControl::create_user(const std::string& admin_token, const std::string& username, const std::string& password,
                                const std::set<std::string>& roles) {
    authorize(admin_token, Permission::admin_users);
    return insert_user(username, password, roles);
}

User AccessControl::add_user(const std::string& username, const std::string& password,
                             const std::set<std::string>& roles) {
    return insert_user(username, password, roles);
}

void AccessControl::set_roles(const std::string& username, const std::set<std::string>& roles) {
    check_roles(roles);
    std::lock_guard lk(users_mu_);
    Table t = load();
    for (auto& u : t.users) {
        if (u.username == username) {
            u.roles = roles;
            save(t);
            return;
        }
    }
    throw Error(errc::not_found, "unknown user '" + username + "'");
}

void AccessControl::revoke(const std::string& username) {
    std::lock_guard lk(users_mu_);
    Table t = load();
    for (auto& u : t.users) {
        if (u.username == username) {
            u.revoked = true;
            save(t);
            return;
        }
    }
    throw Error(errc::not_found, "unknown user '" + username + "'");
}

Session AccessControl::authenticate(const std::string& username, const std::string& password) {
    std::optional<User> user;
    {
        std::lock_guard lk(users_mu_);
        for (auto& u : load().users) {
            if (u.username == username) user = std::move(u);
        }
    }
    const bool ok = verify_password(password, user ? user->credential : dummy_credential_);
    const std::string who = valid_username(username) ? username : "?";
    const std::int64_t now = clock();
    if (!user || !ok || user->revoked) {
        const char* cause = !user ? "deny:unknown_user" : !ok ? "deny:bad_password" : "deny:revoked";
        audit_.append(now, who, "auth.login", cause);
        throw Error(errc::unauthenticated, "invalid credentials");
    }
    Bytes raw(kTokenBytes);
    rng_.fill(raw);
    Session s{vault::to_base64url(raw), user->user_id, now, now + config_.session_ttl_ms};
    {
        std::unique_lock lk(sessions_mu_);
        sessions_[s.token] = s;
    }
    audit_.append(now, who, "auth.login", "allow");
    return s;
}

void AccessControl::deny(std::string_view user, Permission p, std::string_view cause) {
    audit_.append(clock(), user, to_string(p), std::string("deny:") + std::string(cause));
    throw Error(errc::unauthorized, "access denied");
}

UserContext AccessControl::authorize(const std::string& token, Permission permission) {
    std::optional<Session> session;
    {
        std::shared_lock lk(sessions_mu_);
        const auto it = sessions_.find(token);
        if (it != sessions_.end()) session = it->second;
    }
    if (!session) deny("-", permission, "bad_token");

    std::optional<User> user;
    {
        std::lock_guard lk(users_mu_);
        for (auto& u : load().users) {
            if (u.user_id == session->user_id) user = std::move(u);
        }
    }
    const std::string who = user ? user->username : "-";
    if (clock() >= session->expires_at_ms) deny(who, permission, "expired");
    if (!user) deny(who, permission, "unknown_user");
    if (user->revoked) deny(who, permission, "revoked");

    UserContext ctx{user->user_id, user->username, user->roles, {}};
    for (const auto& r : user->roles) {
        const auto it = default_roles().find(r);
        if (it != default_roles().end()) ctx.permissions.insert(it->second.permissions.begin(), it->second.permissions.end());
    }
    if (!ctx.permissions.count(permission)) deny(who, permission, "missing_permission");
    audit_.append(clock(), who, to_string(permission), "allow");
    return ctx;
}

void AccessControl::logout(const std::string& token) {
    std::unique_lock lk(sessions_mu_);
    sessions_.erase(token);
}

std::vector<User> AccessControl::users() const {
    std::lock_guard lk(users_mu_);
    return load().users;
}

std::size_t AccessControl::session_count() const {
    std::shared_lock lk(sessions_mu_);
    return sessions_.size();
}

} // namespace edgehr::access
