/**
 * @file access.hpp
 * @brief Users, roles, sessions and the audit trail.
 *
 * Users live in the encrypted store (aux document "users"). Passwords are
 * hashed with scrypt under a per-user salt. Sessions are held in memory
 * only and die with the process.
 *
 * Failures are deliberately coarse: every failed login is the same
 * errc::unauthenticated error, and every refused token (unknown, expired,
 * revoked user, missing permission) is the same errc::unauthorized error.
 * The audit log records the real cause.
 */

#pragma once

#include "edgehr/vault/crypto.hpp"
#include "edgehr/vault/store.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace edgehr::access {

enum class Permission { record_read, record_write, screening_run, export_run, sync_run, admin_users };

std::string_view to_string(Permission p) noexcept;
/// "record.read" and friends; errc::invalid_argument otherwise.
Permission parse_permission(std::string_view text);
const std::vector<Permission>& all_permissions();

struct Role {
    std::string name;
    std::set<Permission> permissions;
};

/// admin: everything; clinician: record read/write, screening, export;
/// screener: record read and screening.
const std::map<std::string, Role>& default_roles();

struct User {
    std::string user_id;
    std::string username;
    /// "scrypt$N$r$p$<salt hex>$<hash hex>"
    std::string credential;
    std::set<std::string> roles;
    bool revoked = false;
    std::int64_t created_ms = 0;
};

struct Session {
    std::string token;
    std::string user_id;
    std::int64_t issued_at_ms = 0;
    std::int64_t expires_at_ms = 0;
};

struct UserContext {
    std::string user_id;
    std::string username;
    std::set<std::string> roles;
    std::set<Permission> permissions;
};

struct AccessConfig {
    vault::ScryptParams password_kdf{1u << 14, 8, 1};
    std::int64_t session_ttl_ms = 8LL * 3600 * 1000;
    std::size_t min_password_length = 10;
};

/// Append-only `ts,user,permission,outcome` lines.
class AuditLog {
public:
    explicit AuditLog(std::filesystem::path path);
    void append(std::int64_t ts_ms, std::string_view user, std::string_view permission, std::string_view outcome);
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mu_;
};

/// 1 to 64 characters of [A-Za-z0-9._-].
bool valid_username(std::string_view name) noexcept;

std::string hash_password(std::string_view password, const vault::ScryptParams& params, vault::RandomSource& rng);
bool verify_password(std::string_view password, std::string_view credential);

class AccessControl {
public:
    AccessControl(vault::Store& store, AuditLog& audit, AccessConfig config = {},
                  vault::RandomSource& rng = vault::system_random());

    /// Gated by admin.users on `admin_token`. errc::conflict on a duplicate
    /// username, errc::invalid_argument on a short password, bad username or
    /// unknown role.
    User create_user(const std::string& admin_token, const std::string& username, const std::string& password,
                     const std::set<std::string>& roles);
    /// Operator path used by the CLI, which already holds the store key.
    User add_user(const std::string& username, const std::string& password, const std::set<std::string>& roles);
    void set_roles(const std::string& username, const std::set<std::string>& roles);
    void revoke(const std::string& username);

    Session authenticate(const std::string& username, const std::string& password);
    UserContext authorize(const std::string& token, Permission permission);
    void logout(const std::string& token);

    std::vector<User> users() const;
    std::size_t session_count() const;

    std::function<std::int64_t()> clock;

private:
    struct Table {
        std::vector<User> users;
    };
    Table load() const;
    void save(const Table& t);
    User insert_user(const std::string& username, const std::string& password, const std::set<std::string>& roles);
    [[noreturn]] void deny(std::string_view user, Permission p, std::string_view cause);

    vault::Store& store_;
    AuditLog& audit_;
    AccessConfig config_;
    vault::RandomSource& rng_;
    std::string dummy_credential_;

    mutable std::mutex users_mu_;
    mutable std::shared_mutex sessions_mu_;
    std::map<std::string, Session> sessions_;
};

} // namespace edgehr::access
