/**
 * @file config.hpp
 * @brief Flat `key = value` configuration shared by `serve` and the CLI.
 *
 * Lines are `key = value`; `#` starts a comment line; relative paths
 * resolve against the config file's directory. Recognized keys:
 *
 *     listen_address   host:port, default 127.0.0.1:8080
 *     store_path       store directory (required)
 *     key_file         32-byte master key; empty means EDGEHR_PASSPHRASE
 *     model_path       model file for screening (required by serve)
 *     session_ttl_s    session lifetime in seconds, default 28800
 *     audit_log        default <store_path>/../audit.log
 *     error_log        where 500 details go, default stderr
 *     export_key       hex, at least 16 bytes; empty means a random key kept
 *                      in the store (aux document "export-key")
 *     sync_remote      base URL of the peer service, e.g. http://10.0.0.2:8080
 *     sync_user        account used on the peer (password from
 *                      EDGEHR_SYNC_PASSWORD)
 *     password_scrypt_n  scrypt cost for user passwords, default 16384
 *     static_dir       optional directory served at /app/
 *
 * Unknown keys are errc::parse so typos do not pass silently.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace edgehr::service {

inline constexpr const char* kSyncPasswordEnv = "EDGEHR_SYNC_PASSWORD";

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path store_path;
    std::filesystem::path key_file;
    std::filesystem::path model_path;
    std::int64_t session_ttl_s = 8 * 3600;
    std::filesystem::path audit_log;
    std::filesystem::path error_log;
    std::string export_key_hex;
    std::string sync_remote;
    std::string sync_user;
    std::uint64_t password_scrypt_n = 1u << 14;
    std::filesystem::path static_dir;
};

ServiceConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ServiceConfig load_config(const std::filesystem::path& path);

} // namespace edgehr::service
