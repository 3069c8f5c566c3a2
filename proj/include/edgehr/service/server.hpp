/**
 * @file server.hpp
 * @brief HTTP API over the store, access control and the screening model.
 *
 * docs/api.md lists every endpoint with its permission and payloads.
 * Errors are JSON `{"error": {"code", "message"}}` with status 401, 403,
 * 404, 409, 422 or 503; anything unexpected is a 500 carrying only an
 * opaque id, with the detail written to the error log.
 */

#pragma once

#include "edgehr/access/access.hpp"
#include "edgehr/service/config.hpp"
#include "edgehr/service/screening.hpp"
#include "edgehr/service/sync.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace edgehr::service {

struct ServiceDeps {
    vault::Store* store = nullptr;
    access::AccessControl* access = nullptr;
    /// Without a model the screening endpoint answers 503.
    std::shared_ptr<const LoadedModel> model;
    vault::Bytes export_key;
    /// Builds a transport to the configured peer; empty when none is configured.
    std::function<std::unique_ptr<SyncTransport>()> sync_remote;
    /// Empty means stderr.
    std::filesystem::path error_log;
    std::filesystem::path static_dir;
};

class Service {
public:
    explicit Service(ServiceDeps deps);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port;
    /// the bound port is returned. errc::io when binding fails.
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

    /// Default page size and its cap for list endpoints.
    static constexpr std::size_t kDefaultLimit = 50;
    static constexpr std::size_t kMaxLimit = 500;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Everything `serve` needs, opened from a config: the store (read-write),
/// audit log, access control, model and export key. The export key comes
/// from the config or, failing that, from a random key kept in the store.
struct App {
    ServiceConfig config;
    std::unique_ptr<vault::Store> store;
    std::unique_ptr<access::AuditLog> audit;
    std::unique_ptr<access::AccessControl> access;
    std::shared_ptr<const LoadedModel> model;
    vault::Bytes export_key;

    static std::unique_ptr<App> open(const ServiceConfig& config, bool require_model = true);
    ServiceDeps deps();
};

vault::Bytes export_key_for(const ServiceConfig& config, vault::Store& store);

} // namespace edgehr::service
