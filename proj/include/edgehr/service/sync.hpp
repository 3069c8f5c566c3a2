/**
 * @file sync.hpp
 * @brief Explicit two-party store synchronization.
 *
 * One round: hello (protocol check, learn the peer's device id), pull the
 * peer's versions this store has not seen and apply them locally, then push
 * this store's versions the peer has not seen. Versions travel as the sealed
 * record files, so payloads stay encrypted on the wire; peers share the
 * store key (see InitOptions::join).
 *
 * Wire messages are JSON:
 *
 *   hello request  {protocol, device_id}
 *   hello reply    {protocol, device_id, vector}
 *   pull request   {protocol, device_id, since: vector}
 *   pull reply     {protocol, device_id, vector, entries: [{meta, payload}]}
 *   push request   {protocol, device_id, vector, entries}
 *   push reply     {received, applied, archived, skipped}
 *
 * `payload` is base64 of the sealed bytes and `meta` is the version
 * metadata (patient id, stamp, lineage, revision, deleted).
 */

#pragma once

#include "edgehr/vault/store.hpp"

#include "json.hpp"

#include <memory>
#include <mutex>
#include <string>

namespace edgehr::service {

inline constexpr int kSyncProtocolVersion = 1;

struct HelloReply {
    int protocol = kSyncProtocolVersion;
    std::string device_id;
    vault::VersionVector vector;
};

class SyncTransport {
public:
    virtual ~SyncTransport() = default;
    virtual HelloReply hello(const std::string& device_id) = 0;
    virtual vault::SyncBatch pull(const std::string& device_id, const vault::VersionVector& since) = 0;
    virtual vault::ApplyReport push(const std::string& device_id, const vault::SyncBatch& batch) = 0;
};

/// Talks to a Store in the same process. The mutex serializes access when
/// several transports share one remote store.
class InProcessTransport final : public SyncTransport {
public:
    explicit InProcessTransport(vault::Store& remote) : remote_(remote) {}
    HelloReply hello(const std::string& device_id) override;
    vault::SyncBatch pull(const std::string& device_id, const vault::VersionVector& since) override;
    vault::ApplyReport push(const std::string& device_id, const vault::SyncBatch& batch) override;

private:
    vault::Store& remote_;
};

/// Speaks the wire protocol to another service's /sync/* endpoints. Logs in
/// with the given credentials on first use. Network failures are
/// errc::unavailable.
class HttpTransport final : public SyncTransport {
public:
    HttpTransport(std::string base_url, std::string username, std::string password);
    ~HttpTransport() override;
    HelloReply hello(const std::string& device_id) override;
    vault::SyncBatch pull(const std::string& device_id, const vault::VersionVector& since) override;
    vault::ApplyReport push(const std::string& device_id, const vault::SyncBatch& batch) override;

private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body);
    void login();

    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct SyncReport {
    bool ok = false;
    std::string error;
    std::string remote_device;
    std::size_t pulled = 0;
    std::size_t pushed = 0;
    vault::ApplyReport local;
    vault::ApplyReport remote;
    double duration_ms = 0.0;
};

nlohmann::json to_json(const SyncReport& r);

/// One full round against `remote`. Transport and protocol failures are
/// reported in the result (ok=false) instead of thrown; when the failure
/// happens before the pull is applied, the local store is untouched.
SyncReport sync_run(vault::Store& local, SyncTransport& remote);

// Wire helpers shared by the transports and the HTTP peer endpoints.
nlohmann::json vector_json(const vault::VersionVector& v);
vault::VersionVector vector_from(const nlohmann::json& j);
nlohmann::json meta_json(const vault::VersionMeta& m);
vault::VersionMeta meta_from(const nlohmann::json& j);
nlohmann::json batch_json(const vault::SyncBatch& b);
vault::SyncBatch batch_from(const nlohmann::json& j);
nlohmann::json apply_json(const vault::ApplyReport& r);
vault::ApplyReport apply_from(const nlohmann::json& j);
/// errc::unknown_version unless j["protocol"] is kSyncProtocolVersion.
void check_protocol(const nlohmann::json& j);

} // namespace edgehr::service
