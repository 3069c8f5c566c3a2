#include "edgehr/service/sync.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/vault/crypto.hpp"

#include "httplib.h"

#include <chrono>

namespace edgehr::service {

using nlohmann::json;

json vector_json(const vault::VersionVector& v) {
    json j = json::object();
    for (const auto& [dev, seq] : v) j[dev] = seq;
    return j;
}

vault::VersionVector vector_from(const json& j) {
    if (!j.is_object()) throw Error(errc::parse, "version vector must be an object");
    return j.get<vault::VersionVector>();
}

json meta_json(const vault::VersionMeta& m) {
    return {{"patient_id", m.patient_id},
            {"stamp", {{"ts", m.stamp.ts_ms}, {"device", m.stamp.device_id}, {"seq", m.stamp.seq}}},
            {"lineage", vector_json(m.lineage)},
            {"revision", m.revision},
            {"deleted", m.deleted}};
}

vault::VersionMeta meta_from(const json& j) {
    vault::VersionMeta m;
    m.patient_id = j.at("patient_id").get<std::string>();
    const auto& s = j.at("stamp");
    m.stamp = {s.at("ts").get<std::int64_t>(), s.at("device").get<std::string>(), s.at("seq").get<std::uint64_t>()};
    m.lineage = vector_from(j.at("lineage"));
    m.revision = j.at("revision").get<std::uint64_t>();
    m.deleted = j.at("deleted").get<bool>();
    return m;
}

json batch_json(const vault::SyncBatch& b) {
    json entries = json::array();
    for (const auto& e : b.entries) entries.push_back({{"meta", meta_json(e.meta)}, {"payload", vault::to_base64(e.payload)}});
    return {{"vector", vector_json(b.vector)}, {"entries", std::move(entries)}};
}

vault::SyncBatch batch_from(const json& j) {
    vault::SyncBatch b;
    b.vector = vector_from(j.at("vector"));
    for (const auto& e : j.at("entries")) {
        b.entries.push_back({meta_from(e.at("meta")), vault::from_base64(e.at("payload").get<std::string>())});
    }
    return b;
}

json apply_json(const vault::ApplyReport& r) {
    return {{"received", r.received}, {"applied", r.applied}, {"archived", r.archived}, {"skipped", r.skipped}};
}

vault::ApplyReport apply_from(const json& j) {
    vault::ApplyReport r;
    r.received = j.at("received").get<std::size_t>();
    r.applied = j.at("applied").get<std::size_t>();
    r.archived = j.at("archived").get<std::size_t>();
    r.skipped = j.at("skipped").get<std::size_t>();
    return r;
}

void check_protocol(const json& j) {
    if (!j.contains("protocol") || !j.at("protocol").is_number_integer() ||
        j.at("protocol").get<int>() != kSyncProtocolVersion) {
        throw Error(errc::unknown_version, "sync protocol mismatch");
    }
}

json to_json(const SyncReport& r) {
    json j{{"ok", r.ok},
           {"remote_device", r.remote_device},
           {"pulled", r.pulled},
           {"pushed", r.pushed},
           {"local", apply_json(r.local)},
           {"remote", apply_json(r.remote)},
           {"duration_ms", r.duration_ms}};
    if (!r.ok) j["error"] = r.error;
    return j;
}

HelloReply InProcessTransport::hello(const std::string&) {
    return {kSyncProtocolVersion, remote_.device_id(), remote_.vector()};
}

vault::SyncBatch InProcessTransport::pull(const std::string&, const vault::VersionVector& since) {
    return remote_.changes_since(since);
}

vault::ApplyReport InProcessTransport::push(const std::string& device_id, const vault::SyncBatch& batch) {
    auto report = remote_.apply(batch.entries, batch.vector);
    remote_.record_peer_ack(device_id, batch.vector);
    return report;
}

struct HttpTransport::Impl {
    std::string base_url;
    std::string username;
    std::string password;
    std::string token;
    std::unique_ptr<httplib::Client> client;
};

HttpTransport::HttpTransport(std::string base_url, std::string username, std::string password)
    : impl_(std::make_unique<Impl>()) {
    impl_->base_url = std::move(base_url);
    impl_->username = std::move(username);
    impl_->password = std::move(password);
    impl_->client = std::make_unique<httplib::Client>(impl_->base_url);
    if (!impl_->client->is_valid()) throw Error(errc::invalid_argument, "bad sync remote URL '" + impl_->base_url + "'");
    impl_->client->set_connection_timeout(5, 0);
    impl_->client->set_read_timeout(60, 0);
    impl_->client->set_write_timeout(60, 0);
}

HttpTransport::~HttpTransport() = default;

void HttpTransport::login() {
    const json body{{"username", impl_->username}, {"password", impl_->password}};
    auto res = impl_->client->Post("/auth/login", body.dump(), "application/json");
    if (!res) throw Error(errc::unavailable, "sync remote unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(errc::unauthenticated, "sync remote rejected the login");
    impl_->token = json::parse(res->body).at("token").get<std::string>();
}

json HttpTransport::post(const std::string& path, const json& body) {
    if (impl_->token.empty()) login();
    httplib::Headers headers{{"Authorization", "Bearer " + impl_->token}};
    auto res = impl_->client->Post(path, headers, body.dump(), "application/json");
    if (!res) throw Error(errc::unavailable, "sync remote unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) {
        std::string detail;
        try {
            detail = json::parse(res->body).at("error").at("message").get<std::string>();
        } catch (const std::exception&) {
            detail = "HTTP " + std::to_string(res->status);
        }
        const errc code = res->status == 401   ? errc::unauthenticated
                          : res->status == 403 ? errc::unauthorized
                          : res->status == 422 ? errc::unknown_version
                          : res->status == 503 ? errc::unavailable
                                               : errc::io;
        throw Error(code, "sync remote " + path + ": " + detail);
    }
    return json::parse(res->body);
}

HelloReply HttpTransport::hello(const std::string& device_id) {
    const json j = post("/sync/hello", {{"protocol", kSyncProtocolVersion}, {"device_id", device_id}});
    check_protocol(j);
    return {j.at("protocol").get<int>(), j.at("device_id").get<std::string>(), vector_from(j.at("vector"))};
}

vault::SyncBatch HttpTransport::pull(const std::string& device_id, const vault::VersionVector& since) {
    const json j = post("/sync/pull",
                        {{"protocol", kSyncProtocolVersion}, {"device_id", device_id}, {"since", vector_json(since)}});
    check_protocol(j);
    return batch_from(j);
}

vault::ApplyReport HttpTransport::push(const std::string& device_id, const vault::SyncBatch& batch) {
    json body = batch_json(batch);
    body["protocol"] = kSyncProtocolVersion;
    body["device_id"] = device_id;
    return apply_from(post("/sync/push", body));
}

SyncReport sync_run(vault::Store& local, SyncTransport& remote) {
    const auto start = std::chrono::steady_clock::now();
    SyncReport report;
    try {
        const HelloReply hello = remote.hello(local.device_id());
        if (hello.protocol != kSyncProtocolVersion) throw Error(errc::unknown_version, "sync protocol mismatch");
        if (hello.device_id == local.device_id()) throw Error(errc::conflict, "refusing to sync a store with itself");
        report.remote_device = hello.device_id;

        const vault::SyncBatch incoming = remote.pull(local.device_id(), local.vector());
        report.pulled = incoming.entries.size();
        report.local = local.apply(incoming.entries, incoming.vector);

        const vault::SyncBatch outgoing = local.changes_since(incoming.vector);
        report.pushed = outgoing.entries.size();
        report.remote = remote.push(local.device_id(), outgoing);

        vault::VersionVector acked = incoming.vector;
        for (const auto& [dev, seq] : outgoing.vector) acked[dev] = std::max(acked[dev], seq);
        local.record_peer_ack(hello.device_id, acked);
        report.ok = true;
    } catch (const std::exception& e) {
        report.ok = false;
        report.error = e.what();
    }
    report.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace edgehr::service
