#include "edgehr/service/server.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/time.hpp"
#include "edgehr/imaging/annotations.hpp"
#include "edgehr/imaging/codec.hpp"
#include "edgehr/imaging/stage_error.hpp"
#include "edgehr/service/export.hpp"

#include "httplib.h"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <shared_mutex>
#include <thread>

namespace edgehr::service {

using access::Permission;
using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";
constexpr int kRetryAfterSeconds = 2;

int status_for(errc code) {
    switch (code) {
    case errc::unauthenticated: return 401;
    case errc::unauthorized: return 403;
    case errc::not_found: return 404;
    case errc::conflict: return 409;
    case errc::parse:
    case errc::range:
    case errc::invalid_argument:
    case errc::degenerate:
    case errc::unknown_version:
    case errc::undefined_metric:
    case errc::convergence: return 422;
    case errc::unavailable: return 503;
    case errc::integrity:
    case errc::corruption:
    case errc::io: return 500;
    }
    return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::exception&) {
        throw Error(errc::parse, "request body is not valid JSON");
    }
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) return fallback;
    const std::string v = req.get_param_value(key);
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw Error(errc::invalid_argument, std::string(key) + " must be a non-negative integer");
    }
    return out;
}

std::optional<std::uint64_t> if_match(const httplib::Request& req) {
    if (!req.has_header("If-Match")) return std::nullopt;
    std::string v = req.get_header_value("If-Match");
    v.erase(std::remove(v.begin(), v.end(), '"'), v.end());
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw Error(errc::invalid_argument, "If-Match must be a revision number");
    return out;
}

std::string etag(std::uint64_t revision) { return "\"" + std::to_string(revision) + "\""; }

json record_body(const vault::PatientRecord& rec, std::uint64_t revision) {
    return {{"record", vault::to_json(rec)}, {"revision", revision}};
}

json screening_json(const vault::Screening& s) {
    json j = to_json(result_of(s));
    j["image_ref"] = s.image_ref;
    return j;
}

} // namespace

struct Service::Impl {
    ServiceDeps deps;
    httplib::Server server;
    std::thread thread;
    // Held shared by mutating requests and exclusively by a sync, so writes
    // arriving mid-sync are turned away with 503 instead of queuing.
    std::shared_mutex sync_mu;
    std::mutex log_mu;

    explicit Impl(ServiceDeps d) : deps(std::move(d)) {
        if (!deps.store || !deps.access) throw Error(errc::invalid_argument, "service needs a store and access control");
        routes();
    }

    void log_error(const std::string& id, const std::string& what) {
        const std::string line = format_timestamp(now_ms()) + " error " + id + ": " + what + "\n";
        std::lock_guard lk(log_mu);
        if (deps.error_log.empty()) {
            std::cerr << line << std::flush;
        } else {
            std::ofstream out(deps.error_log, std::ios::app);
            out << line;
        }
    }

    void fail(httplib::Response& res, const std::exception& e) {
        errc code = errc::io;
        bool known = false;
        if (const auto* err = dynamic_cast<const Error*>(&e)) {
            code = err->code();
            known = true;
        } else if (dynamic_cast<const json::exception*>(&e)) {
            code = errc::parse;
            known = true;
        }
        const int status = known ? status_for(code) : 500;
        if (status == 500) {
            vault::Bytes raw(8);
            vault::system_random().fill(raw);
            const std::string id = vault::to_hex(raw);
            log_error(id, e.what());
            send_json(res, 500, {{"error", {{"code", "internal"}, {"id", id}}}});
            return;
        }
        json err{{"code", std::string(to_string(code))}, {"message", e.what()}};
        if (const auto* st = dynamic_cast<const imaging::StageError*>(&e)) err["stage"] = st->stage();
        send_json(res, status, {{"error", err}});
    }

    template <class F>
    void guard(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            fail(res, e);
        }
    }

    access::UserContext auth(const httplib::Request& req, Permission p) {
        const std::string h = req.get_header_value("Authorization");
        constexpr std::string_view kBearer = "Bearer ";
        if (h.size() <= kBearer.size() || h.compare(0, kBearer.size(), kBearer) != 0) {
            throw Error(errc::unauthenticated, "authentication required");
        }
        return deps.access->authorize(h.substr(kBearer.size()), p);
    }

    std::shared_lock<std::shared_mutex> writer_gate(httplib::Response& res) {
        std::shared_lock lk(sync_mu, std::try_to_lock);
        if (!lk.owns_lock()) {
            res.set_header("Retry-After", std::to_string(kRetryAfterSeconds));
            throw Error(errc::unavailable, "sync in progress, retry shortly");
        }
        return lk;
    }

    std::unique_lock<std::shared_mutex> sync_gate(httplib::Response& res) {
        std::unique_lock lk(sync_mu, std::try_to_lock);
        if (!lk.owns_lock()) {
            res.set_header("Retry-After", std::to_string(kRetryAfterSeconds));
            throw Error(errc::unavailable, "store busy, retry shortly");
        }
        return lk;
    }

    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    Handler wrap(std::function<void(const httplib::Request&, httplib::Response&)> f) {
        return [this, f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
            guard(res, [&] { f(req, res); });
        };
    }

    void routes();

    // Endpoint bodies.
    void login(const httplib::Request& req, httplib::Response& res);
    void list_patients(const httplib::Request& req, httplib::Response& res);
    void create_patient(const httplib::Request& req, httplib::Response& res);
    void get_patient(const httplib::Request& req, httplib::Response& res);
    void update_patient(const httplib::Request& req, httplib::Response& res);
    void delete_patient(const httplib::Request& req, httplib::Response& res);
    void post_screening(const httplib::Request& req, httplib::Response& res);
    void list_screenings(const httplib::Request& req, httplib::Response& res);
    void export_csv(const httplib::Request& req, httplib::Response& res);
    void sync_run_endpoint(const httplib::Request& req, httplib::Response& res);
    void sync_hello(const httplib::Request& req, httplib::Response& res);
    void sync_pull(const httplib::Request& req, httplib::Response& res);
    void sync_push(const httplib::Request& req, httplib::Response& res);
    void health(const httplib::Request& req, httplib::Response& res);
};

void Service::Impl::routes() {
    server.set_payload_max_length(64u << 20);
    server.set_exception_handler([this](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            fail(res, e);
        } catch (...) {
            fail(res, std::runtime_error("unknown exception"));
        }
    });

    const std::string id = "/patients/([A-Za-z0-9_-]{1,64})";
    server.Post("/auth/login", wrap([this](auto& q, auto& s) { login(q, s); }));
    server.Post("/auth/logout", wrap([this](const httplib::Request& q, httplib::Response& s) {
        const std::string h = q.get_header_value("Authorization");
        if (h.rfind("Bearer ", 0) == 0) deps.access->logout(h.substr(7));
        s.status = 204;
    }));
    server.Get("/patients", wrap([this](auto& q, auto& s) { list_patients(q, s); }));
    server.Post("/patients", wrap([this](auto& q, auto& s) { create_patient(q, s); }));
    server.Get(id, wrap([this](auto& q, auto& s) { get_patient(q, s); }));
    server.Put(id, wrap([this](auto& q, auto& s) { update_patient(q, s); }));
    server.Delete(id, wrap([this](auto& q, auto& s) { delete_patient(q, s); }));
    server.Post(id + "/screenings", wrap([this](auto& q, auto& s) { post_screening(q, s); }));
    server.Get(id + "/screenings", wrap([this](auto& q, auto& s) { list_screenings(q, s); }));
    server.Get("/export/anonymized", wrap([this](auto& q, auto& s) { export_csv(q, s); }));
    server.Post("/sync/run", wrap([this](auto& q, auto& s) { sync_run_endpoint(q, s); }));
    server.Post("/sync/hello", wrap([this](auto& q, auto& s) { sync_hello(q, s); }));
    server.Post("/sync/pull", wrap([this](auto& q, auto& s) { sync_pull(q, s); }));
    server.Post("/sync/push", wrap([this](auto& q, auto& s) { sync_push(q, s); }));
    server.Get("/health", wrap([this](auto& q, auto& s) { health(q, s); }));

    if (!deps.static_dir.empty() && !server.set_mount_point("/app", deps.static_dir.string())) {
        throw Error(errc::io, "static_dir " + deps.static_dir.string() + " is not a directory");
    }
}

void Service::Impl::login(const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    if (!body.is_object() || !body.contains("username") || !body.contains("password") ||
        !body.at("username").is_string() || !body.at("password").is_string()) {
        throw Error(errc::unauthenticated, "invalid credentials");
    }
    const auto session =
        deps.access->authenticate(body.at("username").get<std::string>(), body.at("password").get<std::string>());
    json perms = json::array();
    std::set<std::string> roles;
    for (const auto& u : deps.access->users()) {
        if (u.user_id == session.user_id) roles = u.roles;
    }
    std::set<Permission> granted;
    for (const auto& r : roles) {
        const auto& p = access::default_roles().at(r).permissions;
        granted.insert(p.begin(), p.end());
    }
    for (auto p : granted) perms.push_back(std::string(access::to_string(p)));
    send_json(res, 200,
              {{"token", session.token},
               {"expires_at", format_timestamp(session.expires_at_ms)},
               {"roles", roles},
               {"permissions", perms}});
}

void Service::Impl::list_patients(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::record_read);
    const std::size_t limit = std::min(query_size(req, "limit", kDefaultLimit), kMaxLimit);
    const std::size_t offset = query_size(req, "offset", 0);
    json items = json::array();
    for (const auto& meta : deps.store->list(offset, limit)) {
        json item{{"patient_id", meta.patient_id},
                  {"revision", meta.revision},
                  {"updated_at", format_timestamp(meta.stamp.ts_ms)}};
        try {
            const auto rec = deps.store->get(meta.patient_id);
            item["name"] = rec.demographics.name;
            item["sex"] = rec.demographics.sex;
            item["birth_date"] = rec.demographics.birth_date;
            item["screening_count"] = rec.screenings.size();
            item["last_screening"] = rec.screenings.empty() ? json(nullptr) : screening_json(rec.screenings.back());
        } catch (const Error& e) {
            if (e.code() != errc::integrity && e.code() != errc::corruption) throw;
            item["integrity_error"] = true;
        }
        items.push_back(std::move(item));
    }
    send_json(res, 200,
              {{"items", items}, {"total", deps.store->size()}, {"limit", limit}, {"offset", offset}});
}

void Service::Impl::create_patient(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::record_write);
    auto gate = writer_gate(res);
    json body = parse_body(req);
    if (!body.is_object()) throw Error(errc::parse, "record must be an object");
    if (body.contains("screenings") && !body.at("screenings").empty()) {
        throw Error(errc::invalid_argument, "screenings are added through /patients/{id}/screenings");
    }
    if (!body.contains("patient_id")) {
        vault::Bytes raw(8);
        vault::system_random().fill(raw);
        body["patient_id"] = "p-" + vault::to_hex(raw);
    }
    const auto rec = vault::record_from_json(body);
    const auto meta = deps.store->put(rec, std::nullopt, true);
    res.set_header("ETag", etag(meta.revision));
    res.set_header("Location", "/patients/" + rec.patient_id);
    send_json(res, 201, record_body(rec, meta.revision));
}

void Service::Impl::get_patient(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::record_read);
    const auto v = deps.store->get_version(req.matches[1]);
    if (v.meta.deleted || !v.record) throw Error(errc::not_found, "unknown patient");
    res.set_header("ETag", etag(v.meta.revision));
    send_json(res, 200, record_body(*v.record, v.meta.revision));
}

void Service::Impl::update_patient(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::record_write);
    auto gate = writer_gate(res);
    const std::string id = req.matches[1];
    json body = parse_body(req);
    if (!body.is_object()) throw Error(errc::parse, "record must be an object");
    if (body.contains("screenings")) {
        throw Error(errc::invalid_argument, "screenings are append-only; use /patients/{id}/screenings");
    }
    if (!body.contains("patient_id")) body["patient_id"] = id;
    auto rec = vault::record_from_json(body);
    if (rec.patient_id != id) throw Error(errc::invalid_argument, "patient_id does not match the URL");
    const auto expected = if_match(req);

    for (int attempt = 0;; ++attempt) {
        const auto cur = deps.store->get_version(id);
        if (cur.meta.deleted || !cur.record) throw Error(errc::not_found, "unknown patient");
        if (expected && *expected != cur.meta.revision) throw Error(errc::conflict, "revision mismatch");
        rec.screenings = cur.record->screenings;
        try {
            const auto meta = deps.store->put(rec, cur.meta.revision);
            res.set_header("ETag", etag(meta.revision));
            send_json(res, 200, record_body(rec, meta.revision));
            return;
        } catch (const Error& e) {
            // Without If-Match the client asked for an unconditional
            // update; retry only so a concurrent screening is not dropped.
            if (e.code() != errc::conflict || expected || attempt >= 8) throw;
        }
    }
}

void Service::Impl::delete_patient(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::record_write);
    auto gate = writer_gate(res);
    const std::string id = req.matches[1];
    const auto m = deps.store->meta(id);
    if (!m || m->deleted) throw Error(errc::not_found, "unknown patient");
    deps.store->remove(id, if_match(req));
    res.status = 204;
}

void Service::Impl::post_screening(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::screening_run);
    auto gate = writer_gate(res);
    if (!deps.model) throw Error(errc::unavailable, "no model loaded");

    ScreeningRequest sr;
    sr.patient_id = req.matches[1];
    if (req.is_multipart_form_data()) {
        if (!req.has_file("image")) throw Error(errc::invalid_argument, "multipart screening needs an 'image' part");
        const auto image = req.get_file_value("image");
        sr.image_ref = image.filename;
        try {
            sr.image = imaging::decode_image(vault::as_bytes(image.content));
        } catch (const imaging::StageError&) {
            throw;
        } catch (const Error& e) {
            throw imaging::StageError(e.code(), "decode", e.what());
        }
        const std::string text = req.has_file("annotations") ? req.get_file_value("annotations").content : std::string{};
        try {
            sr.annotations = imaging::parse_annotations(text);
        } catch (const Error& e) {
            throw imaging::StageError(e.code(), "annotations", e.what());
        }
        if (req.has_file("model_version")) sr.model_version = req.get_file_value("model_version").content;
    } else {
        const json body = parse_body(req);
        if (!body.is_object() || !body.contains("features") || !body.at("features").is_array()) {
            throw Error(errc::invalid_argument, "JSON screening needs a 'features' array");
        }
        imaging::FeatureVector fv;
        fv.contract_version = body.value("contract_version", imaging::kFeatureContractVersion);
        fv.values = body.at("features").get<std::vector<double>>();
        sr.features = std::move(fv);
        sr.image_ref = body.value("image_ref", std::string{});
        sr.model_version = body.value("model_version", std::string{});
    }
    const auto result = run_screening(sr, *deps.model, *deps.store, [] { return now_ms(); });
    json j = to_json(result);
    j["image_ref"] = sr.image_ref;
    send_json(res, 201, j);
}

void Service::Impl::list_screenings(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::record_read);
    const auto rec = deps.store->get(req.matches[1]);
    std::vector<vault::Screening> s = rec.screenings;
    std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
    json items = json::array();
    for (const auto& x : s) items.push_back(screening_json(x));
    send_json(res, 200, {{"patient_id", rec.patient_id}, {"screenings", items}});
}

void Service::Impl::export_csv(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::export_run);
    const auto out = export_anonymized(*deps.store, deps.export_key);
    res.set_header("X-Skipped-Records", std::to_string(out.skipped_records));
    res.set_header("Content-Disposition", "attachment; filename=\"export.csv\"");
    res.status = 200;
    res.set_content(out.csv, "text/csv");
}

void Service::Impl::sync_run_endpoint(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::sync_run);
    if (!deps.sync_remote) throw Error(errc::invalid_argument, "no sync remote configured");
    auto gate = sync_gate(res);
    SyncReport report;
    try {
        auto transport = deps.sync_remote();
        report = sync_run(*deps.store, *transport);
    } catch (const std::exception& e) {
        report.ok = false;
        report.error = e.what();
    }
    send_json(res, report.ok ? 200 : 502, to_json(report));
}

void Service::Impl::sync_hello(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::sync_run);
    const json body = parse_body(req);
    check_protocol(body);
    send_json(res, 200,
              {{"protocol", kSyncProtocolVersion},
               {"device_id", deps.store->device_id()},
               {"vector", vector_json(deps.store->vector())}});
}

void Service::Impl::sync_pull(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::sync_run);
    const json body = parse_body(req);
    check_protocol(body);
    json out = batch_json(deps.store->changes_since(vector_from(body.at("since"))));
    out["protocol"] = kSyncProtocolVersion;
    out["device_id"] = deps.store->device_id();
    send_json(res, 200, out);
}

void Service::Impl::sync_push(const httplib::Request& req, httplib::Response& res) {
    auth(req, Permission::sync_run);
    const json body = parse_body(req);
    check_protocol(body);
    const std::string peer = body.at("device_id").get<std::string>();
    const auto batch = batch_from(body);
    auto gate = sync_gate(res);
    const auto report = deps.store->apply(batch.entries, batch.vector);
    deps.store->record_peer_ack(peer, batch.vector);
    send_json(res, 200, apply_json(report));
}

void Service::Impl::health(const httplib::Request&, httplib::Response& res) {
    send_json(res, 200,
              {{"status", "ok"},
               {"model_version", deps.model ? json(deps.model->version) : json(nullptr)},
               {"store_version", deps.store->header().format_version},
               {"sync_protocol", kSyncProtocolVersion}});
}

Service::Service(ServiceDeps deps) : impl_(std::make_unique<Impl>(std::move(deps))) {}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw Error(errc::io, "cannot bind " + host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        throw Error(errc::io, "cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void Service::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw Error(errc::io, "cannot listen on " + host + ":" + std::to_string(port));
}

void Service::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

vault::Bytes export_key_for(const ServiceConfig& config, vault::Store& store) {
    if (!config.export_key_hex.empty()) {
        vault::Bytes key;
        try {
            key = vault::from_hex(config.export_key_hex);
        } catch (const Error&) {
            throw Error(errc::invalid_argument, "export_key must be hex");
        }
        if (key.size() < 16) throw Error(errc::invalid_argument, "export_key must be at least 16 bytes");
        return key;
    }
    if (auto existing = store.read_aux("export-key")) return *existing;
    vault::Bytes key(32);
    vault::system_random().fill(key);
    store.write_aux("export-key", key);
    return key;
}

std::unique_ptr<App> App::open(const ServiceConfig& config, bool require_model) {
    auto app = std::make_unique<App>();
    app->config = config;
    app->store = vault::Store::open(config.store_path, vault::key_spec_from(config.key_file));
    app->audit = std::make_unique<access::AuditLog>(config.audit_log);
    access::AccessConfig ac;
    ac.password_kdf.n = config.password_scrypt_n;
    ac.session_ttl_ms = config.session_ttl_s * 1000;
    app->access = std::make_unique<access::AccessControl>(*app->store, *app->audit, ac);
    if (!config.model_path.empty()) {
        app->model = std::make_shared<const LoadedModel>(LoadedModel::from_file(config.model_path));
    } else if (require_model) {
        throw Error(errc::invalid_argument, "config: model_path is required");
    }
    app->export_key = export_key_for(config, *app->store);
    return app;
}

ServiceDeps App::deps() {
    ServiceDeps d;
    d.store = store.get();
    d.access = access.get();
    d.model = model;
    d.export_key = export_key;
    d.error_log = config.error_log;
    d.static_dir = config.static_dir;
    if (!config.sync_remote.empty()) {
        const std::string url = config.sync_remote;
        const std::string user = config.sync_user;
        d.sync_remote = [url, user]() -> std::unique_ptr<SyncTransport> {
            const char* pw = std::getenv(kSyncPasswordEnv);
            return std::make_unique<HttpTransport>(url, user, pw ? pw : "");
        };
    }
    return d;
}

} // namespace edgehr::service
