#include "edgehr/vault/store.hpp"

#include "edgehr/common/error.hpp"
#include "edgehr/common/time.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

namespace edgehr::vault {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kKeyCheckLabel = "edgehr/v1/key-check";
constexpr std::size_t kTagOffset = 4 + 2 + kBlockSize;

std::string record_key(const std::string& id) { return "records/" + id + ".enc"; }

std::string archive_key(const VersionMeta& m) {
    return "conflicts/" + m.patient_id + "/" + std::to_string(m.stamp.ts_ms) + "-" + m.stamp.device_id + "-" +
           std::to_string(m.stamp.seq) + ".enc";
}

json stamp_json(const Stamp& s) { return {{"ts", s.ts_ms}, {"device", s.device_id}, {"seq", s.seq}}; }

Stamp stamp_from(const json& j) {
    return {j.at("ts").get<std::int64_t>(), j.at("device").get<std::string>(), j.at("seq").get<std::uint64_t>()};
}

json meta_json(const VersionMeta& m) {
    return {{"patient_id", m.patient_id}, {"stamp", stamp_json(m.stamp)}, {"lineage", m.lineage},
            {"revision", m.revision},     {"deleted", m.deleted}};
}

VersionMeta meta_from(const json& j) {
    VersionMeta m;
    m.patient_id = j.at("patient_id").get<std::string>();
    m.stamp = stamp_from(j.at("stamp"));
    m.lineage = j.at("lineage").get<VersionVector>();
    m.revision = j.at("revision").get<std::uint64_t>();
    m.deleted = j.at("deleted").get<bool>();
    return m;
}

json header_json(const StoreHeader& h) {
    return {{"format_version", h.format_version},
            {"device_id", h.device_id},
            {"kdf", h.kdf},
            {"salt", to_hex(h.salt)},
            {"scrypt", {{"n", h.scrypt.n}, {"r", h.scrypt.r}, {"p", h.scrypt.p}}},
            {"key_check", h.key_check},
            {"key_epoch", h.key_epoch}};
}

StoreHeader header_from(const json& j) {
    StoreHeader h;
    h.format_version = j.at("format_version").get<int>();
    if (h.format_version != kStoreFormatVersion) {
        throw Error(errc::unknown_version, "unsupported store format " + std::to_string(h.format_version));
    }
    h.device_id = j.at("device_id").get<std::string>();
    h.kdf = j.at("kdf").get<std::string>();
    h.salt = from_hex(j.at("salt").get<std::string>());
    h.scrypt.n = j.at("scrypt").at("n").get<std::uint64_t>();
    h.scrypt.r = j.at("scrypt").at("r").get<std::uint32_t>();
    h.scrypt.p = j.at("scrypt").at("p").get<std::uint32_t>();
    h.key_check = j.at("key_check").get<std::string>();
    h.key_epoch = j.at("key_epoch").get<std::string>();
    if (h.kdf != "raw" && h.kdf != "scrypt") throw Error(errc::corruption, "unknown kdf '" + h.kdf + "'");
    return h;
}

StoreHeader read_header(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::not_found, "no store header at " + path.string());
    try {
        return header_from(json::parse(in));
    } catch (const json::exception& e) {
        throw Error(errc::corruption, std::string("store header is malformed: ") + e.what());
    }
}

Bytes header_bytes(const StoreHeader& h) {
    const std::string s = header_json(h).dump(2) + "\n";
    return Bytes(s.begin(), s.end());
}

KeyMaterial derive_keys(const StoreHeader& h, const KeySpec& spec) {
    if (h.kdf == "raw") {
        if (spec.key_file.empty()) throw Error(errc::invalid_argument, "this store is keyed by a key file");
        const auto master = read_key_file(spec.key_file);
        return KeyMaterial(master.view());
    }
    if (!spec.key_file.empty()) throw Error(errc::invalid_argument, "this store is keyed by a passphrase");
    const auto master = scrypt(spec.passphrase, h.salt, h.scrypt);
    return KeyMaterial(master.view());
}

std::string key_check_of(const KeyMaterial& keys) {
    const auto tag = hmac_sha256(keys.integrity_key(), as_bytes(kKeyCheckLabel));
    return to_hex(tag);
}

void verify_key(const StoreHeader& h, const KeyMaterial& keys) {
    const std::string check = key_check_of(keys);
    if (!equal_ct(as_bytes(check), as_bytes(h.key_check))) {
        throw Error(errc::integrity, "key does not match this store");
    }
}

std::string random_hex(RandomSource& rng, std::size_t n) {
    Bytes b(n);
    rng.fill(b);
    return to_hex(b);
}

/// New header fields for a fresh key: kdf, salt, check and epoch.
KeyMaterial fresh_key_header(StoreHeader& h, const KeySpec& spec, RandomSource& rng) {
    h.salt.assign(16, 0);
    rng.fill(h.salt);
    if (spec.uses_passphrase()) {
        if (spec.passphrase.empty()) throw Error(errc::invalid_argument, "passphrase is empty");
        h.kdf = "scrypt";
        h.scrypt = spec.scrypt;
    } else {
        h.kdf = "raw";
        h.scrypt = {};
    }
    KeyMaterial keys = derive_keys(h, spec);
    h.key_check = key_check_of(keys);
    h.key_epoch = random_hex(rng, 8);
    return keys;
}

std::string tag_hex_of(std::span<const std::uint8_t> blob) {
    if (blob.size() < kTagOffset + kTagSize) return {};
    return to_hex(blob.subspan(kTagOffset, kTagSize));
}

void merge_into(VersionVector& into, const VersionVector& from) {
    for (const auto& [dev, seq] : from) into[dev] = std::max(into[dev], seq);
}

bool covers(const VersionVector& v, const Stamp& s) {
    const auto it = v.find(s.device_id);
    return it != v.end() && it->second >= s.seq;
}

void move_staged(const fs::path& dir) {
    const fs::path staged = dir / "rotation";
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(staged)) {
        if (e.is_regular_file() && e.path().filename() != "header" && e.path().extension() != ".tmp") {
            files.push_back(e.path());
        }
    }
    for (const auto& f : files) {
        const fs::path target = dir / fs::relative(f, staged);
        fs::create_directories(target.parent_path());
        fs::rename(f, target);
    }
    fs::remove_all(staged);
}

} // namespace

KeySpec KeySpec::from_key_file(fs::path path) {
    KeySpec k;
    k.key_file = std::move(path);
    return k;
}

KeySpec KeySpec::from_passphrase(std::string passphrase, ScryptParams params) {
    KeySpec k;
    k.passphrase = std::move(passphrase);
    k.scrypt = params;
    return k;
}

KeySpec key_spec_from(const fs::path& key_file) {
    if (!key_file.empty()) return KeySpec::from_key_file(key_file);
    const char* pass = std::getenv(kPassphraseEnv);
    if (pass == nullptr || *pass == '\0') {
        throw Error(errc::invalid_argument, std::string("no key file given and ") + kPassphraseEnv + " is not set");
    }
    return KeySpec::from_passphrase(pass);
}

std::string version_hash(const PatientRecord& record) {
    const auto digest = sha256(as_bytes(canonical_bytes(record)));
    return to_hex(digest);
}

void Store::init(const fs::path& dir, const KeySpec& key, const InitOptions& options, RandomSource& rng) {
    if (fs::exists(dir / "header")) throw Error(errc::conflict, "a store already exists at " + dir.string());
    fs::create_directories(dir / "records");
    fs::create_directories(dir / "conflicts");
    fs::create_directories(dir / "aux");

    StoreHeader h;
    h.device_id = random_hex(rng, 16);
    std::optional<KeyMaterial> keys;
    if (options.join) {
        const StoreHeader peer = read_header(*options.join);
        h.kdf = peer.kdf;
        h.salt = peer.salt;
        h.scrypt = peer.scrypt;
        h.key_check = peer.key_check;
        h.key_epoch = peer.key_epoch;
        keys.emplace(derive_keys(h, key));
        verify_key(h, *keys);
    } else {
        keys.emplace(fresh_key_header(h, key, rng));
    }

    DirectoryStorage storage(dir);
    FileLock lock(dir / "lock", true);
    storage.write("header", header_bytes(h));
    const json index = {{"seq", 0}, {"vector", json::object()}, {"peers", json::object()}, {"records", json::object()}};
    storage.write("index", seal(as_bytes(index.dump()), *keys, rng));
}

std::unique_ptr<Store> Store::open(const fs::path& dir, const KeySpec& key, Mode mode, RandomSource& rng) {
    auto lock = std::make_unique<FileLock>(dir / "lock", mode == Mode::read_write);
    StoreHeader h = read_header(dir / "header");
    KeyMaterial keys = derive_keys(h, key);
    verify_key(h, keys);

    if (fs::exists(dir / "rotation")) {
        if (mode != Mode::read_write) throw Error(errc::unavailable, "a key rotation is pending; open the store read-write");
        std::optional<StoreHeader> staged;
        try {
            staged = read_header(dir / "rotation" / "header");
        } catch (const Error&) {
        }
        if (staged && staged->key_epoch == h.key_epoch) move_staged(dir);
        else fs::remove_all(dir / "rotation");
    }

    std::unique_ptr<Store> store(new Store(dir, std::move(h), std::move(keys), mode, rng));
    store->lock_ = std::move(lock);
    if (mode == Mode::read_write) store->storage_->remove_stale_temps();
    store->load_index();
    return store;
}

Store::Store(fs::path dir, StoreHeader header, KeyMaterial keys, Mode mode, RandomSource& rng)
    : clock(now_ms),
      dir_(std::move(dir)),
      header_(std::move(header)),
      keys_(std::move(keys)),
      mode_(mode),
      rng_(&rng),
      storage_(std::make_unique<DirectoryStorage>(dir_)) {}

Store::~Store() { keys_.release(); }

void Store::require_writable() const {
    if (mode_ != Mode::read_write) throw Error(errc::unavailable, "store is open read-only");
}

void Store::flag(const std::string& id, const std::string& why) const {
    {
        std::lock_guard lk(flagged_mu_);
        flagged_.insert(id);
    }
    if (mode_ == Mode::read_write) {
        try {
            storage_->append_line("integrity.log", format_timestamp(now_ms()) + "," + id + "," + why);
        } catch (const Error&) {
        }
    }
}

std::set<std::string> Store::flagged() const {
    std::lock_guard lk(flagged_mu_);
    return flagged_;
}

StoredVersion Store::decode_version(const std::string& key, std::span<const std::uint8_t> bytes) const {
    const Bytes plain = open_sealed(bytes, keys_);
    try {
        const json j = json::parse(plain.begin(), plain.end());
        StoredVersion v;
        v.meta = meta_from(j.at("meta"));
        if (!j.at("record").is_null()) v.record = record_from_json(j.at("record"));
        return v;
    } catch (const json::exception& e) {
        throw Error(errc::corruption, key + ": malformed version document: " + e.what());
    }
}

Bytes Store::encode_version(const VersionMeta& meta, const std::optional<PatientRecord>& record) const {
    const json j = {{"meta", meta_json(meta)}, {"record", record ? to_json(*record) : json(nullptr)}};
    return seal(as_bytes(j.dump()), keys_, *rng_);
}

void Store::write_version_bytes(const VersionMeta& meta, std::span<const std::uint8_t> bytes) {
    storage_->write(record_key(meta.patient_id), bytes);
}

Store::IndexEntry Store::write_version(const VersionMeta& meta, const std::optional<PatientRecord>& record) {
    const Bytes bytes = encode_version(meta, record);
    write_version_bytes(meta, bytes);
    return {meta, tag_hex_of(bytes)};
}

void Store::append_change(const VersionMeta& meta, const std::optional<PatientRecord>& record) {
    const json j = {{"sequence", meta.stamp.seq},
                    {"device_id", meta.stamp.device_id},
                    {"patient_id", meta.patient_id},
                    {"operation", meta.deleted ? "delete" : "put"},
                    {"version_hash", record ? version_hash(*record) : std::string()},
                    {"timestamp_ms", meta.stamp.ts_ms}};
    storage_->append_line("changelog", to_base64(seal(as_bytes(j.dump()), keys_, *rng_)));
}

void Store::archive_version(const VersionMeta& meta, const std::optional<PatientRecord>& record, const Stamp& lost_to) {
    const json j = {{"meta", meta_json(meta)},
                    {"record", record ? to_json(*record) : json(nullptr)},
                    {"lost_to", stamp_json(lost_to)},
                    {"archived_at_ms", clock()}};
    storage_->write(archive_key(meta), seal(as_bytes(j.dump()), keys_, *rng_));
}

void Store::load_index() {
    std::unique_lock lk(mu_);
    bool dirty = false;
    index_.clear();
    if (auto bytes = storage_->read("index")) {
        try {
            const Bytes plain = open_sealed(*bytes, keys_);
            const json j = json::parse(plain.begin(), plain.end());
            seq_ = j.at("seq").get<std::uint64_t>();
            vector_ = j.at("vector").get<VersionVector>();
            for (const auto& [dev, v] : j.at("peers").items()) peers_[dev] = v.get<VersionVector>();
            for (const auto& [id, e] : j.at("records").items()) {
                index_[id] = {meta_from(e.at("meta")), e.at("tag").get<std::string>()};
            }
        } catch (const std::exception&) {
            // The index is a cache; rebuild it from the record files.
            index_.clear();
            vector_.clear();
            peers_.clear();
            seq_ = 0;
            dirty = true;
        }
    } else {
        dirty = true;
    }

    std::set<std::string> on_disk;
    for (const auto& key : storage_->list("records/")) {
        if (!key.ends_with(".enc")) continue;
        const std::string id = key.substr(8, key.size() - 8 - 4);
        on_disk.insert(id);
        const auto bytes = storage_->read(key);
        if (!bytes) continue;
        const auto it = index_.find(id);
        if (it != index_.end() && it->second.tag_hex == tag_hex_of(*bytes)) continue;
        try {
            auto v = decode_version(key, *bytes);
            index_[id] = {v.meta, tag_hex_of(*bytes)};
        } catch (const Error&) {
            index_.erase(id);
            flagged_.insert(id);
        }
        dirty = true;
    }
    // Records flagged in an earlier session stay flagged until they decrypt.
    if (const auto log = storage_->read("integrity.log")) {
        std::istringstream in(std::string(log->begin(), log->end()));
        std::string line;
        while (std::getline(in, line)) {
            const auto a = line.find(','), b = line.find(',', a + 1);
            if (a == std::string::npos || b == std::string::npos) continue;
            const std::string id = line.substr(a + 1, b - a - 1);
            if (flagged_.count(id)) continue;
            const auto bytes = storage_->read(record_key(id));
            if (!bytes) continue;
            try {
                decode_version(record_key(id), *bytes);
            } catch (const Error&) {
                flagged_.insert(id);
            }
        }
    }
    for (auto it = index_.begin(); it != index_.end();) {
        if (!on_disk.count(it->first)) {
            it = index_.erase(it);
            dirty = true;
        } else {
            ++it;
        }
    }
    for (const auto& [id, e] : index_) {
        if (e.meta.stamp.device_id == header_.device_id && e.meta.stamp.seq > seq_) {
            seq_ = e.meta.stamp.seq;
            dirty = true;
        }
    }
    if (vector_[header_.device_id] != seq_) {
        vector_[header_.device_id] = seq_;
        dirty = true;
    }
    if (dirty && mode_ == Mode::read_write) save_index();
}

void Store::save_index() {
    json records = json::object();
    for (const auto& [id, e] : index_) records[id] = {{"meta", meta_json(e.meta)}, {"tag", e.tag_hex}};
    json peers = json::object();
    for (const auto& [dev, v] : peers_) peers[dev] = v;
    const json j = {{"seq", seq_}, {"vector", vector_}, {"peers", peers}, {"records", records}};
    storage_->write("index", seal(as_bytes(j.dump()), keys_, *rng_));
}

VersionMeta Store::local_write(const std::string& id, const std::optional<PatientRecord>& record,
                               std::optional<std::uint64_t> expected_revision, bool create_only) {
    require_writable();
    if (!valid_patient_id(id)) throw Error(errc::invalid_argument, "invalid patient id");
    if (record) validate(*record);

    std::unique_lock lk(mu_);
    const auto it = index_.find(id);
    const IndexEntry* cur = it == index_.end() ? nullptr : &it->second;
    const bool live = cur && !cur->meta.deleted;
    if (create_only && live) throw Error(errc::conflict, "patient " + id + " already exists");
    if (!record && !live) throw Error(errc::not_found, "unknown patient " + id);
    const std::uint64_t current_revision = live ? cur->meta.revision : 0;
    if (expected_revision && *expected_revision != current_revision) {
        throw Error(errc::conflict, "version conflict: expected revision " + std::to_string(*expected_revision) +
                                        ", current is " + std::to_string(current_revision));
    }

    VersionMeta meta;
    meta.patient_id = id;
    meta.stamp.device_id = header_.device_id;
    meta.stamp.seq = seq_ + 1;
    meta.stamp.ts_ms = clock();
    if (cur) {
        meta.stamp.ts_ms = std::max(meta.stamp.ts_ms, cur->meta.stamp.ts_ms + 1);
        meta.lineage = cur->meta.lineage;
    }
    meta.lineage[header_.device_id] = meta.stamp.seq;
    meta.revision = (cur ? cur->meta.revision : 0) + 1;
    meta.deleted = !record;

    IndexEntry entry = write_version(meta, record);
    append_change(meta, record);
    seq_ = meta.stamp.seq;
    vector_[header_.device_id] = seq_;
    index_[id] = std::move(entry);
    save_index();
    return meta;
}

VersionMeta Store::put(const PatientRecord& record, std::optional<std::uint64_t> expected_revision, bool create_only) {
    return local_write(record.patient_id, record, expected_revision, create_only);
}

VersionMeta Store::remove(const std::string& patient_id, std::optional<std::uint64_t> expected_revision) {
    return local_write(patient_id, std::nullopt, expected_revision, false);
}

StoredVersion Store::get_version(const std::string& patient_id) const {
    std::shared_lock lk(mu_);
    const auto it = index_.find(patient_id);
    if (it == index_.end()) {
        bool flagged_id = false;
        {
            std::lock_guard fl(flagged_mu_);
            flagged_id = flagged_.count(patient_id) > 0;
        }
        if (flagged_id) throw Error(errc::integrity, "integrity check failed");
        throw Error(errc::not_found, "unknown patient " + patient_id);
    }
    const std::string key = record_key(patient_id);
    const auto bytes = storage_->read(key);
    if (!bytes) throw Error(errc::not_found, "unknown patient " + patient_id);
    try {
        return decode_version(key, *bytes);
    } catch (const Error& e) {
        if (e.code() == errc::integrity || e.code() == errc::corruption) flag(patient_id, to_string(e.code()).data());
        throw;
    }
}

PatientRecord Store::get(const std::string& patient_id) const {
    auto v = get_version(patient_id);
    if (v.meta.deleted || !v.record) throw Error(errc::not_found, "unknown patient " + patient_id);
    return std::move(*v.record);
}

std::optional<VersionMeta> Store::meta(const std::string& patient_id) const {
    std::shared_lock lk(mu_);
    const auto it = index_.find(patient_id);
    if (it == index_.end()) return std::nullopt;
    return it->second.meta;
}

std::vector<VersionMeta> Store::list(std::size_t offset, std::size_t limit) const {
    std::shared_lock lk(mu_);
    std::vector<VersionMeta> out;
    std::size_t skipped = 0;
    for (const auto& [id, e] : index_) {
        if (e.meta.deleted) continue;
        if (skipped < offset) {
            ++skipped;
            continue;
        }
        if (out.size() >= limit) break;
        out.push_back(e.meta);
    }
    return out;
}

std::size_t Store::size() const {
    std::shared_lock lk(mu_);
    return static_cast<std::size_t>(
        std::count_if(index_.begin(), index_.end(), [](const auto& kv) { return !kv.second.meta.deleted; }));
}

std::optional<Bytes> Store::read_aux(const std::string& name) const {
    if (!valid_patient_id(name)) throw Error(errc::invalid_argument, "invalid aux name");
    std::shared_lock lk(mu_);
    auto bytes = storage_->read("aux/" + name + ".enc");
    if (!bytes) return std::nullopt;
    return open_sealed(*bytes, keys_);
}

void Store::write_aux(const std::string& name, std::span<const std::uint8_t> plaintext) {
    require_writable();
    if (!valid_patient_id(name)) throw Error(errc::invalid_argument, "invalid aux name");
    std::unique_lock lk(mu_);
    storage_->write("aux/" + name + ".enc", seal(plaintext, keys_, *rng_));
}

VersionVector Store::vector() const {
    std::shared_lock lk(mu_);
    return vector_;
}

SyncBatch Store::changes_since(const VersionVector& peer) const {
    std::shared_lock lk(mu_);
    SyncBatch batch;
    batch.vector = vector_;
    for (const auto& [id, e] : index_) {
        if (covers(peer, e.meta.stamp)) continue;
        auto bytes = storage_->read(record_key(id));
        if (!bytes) continue;
        batch.entries.push_back({e.meta, std::move(*bytes)});
    }
    return batch;
}

ApplyReport Store::apply(std::span<const SyncEntry> entries, const VersionVector& sender_vector) {
    require_writable();
    ApplyReport report;
    report.received = entries.size();

    std::vector<StoredVersion> incoming;
    incoming.reserve(entries.size());
    for (const auto& e : entries) {
        StoredVersion v = decode_version("sync payload", e.payload);
        if (!(v.meta == e.meta) || !valid_patient_id(v.meta.patient_id)) {
            throw Error(errc::integrity, "sync payload does not match its metadata");
        }
        if (!v.meta.deleted && (!v.record || v.record->patient_id != v.meta.patient_id)) {
            throw Error(errc::integrity, "sync payload does not match its metadata");
        }
        incoming.push_back(std::move(v));
    }

    std::unique_lock lk(mu_);
    for (std::size_t i = 0; i < incoming.size(); ++i) {
        const auto& in = incoming[i];
        const std::string& id = in.meta.patient_id;
        const auto it = index_.find(id);

        if (it == index_.end()) {
            write_version_bytes(in.meta, entries[i].payload);
            append_change(in.meta, in.record);
            index_[id] = {in.meta, tag_hex_of(entries[i].payload)};
            ++report.applied;
            continue;
        }
        const VersionMeta cur = it->second.meta;
        if (in.meta.stamp == cur.stamp) {
            ++report.skipped;
            continue;
        }
        if (cur.stamp < in.meta.stamp) {
            if (covers(in.meta.lineage, cur.stamp)) {
                write_version_bytes(in.meta, entries[i].payload);
                index_[id] = {in.meta, tag_hex_of(entries[i].payload)};
            } else {
                const StoredVersion local = decode_version(record_key(id), *storage_->read(record_key(id)));
                archive_version(local.meta, local.record, in.meta.stamp);
                VersionMeta merged = in.meta;
                merge_into(merged.lineage, cur.lineage);
                index_[id] = write_version(merged, in.record);
                ++report.archived;
            }
            append_change(in.meta, in.record);
            ++report.applied;
        } else {
            if (covers(cur.lineage, in.meta.stamp)) {
                ++report.skipped;
                continue;
            }
            archive_version(in.meta, in.record, cur.stamp);
            const StoredVersion local = decode_version(record_key(id), *storage_->read(record_key(id)));
            VersionMeta merged = local.meta;
            merge_into(merged.lineage, in.meta.lineage);
            index_[id] = write_version(merged, local.record);
            ++report.archived;
        }
    }
    for (const auto& [dev, seq] : sender_vector) {
        if (dev == header_.device_id) continue;
        vector_[dev] = std::max(vector_[dev], seq);
    }
    save_index();
    return report;
}

void Store::record_peer_ack(const std::string& peer_device, const VersionVector& acked) {
    require_writable();
    std::unique_lock lk(mu_);
    peers_[peer_device] = acked;
    save_index();
}

std::map<std::string, VersionVector> Store::peer_acks() const {
    std::shared_lock lk(mu_);
    return peers_;
}

std::vector<ArchivedVersion> Store::archive(const std::string& patient_id) const {
    std::shared_lock lk(mu_);
    std::vector<std::string> dirs;
    if (patient_id.empty()) dirs = storage_->list("conflicts/");
    else dirs.push_back("conflicts/" + patient_id);
    std::vector<ArchivedVersion> out;
    for (const auto& d : dirs) {
        for (const auto& key : storage_->list(d + "/")) {
            const auto bytes = storage_->read(key);
            if (!bytes) continue;
            const Bytes plain = open_sealed(*bytes, keys_);
            const json j = json::parse(plain.begin(), plain.end());
            ArchivedVersion a;
            a.meta = meta_from(j.at("meta"));
            if (!j.at("record").is_null()) a.record = record_from_json(j.at("record"));
            a.lost_to = stamp_from(j.at("lost_to"));
            a.archived_at_ms = j.at("archived_at_ms").get<std::int64_t>();
            out.push_back(std::move(a));
        }
    }
    return out;
}

std::vector<ChangeLogEntry> Store::change_log() const {
    std::shared_lock lk(mu_);
    std::vector<ChangeLogEntry> out;
    const auto bytes = storage_->read("changelog");
    if (!bytes) return out;
    std::istringstream in(std::string(bytes->begin(), bytes->end()));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const Bytes plain = open_sealed(from_base64(line), keys_);
        const json j = json::parse(plain.begin(), plain.end());
        out.push_back({j.at("sequence").get<std::uint64_t>(), j.at("device_id").get<std::string>(),
                       j.at("patient_id").get<std::string>(), j.at("operation").get<std::string>(),
                       j.at("version_hash").get<std::string>(), j.at("timestamp_ms").get<std::int64_t>()});
    }
    return out;
}

RotateReport Store::rotate_keys(const KeySpec& old_key, const KeySpec& new_key) {
    require_writable();
    std::unique_lock lk(mu_);
    {
        KeyMaterial old_keys = derive_keys(header_, old_key);
        verify_key(header_, old_keys);
    }

    // Decrypt everything first; any failure leaves the store untouched.
    std::vector<std::pair<std::string, Bytes>> files;
    RotateReport report;
    auto take = [&](const std::string& key) {
        const auto bytes = storage_->read(key);
        if (!bytes) return;
        try {
            files.emplace_back(key, open_sealed(*bytes, keys_));
        } catch (const Error&) {
            throw Error(errc::integrity, "rotation aborted: " + key + " failed to decrypt");
        }
    };
    for (const auto& key : storage_->list("records/")) {
        take(key);
        ++report.records;
    }
    for (const auto& dir : storage_->list("conflicts/")) {
        for (const auto& key : storage_->list(dir + "/")) {
            take(key);
            ++report.archived;
        }
    }
    for (const auto& key : storage_->list("aux/")) {
        take(key);
        ++report.aux;
    }
    take("index");
    std::vector<Bytes> log_lines;
    if (const auto log = storage_->read("changelog")) {
        std::istringstream in(std::string(log->begin(), log->end()));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                log_lines.push_back(open_sealed(from_base64(line), keys_));
            } catch (const Error&) {
                throw Error(errc::integrity, "rotation aborted: changelog failed to decrypt");
            }
        }
    }
    report.changelog_entries = log_lines.size();

    StoreHeader next = header_;
    KeyMaterial next_keys = fresh_key_header(next, new_key, *rng_);

    fs::remove_all(dir_ / "rotation");
    for (const auto& [key, plain] : files) storage_->write("rotation/" + key, seal(plain, next_keys, *rng_));
    std::string log_text;
    for (const auto& plain : log_lines) log_text += to_base64(seal(plain, next_keys, *rng_)) + "\n";
    storage_->write("rotation/changelog", as_bytes(log_text));
    storage_->write("rotation/header", header_bytes(next));

    storage_->write("header", header_bytes(next));
    move_staged(dir_);

    header_ = std::move(next);
    keys_ = std::move(next_keys);
    for (auto& [id, e] : index_) {
        if (const auto bytes = storage_->read(record_key(id))) e.tag_hex = tag_hex_of(*bytes);
    }
    save_index();
    return report;
}

} // namespace edgehr::vault
