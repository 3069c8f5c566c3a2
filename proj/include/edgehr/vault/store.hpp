/**
 * @file store.hpp
 * @brief Encrypted per-record store with change tracking for sync.
 *
 * Directory layout:
 *
 *     header                 plaintext JSON: format, device id, kdf, salt,
 *                            key check, key epoch
 *     records/<id>.enc       one sealed version per patient (tombstones too)
 *     index                  sealed cache of record metadata, sequence
 *                            counter, version vector and peer acks
 *     changelog              one sealed entry per line, append-only
 *     conflicts/<id>/<stamp>.enc sealed versions that lost a sync conflict
 *     aux/<name>.enc         sealed auxiliary documents (user table)
 *     lock                   advisory lock file
 *
 * Each record file carries its own version metadata, so the index can be
 * rebuilt from the record files after a crash between the two writes.
 *
 * Versions are ordered by their stamp (timestamp ms, device id, sequence).
 * Local writes use timestamp max(now, previous + 1), so every version
 * outranks the versions it was derived from and sync can resolve any pair
 * by taking the larger stamp. A version's lineage vector records which
 * versions it has seen; an overwritten version outside the winner's lineage
 * is a true conflict and goes to the archive.
 */

#pragma once

#include "edgehr/vault/crypto.hpp"
#include "edgehr/vault/record.hpp"
#include "edgehr/vault/storage.hpp"

#include <compare>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace edgehr::vault {

inline constexpr int kStoreFormatVersion = 1;

struct Stamp {
    std::int64_t ts_ms = 0;
    std::string device_id;
    std::uint64_t seq = 0;

    friend auto operator<=>(const Stamp&, const Stamp&) = default;
    friend bool operator==(const Stamp&, const Stamp&) = default;
};

using VersionVector = std::map<std::string, std::uint64_t>;

struct VersionMeta {
    std::string patient_id;
    Stamp stamp;
    VersionVector lineage;
    /// Local edit counter carried with the version; used for optimistic
    /// concurrency on updates.
    std::uint64_t revision = 0;
    bool deleted = false;

    friend bool operator==(const VersionMeta&, const VersionMeta&) = default;
};

struct StoredVersion {
    VersionMeta meta;
    std::optional<PatientRecord> record;
};

struct ArchivedVersion {
    VersionMeta meta;
    std::optional<PatientRecord> record;
    Stamp lost_to;
    std::int64_t archived_at_ms = 0;
};

struct ChangeLogEntry {
    std::uint64_t sequence = 0;
    std::string device_id;
    std::string patient_id;
    /// "put" or "delete"
    std::string operation;
    /// Hex SHA-256 of the canonical record bytes (empty for deletes).
    std::string version_hash;
    std::int64_t timestamp_ms = 0;

    friend bool operator==(const ChangeLogEntry&, const ChangeLogEntry&) = default;
};

/// A version in transit: its metadata plus the sealed record file bytes.
struct SyncEntry {
    VersionMeta meta;
    Bytes payload;
};

struct SyncBatch {
    std::vector<SyncEntry> entries;
    VersionVector vector;
};

struct ApplyReport {
    std::size_t received = 0;
    std::size_t applied = 0;
    std::size_t archived = 0;
    std::size_t skipped = 0;
};

struct RotateReport {
    std::size_t records = 0;
    std::size_t archived = 0;
    std::size_t aux = 0;
    std::size_t changelog_entries = 0;
};

/// Where the master key comes from: a 32-byte key file, or a passphrase run
/// through scrypt with the store's salt.
struct KeySpec {
    std::filesystem::path key_file;
    std::string passphrase;
    ScryptParams scrypt;

    static KeySpec from_key_file(std::filesystem::path path);
    static KeySpec from_passphrase(std::string passphrase, ScryptParams params = {});
    bool uses_passphrase() const noexcept { return key_file.empty(); }
};

/// Environment variable holding a store passphrase.
inline constexpr const char* kPassphraseEnv = "EDGEHR_PASSPHRASE";

/// Key file when `key_file` is non-empty, otherwise the passphrase from
/// kPassphraseEnv; errc::invalid_argument when neither is available.
KeySpec key_spec_from(const std::filesystem::path& key_file);

struct StoreHeader {
    int format_version = kStoreFormatVersion;
    std::string device_id;
    /// "raw" or "scrypt"
    std::string kdf;
    Bytes salt;
    ScryptParams scrypt;
    std::string key_check;
    std::string key_epoch;
};

struct InitOptions {
    /// Header of an existing store to share keys with (for sync peers). The
    /// new store copies its kdf, salt and key check and mints its own
    /// device id; the supplied key must match.
    std::optional<std::filesystem::path> join;
};

class Store {
public:
    enum class Mode { read_write, read_only };

    static void init(const std::filesystem::path& dir, const KeySpec& key, const InitOptions& options = {},
                     RandomSource& rng = system_random());
    /// Wrong keys fail with errc::integrity before any record is touched.
    static std::unique_ptr<Store> open(const std::filesystem::path& dir, const KeySpec& key, Mode mode = Mode::read_write,
                                       RandomSource& rng = system_random());

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;
    ~Store();

    const StoreHeader& header() const noexcept { return header_; }
    const std::string& device_id() const noexcept { return header_.device_id; }
    const std::filesystem::path& path() const noexcept { return dir_; }

    /// Creates or replaces a record. With `expected_revision`, the current
    /// revision (0 when absent) must match or errc::conflict is thrown.
    /// With `create_only`, an existing live record is errc::conflict.
    VersionMeta put(const PatientRecord& record, std::optional<std::uint64_t> expected_revision = std::nullopt,
                    bool create_only = false);
    VersionMeta remove(const std::string& patient_id, std::optional<std::uint64_t> expected_revision = std::nullopt);

    /// errc::not_found for unknown or deleted ids; integrity failures are
    /// rethrown and the id is flagged.
    PatientRecord get(const std::string& patient_id) const;
    StoredVersion get_version(const std::string& patient_id) const;
    std::optional<VersionMeta> meta(const std::string& patient_id) const;

    /// Live records ordered by id.
    std::vector<VersionMeta> list(std::size_t offset = 0, std::size_t limit = SIZE_MAX) const;
    std::size_t size() const;

    std::set<std::string> flagged() const;

    std::optional<Bytes> read_aux(const std::string& name) const;
    void write_aux(const std::string& name, std::span<const std::uint8_t> plaintext);

    // Sync surface.
    VersionVector vector() const;
    /// Current versions whose stamp the peer has not seen, with this
    /// store's vector, taken atomically.
    SyncBatch changes_since(const VersionVector& peer) const;
    /// Payloads are verified before anything is written; a failure throws
    /// errc::integrity and applies nothing. The local vector absorbs
    /// `sender_vector` once every entry is in.
    ApplyReport apply(std::span<const SyncEntry> entries, const VersionVector& sender_vector);
    void record_peer_ack(const std::string& peer_device, const VersionVector& acked);
    std::map<std::string, VersionVector> peer_acks() const;
    std::vector<ArchivedVersion> archive(const std::string& patient_id = {}) const;
    std::vector<ChangeLogEntry> change_log() const;

    /// Re-encrypts every file under `new_key`. `old_key` must match the
    /// store (errc::integrity otherwise) and every file must decrypt first,
    /// or nothing changes. The switch commits by one atomic header write;
    /// an interrupted rotation is finished or discarded on the next open.
    RotateReport rotate_keys(const KeySpec& old_key, const KeySpec& new_key);

    /// Wall clock for stamps; tests substitute a controlled one.
    std::function<std::int64_t()> clock;

    DirectoryStorage& storage() noexcept { return *storage_; }

private:
    struct IndexEntry {
        VersionMeta meta;
        std::string tag_hex;
    };

    Store(std::filesystem::path dir, StoreHeader header, KeyMaterial keys, Mode mode, RandomSource& rng);

    void load_index();
    void save_index();
    StoredVersion decode_version(const std::string& key, std::span<const std::uint8_t> bytes) const;
    Bytes encode_version(const VersionMeta& meta, const std::optional<PatientRecord>& record) const;
    IndexEntry write_version(const VersionMeta& meta, const std::optional<PatientRecord>& record);
    void write_version_bytes(const VersionMeta& meta, std::span<const std::uint8_t> bytes);
    void append_change(const VersionMeta& meta, const std::optional<PatientRecord>& record);
    void archive_version(const VersionMeta& meta, const std::optional<PatientRecord>& record, const Stamp& lost_to);
    VersionMeta local_write(const std::string& id, const std::optional<PatientRecord>& record,
                            std::optional<std::uint64_t> expected_revision, bool create_only);
    void require_writable() const;
    void flag(const std::string& id, const std::string& why) const;

    std::filesystem::path dir_;
    StoreHeader header_;
    KeyMaterial keys_;
    Mode mode_;
    RandomSource* rng_;
    std::unique_ptr<DirectoryStorage> storage_;
    std::unique_ptr<FileLock> lock_;

    mutable std::shared_mutex mu_;
    std::uint64_t seq_ = 0;
    VersionVector vector_;
    std::map<std::string, VersionVector> peers_;
    std::map<std::string, IndexEntry> index_;
    mutable std::mutex flagged_mu_;
    mutable std::set<std::string> flagged_;
};

/// Hex SHA-256 of the canonical record bytes.
std::string version_hash(const PatientRecord& record);

} // namespace edgehr::vault
