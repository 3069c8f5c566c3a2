/**
 * @file storage.hpp
 * @brief Byte-level persistence behind the record store.
 *
 * Keys are relative slash-separated names such as `records/p1.enc`. A
 * relational backend can replace DirectoryStorage by implementing the same
 * interface.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace edgehr::vault {

class BlobStorage {
public:
    virtual ~BlobStorage() = default;

    virtual std::optional<std::vector<std::uint8_t>> read(const std::string& key) const = 0;
    /// Durable and atomic: readers see the old bytes or the new ones.
    virtual void write(const std::string& key, std::span<const std::uint8_t> bytes) = 0;
    /// Appends one line (a trailing newline is added) and syncs.
    virtual void append_line(const std::string& key, std::string_view line) = 0;
    virtual bool remove(const std::string& key) = 0;
    /// Keys directly under `prefix` (for example "records/"), sorted.
    virtual std::vector<std::string> list(const std::string& prefix) const = 0;
};

/// Files under a root directory. Writes go to `<name>.tmp`, are fsynced,
/// renamed over the target and the directory is fsynced.
class DirectoryStorage final : public BlobStorage {
public:
    explicit DirectoryStorage(std::filesystem::path root);

    std::optional<std::vector<std::uint8_t>> read(const std::string& key) const override;
    void write(const std::string& key, std::span<const std::uint8_t> bytes) override;
    void append_line(const std::string& key, std::string_view line) override;
    bool remove(const std::string& key) override;
    std::vector<std::string> list(const std::string& prefix) const override;

    /// Deletes `*.tmp` leftovers from interrupted writes; returns how many.
    std::size_t remove_stale_temps();

    const std::filesystem::path& root() const noexcept { return root_; }

    /// Test hook called with the stage name ("after_temp_write" before the
    /// rename, "after_rename" after it) and the key. Throwing from it
    /// simulates a crash at that point.
    std::function<void(std::string_view stage, const std::string& key)> fault_hook;

private:
    std::filesystem::path path_of(const std::string& key) const;
    std::filesystem::path root_;
};

/// flock-based advisory lock on a file. Exclusive for writers, shared for
/// readers; never blocks (errc::conflict when held elsewhere).
class FileLock {
public:
    FileLock(const std::filesystem::path& path, bool exclusive);
    FileLock(FileLock&& other) noexcept;
    FileLock& operator=(FileLock&&) = delete;
    FileLock(const FileLock&) = delete;
    ~FileLock();

private:
    int fd_ = -1;
};

} // namespace edgehr::vault
