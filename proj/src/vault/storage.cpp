#include "edgehr/vault/storage.hpp"

#include "edgehr/common/error.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace edgehr::vault {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void io_error(const std::string& what, const fs::path& p) {
    throw Error(errc::io, what + " " + p.string() + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* data, std::size_t n, const fs::path& p) {
    while (n > 0) {
        const ssize_t w = ::write(fd, data, n);
        if (w < 0) {
            if (errno == EINTR) continue;
            io_error("write", p);
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

void fsync_dir(const fs::path& dir) {
    const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd < 0) io_error("open directory", dir);
    ::fsync(fd);
    ::close(fd);
}

} // namespace

DirectoryStorage::DirectoryStorage(fs::path root) : root_(std::move(root)) {
    if (!fs::is_directory(root_)) throw Error(errc::not_found, "storage root " + root_.string() + " is not a directory");
}

fs::path DirectoryStorage::path_of(const std::string& key) const {
    if (key.empty() || key.front() == '/' || key.find("..") != std::string::npos) {
        throw Error(errc::invalid_argument, "invalid storage key '" + key + "'");
    }
    return root_ / key;
}

std::optional<std::vector<std::uint8_t>> DirectoryStorage::read(const std::string& key) const {
    const auto p = path_of(key);
    const int fd = ::open(p.c_str(), O_RDONLY);
    if (fd < 0) {
        if (errno == ENOENT) return std::nullopt;
        io_error("open", p);
    }
    std::vector<std::uint8_t> out;
    std::uint8_t buf[65536];
    for (;;) {
        const ssize_t r = ::read(fd, buf, sizeof buf);
        if (r < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            io_error("read", p);
        }
        if (r == 0) break;
        out.insert(out.end(), buf, buf + r);
    }
    ::close(fd);
    return out;
}

void DirectoryStorage::write(const std::string& key, std::span<const std::uint8_t> bytes) {
    const auto p = path_of(key);
    fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (fd < 0) io_error("create", tmp);
    try {
        write_all(fd, bytes.data(), bytes.size(), tmp);
        if (::fsync(fd) != 0) io_error("fsync", tmp);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    if (fault_hook) fault_hook("after_temp_write", key);
    if (::rename(tmp.c_str(), p.c_str()) != 0) io_error("rename", tmp);
    fsync_dir(p.parent_path());
    if (fault_hook) fault_hook("after_rename", key);
}

void DirectoryStorage::append_line(const std::string& key, std::string_view line) {
    const auto p = path_of(key);
    fs::create_directories(p.parent_path());
    const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0600);
    if (fd < 0) io_error("open", p);
    std::string buf(line);
    buf += '\n';
    try {
        write_all(fd, reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size(), p);
        if (::fsync(fd) != 0) io_error("fsync", p);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
}

bool DirectoryStorage::remove(const std::string& key) {
    const auto p = path_of(key);
    std::error_code ec;
    const bool removed = fs::remove(p, ec);
    if (ec) throw Error(errc::io, "remove " + p.string() + ": " + ec.message());
    if (removed) fsync_dir(p.parent_path());
    return removed;
}

std::vector<std::string> DirectoryStorage::list(const std::string& prefix) const {
    const auto dir = prefix.empty() ? root_ : path_of(prefix);
    std::vector<std::string> out;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.ends_with(".tmp")) continue;
        out.push_back(prefix + name);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t DirectoryStorage::remove_stale_temps() {
    std::size_t n = 0;
    for (const auto& entry : fs::recursive_directory_iterator(root_)) {
        if (entry.is_regular_file() && entry.path().extension() == ".tmp") {
            fs::remove(entry.path());
            ++n;
        }
    }
    return n;
}

FileLock::FileLock(const fs::path& path, bool exclusive) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0600);
    if (fd_ < 0) io_error("open lock", path);
    if (::flock(fd_, (exclusive ? LOCK_EX : LOCK_SH) | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw Error(errc::conflict, "store is locked by another process");
    }
}

FileLock::FileLock(FileLock&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

FileLock::~FileLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

} // namespace edgehr::vault
