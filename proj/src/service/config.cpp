#include "edgehr/service/config.hpp"

#include "edgehr/common/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace edgehr::service {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T number(const std::string& key, const std::string& v, int line) {
    T out{};
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw Error(errc::parse, "config line " + std::to_string(line) + ": " + key + " is not a number");
    }
    return out;
}

} // namespace

ServiceConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    ServiceConfig c;
    const auto path_of = [&](const std::string& v) -> std::filesystem::path {
        if (v.empty()) return {};
        std::filesystem::path p(v);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string l = trim(raw);
        if (l.empty() || l[0] == '#') continue;
        const auto eq = l.find('=');
        if (eq == std::string::npos) throw Error(errc::parse, "config line " + std::to_string(line) + ": expected key = value");
        const std::string key = trim(l.substr(0, eq));
        const std::string v = trim(l.substr(eq + 1));
        if (key == "listen_address") {
            const auto colon = v.rfind(':');
            if (colon == std::string::npos) throw Error(errc::parse, "config line " + std::to_string(line) + ": listen_address is host:port");
            c.host = v.substr(0, colon);
            c.port = number<int>(key, v.substr(colon + 1), line);
            if (c.port < 0 || c.port > 65535) throw Error(errc::range, "listen port out of range");
        } else if (key == "store_path") {
            c.store_path = path_of(v);
        } else if (key == "key_file") {
            c.key_file = path_of(v);
        } else if (key == "model_path") {
            c.model_path = path_of(v);
        } else if (key == "session_ttl_s") {
            c.session_ttl_s = number<std::int64_t>(key, v, line);
            if (c.session_ttl_s <= 0) throw Error(errc::range, "session_ttl_s must be positive");
        } else if (key == "audit_log") {
            c.audit_log = path_of(v);
        } else if (key == "error_log") {
            c.error_log = path_of(v);
        } else if (key == "export_key") {
            c.export_key_hex = v;
        } else if (key == "sync_remote") {
            c.sync_remote = v;
        } else if (key == "sync_user") {
            c.sync_user = v;
        } else if (key == "password_scrypt_n") {
            c.password_scrypt_n = number<std::uint64_t>(key, v, line);
        } else if (key == "static_dir") {
            c.static_dir = path_of(v);
        } else {
            throw Error(errc::parse, "config line " + std::to_string(line) + ": unknown key '" + key + "'");
        }
    }
    if (c.store_path.empty()) throw Error(errc::invalid_argument, "config: store_path is required");
    if (c.audit_log.empty()) c.audit_log = c.store_path.parent_path() / "audit.log";
    return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

} // namespace edgehr::service
