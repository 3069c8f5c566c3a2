/**
 * @file crypto.hpp
 * @brief Record encryption: PKCS7, AES-256-CBC, HMAC-SHA256 tags and the
 * versioned blob framing.
 *
 * Blob layout: "EHR1" | u16 LE format version | iv[16] | tag[32] | ciphertext.
 * The tag is HMAC-SHA256 under the integrity key over
 * (u16 LE version | iv | ciphertext) and is checked in constant time before
 * any decryption happens. Both subkeys come from the 256-bit master key by
 * HMAC-SHA256 with fixed labels, so they are independent of each other.
 */

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace edgehr::vault {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kBlockSize = 16;
inline constexpr std::size_t kKeySize = 32;
inline constexpr std::size_t kTagSize = 32;
inline constexpr std::uint16_t kBlobFormatVersion = 1;

/// Appends k bytes of value k, 1 <= k <= 16.
Bytes pkcs7_pad(std::span<const std::uint8_t> data);

/// Throws errc::integrity with one fixed message for every malformed input.
Bytes pkcs7_unpad(std::span<const std::uint8_t> padded);

/// Raw CBC over whole blocks, no padding. Lengths must be multiples of 16.
Bytes aes256_cbc_encrypt(std::span<const std::uint8_t> key, std::span<const std::uint8_t> iv,
                         std::span<const std::uint8_t> plaintext);
Bytes aes256_cbc_decrypt(std::span<const std::uint8_t> key, std::span<const std::uint8_t> iv,
                         std::span<const std::uint8_t> ciphertext);

std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data);
std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);

/// Constant-time equality; false on length mismatch.
bool equal_ct(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Byte source for IVs, salts and tokens.
class RandomSource {
public:
    virtual ~RandomSource() = default;
    /// Fills `out` or throws; never leaves it partially random.
    virtual void fill(std::span<std::uint8_t> out) = 0;
};

/// OpenSSL's CSPRNG. Throws errc::unavailable if it cannot deliver.
class SystemRandom final : public RandomSource {
public:
    void fill(std::span<std::uint8_t> out) override;
};

SystemRandom& system_random();

/// Key bytes that are wiped when released. Move-only.
class SecretBytes {
public:
    SecretBytes() = default;
    explicit SecretBytes(std::span<const std::uint8_t> bytes) : bytes_(bytes.begin(), bytes.end()) {}
    explicit SecretBytes(std::size_t n) : bytes_(n, 0) {}
    SecretBytes(SecretBytes&& other) noexcept : bytes_(std::move(other.bytes_)) { other.bytes_.clear(); }
    SecretBytes& operator=(SecretBytes&& other) noexcept;
    SecretBytes(const SecretBytes&) = delete;
    SecretBytes& operator=(const SecretBytes&) = delete;
    ~SecretBytes() { wipe(); }

    SecretBytes clone() const { return SecretBytes(std::span<const std::uint8_t>(bytes_)); }
    void wipe() noexcept;

    std::span<const std::uint8_t> view() const noexcept { return bytes_; }
    std::span<std::uint8_t> mutable_view() noexcept { return bytes_; }
    std::size_t size() const noexcept { return bytes_.size(); }
    bool empty() const noexcept { return bytes_.empty(); }

private:
    std::vector<std::uint8_t> bytes_;
};

class KeyMaterial {
public:
    /// Master key must be 32 bytes (errc::invalid_argument otherwise).
    explicit KeyMaterial(std::span<const std::uint8_t> master_key);

    KeyMaterial clone() const;
    /// Wipes every key; the object is unusable afterwards.
    void release() noexcept;
    bool released() const noexcept { return enc_.empty(); }

    std::span<const std::uint8_t> encryption_key() const;
    std::span<const std::uint8_t> integrity_key() const;

private:
    KeyMaterial() = default;
    SecretBytes enc_;
    SecretBytes mac_;
};

struct EncryptedBlob {
    std::uint16_t format_version = kBlobFormatVersion;
    std::array<std::uint8_t, kBlockSize> iv{};
    std::array<std::uint8_t, kTagSize> tag{};
    Bytes ciphertext;
};

Bytes serialize_blob(const EncryptedBlob& blob);
/// errc::corruption on bad magic, truncation or misaligned ciphertext;
/// errc::unknown_version on a version other than 1.
EncryptedBlob parse_blob(std::span<const std::uint8_t> bytes);

EncryptedBlob encrypt_record(std::span<const std::uint8_t> plaintext, const KeyMaterial& keys,
                             RandomSource& rng = system_random());

/// Tag mismatch throws errc::integrity before decrypting; bad padding
/// under a valid tag throws errc::corruption.
Bytes decrypt_record(const EncryptedBlob& blob, const KeyMaterial& keys);

/// Convenience forms over serialized blobs.
Bytes seal(std::span<const std::uint8_t> plaintext, const KeyMaterial& keys, RandomSource& rng = system_random());
Bytes open_sealed(std::span<const std::uint8_t> blob_bytes, const KeyMaterial& keys);

struct ScryptParams {
    std::uint64_t n = 1u << 15;
    std::uint32_t r = 8;
    std::uint32_t p = 1;

    friend bool operator==(const ScryptParams&, const ScryptParams&) = default;
};

SecretBytes scrypt(std::string_view passphrase, std::span<const std::uint8_t> salt, const ScryptParams& params,
                   std::size_t out_len = kKeySize);

/// Exactly 32 raw bytes; anything else is errc::invalid_argument.
SecretBytes read_key_file(const std::filesystem::path& path);
/// Writes 32 fresh random bytes with owner-only permissions.
void write_key_file(const std::filesystem::path& path, RandomSource& rng = system_random());

std::string to_hex(std::span<const std::uint8_t> bytes);
Bytes from_hex(std::string_view hex);
std::string to_base64url(std::span<const std::uint8_t> bytes);
std::string to_base64(std::span<const std::uint8_t> bytes);
Bytes from_base64(std::string_view text);

inline std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

} // namespace edgehr::vault
