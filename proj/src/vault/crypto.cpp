#include "edgehr/vault/crypto.hpp"

#include "edgehr/common/error.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>
#include <fstream>
#include <memory>

namespace edgehr::vault {

namespace {

constexpr char kMagic[4] = {'E', 'H', 'R', '1'};
constexpr std::size_t kHeaderSize = 4 + 2 + kBlockSize + kTagSize;
constexpr std::string_view kEncLabel = "edgehr/v1/encryption";
constexpr std::string_view kMacLabel = "edgehr/v1/integrity";

[[noreturn]] void integrity_failure() { throw Error(errc::integrity, "integrity check failed"); }

struct CtxFree {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CtxFree>;

// The AES block function comes from OpenSSL in ECB mode with padding off;
// chaining is done here.
CipherCtx ecb_context(std::span<const std::uint8_t> key, bool encrypt) {
    if (key.size() != kKeySize) throw Error(errc::invalid_argument, "AES-256 needs a 32-byte key");
    CipherCtx ctx(EVP_CIPHER_CTX_new());
    if (!ctx || EVP_CipherInit_ex(ctx.get(), EVP_aes_256_ecb(), nullptr, key.data(), nullptr, encrypt ? 1 : 0) != 1 ||
        EVP_CIPHER_CTX_set_padding(ctx.get(), 0) != 1) {
        throw Error(errc::unavailable, "cipher initialisation failed");
    }
    return ctx;
}

void check_cbc_args(std::span<const std::uint8_t> iv, std::span<const std::uint8_t> data) {
    if (iv.size() != kBlockSize) throw Error(errc::invalid_argument, "CBC needs a 16-byte IV");
    if (data.size() % kBlockSize != 0) throw Error(errc::invalid_argument, "CBC input must be whole blocks");
}

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::array<std::uint8_t, 32> compute_tag(const EncryptedBlob& blob, const KeyMaterial& keys) {
    Bytes msg;
    msg.reserve(2 + kBlockSize + blob.ciphertext.size());
    put_u16(msg, blob.format_version);
    msg.insert(msg.end(), blob.iv.begin(), blob.iv.end());
    msg.insert(msg.end(), blob.ciphertext.begin(), blob.ciphertext.end());
    return hmac_sha256(keys.integrity_key(), msg);
}

} // namespace

Bytes pkcs7_pad(std::span<const std::uint8_t> data) {
    const std::size_t k = kBlockSize - data.size() % kBlockSize;
    Bytes out(data.begin(), data.end());
    out.insert(out.end(), k, static_cast<std::uint8_t>(k));
    return out;
}

Bytes pkcs7_unpad(std::span<const std::uint8_t> padded) {
    if (padded.size() < kBlockSize || padded.size() % kBlockSize != 0) integrity_failure();
    const std::uint8_t k = padded.back();
    // Inspect the whole final block without early exit.
    unsigned bad = static_cast<unsigned>(k == 0) | static_cast<unsigned>(k > kBlockSize);
    for (std::size_t i = 0; i < kBlockSize; ++i) {
        const std::uint8_t b = padded[padded.size() - 1 - i];
        const unsigned in_pad = static_cast<unsigned>(i < k);
        bad |= in_pad & static_cast<unsigned>(b != k);
    }
    if (bad) integrity_failure();
    return Bytes(padded.begin(), padded.end() - k);
}

Bytes aes256_cbc_encrypt(std::span<const std::uint8_t> key, std::span<const std::uint8_t> iv,
                         std::span<const std::uint8_t> plaintext) {
    check_cbc_args(iv, plaintext);
    auto ctx = ecb_context(key, true);
    Bytes out(plaintext.size());
    std::uint8_t chain[kBlockSize];
    std::memcpy(chain, iv.data(), kBlockSize);
    for (std::size_t off = 0; off < plaintext.size(); off += kBlockSize) {
        std::uint8_t block[kBlockSize];
        for (std::size_t i = 0; i < kBlockSize; ++i) block[i] = plaintext[off + i] ^ chain[i];
        int len = 0;
        if (EVP_EncryptUpdate(ctx.get(), out.data() + off, &len, block, kBlockSize) != 1 || len != kBlockSize) {
            throw Error(errc::unavailable, "block encryption failed");
        }
        std::memcpy(chain, out.data() + off, kBlockSize);
    }
    return out;
}

Bytes aes256_cbc_decrypt(std::span<const std::uint8_t> key, std::span<const std::uint8_t> iv,
                         std::span<const std::uint8_t> ciphertext) {
    check_cbc_args(iv, ciphertext);
    Bytes out(ciphertext.size());
    if (ciphertext.empty()) return out;
    auto ctx = ecb_context(key, false);
    int len = 0;
    if (EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(), static_cast<int>(ciphertext.size())) != 1 ||
        static_cast<std::size_t>(len) != ciphertext.size()) {
        throw Error(errc::unavailable, "block decryption failed");
    }
    for (std::size_t i = 0; i < kBlockSize; ++i) out[i] ^= iv[i];
    for (std::size_t i = kBlockSize; i < out.size(); ++i) out[i] ^= ciphertext[i - kBlockSize];
    return out;
}

std::array<std::uint8_t, 32> hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, 32> out{};
    unsigned len = 0;
    if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), out.data(), &len) ||
        len != out.size()) {
        throw Error(errc::unavailable, "HMAC-SHA256 failed");
    }
    return out;
}

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
    std::array<std::uint8_t, 32> out{};
    SHA256(data.data(), data.size(), out.data());
    return out;
}

bool equal_ct(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) return false;
    return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

void SystemRandom::fill(std::span<std::uint8_t> out) {
    if (out.empty()) return;
    if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
        OPENSSL_cleanse(out.data(), out.size());
        throw Error(errc::unavailable, "system random generator failed");
    }
}

SystemRandom& system_random() {
    static SystemRandom instance;
    return instance;
}

SecretBytes& SecretBytes::operator=(SecretBytes&& other) noexcept {
    if (this != &other) {
        wipe();
        bytes_ = std::move(other.bytes_);
        other.bytes_.clear();
    }
    return *this;
}

void SecretBytes::wipe() noexcept {
    if (!bytes_.empty()) OPENSSL_cleanse(bytes_.data(), bytes_.size());
    bytes_.clear();
    bytes_.shrink_to_fit();
}

KeyMaterial::KeyMaterial(std::span<const std::uint8_t> master_key) {
    if (master_key.size() != kKeySize) throw Error(errc::invalid_argument, "master key must be 32 bytes");
    auto enc = hmac_sha256(master_key, as_bytes(kEncLabel));
    auto mac = hmac_sha256(master_key, as_bytes(kMacLabel));
    enc_ = SecretBytes(enc);
    mac_ = SecretBytes(mac);
    OPENSSL_cleanse(enc.data(), enc.size());
    OPENSSL_cleanse(mac.data(), mac.size());
}

KeyMaterial KeyMaterial::clone() const {
    KeyMaterial k;
    k.enc_ = enc_.clone();
    k.mac_ = mac_.clone();
    return k;
}

void KeyMaterial::release() noexcept {
    enc_.wipe();
    mac_.wipe();
}

std::span<const std::uint8_t> KeyMaterial::encryption_key() const {
    if (released()) throw Error(errc::invalid_argument, "key material has been released");
    return enc_.view();
}

std::span<const std::uint8_t> KeyMaterial::integrity_key() const {
    if (released()) throw Error(errc::invalid_argument, "key material has been released");
    return mac_.view();
}

Bytes serialize_blob(const EncryptedBlob& blob) {
    Bytes out;
    out.reserve(kHeaderSize + blob.ciphertext.size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u16(out, blob.format_version);
    out.insert(out.end(), blob.iv.begin(), blob.iv.end());
    out.insert(out.end(), blob.tag.begin(), blob.tag.end());
    out.insert(out.end(), blob.ciphertext.begin(), blob.ciphertext.end());
    return out;
}

EncryptedBlob parse_blob(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw Error(errc::corruption, "not an encrypted blob");
    }
    EncryptedBlob blob;
    blob.format_version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
    if (blob.format_version != kBlobFormatVersion) {
        throw Error(errc::unknown_version, "unsupported blob format version " + std::to_string(blob.format_version));
    }
    std::memcpy(blob.iv.data(), bytes.data() + 6, kBlockSize);
    std::memcpy(blob.tag.data(), bytes.data() + 6 + kBlockSize, kTagSize);
    blob.ciphertext.assign(bytes.begin() + kHeaderSize, bytes.end());
    if (blob.ciphertext.empty() || blob.ciphertext.size() % kBlockSize != 0) {
        throw Error(errc::corruption, "blob ciphertext is not whole blocks");
    }
    return blob;
}

EncryptedBlob encrypt_record(std::span<const std::uint8_t> plaintext, const KeyMaterial& keys, RandomSource& rng) {
    EncryptedBlob blob;
    rng.fill(blob.iv);
    auto padded = pkcs7_pad(plaintext);
    blob.ciphertext = aes256_cbc_encrypt(keys.encryption_key(), blob.iv, padded);
    OPENSSL_cleanse(padded.data(), padded.size());
    blob.tag = compute_tag(blob, keys);
    return blob;
}

Bytes decrypt_record(const EncryptedBlob& blob, const KeyMaterial& keys) {
    const auto expected = compute_tag(blob, keys);
    if (!equal_ct(expected, blob.tag)) integrity_failure();
    auto padded = aes256_cbc_decrypt(keys.encryption_key(), blob.iv, blob.ciphertext);
    try {
        auto out = pkcs7_unpad(padded);
        OPENSSL_cleanse(padded.data(), padded.size());
        return out;
    } catch (const Error&) {
        OPENSSL_cleanse(padded.data(), padded.size());
        throw Error(errc::corruption, "authenticated blob has invalid padding");
    }
}

Bytes seal(std::span<const std::uint8_t> plaintext, const KeyMaterial& keys, RandomSource& rng) {
    return serialize_blob(encrypt_record(plaintext, keys, rng));
}

Bytes open_sealed(std::span<const std::uint8_t> blob_bytes, const KeyMaterial& keys) {
    return decrypt_record(parse_blob(blob_bytes), keys);
}

SecretBytes scrypt(std::string_view passphrase, std::span<const std::uint8_t> salt, const ScryptParams& params,
                   std::size_t out_len) {
    SecretBytes out(out_len);
    // 128 * r * N bytes plus slack; OpenSSL refuses anything above maxmem.
    const std::uint64_t maxmem = 129ULL * params.r * params.n + (1ULL << 20);
    if (EVP_PBE_scrypt(passphrase.data(), passphrase.size(), salt.data(), salt.size(), params.n, params.r, params.p,
                       maxmem, out.mutable_view().data(), out_len) != 1) {
        throw Error(errc::invalid_argument, "scrypt failed (check N is a power of two and r, p are positive)");
    }
    return out;
}

SecretBytes read_key_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open key file " + path.string());
    SecretBytes key(kKeySize + 1);
    in.read(reinterpret_cast<char*>(key.mutable_view().data()), static_cast<std::streamsize>(kKeySize + 1));
    if (in.gcount() != static_cast<std::streamsize>(kKeySize)) {
        throw Error(errc::invalid_argument, "key file must hold exactly 32 bytes");
    }
    return SecretBytes(key.view().first(kKeySize));
}

void write_key_file(const std::filesystem::path& path, RandomSource& rng) {
    SecretBytes key(kKeySize);
    rng.fill(key.mutable_view());
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(errc::io, "cannot write key file " + path.string());
        out.write(reinterpret_cast<const char*>(key.view().data()), kKeySize);
        if (!out) throw Error(errc::io, "cannot write key file " + path.string());
    }
    std::filesystem::permissions(path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write,
                                 std::filesystem::perm_options::replace);
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0xf];
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    auto nibble = [&](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw Error(errc::parse, "invalid hex string");
    };
    if (hex.size() % 2 != 0) throw Error(errc::parse, "invalid hex string");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    }
    return out;
}

std::string to_base64(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string to_base64url(std::span<const std::uint8_t> bytes) {
    std::string s = to_base64(bytes);
    while (!s.empty() && s.back() == '=') s.pop_back();
    for (char& c : s) {
        if (c == '+') c = '-';
        else if (c == '/') c = '_';
    }
    return s;
}

Bytes from_base64(std::string_view text) {
    if (text.size() % 4 != 0) throw Error(errc::parse, "invalid base64 length");
    Bytes out(3 * (text.size() / 4));
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) throw Error(errc::parse, "invalid base64");
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock counts padding as zero bytes.
    if (!text.empty() && text.back() == '=') --len;
    if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

} // namespace edgehr::vault
