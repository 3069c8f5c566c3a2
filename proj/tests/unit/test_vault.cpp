#include "doctest.h"

#include "edgehr/common/error.hpp"
#include "edgehr/common/rng.hpp"
#include "edgehr/common/time.hpp"
#include "edgehr/eval/latency.hpp"
#include "edgehr/vault/crypto.hpp"
#include "edgehr/vault/record.hpp"
#include "edgehr/vault/store.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

using namespace edgehr;
using namespace edgehr::vault;
namespace fs = std::filesystem;

namespace {

errc code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return errc::io;
}

std::string error_text(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

Bytes random_bytes(Rng& rng, std::size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.below(256));
    return b;
}

// Reference CBC straight from OpenSSL's own CBC mode; the project chains
// blocks itself over the raw block cipher, so the two routes are independent.
Bytes openssl_cbc(const Bytes& key, const Bytes& iv, const Bytes& in, bool encrypt) {
    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    EVP_CipherInit_ex(ctx, EVP_aes_256_cbc(), nullptr, key.data(), iv.data(), encrypt ? 1 : 0);
    EVP_CIPHER_CTX_set_padding(ctx, 0);
    Bytes out(in.size() + 16);
    int n1 = 0, n2 = 0;
    EVP_CipherUpdate(ctx, out.data(), &n1, in.data(), static_cast<int>(in.size()));
    EVP_CipherFinal_ex(ctx, out.data() + n1, &n2);
    EVP_CIPHER_CTX_free(ctx);
    out.resize(static_cast<std::size_t>(n1 + n2));
    return out;
}

class CountingRandom final : public RandomSource {
public:
    explicit CountingRandom(std::uint64_t seed) : rng_(seed) {}
    void fill(std::span<std::uint8_t> out) override {
        for (auto& b : out) b = static_cast<std::uint8_t>(rng_.below(256));
    }

private:
    Rng rng_;
};

class BrokenRandom final : public RandomSource {
public:
    void fill(std::span<std::uint8_t>) override { throw Error(errc::unavailable, "entropy source down"); }
};

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("edgehr_test_vault_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

KeySpec make_key(const fs::path& path, std::uint64_t seed) {
    CountingRandom r(seed);
    write_key_file(path, r);
    return KeySpec::from_key_file(path);
}

PatientRecord sample_record(const std::string& id, const std::string& name = "Amara Sentinel-Q7") {
    PatientRecord r;
    r.patient_id = id;
    r.demographics.name = name;
    r.demographics.birth_date = "1988-04-02";
    r.demographics.sex = "female";
    r.demographics.contact = "+255-700-SENTINEL";
    r.encounters.push_back({parse_timestamp("2026-01-05T09:00:00Z"), "initial visit SENTINEL-NOTE", {}});
    Screening s;
    s.timestamp_ms = parse_timestamp("2026-01-05T09:05:00.250Z");
    s.image_ref = "img_001.png";
    s.features.contract_version = 1;
    s.features.values.assign(72, 0.25);
    s.predicted_hb_gdl = 11.4;
    s.remark = "anemic";
    s.severity = "mild";
    s.model_version = "rf-0123456789ab";
    s.latency_ms = 12.5;
    r.screenings.push_back(s);
    return r;
}

bool file_contains(const fs::path& p, const std::string& needle) {
    std::ifstream in(p, std::ios::binary);
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data.find(needle) != std::string::npos;
}

} // namespace

TEST_CASE("AES-256-CBC matches the SP 800-38A CBC-AES256 vectors") {
    const auto key = from_hex("603deb1015ca71be2b73aef0857d77811f352c073b6108d72d9810a30914dff4");
    const auto iv = from_hex("000102030405060708090a0b0c0d0e0f");
    const auto pt = from_hex(
        "6bc1bee22e409f96e93d7e117393172a"
        "ae2d8a571e03ac9c9eb76fac45af8e51"
        "30c81c46a35ce411e5fbc1191a0a52ef"
        "f69f2445df4f9b17ad2b417be66c3710");
    const auto ct = from_hex(
        "f58c4c04d6e5f1ba779eabfb5f7bfbd6"
        "9cfc4e967edb808d679f777bc6702c7d"
        "39f23369a9d9bacfa530e26304231461"
        "b2eb05e2c39be9fcda6c19078c6a9d1b");
    CHECK(aes256_cbc_encrypt(key, iv, pt) == ct);
    CHECK(aes256_cbc_decrypt(key, iv, ct) == pt);
    CHECK(code_of([&] { aes256_cbc_encrypt(key, iv, Bytes(15)); }) == errc::invalid_argument);
    CHECK(code_of([&] { aes256_cbc_encrypt(Bytes(16), iv, pt); }) == errc::invalid_argument);
}

TEST_CASE("CBC chaining agrees with OpenSSL's CBC mode on random inputs") {
    Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        const auto key = random_bytes(rng, 32);
        const auto iv = random_bytes(rng, 16);
        const auto pt = random_bytes(rng, 16 * rng.below(40));
        const auto ct = aes256_cbc_encrypt(key, iv, pt);
        CHECK(ct == openssl_cbc(key, iv, pt, true));
        CHECK(aes256_cbc_decrypt(key, iv, ct) == pt);
    }
}

TEST_CASE("PKCS7 examples") {
    CHECK(pkcs7_pad(Bytes{}) == Bytes(16, 0x10));
    const auto p15 = pkcs7_pad(Bytes(15, 0xaa));
    CHECK(p15.size() == 16);
    CHECK(p15.back() == 0x01);
    CHECK(pkcs7_pad(Bytes(16, 1)).size() == 32);
    Bytes bad(16, 0);
    bad[14] = 0x02;
    bad[15] = 0x03;
    CHECK(code_of([&] { pkcs7_unpad(bad); }) == errc::integrity);
    CHECK(code_of([] { pkcs7_unpad(Bytes(15, 1)); }) == errc::integrity);
    CHECK(code_of([] { pkcs7_unpad(Bytes{}); }) == errc::integrity);
    CHECK(code_of([] { pkcs7_unpad(Bytes(16, 0)); }) == errc::integrity);
    CHECK(code_of([] { pkcs7_unpad(Bytes(16, 17)); }) == errc::integrity);
    // Every padding failure reads the same.
    CHECK(error_text([&] { pkcs7_unpad(bad); }) == error_text([] { pkcs7_unpad(Bytes(16, 0)); }));
}

TEST_CASE("PKCS7 round trip and tamper property over 10^4 cases") {
    Rng rng(17);
    for (int trial = 0; trial < 10000; ++trial) {
        const auto data = random_bytes(rng, rng.below(100));
        auto padded = pkcs7_pad(data);
        REQUIRE(padded.size() % 16 == 0);
        const std::size_t k = padded.size() - data.size();
        CHECK(k >= 1);
        CHECK(k <= 16);
        CHECK(pkcs7_unpad(padded) == data);
        // Changing a padding byte to any other value must be rejected.
        const std::size_t pos = padded.size() - 1 - rng.below(k);
        const auto delta = static_cast<std::uint8_t>(1 + rng.below(255));
        padded[pos] = static_cast<std::uint8_t>(padded[pos] ^ delta);
        if (pos == padded.size() - 1) {
            // The last byte names the pad length, so a new value can
            // still describe a valid shorter pad; check against the rule.
            const std::uint8_t nk = padded.back();
            bool valid = nk >= 1 && nk <= 16;
            for (std::size_t i = 0; valid && i < nk; ++i) valid = padded[padded.size() - 1 - i] == nk;
            if (valid) CHECK(pkcs7_unpad(padded).size() == padded.size() - nk);
            else CHECK(code_of([&] { pkcs7_unpad(padded); }) == errc::integrity);
        } else {
            CHECK(code_of([&] { pkcs7_unpad(padded); }) == errc::integrity);
        }
    }
}

TEST_CASE("sealed blobs round trip and detect tampering") {
    CountingRandom rnd(5);
    Bytes master(32);
    rnd.fill(master);
    const KeyMaterial keys(master);
    CHECK(!std::equal(keys.encryption_key().begin(), keys.encryption_key().end(), keys.integrity_key().begin()));

    Rng rng(23);
    for (std::size_t n = 0; n <= 64; ++n) {
        const auto pt = random_bytes(rng, n);
        CHECK(open_sealed(seal(pt, keys, rnd), keys) == pt);
    }
    for (std::size_t n : {1000u, 10240u, 65537u, 1u << 20}) {
        const auto pt = random_bytes(rng, n);
        CHECK(open_sealed(seal(pt, keys, rnd), keys) == pt);
    }

    const auto pt = random_bytes(rng, 300);
    for (int trial = 0; trial < 10000; ++trial) {
        auto blob = seal(pt, keys, rnd);
        const std::size_t pos = 6 + rng.below(blob.size() - 6);
        blob[pos] ^= static_cast<std::uint8_t>(1u << rng.below(8));
        CHECK(code_of([&] { open_sealed(blob, keys); }) == errc::integrity);
    }

    auto blob = seal(pt, keys, rnd);
    Bytes other(32, 7);
    CHECK(code_of([&] { open_sealed(blob, KeyMaterial(other)); }) == errc::integrity);
    blob[4] = 2;
    CHECK(code_of([&] { open_sealed(blob, keys); }) == errc::unknown_version);
    CHECK(code_of([&] { parse_blob(Bytes{'E', 'H', 'R'}); }) == errc::corruption);
    CHECK(code_of([&] { parse_blob(Bytes(80, 0)); }) == errc::corruption);
}

TEST_CASE("bad padding under a valid tag is corruption, not integrity") {
    Bytes master(32, 9);
    const KeyMaterial keys(master);
    EncryptedBlob blob;
    blob.iv.fill(3);
    blob.ciphertext = aes256_cbc_encrypt(keys.encryption_key(), blob.iv, Bytes(32, 0));
    // Tag computed independently over version | iv | ciphertext.
    Bytes msg(2 + 16 + blob.ciphertext.size());
    msg[0] = 1;
    std::copy(blob.iv.begin(), blob.iv.end(), msg.begin() + 2);
    std::copy(blob.ciphertext.begin(), blob.ciphertext.end(), msg.begin() + 18);
    blob.tag = hmac_sha256(keys.integrity_key(), msg);
    CHECK(code_of([&] { decrypt_record(blob, keys); }) == errc::corruption);
}

TEST_CASE("fresh IVs: 10^5 encryptions under one key never repeat an IV") {
    Bytes master(32, 1);
    const KeyMaterial keys(master);
    std::unordered_set<std::string> ivs;
    const Bytes pt(10, 0x41);
    for (int i = 0; i < 100000; ++i) {
        const auto blob = encrypt_record(pt, keys);
        ivs.insert(std::string(blob.iv.begin(), blob.iv.end()));
    }
    CHECK(ivs.size() == 100000);
    const auto a = encrypt_record(pt, keys), b = encrypt_record(pt, keys);
    CHECK(a.ciphertext != b.ciphertext);
}

TEST_CASE("a failing random source is an error, never a fixed IV") {
    Bytes master(32, 1);
    const KeyMaterial keys(master);
    BrokenRandom broken;
    CHECK(code_of([&] { encrypt_record(Bytes(5), keys, broken); }) == errc::unavailable);
}

TEST_CASE("released key material is wiped and refuses use") {
    Bytes master(32, 4);
    KeyMaterial keys(master);
    keys.release();
    CHECK(keys.released());
    CHECK(code_of([&] { (void)keys.encryption_key(); }) == errc::invalid_argument);
    CHECK(code_of([] { KeyMaterial k(Bytes(31)); }) == errc::invalid_argument);
}

TEST_CASE("10 KiB encrypt+decrypt round trip stays under 30 ms at p95") {
    Bytes master(32, 2);
    const KeyMaterial keys(master);
    Rng rng(1);
    const auto pt = random_bytes(rng, 10 * 1024);
    const auto stats = eval::benchmark_latency("vault_roundtrip", [&] { (void)open_sealed(seal(pt, keys), keys); }, 20, 500);
    MESSAGE("10 KiB round trip p95 ms: " << stats.p95_ms);
    CHECK(stats.p95_ms < 30.0);
}

TEST_CASE("hex and base64 helpers") {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const auto b = random_bytes(rng, rng.below(50));
        CHECK(from_hex(to_hex(b)) == b);
        CHECK(from_base64(to_base64(b)) == b);
        const auto url = to_base64url(b);
        CHECK(url.find_first_of("+/=") == std::string::npos);
    }
    CHECK(code_of([] { from_hex("abc"); }) == errc::parse);
    CHECK(code_of([] { from_hex("zz"); }) == errc::parse);
}

TEST_CASE("scrypt is deterministic and salt dependent") {
    const ScryptParams p{1u << 10, 8, 1};
    const Bytes salt1(16, 1), salt2(16, 2);
    const auto a = scrypt("correct horse", salt1, p), b = scrypt("correct horse", salt1, p),
               c = scrypt("correct horse", salt2, p);
    CHECK(std::equal(a.view().begin(), a.view().end(), b.view().begin()));
    CHECK(!std::equal(a.view().begin(), a.view().end(), c.view().begin()));
    // RFC 7914 test vector: P="password", S="NaCl", N=1024, r=8, p=16.
    const auto v = scrypt("password", as_bytes("NaCl"), {1024, 8, 16}, 64);
    CHECK(to_hex(v.view()) ==
          "fdbabe1c9d3472007856e7190d01e9fe7c6ad7cbc8237830e77376634b373162"
          "2eaf30d92e22a3886ff109279d9830dac727afb94a83ee6d8360cbdfa2cc0640");
}

TEST_CASE("records: canonical JSON, unknown fields, validation") {
    auto r = sample_record("p-001");
    r.extra["future_field"] = {{"x", 1}};
    r.demographics.extra["preferred_language"] = "sw";
    r.screenings[0].extra["device"] = "cam-2";
    const auto bytes = canonical_bytes(r);
    const auto back = parse_record(bytes);
    CHECK(back == r);
    CHECK(canonical_bytes(back) == bytes);
    CHECK(bytes.find("\"future_field\"") != std::string::npos);

    auto bad = r;
    bad.patient_id = "../etc";
    CHECK(code_of([&] { validate(bad); }) == errc::invalid_argument);
    bad = r;
    bad.demographics.sex = "f";
    CHECK(code_of([&] { validate(bad); }) == errc::invalid_argument);
    bad = r;
    bad.demographics.birth_date = "1988-02-30";
    CHECK(code_of([&] { validate(bad); }) == errc::invalid_argument);
    bad = r;
    bad.encounters.push_back({r.encounters[0].timestamp_ms - 1, "earlier", {}});
    CHECK(code_of([&] { validate(bad); }) == errc::invalid_argument);
    CHECK(code_of([] { parse_record("{\"format\":2,\"patient_id\":\"a\"}"); }) == errc::unknown_version);
    CHECK(code_of([] { parse_record("{\"format\":1}"); }) == errc::parse);
    CHECK(code_of([] { parse_record("not json"); }) == errc::parse);
}

TEST_CASE("timestamps") {
    CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_timestamp("2026-10-16T12:34:56.789Z") == 1792154096789LL);
    CHECK(format_timestamp(1792154096789LL) == "2026-10-16T12:34:56.789Z");
    CHECK(format_timestamp(-1) == "1969-12-31T23:59:59.999Z");
    CHECK(parse_timestamp("2026-10-16T12:34:56.7Z") == 1792154096700LL);
    CHECK(code_of([] { parse_timestamp("2026-10-16 12:34:56Z"); }) == errc::parse);
    CHECK(code_of([] { parse_timestamp("2026-13-16T12:34:56Z"); }) == errc::parse);
    CHECK(code_of([] { parse_timestamp("2026-10-16T12:34:56"); }) == errc::parse);
    CHECK(parse_date("2000-02-29") == 11016);
    CHECK(format_date(11016) == "2000-02-29");
}

TEST_CASE("store: put, get, list, delete, revisions") {
    const auto dir = scratch("basic");
    const auto key = make_key(dir / "master.key", 1);
    Store::init(dir / "store", key);
    auto store = Store::open(dir / "store", key);

    const auto r1 = sample_record("p1");
    const auto m1 = store->put(r1, std::nullopt, true);
    CHECK(m1.revision == 1);
    CHECK(store->get("p1") == r1);
    CHECK(code_of([&] { store->put(r1, std::nullopt, true); }) == errc::conflict);
    CHECK(code_of([&] { store->put(r1, 7); }) == errc::conflict);
    auto r1b = r1;
    r1b.demographics.contact = "new";
    CHECK(store->put(r1b, 1).revision == 2);
    CHECK(store->get("p1") == r1b);

    for (int i = 2; i <= 6; ++i) store->put(sample_record("p" + std::to_string(i)));
    CHECK(store->size() == 6);
    const auto page = store->list(2, 3);
    REQUIRE(page.size() == 3);
    CHECK(page[0].patient_id == "p3");
    CHECK(page[2].patient_id == "p5");

    store->remove("p2");
    CHECK(code_of([&] { store->get("p2"); }) == errc::not_found);
    CHECK(code_of([&] { store->remove("p2"); }) == errc::not_found);
    CHECK(code_of([&] { store->get("nobody"); }) == errc::not_found);
    CHECK(store->size() == 5);

    const auto log = store->change_log();
    CHECK(log.size() == 8);
    for (std::size_t i = 1; i < log.size(); ++i) CHECK(log[i].sequence > log[i - 1].sequence);
    CHECK(log.back().operation == "delete");
    CHECK(log.front().version_hash == version_hash(r1));

    store->write_aux("notes", as_bytes("aux secret SENTINEL-AUX"));
    const auto aux = store->read_aux("notes");
    REQUIRE(aux);
    CHECK(std::string(aux->begin(), aux->end()) == "aux secret SENTINEL-AUX");

    // Reopen: state persists.
    store.reset();
    store = Store::open(dir / "store", key);
    CHECK(store->get("p1") == r1b);
    CHECK(store->meta("p1")->revision == 2);
    CHECK(store->size() == 5);
    CHECK(store->put(sample_record("p7")).stamp.seq == 9);
}

TEST_CASE("store: nothing on disk contains plaintext") {
    const auto dir = scratch("sentinel");
    const auto key = make_key(dir / "master.key", 2);
    Store::init(dir / "store", key);
    {
        auto store = Store::open(dir / "store", key);
        for (int i = 0; i < 5; ++i) store->put(sample_record("s" + std::to_string(i)));
        store->write_aux("users", as_bytes("SENTINEL-AUX"));
    }
    for (const auto& e : fs::recursive_directory_iterator(dir / "store")) {
        if (!e.is_regular_file()) continue;
        for (const char* needle : {"Sentinel-Q7", "SENTINEL", "Amara", "rf-0123456789ab", "1988-04-02"}) {
            CHECK_MESSAGE(!file_contains(e.path(), needle), e.path().string() << " contains " << needle);
        }
    }
}

TEST_CASE("store: wrong key, locking and passphrase keys") {
    const auto dir = scratch("keys");
    const auto key = make_key(dir / "a.key", 3);
    const auto wrong = make_key(dir / "b.key", 4);
    Store::init(dir / "store", key);
    {
        auto store = Store::open(dir / "store", key);
        store->put(sample_record("k1"));
        CHECK(code_of([&] { Store::open(dir / "store", key); }) == errc::conflict);
        CHECK(code_of([&] { Store::open(dir / "store", key, Store::Mode::read_only); }) == errc::conflict);
    }
    CHECK(code_of([&] { Store::open(dir / "store", wrong); }) == errc::integrity);
    {
        auto r1 = Store::open(dir / "store", key, Store::Mode::read_only);
        auto r2 = Store::open(dir / "store", key, Store::Mode::read_only);
        CHECK(r1->get("k1") == r2->get("k1"));
        CHECK(code_of([&] { r1->put(sample_record("k2")); }) == errc::unavailable);
    }
    CHECK(code_of([&] { Store::init(dir / "store", key); }) == errc::conflict);

    const auto pass = KeySpec::from_passphrase("long enough passphrase", {1u << 10, 8, 1});
    Store::init(dir / "pstore", pass);
    {
        auto store = Store::open(dir / "pstore", pass);
        store->put(sample_record("pp"));
    }
    CHECK(code_of([&] { Store::open(dir / "pstore", KeySpec::from_passphrase("wrong passphrase!", {1u << 10, 8, 1})); }) ==
          errc::integrity);
    CHECK(code_of([&] { Store::open(dir / "pstore", key); }) == errc::invalid_argument);
    CHECK(Store::open(dir / "pstore", pass)->get("pp") == sample_record("pp"));
}

TEST_CASE("store: a crash between temp write and rename keeps the old version") {
    const auto dir = scratch("crash");
    const auto key = make_key(dir / "master.key", 5);
    Store::init(dir / "store", key);
    auto store = Store::open(dir / "store", key);
    const auto v1 = sample_record("c1");
    store->put(v1);
    auto v2 = v1;
    v2.demographics.name = "Changed";
    store->storage().fault_hook = [](std::string_view stage, const std::string& k) {
        if (stage == "after_temp_write" && k == "records/c1.enc") throw std::runtime_error("simulated crash");
    };
    CHECK_THROWS_AS(store->put(v2), std::runtime_error);
    store->storage().fault_hook = nullptr;
    CHECK(store->get("c1") == v1);
    store.reset();
    CHECK(fs::exists(dir / "store" / "records" / "c1.enc.tmp"));
    store = Store::open(dir / "store", key);
    CHECK(!fs::exists(dir / "store" / "records" / "c1.enc.tmp"));
    CHECK(store->get("c1") == v1);
    CHECK(store->meta("c1")->revision == 1);
}

TEST_CASE("store: a crash between record and index writes is reconciled on open") {
    const auto dir = scratch("crash_index");
    const auto key = make_key(dir / "master.key", 6);
    Store::init(dir / "store", key);
    auto store = Store::open(dir / "store", key);
    store->put(sample_record("c1"));
    auto v2 = sample_record("c1");
    v2.demographics.name = "Second";
    store->storage().fault_hook = [](std::string_view stage, const std::string& k) {
        if (stage == "after_temp_write" && k == "index") throw std::runtime_error("simulated crash");
    };
    CHECK_THROWS_AS(store->put(v2), std::runtime_error);
    store.reset();
    store = Store::open(dir / "store", key);
    CHECK(store->get("c1") == v2);
    CHECK(store->meta("c1")->revision == 2);
    // The sequence counter resumes past the recovered write.
    CHECK(store->put(sample_record("c2")).stamp.seq == 3);

    // Losing the index entirely rebuilds it from the record files.
    store.reset();
    fs::remove(dir / "store" / "index");
    store = Store::open(dir / "store", key);
    CHECK(store->size() == 2);
    CHECK(store->get("c1") == v2);
}

TEST_CASE("store: a tampered record surfaces an integrity error and is flagged") {
    const auto dir = scratch("tamper");
    const auto key = make_key(dir / "master.key", 7);
    Store::init(dir / "store", key);
    auto store = Store::open(dir / "store", key);
    store->put(sample_record("t1"));
    store->put(sample_record("t2"));
    const auto path = dir / "store" / "records" / "t1.enc";
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(80);
        f.put('\x5a');
    }
    CHECK(code_of([&] { store->get("t1"); }) == errc::integrity);
    CHECK(store->flagged().count("t1") == 1);
    CHECK(store->get("t2") == sample_record("t2"));
    store.reset();
    store = Store::open(dir / "store", key);
    CHECK(store->flagged().count("t1") == 1);
    CHECK(code_of([&] { store->get("t1"); }) == errc::integrity);
}

TEST_CASE("store: key rotation") {
    const auto dir = scratch("rotate");
    const auto k1 = make_key(dir / "k1.key", 8);
    const auto k2 = make_key(dir / "k2.key", 9);
    const auto k3 = make_key(dir / "k3.key", 10);
    const auto wrong = make_key(dir / "wrong.key", 11);
    Store::init(dir / "store", k1);
    auto store = Store::open(dir / "store", k1);
    for (int i = 0; i < 4; ++i) store->put(sample_record("r" + std::to_string(i)));
    store->remove("r3");
    store->write_aux("users", as_bytes("u"));

    auto snapshot = [&](const fs::path& root) {
        std::map<std::string, std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (!e.is_regular_file()) continue;
            std::ifstream in(e.path(), std::ios::binary);
            files[fs::relative(e.path(), root).string()] =
                std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        }
        return files;
    };
    const auto before = snapshot(dir / "store");
    CHECK(code_of([&] { store->rotate_keys(wrong, k2); }) == errc::integrity);
    CHECK(snapshot(dir / "store") == before);

    const auto report = store->rotate_keys(k1, k2);
    CHECK(report.records == 4);
    CHECK(report.aux == 1);
    CHECK(report.changelog_entries == 5);
    CHECK(store->get("r0") == sample_record("r0"));
    store.reset();
    CHECK(code_of([&] { Store::open(dir / "store", k1); }) == errc::integrity);
    store = Store::open(dir / "store", k2);
    CHECK(store->get("r2") == sample_record("r2"));
    CHECK(store->change_log().size() == 5);

    store->rotate_keys(k2, k3);
    store.reset();
    store = Store::open(dir / "store", k3);
    CHECK(store->get("r1") == sample_record("r1"));
    CHECK(code_of([&] { store->get("r3"); }) == errc::not_found);
    const auto users = store->read_aux("users");
    CHECK(std::string(users->begin(), users->end()) == "u");

    SUBCASE("crash before the header commit discards the staged files") {
        store->storage().fault_hook = [](std::string_view stage, const std::string& k) {
            if (stage == "after_temp_write" && k == "header") throw std::runtime_error("crash");
        };
        CHECK_THROWS_AS(store->rotate_keys(k3, k1), std::runtime_error);
        store.reset();
        CHECK(fs::exists(dir / "store" / "rotation"));
        store = Store::open(dir / "store", k3);
        CHECK(!fs::exists(dir / "store" / "rotation"));
        CHECK(store->get("r1") == sample_record("r1"));
    }
    SUBCASE("crash after the header commit is rolled forward") {
        store->storage().fault_hook = [](std::string_view stage, const std::string& k) {
            if (stage == "after_rename" && k == "header") throw std::runtime_error("crash");
        };
        CHECK_THROWS_AS(store->rotate_keys(k3, k1), std::runtime_error);
        store.reset();
        store = Store::open(dir / "store", k1);
        CHECK(!fs::exists(dir / "store" / "rotation"));
        CHECK(store->get("r1") == sample_record("r1"));
        CHECK(store->change_log().size() == 5);
    }
}

TEST_CASE("store: sync apply resolves by stamp and archives concurrent losers") {
    const auto dir = scratch("apply");
    const auto key = make_key(dir / "master.key", 12);
    Store::init(dir / "a", key);
    Store::init(dir / "b", key, InitOptions{dir / "a" / "header"});
    auto a = Store::open(dir / "a", key);
    auto b = Store::open(dir / "b", key);
    CHECK(a->device_id() != b->device_id());
    std::int64_t t = 1000;
    a->clock = [&] { return t; };
    b->clock = [&] { return t; };

    a->put(sample_record("x", "From A"));
    auto ab = a->changes_since(b->vector());
    CHECK(ab.entries.size() == 1);
    CHECK(b->apply(ab.entries, ab.vector).applied == 1);
    CHECK(b->get("x") == a->get("x"));
    CHECK(b->changes_since(a->vector()).entries.empty());

    // Concurrent edits: B's is later, so it wins on both sides.
    t = 2000;
    a->put(sample_record("x", "A edit"));
    t = 3000;
    b->put(sample_record("x", "B edit"));
    const auto to_a = b->changes_since(a->vector());
    const auto to_b = a->changes_since(b->vector());
    const auto ra = a->apply(to_a.entries, to_a.vector);
    const auto rb = b->apply(to_b.entries, to_b.vector);
    CHECK(ra.archived == 1);
    CHECK(rb.archived == 1);
    CHECK(a->get("x").demographics.name == "B edit");
    CHECK(b->get("x").demographics.name == "B edit");
    REQUIRE(a->archive("x").size() == 1);
    CHECK(a->archive("x")[0].record->demographics.name == "A edit");
    CHECK(b->archive("x")[0].record->demographics.name == "A edit");

    // Replays change nothing.
    const auto again = a->apply(to_a.entries, to_a.vector);
    CHECK(again.applied == 0);
    CHECK(a->archive().size() == 1);

    // A tampered payload is refused before anything is written.
    auto bad = b->changes_since({});
    bad.entries[0].payload[70] ^= 1;
    CHECK(code_of([&] { a->apply(bad.entries, bad.vector); }) == errc::integrity);

    // A store keyed differently cannot join.
    const auto other = make_key(dir / "other.key", 13);
    CHECK(code_of([&] { Store::init(dir / "c", other, InitOptions{dir / "a" / "header"}); }) == errc::integrity);
}
