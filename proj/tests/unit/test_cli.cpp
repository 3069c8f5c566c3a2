#include "doctest.h"

#include "cli.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("edgehr_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cli(std::vector<std::string> args) {
    args.insert(args.begin(), "edgehr");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = edgehr::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST_CASE("usage errors exit 2 with a one-line message") {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {},
             {"frobnicate"},
             {"train", "--model", "svr", "-o", "x.bin"},
             {"bench", "--op", "features", "--bogus"},
             {"evaluate", "--folds", "1", "--out", "x"},
         }) {
        const auto r = cli(args);
        CHECK(r.code == 2);
        CHECK(r.err.rfind("error: usage: ", 0) == 0);
        CHECK(lines(r.err) == 1);
        CHECK(r.out.empty());
    }
}

TEST_CASE("help goes to stdout and exits 0") {
    const auto top = cli({"--help"});
    CHECK(top.code == 0);
    CHECK(top.out.find("train") != std::string::npos);
    const auto sub = cli({"store", "user", "add", "--help"});
    CHECK(sub.code == 0);
    CHECK(sub.out.find("--password-stdin") != std::string::npos);
}

TEST_CASE("dataset, train, predict and evaluate") {
    const auto dir = scratch("pipeline");
    auto r = cli({"dataset", "synth", "--out", (dir / "data").string(), "--n", "40", "--seed", "3"});
    REQUIRE(r.code == 0);
    const auto manifest = json::parse(r.out).at("manifest").get<std::string>();

    r = cli({"dataset", "validate", manifest});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("loaded") == 40);
    CHECK(json::parse(r.out).at("rejected") == 0);

    SUBCASE("a broken manifest row fails validation with exit 1") {
        std::ofstream(manifest, std::ios::app) << "missing.png,missing.txt,12.0\n";
        r = cli({"dataset", "validate", manifest});
        CHECK(r.code == 1);
        CHECK(json::parse(r.out).at("rejected") == 1);
        CHECK(r.err.rfind("error: invalid_argument: ", 0) == 0);
    }

    SUBCASE("training is byte-deterministic per seed") {
        std::ofstream(dir / "rf.conf") << "n_trees = 10\nmax_depth = 4\n";
        const auto a = (dir / "a.bin").string();
        const auto b = (dir / "b.bin").string();
        const auto c = (dir / "c.bin").string();
        REQUIRE(cli({"train", "--model", "rf", "--config", (dir / "rf.conf").string(), "--seed", "7", "-o", a, manifest})
                    .code == 0);
        REQUIRE(cli({"train", "--model", "rf", "--config", (dir / "rf.conf").string(), "--seed", "7", "-o", b, manifest})
                    .code == 0);
        REQUIRE(cli({"train", "--model", "rf", "--config", (dir / "rf.conf").string(), "--seed", "8", "-o", c, manifest})
                    .code == 0);
        CHECK(slurp(a) == slurp(b));
        CHECK(slurp(a) != slurp(c));

        r = cli({"predict", a, (dir / "data" / "img_000.ppm").string(), (dir / "data" / "img_000.txt").string()});
        REQUIRE(r.code == 0);
        const auto j = json::parse(r.out);
        const double hb = j.at("predicted_hb_gdl");
        CHECK(hb > 0.0);
        CHECK(hb < 25.0);
        CHECK(j.at("remark") == (hb < 12.0 ? "anemic" : "non_anemic"));
        CHECK(j.at("image_ref") == "img_000.ppm");
    }

    SUBCASE("predict reports the failing stage") {
        const auto model = (dir / "m.bin").string();
        REQUIRE(cli({"train", "--model", "ridge", "-o", model, manifest}).code == 0);
        std::ofstream(dir / "empty.txt") << "";
        r = cli({"predict", model, (dir / "data" / "img_000.ppm").string(), (dir / "empty.txt").string()});
        CHECK(r.code == 1);
        CHECK(r.err.find("stage ") != std::string::npos);
        std::ofstream(dir / "junk.png") << "not an image";
        r = cli({"predict", model, (dir / "junk.png").string(), (dir / "data" / "img_000.txt").string()});
        CHECK(r.code == 1);
        CHECK(r.err.find("stage decode") != std::string::npos);
    }

    SUBCASE("balance writes an equal-class manifest") {
        const auto out = (dir / "balanced.csv").string();
        r = cli({"balance", "--mode", "remark", "--seed", "1", "--out", out, manifest});
        REQUIRE(r.code == 0);
        CHECK(fs::exists(out));
        r = cli({"dataset", "validate", out});
        CHECK(r.code == 0);
    }

    SUBCASE("evaluate writes a report ordered by rmse") {
        r = cli({"evaluate", "--synthetic", "120", "--folds", "3", "--out", (dir / "report").string(), "rf", "mean"});
        REQUIRE(r.code == 0);
        const auto report = slurp(dir / "report" / "report.csv");
        CHECK(report.rfind("model,sensitivity,specificity,mae_gdl,rmse_gdl\n", 0) == 0);
        CHECK(report.find("RandomForest") < report.find("MeanPredictor"));
    }
}

TEST_CASE("bench prints latency json") {
    const auto r = cli({"bench", "--op", "crypto", "--runs", "5"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j.at("op") == "crypto_roundtrip_10KiB");
    CHECK(j.at("n_runs") == 5);
    CHECK(j.at("p50_ms").get<double>() <= j.at("p95_ms").get<double>());
}

TEST_CASE("store init, users and export") {
    const auto dir = scratch("store");
    const auto store = (dir / "store").string();
    const auto key = (dir / "master.key").string();

    auto r = cli({"store", "init", "--store", store, "--key-file", key});
    CHECK(r.code == 1);  // no key file and no --create-key

    r = cli({"store", "init", "--store", store, "--key-file", key, "--create-key"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("device_id").get<std::string>().size() > 0);
    CHECK(fs::file_size(key) == 32);

    r = cli({"store", "init", "--store", store, "--key-file", key});
    CHECK(r.code == 1);
    CHECK(r.err.rfind("error: conflict: ", 0) == 0);

    ::unsetenv("EDGEHR_USER_PASSWORD");
    r = cli({"store", "user", "add", "--store", store, "--key-file", key, "--username", "ana", "--role", "clinician"});
    CHECK(r.code == 1);

    ::setenv("EDGEHR_USER_PASSWORD", "correct horse battery", 1);
    r = cli({"store", "user", "add", "--store", store, "--key-file", key, "--username", "ana", "--role", "clinician"});
    REQUIRE(r.code == 0);
    r = cli({"store", "user", "add", "--store", store, "--key-file", key, "--username", "ana", "--role", "admin"});
    CHECK(r.code == 1);
    r = cli({"store", "user", "role", "--store", store, "--key-file", key, "--username", "ana", "--role", "screener"});
    CHECK(r.code == 0);
    r = cli({"store", "user", "role", "--store", store, "--key-file", key, "--username", "ana", "--role", "wizard"});
    CHECK(r.code == 1);
    r = cli({"store", "user", "revoke", "--store", store, "--key-file", key, "--username", "ana"});
    CHECK(r.code == 0);
    ::unsetenv("EDGEHR_USER_PASSWORD");

    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) CHECK(slurp(entry.path()).find("correct horse") == std::string::npos);
    }

    r = cli({"export", "--store", store, "--key-file", key, "--out", (dir / "export.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("rows") == 0);
    CHECK(slurp(dir / "export.csv") == "pseudonym,age_bucket,sex,hb_gdl,remark,severity,date\n");

    r = cli({"export", "--store", store, "--key-file", (dir / "wrong.key").string(), "--out", (dir / "x.csv").string()});
    CHECK(r.code == 1);
}
