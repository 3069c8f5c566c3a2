#include "cli.hpp"

#include "edgehr/access/access.hpp"
#include "edgehr/balance/kde.hpp"
#include "edgehr/common/error.hpp"
#include "edgehr/common/rng.hpp"
#include "edgehr/common/time.hpp"
#include "edgehr/eval/dataset.hpp"
#include "edgehr/eval/latency.hpp"
#include "edgehr/eval/survey.hpp"
#include "edgehr/imaging/annotations.hpp"
#include "edgehr/imaging/codec.hpp"
#include "edgehr/imaging/stage_error.hpp"
#include "edgehr/service/export.hpp"
#include "edgehr/service/server.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <pthread.h>
#include <sstream>
#include <thread>

namespace edgehr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kUserPasswordEnv = "EDGEHR_USER_PASSWORD";
constexpr const char* kNewPassphraseEnv = "EDGEHR_NEW_PASSPHRASE";

const std::map<std::string, std::string> kModelNames{
    {"rf", "RandomForest"}, {"gbm", "GradientBoosting"}, {"ridge", "Ridge"}, {"lasso", "Lasso"},
    {"enet", "ElasticNet"}, {"huber", "Huber"},          {"ransac", "RANSAC"}, {"mean", "MeanPredictor"},
};

std::string one_line(std::string s) {
    for (auto& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

void write_file(const fs::path& path, const std::string& data) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(errc::io, "cannot write " + path.string());
    out << data;
    if (!out) throw Error(errc::io, "short write to " + path.string());
}

std::string read_file(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw Error(errc::io, "cannot read " + path.string() + ": not a file");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Training options from a flat key = value file; flags override nothing
// here except the seed, which is always echoed.
struct TrainOptions {
    models::TrainConfig tree;
    double lambda = -1.0;
    double l1_ratio = 0.5;
    double delta = 1.35;
    double inlier_threshold = 0.0;
    std::size_t ransac_iters = 100;
    std::string balance = "none";
};

TrainOptions parse_train_config(const std::string& text) {
    TrainOptions o;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto b = raw.find_first_not_of(" \t\r");
        if (b == std::string::npos || raw[b] == '#') continue;
        const auto eq = raw.find('=');
        if (eq == std::string::npos) throw Error(errc::parse, "train config line " + std::to_string(line) + ": expected key = value");
        auto trim = [](std::string s) {
            const auto x = s.find_first_not_of(" \t\r");
            const auto y = s.find_last_not_of(" \t\r");
            return x == std::string::npos ? std::string{} : s.substr(x, y - x + 1);
        };
        const std::string key = trim(raw.substr(0, eq));
        const std::string v = trim(raw.substr(eq + 1));
        try {
            if (key == "n_trees") o.tree.n_trees = std::stoul(v);
            else if (key == "max_depth") o.tree.max_depth = std::stoi(v);
            else if (key == "min_leaf") o.tree.min_leaf = std::stoul(v);
            else if (key == "features_per_split") o.tree.features_per_split = std::stod(v);
            else if (key == "bootstrap") o.tree.bootstrap = (v == "true" || v == "1");
            else if (key == "learning_rate") o.tree.learning_rate = std::stod(v);
            else if (key == "n_stages") o.tree.n_stages = std::stoul(v);
            else if (key == "seed") o.tree.seed = std::stoull(v);
            else if (key == "lambda") o.lambda = std::stod(v);
            else if (key == "l1_ratio") o.l1_ratio = std::stod(v);
            else if (key == "delta") o.delta = std::stod(v);
            else if (key == "inlier_threshold") o.inlier_threshold = std::stod(v);
            else if (key == "ransac_iters") o.ransac_iters = std::stoul(v);
            else if (key == "balance") o.balance = v;
            else throw Error(errc::parse, "train config line " + std::to_string(line) + ": unknown key '" + key + "'");
        } catch (const std::logic_error&) {
            throw Error(errc::parse, "train config line " + std::to_string(line) + ": bad value for " + key);
        }
    }
    return o;
}

models::Model train_named(const std::string& name, std::span<const balance::LabeledSample> data, const TrainOptions& o) {
    const auto lam = [&](double fallback) { return o.lambda >= 0.0 ? o.lambda : fallback; };
    if (name == "rf") return models::train_forest(data, o.tree);
    if (name == "gbm") return models::train_gbm(data, o.tree);
    if (name == "ridge") return models::train_ridge(data, lam(1.0));
    if (name == "lasso") return models::train_lasso(data, lam(0.05));
    if (name == "enet") return models::train_elastic_net(data, lam(0.05), o.l1_ratio);
    if (name == "huber") return models::train_huber(data, o.delta, lam(1.0));
    if (name == "mean") return models::train_mean(data);
    if (name == "ransac") {
        models::RansacParams p;
        p.n_iters = o.ransac_iters;
        p.inlier_threshold = o.inlier_threshold;
        p.seed = o.tree.seed;
        const double l = lam(1.0);
        return models::train_ransac(data, [l](auto s) { return models::train_ridge(s, l); }, p);
    }
    throw Error(errc::invalid_argument, "unknown model '" + name + "'");
}

json issues_json(const std::vector<eval::DatasetIssue>& issues) {
    json out = json::array();
    for (const auto& i : issues) out.push_back({{"row", i.row}, {"stage", i.stage}, {"message", i.message}});
    return out;
}

std::size_t rejected(const eval::Dataset& d) {
    std::size_t n = 0;
    for (const auto& i : d.issues) n += i.stage != "warning";
    return n;
}

// Store location and key, from --config or from --store/--key-file.
struct StoreArgs {
    std::string config;
    std::string store;
    std::string key_file;

    void add(CLI::App* app) {
        app->add_option("--config", config, "service config file (store_path, key_file)");
        app->add_option("--store", store, "store directory");
        app->add_option("--key-file", key_file, "32-byte master key file; default EDGEHR_PASSPHRASE");
    }

    service::ServiceConfig resolve() const {
        service::ServiceConfig c;
        if (!config.empty()) c = service::load_config(config);
        if (!store.empty()) c.store_path = store;
        if (!key_file.empty()) c.key_file = key_file;
        if (c.store_path.empty()) throw Error(errc::invalid_argument, "need --store or --config");
        if (c.audit_log.empty()) c.audit_log = c.store_path.parent_path() / "audit.log";
        return c;
    }
};

std::string user_password(bool from_stdin) {
    if (from_stdin) {
        std::string line;
        std::getline(std::cin, line);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }
    const char* env = std::getenv(kUserPasswordEnv);
    if (!env) throw Error(errc::invalid_argument, std::string("set ") + kUserPasswordEnv + " or pass --password-stdin");
    return env;
}

access::AccessControl open_access(vault::Store& store, access::AuditLog& audit, const service::ServiceConfig& c) {
    access::AccessConfig ac;
    ac.password_kdf.n = c.password_scrypt_n;
    return access::AccessControl(store, audit, ac);
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"edgehr: offline anemia screening and encrypted patient records"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    std::function<void()> action;

    // dataset
    auto* dataset = app.add_subcommand("dataset", "manifest tools");
    dataset->require_subcommand(1);
    std::string manifest;
    auto* validate = dataset->add_subcommand("validate", "check every manifest row");
    validate->add_option("manifest", manifest, "manifest CSV")->required();
    validate->callback([&] {
        action = [&] {
            const auto d = eval::load_dataset(manifest);
            const std::size_t bad = rejected(d);
            out << json{{"manifest", manifest},
                        {"rows", d.rows.size()},
                        {"loaded", d.samples.size()},
                        {"rejected", bad},
                        {"issues", issues_json(d.issues)}}
                       .dump()
                << "\n";
            if (bad > 0) throw Error(errc::invalid_argument, std::to_string(bad) + " manifest rows rejected");
        };
    });
    std::string synth_out;
    std::size_t synth_n = 250;
    std::uint64_t seed = 0;
    auto* synth = dataset->add_subcommand("synth", "write a synthetic image dataset");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--n", synth_n, "number of images")->check(CLI::PositiveNumber);
    synth->add_option("--seed", seed, "seed");
    synth->callback([&] {
        action = [&] {
            const auto path = eval::write_synthetic_image_dataset(synth_out, synth_n, seed);
            out << json{{"manifest", path.string()}, {"n", synth_n}, {"seed", seed}}.dump() << "\n";
        };
    });

    // balance
    auto* bal = app.add_subcommand("balance", "KDE-undersample a dataset to equal class counts");
    std::string mode = "remark";
    std::string bal_out;
    bal->add_option("--mode", mode, "remark or severity")->check(CLI::IsMember({"remark", "severity"}));
    bal->add_option("--seed", seed, "seed");
    bal->add_option("--out", bal_out, "write the balanced manifest here");
    bal->add_option("manifest", manifest, "manifest CSV")->required();
    bal->callback([&] {
        action = [&] {
            const auto d = eval::load_dataset(manifest);
            const auto r = balance::kde_undersample(d.samples, balance::parse_label_mode(mode), seed);
            json j = json::parse(r.report.to_json());
            j["seed"] = seed;
            j["input"] = d.samples.size();
            j["kept"] = r.samples.size();
            if (!bal_out.empty()) {
                std::vector<eval::ManifestRow> rows;
                for (auto pos : r.kept_positions) rows.push_back(d.rows.at(d.samples[pos].id));
                // Absolute paths keep the manifest valid wherever it is written.
                for (auto& row : rows) {
                    row.image_path = fs::absolute(row.image_path);
                    row.annotation_path = fs::absolute(row.annotation_path);
                }
                write_file(bal_out, eval::format_manifest(rows));
                j["manifest"] = bal_out;
            }
            out << j.dump() << "\n";
        };
    });

    // train
    auto* train = app.add_subcommand("train", "train one model on a manifest");
    std::string model_name = "rf";
    std::string train_config;
    std::string model_out;
    std::optional<std::uint64_t> seed_flag;
    std::optional<std::size_t> synthetic_n;
    train->add_option("--model", model_name, "rf|gbm|ridge|lasso|enet|huber|ransac|mean")
        ->check(CLI::IsMember({"rf", "gbm", "ridge", "lasso", "enet", "huber", "ransac", "mean"}));
    train->add_option("--config", train_config, "training config (key = value)");
    train->add_option("--seed", seed_flag, "seed (overrides the config)");
    train->add_option("-o,--out", model_out, "model file")->required();
    train->add_option("--synthetic", synthetic_n, "train on the synthetic benchmark of this size instead");
    train->add_option("manifest", manifest, "manifest CSV");
    train->callback([&] {
        action = [&] {
            TrainOptions o = train_config.empty() ? TrainOptions{} : parse_train_config(read_file(train_config));
            if (seed_flag) o.tree.seed = *seed_flag;
            std::vector<balance::LabeledSample> data;
            if (synthetic_n) data = eval::synthetic_benchmark(*synthetic_n, o.tree.seed);
            else if (!manifest.empty()) data = eval::load_dataset(manifest).samples;
            else throw Error(errc::invalid_argument, "train needs a manifest or --synthetic");
            std::size_t before = data.size();
            if (o.balance != "none") {
                data = balance::kde_undersample(data, balance::parse_label_mode(o.balance), o.tree.seed).samples;
            }
            const auto model = train_named(model_name, data, o);
            models::save_model(model, model_out);
            out << json{{"model", model_name},
                        {"version", models::model_version(model)},
                        {"samples", before},
                        {"trained_on", data.size()},
                        {"balance", o.balance},
                        {"seed", o.tree.seed},
                        {"path", model_out}}
                       .dump()
                << "\n";
        };
    });

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "hold-out survey of several models (report.csv and friends)");
    std::vector<std::string> model_list;
    std::string report_dir;
    std::size_t folds = 7;
    evaluate->add_option("--mode", mode, "remark or severity")->check(CLI::IsMember({"remark", "severity"}));
    evaluate->add_option("--seed", seed, "seed");
    evaluate->add_option("--folds", folds, "cross-validation folds")->check(CLI::Range(2, 100));
    evaluate->add_option("--out", report_dir, "report directory")->required();
    evaluate->add_option("--synthetic", synthetic_n, "use the synthetic benchmark of this size instead of a manifest");
    evaluate->add_option("manifest", manifest, "manifest CSV");
    evaluate->add_option("models", model_list, "model short names (default: all)");
    evaluate->callback([&] {
        action = [&] {
            std::vector<balance::LabeledSample> data;
            // With --synthetic every positional is a model name.
            if (synthetic_n) {
                if (!manifest.empty()) model_list.insert(model_list.begin(), manifest);
                data = eval::synthetic_benchmark(*synthetic_n, seed);
            } else {
                if (manifest.empty()) throw Error(errc::invalid_argument, "evaluate needs a manifest or --synthetic");
                data = eval::load_dataset(manifest).samples;
            }
            std::vector<eval::RosterEntry> roster;
            if (model_list.empty()) {
                roster = eval::default_roster(seed);
            } else {
                for (const auto& m : model_list) {
                    const auto it = kModelNames.find(m);
                    if (it == kModelNames.end()) throw Error(errc::invalid_argument, "unknown model '" + m + "'");
                    roster.push_back(eval::roster_entry(it->second, seed));
                }
            }
            eval::SurveyConfig cfg;
            cfg.mode = balance::parse_label_mode(mode);
            cfg.seed = seed;
            cfg.folds = folds;
            const auto result = eval::run_survey(data, roster, cfg);
            eval::write_survey_reports(result, report_dir);
            json rows = json::array();
            for (const auto& r : result.rows) {
                rows.push_back({{"model", r.model},
                                {"sensitivity", r.sensitivity},
                                {"specificity", r.specificity},
                                {"mae_gdl", r.mae_gdl},
                                {"rmse_gdl", r.rmse_gdl}});
            }
            out << json{{"mode", mode},
                        {"seed", seed},
                        {"samples", data.size()},
                        {"test", result.test_ids.size()},
                        {"train", result.train_ids.size()},
                        {"rows", rows},
                        {"report", (fs::path(report_dir) / "report.csv").string()}}
                       .dump()
                << "\n";
        };
    });

    // predict
    auto* predict = app.add_subcommand("predict", "screen one image");
    std::string model_path, image_path, ann_path;
    predict->add_option("model", model_path, "model file")->required();
    predict->add_option("image", image_path, "PNG, JPEG or PPM image")->required();
    predict->add_option("annotations", ann_path, "annotation file")->required();
    predict->callback([&] {
        action = [&] {
            const auto model = service::LoadedModel::from_file(model_path);
            service::ScreeningRequest req;
            try {
                req.image = imaging::load_image(image_path);
            } catch (const imaging::StageError&) {
                throw;
            } catch (const Error& e) {
                throw imaging::StageError(e.code(), "decode", e.what());
            }
            req.annotations = imaging::parse_annotations(read_file(ann_path));
            req.image_ref = fs::path(image_path).filename().string();
            const auto r = service::screen(req, model, now_ms());
            json j = service::to_json(r);
            j["image_ref"] = req.image_ref;
            out << j.dump() << "\n";
        };
    });

    // bench
    auto* bench = app.add_subcommand("bench", "latency benchmarks");
    std::string op;
    std::size_t runs = 200;
    bench->add_option("--op", op, "features|predict|crypto")->required()->check(CLI::IsMember({"features", "predict", "crypto"}));
    bench->add_option("--runs", runs, "timed runs")->check(CLI::PositiveNumber);
    bench->add_option("--model", model_path, "model for --op predict (default: a forest trained on synthetic data)");
    bench->add_option("--seed", seed, "seed for synthetic inputs");
    bench->callback([&] {
        action = [&] {
            Rng rng(seed);
            eval::LatencyStats stats;
            if (op == "crypto") {
                vault::Bytes master(32);
                vault::system_random().fill(master);
                const vault::KeyMaterial keys(master);
                vault::Bytes pt(10 * 1024);
                for (auto& b : pt) b = static_cast<std::uint8_t>(rng.below(256));
                stats = eval::benchmark_latency("crypto_roundtrip_10KiB",
                                                [&] { (void)vault::open_sealed(vault::seal(pt, keys), keys); }, 20, runs);
            } else {
                imaging::ImageBuffer img(640, 640);
                for (int y = 0; y < 640; ++y) {
                    for (int x = 0; x < 640; ++x) {
                        img.at(x, y) = {static_cast<std::uint8_t>(150 + rng.below(80)),
                                        static_cast<std::uint8_t>(90 + rng.below(80)),
                                        static_cast<std::uint8_t>(90 + rng.below(70))};
                    }
                }
                const std::vector<imaging::BoundingBox> boxes{{imaging::RegionClass::nail, 0.5, 0.5, 1.0, 1.0}};
                if (op == "features") {
                    stats = eval::benchmark_latency("features_640", [&] { (void)imaging::features_from_image(img, boxes); }, 5, runs);
                } else {
                    models::Model model = model_path.empty()
                                              ? models::Model(models::train_forest(eval::synthetic_benchmark(250, seed), {}))
                                              : models::load_model(model_path);
                    stats = eval::benchmark_latency(
                        "features_and_predict_640",
                        [&] { (void)models::predict(model, imaging::features_from_image(img, boxes)); }, 5, runs);
                }
            }
            json j = json::parse(stats.to_json());
            j["seed"] = seed;
            out << j.dump() << "\n";
        };
    });

    // store
    auto* store = app.add_subcommand("store", "store and user administration");
    store->require_subcommand(1);
    StoreArgs sa;
    auto* init = store->add_subcommand("init", "create a store");
    sa.add(init);
    bool create_key = false;
    std::string join;
    init->add_flag("--create-key", create_key, "write a fresh random key to --key-file first");
    init->add_option("--join", join, "header of an existing store to share keys with (sync peers)");
    init->callback([&] {
        action = [&] {
            const auto c = sa.resolve();
            if (create_key) {
                if (c.key_file.empty()) throw Error(errc::invalid_argument, "--create-key needs --key-file");
                vault::write_key_file(c.key_file, vault::system_random());
            }
            vault::InitOptions opts;
            if (!join.empty()) opts.join = fs::path(join);
            vault::Store::init(c.store_path, vault::key_spec_from(c.key_file), opts);
            auto s = vault::Store::open(c.store_path, vault::key_spec_from(c.key_file), vault::Store::Mode::read_only);
            out << json{{"store", c.store_path.string()}, {"device_id", s->device_id()}, {"kdf", s->header().kdf}}.dump()
                << "\n";
        };
    });

    auto* rotate = store->add_subcommand("rotate-keys", "re-encrypt everything under a new key");
    sa.add(rotate);
    std::string new_key_file;
    rotate->add_option("--new-key-file", new_key_file, "new key file (created when missing); default EDGEHR_NEW_PASSPHRASE");
    rotate->callback([&] {
        action = [&] {
            const auto c = sa.resolve();
            const auto old_key = vault::key_spec_from(c.key_file);
            vault::KeySpec new_key;
            if (!new_key_file.empty()) {
                if (!fs::exists(new_key_file)) vault::write_key_file(new_key_file, vault::system_random());
                new_key = vault::KeySpec::from_key_file(new_key_file);
            } else {
                const char* pass = std::getenv(kNewPassphraseEnv);
                if (!pass) throw Error(errc::invalid_argument, std::string("need --new-key-file or ") + kNewPassphraseEnv);
                new_key = vault::KeySpec::from_passphrase(pass);
            }
            auto s = vault::Store::open(c.store_path, old_key);
            const auto r = s->rotate_keys(old_key, new_key);
            out << json{{"records", r.records},
                        {"archived", r.archived},
                        {"aux", r.aux},
                        {"changelog_entries", r.changelog_entries},
                        {"key_epoch", s->header().key_epoch}}
                       .dump()
                << "\n";
        };
    });

    auto* user = store->add_subcommand("user", "user accounts");
    user->require_subcommand(1);
    std::string username;
    std::vector<std::string> roles;
    bool password_stdin = false;
    auto* add = user->add_subcommand("add", "create a user (password from EDGEHR_USER_PASSWORD or stdin)");
    sa.add(add);
    add->add_option("--username", username, "user name")->required();
    add->add_option("--role", roles, "admin, clinician or screener (repeatable)")->required();
    add->add_flag("--password-stdin", password_stdin, "read the password from the first line of stdin");
    add->callback([&] {
        action = [&] {
            const auto c = sa.resolve();
            auto s = vault::Store::open(c.store_path, vault::key_spec_from(c.key_file));
            access::AuditLog audit(c.audit_log);
            auto ac = open_access(*s, audit, c);
            const auto u = ac.add_user(username, user_password(password_stdin),
                                       std::set<std::string>(roles.begin(), roles.end()));
            out << json{{"user_id", u.user_id}, {"username", u.username}, {"roles", u.roles}}.dump() << "\n";
        };
    });
    auto* role = user->add_subcommand("role", "replace a user's roles");
    sa.add(role);
    role->add_option("--username", username, "user name")->required();
    role->add_option("--role", roles, "admin, clinician or screener (repeatable)")->required();
    role->callback([&] {
        action = [&] {
            const auto c = sa.resolve();
            auto s = vault::Store::open(c.store_path, vault::key_spec_from(c.key_file));
            access::AuditLog audit(c.audit_log);
            auto ac = open_access(*s, audit, c);
            ac.set_roles(username, std::set<std::string>(roles.begin(), roles.end()));
            out << json{{"username", username}, {"roles", roles}}.dump() << "\n";
        };
    });
    auto* revoke = user->add_subcommand("revoke", "disable a user");
    sa.add(revoke);
    revoke->add_option("--username", username, "user name")->required();
    revoke->callback([&] {
        action = [&] {
            const auto c = sa.resolve();
            auto s = vault::Store::open(c.store_path, vault::key_spec_from(c.key_file));
            access::AuditLog audit(c.audit_log);
            open_access(*s, audit, c).revoke(username);
            out << json{{"username", username}, {"revoked", true}}.dump() << "\n";
        };
    });

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP service");
    std::string service_config;
    serve->add_option("--config", service_config, "service config file")->required();
    serve->callback([&] {
        action = [&] {
            const auto c = service::load_config(service_config);
            auto a = service::App::open(c);
            service::Service svc(a->deps());
            // SIGINT/SIGTERM are taken by a watcher thread that stops the
            // server; handlers themselves may not call into it.
            sigset_t set;
            sigemptyset(&set);
            sigaddset(&set, SIGINT);
            sigaddset(&set, SIGTERM);
            pthread_sigmask(SIG_BLOCK, &set, nullptr);
            const int port = svc.start(c.host, c.port);
            out << json{{"listening", c.host + ":" + std::to_string(port)},
                        {"model_version", a->model ? a->model->version : ""},
                        {"device_id", a->store->device_id()}}
                       .dump()
                << std::endl;
            int sig = 0;
            sigwait(&set, &sig);
            svc.stop();
        };
    });

    // export
    auto* exp = app.add_subcommand("export", "anonymized screening export");
    sa.add(exp);
    std::string export_out;
    exp->add_option("--out", export_out, "CSV output path")->required();
    exp->callback([&] {
        action = [&] {
            const auto c = sa.resolve();
            auto s = vault::Store::open(c.store_path, vault::key_spec_from(c.key_file));
            const auto key = service::export_key_for(c, *s);
            const auto r = service::export_anonymized(*s, key);
            write_file(export_out, r.csv);
            out << json{{"rows", r.rows}, {"skipped_records", r.skipped_records}, {"out", export_out}}.dump() << "\n";
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        CLI::App* cur = &app;
        while (!cur->get_subcommands().empty()) cur = cur->get_subcommands().front();
        out << cur->help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << one_line(e.what()) << " (run with --help)\n";
        return 2;
    }

    try {
        if (action) action();
        return 0;
    } catch (const imaging::StageError& e) {
        err << "error: " << to_string(e.code()) << ": stage " << e.stage() << ": " << one_line(e.detail()) << "\n";
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << one_line(e.what()) << "\n";
    } catch (const std::exception& e) {
        err << "error: internal: " << one_line(e.what()) << "\n";
    }
    return 1;
}

} // namespace edgehr::cli
