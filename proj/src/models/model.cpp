#include "edgehr/models/model.hpp"

#include "edgehr/common/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace edgehr::models {

namespace {

constexpr std::uint8_t kKindForest = 0;
constexpr std::uint8_t kKindGbm = 1;
constexpr std::uint8_t kKindLinear = 2;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : in_(bytes) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(le(4))); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(le(8)); }
    /// Element count bounded by the bytes left, so corrupt counts cannot
    /// trigger huge allocations.
    std::size_t count(std::size_t min_element_bytes) {
        const std::uint32_t n = u32();
        if (static_cast<std::uint64_t>(n) * min_element_bytes > remaining()) corrupt("element count exceeds payload");
        return n;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

    [[noreturn]] static void corrupt(const std::string& what) { throw Error(errc::corruption, "corrupt model payload: " + what); }

private:
    std::uint64_t le(int n) {
        if (remaining() < static_cast<std::size_t>(n)) corrupt("truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

void write_config(Writer& w, const TrainConfig& c) {
    w.u32(static_cast<std::uint32_t>(c.n_trees));
    w.i32(c.max_depth);
    w.u32(static_cast<std::uint32_t>(c.min_leaf));
    w.f64(c.features_per_split);
    w.u8(c.bootstrap ? 1 : 0);
    w.f64(c.learning_rate);
    w.u32(static_cast<std::uint32_t>(c.n_stages));
    w.u64(c.seed);
}

TrainConfig read_config(Reader& r) {
    TrainConfig c;
    c.n_trees = r.u32();
    c.max_depth = r.i32();
    c.min_leaf = r.u32();
    c.features_per_split = r.f64();
    c.bootstrap = r.u8() != 0;
    c.learning_rate = r.f64();
    c.n_stages = r.u32();
    c.seed = r.u64();
    return c;
}

void write_trees(Writer& w, const std::vector<RegressionTree>& trees) {
    w.u32(static_cast<std::uint32_t>(trees.size()));
    for (const auto& t : trees) {
        w.i32(t.max_depth);
        w.u32(static_cast<std::uint32_t>(t.nodes.size()));
        for (const auto& n : t.nodes) {
            w.i32(n.feature);
            w.f64(n.threshold);
            w.i32(n.left);
            w.i32(n.right);
            w.f64(n.value);
        }
    }
}

constexpr std::size_t kNodeBytes = 4 + 8 + 4 + 4 + 8;

std::vector<RegressionTree> read_trees(Reader& r, std::size_t n_features) {
    std::vector<RegressionTree> trees(r.count(8));
    for (auto& t : trees) {
        t.max_depth = r.i32();
        t.nodes.resize(r.count(kNodeBytes));
        if (t.nodes.empty()) Reader::corrupt("empty tree");
        for (std::size_t i = 0; i < t.nodes.size(); ++i) {
            auto& n = t.nodes[i];
            n.feature = r.i32();
            n.threshold = r.f64();
            n.left = r.i32();
            n.right = r.i32();
            n.value = r.f64();
            if (!std::isfinite(n.value)) Reader::corrupt("non-finite leaf");
            if (n.feature >= 0) {
                const auto size = static_cast<std::int64_t>(t.nodes.size());
                if (static_cast<std::size_t>(n.feature) >= n_features) Reader::corrupt("feature index out of range");
                // Children after the parent rules out cycles.
                if (n.left <= static_cast<std::int64_t>(i) || n.right <= static_cast<std::int64_t>(i) || n.left >= size ||
                    n.right >= size) {
                    Reader::corrupt("child index out of range");
                }
            } else if (n.feature != -1) {
                Reader::corrupt("bad node tag");
            }
        }
        if (t.depth() > t.max_depth) Reader::corrupt("tree deeper than its depth budget");
    }
    return trees;
}

void write_doubles(Writer& w, const std::vector<double>& v) {
    for (double x : v) w.f64(x);
}

std::vector<double> read_doubles(Reader& r, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = r.f64();
    return v;
}

} // namespace

double predict(const Model& model, const imaging::FeatureVector& features) {
    const std::uint32_t expected = feature_contract_version(model);
    if (features.contract_version != expected) {
        throw Error(errc::unknown_version, "feature contract version " + std::to_string(features.contract_version) +
                                               " does not match model version " + std::to_string(expected));
    }
    const double out = std::visit([&](const auto& m) { return m.predict(features.values); }, model);
    if (!std::isfinite(out)) throw Error(errc::invalid_argument, "model produced a non-finite prediction");
    return out;
}

std::uint32_t feature_contract_version(const Model& model) {
    return std::visit([](const auto& m) { return m.feature_contract_version; }, model);
}

std::size_t feature_count(const Model& model) {
    return std::visit(
        [](const auto& m) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LinearModel>) {
                return m.n_features();
            } else {
                return m.n_features;
            }
        },
        model);
}

std::string family_name(const Model& model) {
    if (std::holds_alternative<ForestModel>(model)) return "rf";
    if (std::holds_alternative<GbmModel>(model)) return "gbm";
    return std::string(to_string(std::get<LinearModel>(model).family));
}

std::vector<std::uint8_t> serialize_model(const Model& model) {
    Writer w;
    w.raw("EHRM");
    w.u16(kModelFormatVersion);
    const std::size_t d = feature_count(model);
    if (const auto* f = std::get_if<ForestModel>(&model)) {
        w.u8(kKindForest);
        w.u32(f->feature_contract_version);
        w.u32(static_cast<std::uint32_t>(d));
        write_config(w, f->config);
        write_trees(w, f->trees);
    } else if (const auto* g = std::get_if<GbmModel>(&model)) {
        w.u8(kKindGbm);
        w.u32(g->feature_contract_version);
        w.u32(static_cast<std::uint32_t>(d));
        write_config(w, g->config);
        w.f64(g->base);
        write_trees(w, g->trees);
    } else {
        const auto& l = std::get<LinearModel>(model);
        w.u8(kKindLinear);
        w.u32(l.feature_contract_version);
        w.u32(static_cast<std::uint32_t>(d));
        w.u8(static_cast<std::uint8_t>(l.family));
        w.f64(l.lambda);
        w.f64(l.l1_ratio);
        w.f64(l.delta);
        w.f64(l.intercept);
        write_doubles(w, l.weights);
        write_doubles(w, l.feature_means);
        write_doubles(w, l.feature_scales);
    }
    w.u64(fnv1a(w.bytes()));
    return std::move(w.bytes());
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 + 2 + 1 + 4 + 4 + 8 || std::memcmp(bytes.data(), "EHRM", 4) != 0) {
        Reader::corrupt("missing magic or truncated header");
    }
    Reader head(bytes.subspan(4));
    const std::uint16_t version = head.u16();
    if (version != kModelFormatVersion) {
        throw Error(errc::unknown_version, "unknown model format version " + std::to_string(version));
    }
    const auto body = bytes.first(bytes.size() - 8);
    Reader tail(bytes.last(8));
    if (tail.u64() != fnv1a(body)) Reader::corrupt("checksum mismatch");

    Reader r(body.subspan(6));
    const std::uint8_t kind = r.u8();
    const std::uint32_t contract = r.u32();
    const std::size_t d = r.u32();
    if (d == 0) Reader::corrupt("zero feature count");

    Model model;
    if (kind == kKindForest) {
        ForestModel f;
        f.feature_contract_version = contract;
        f.n_features = d;
        f.config = read_config(r);
        f.trees = read_trees(r, d);
        if (f.trees.empty() || f.trees.size() != f.config.n_trees) Reader::corrupt("tree count does not match config");
        model = std::move(f);
    } else if (kind == kKindGbm) {
        GbmModel g;
        g.feature_contract_version = contract;
        g.n_features = d;
        g.config = read_config(r);
        g.base = r.f64();
        g.trees = read_trees(r, d);
        model = std::move(g);
    } else if (kind == kKindLinear) {
        LinearModel l;
        l.feature_contract_version = contract;
        const std::uint8_t family = r.u8();
        if (family > static_cast<std::uint8_t>(LinearFamily::mean)) Reader::corrupt("unknown linear family");
        l.family = static_cast<LinearFamily>(family);
        l.lambda = r.f64();
        l.l1_ratio = r.f64();
        l.delta = r.f64();
        l.intercept = r.f64();
        if (r.remaining() != d * 24) Reader::corrupt("linear parameter block has wrong size");
        l.weights = read_doubles(r, d);
        l.feature_means = read_doubles(r, d);
        l.feature_scales = read_doubles(r, d);
        for (double s : l.feature_scales) {
            if (!(s > 0.0)) Reader::corrupt("non-positive feature scale");
        }
        model = std::move(l);
    } else {
        Reader::corrupt("unknown model kind");
    }
    if (r.remaining() != 0) Reader::corrupt("trailing bytes");
    return model;
}

std::string model_version(const Model& model) {
    const auto bytes = serialize_model(model);
    Reader tail(std::span<const std::uint8_t>(bytes).last(8));
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(tail.u64()));
    return family_name(model) + "-" + std::string(hex, 12);
}

void save_model(const Model& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(errc::io, "cannot write model file " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(errc::io, "failed writing model file " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open model file " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

} // namespace edgehr::models
