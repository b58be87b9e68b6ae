#include "dialcoord/store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dialcoord/error.hpp"

namespace dialcoord {

using json = nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "stores assume a little-endian host");

namespace {

constexpr char kCentroidMagic[8] = {'D', 'C', 'C', 'E', 'N', 'T', '0', '1'};
constexpr char kCheckpointMagic[8] = {'D', 'C', 'C', 'K', 'P', 'T', '0', '1'};

class Writer {
public:
    template <typename T>
    void put(const T& v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        buf_.append(p, sizeof(T));
    }
    void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    void doubles(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }

    void write_to(const fs::path& file) const {
        if (file.has_parent_path()) fs::create_directories(file.parent_path());
        // Write-then-rename so readers never see a half-written store.
        const fs::path tmp = file.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("io_error", "cannot write " + tmp.string());
            out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
            if (!out) throw Error("io_error", "short write to " + tmp.string());
        }
        fs::rename(tmp, file);
    }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(const fs::path& file) : name_(file.string()) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw Error("io_error", "cannot open " + name_);
        std::ostringstream s;
        s << in.rdbuf();
        buf_ = s.str();
    }

    template <typename T>
    T get() {
        T v;
        need(sizeof(T));
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void doubles(std::span<double> out) {
        need(out.size() * sizeof(double));
        std::memcpy(out.data(), buf_.data() + pos_, out.size() * sizeof(double));
        pos_ += out.size() * sizeof(double);
    }
    void expect_end() const {
        if (pos_ != buf_.size()) {
            throw Error("corrupt_store", name_ + ": " + std::to_string(buf_.size() - pos_) + " trailing bytes");
        }
    }
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n) throw Error("corrupt_store", name_ + ": truncated");
    }
    const std::string& name() const { return name_; }

private:
    std::string name_;
    std::string buf_;
    std::size_t pos_ = 0;
};

void check_magic(Reader& r, const char (&magic)[8]) {
    if (r.str(8) != std::string(magic, 8)) throw Error("corrupt_store", r.name() + ": bad magic");
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json config_json(const RankerConfig& c) {
    return {{"n_T", c.aspect_count},
            {"n_d", c.state_dim},
            {"d_b", c.projection_dim},
            {"d_h", c.scorer_hidden},
            {"seed", c.seed}};
}

}  // namespace

void save_centroids(const fs::path& file, const CentroidSet& c, std::uint64_t corpus_hash) {
    if (c.centroids.rows != static_cast<std::size_t>(c.k)) throw Error("invalid_argument", "k does not match rows");
    Writer w;
    w.bytes(kCentroidMagic, 8);
    w.put<std::uint32_t>(kStoreVersion);
    w.put<std::int32_t>(c.aspect_id);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.k));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.centroids.cols));
    w.put<double>(c.silhouette);
    w.put<std::uint64_t>(c.seed);
    w.put<std::uint64_t>(corpus_hash);
    w.doubles(c.centroids.data);
    w.write_to(file);

    const json manifest = {{"format", "centroids"},     {"version", kStoreVersion}, {"aspect_id", c.aspect_id},
                           {"k", c.k},                  {"n_d", c.centroids.cols},  {"silhouette", c.silhouette},
                           {"seed", c.seed},            {"corpus_hash", hex64(corpus_hash)}};
    std::ofstream(file.string() + ".json") << manifest.dump(2) << '\n';
}

CentroidSet load_centroids(const fs::path& file, std::optional<std::size_t> expected_dim,
                           std::optional<std::uint64_t> expected_corpus_hash) {
    Reader r(file);
    check_magic(r, kCentroidMagic);
    const auto version = r.get<std::uint32_t>();
    if (version != kStoreVersion) throw Error("version_mismatch", file.string() + ": store version " + std::to_string(version));
    CentroidSet c;
    c.aspect_id = r.get<std::int32_t>();
    c.k = static_cast<int>(r.get<std::uint32_t>());
    const auto dim = r.get<std::uint32_t>();
    c.silhouette = r.get<double>();
    c.seed = r.get<std::uint64_t>();
    const auto hash = r.get<std::uint64_t>();
    if (expected_dim && *expected_dim != dim) {
        throw Error("version_mismatch", file.string() + ": centroids have n_d=" + std::to_string(dim) +
                                            ", expected " + std::to_string(*expected_dim));
    }
    if (expected_corpus_hash && *expected_corpus_hash != hash) {
        throw Error("hash_mismatch", file.string() + ": built from corpus " + hex64(hash) + ", expected " +
                                         hex64(*expected_corpus_hash));
    }
    c.centroids = Matrix(static_cast<std::size_t>(c.k), dim);
    r.doubles(c.centroids.data);
    r.expect_end();
    return c;
}

void save_checkpoint(const fs::path& file, const RankerModel& model, const CheckpointMeta& meta) {
    json manifest = config_json(model.config);
    manifest["version"] = kStoreVersion;
    manifest["epoch"] = meta.epoch;
    manifest["val_p3"] = meta.validation_precision;
    manifest["corpus_hash"] = hex64(meta.corpus_hash);
    const std::string m = manifest.dump();

    Writer w;
    w.bytes(kCheckpointMagic, 8);
    w.put<std::uint64_t>(m.size());
    w.bytes(m.data(), m.size());
    const auto params = model.parameters();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
        w.bytes(p.name.data(), p.name.size());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(p.shape.size()));
        for (auto d : p.shape) w.put<std::uint64_t>(d);
        w.doubles(p.values);
    }
    w.write_to(file);
}

namespace {

json read_manifest(Reader& r) {
    check_magic(r, kCheckpointMagic);
    const auto len = r.get<std::uint64_t>();
    r.need(len);
    try {
        return json::parse(r.str(len));
    } catch (const json::exception&) {
        throw Error("corrupt_store", r.name() + ": unreadable manifest");
    }
}

}  // namespace

json checkpoint_manifest(const fs::path& file) {
    Reader r(file);
    return read_manifest(r);
}

LoadedCheckpoint load_checkpoint(const fs::path& file, const std::optional<RankerConfig>& expected_config,
                                 std::optional<std::uint64_t> expected_corpus_hash) {
    Reader r(file);
    const json m = read_manifest(r);
    LoadedCheckpoint out;
    try {
        if (m.at("version").get<std::uint32_t>() != kStoreVersion) {
            throw Error("version_mismatch", file.string() + ": unsupported checkpoint version");
        }
        RankerConfig c;
        c.aspect_count = m.at("n_T").get<std::size_t>();
        c.state_dim = m.at("n_d").get<std::size_t>();
        c.projection_dim = m.at("d_b").get<std::size_t>();
        c.scorer_hidden = m.at("d_h").get<std::size_t>();
        c.seed = m.at("seed").get<std::uint64_t>();
        out.meta.epoch = m.at("epoch").get<int>();
        out.meta.validation_precision = m.at("val_p3").get<double>();
        out.meta.corpus_hash = std::stoull(m.at("corpus_hash").get<std::string>(), nullptr, 16);
        if (expected_config) {
            const auto& e = *expected_config;
            if (e.aspect_count != c.aspect_count || e.state_dim != c.state_dim ||
                e.projection_dim != c.projection_dim || e.scorer_hidden != c.scorer_hidden) {
                throw Error("version_mismatch", file.string() + ": checkpoint shape " + config_json(c).dump() +
                                                    " does not match configured " + config_json(e).dump());
            }
        }
        out.model = RankerModel::zeros(c);
    } catch (const json::exception& e) {
        throw Error("corrupt_store", file.string() + ": manifest: " + e.what());
    }
    if (expected_corpus_hash && *expected_corpus_hash != out.meta.corpus_hash) {
        throw Error("hash_mismatch", file.string() + ": trained on corpus " + hex64(out.meta.corpus_hash));
    }

    auto params = out.model.parameters();
    const auto count = r.get<std::uint32_t>();
    if (count != params.size()) throw Error("corrupt_store", file.string() + ": wrong tensor count");
    for (auto& p : params) {
        const std::string name = r.str(r.get<std::uint32_t>());
        if (name != p.name) throw Error("corrupt_store", file.string() + ": expected tensor " + p.name + ", found " + name);
        const auto rank = r.get<std::uint32_t>();
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
        if (shape != p.shape) throw Error("version_mismatch", file.string() + ": tensor " + name + " has a different shape");
        r.doubles(p.values);
    }
    r.expect_end();
    return out;
}

}  // namespace dialcoord
