#include "mte/io.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace mte {

namespace {

constexpr char kCkptMagic[4] = {'M', 'T', 'E', '1'};
constexpr char kMaskMagic[4] = {'M', 'T', 'M', '1'};
constexpr std::uint8_t kNoScheme = 255;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        require(out_.good(), ErrKind::missing_artifact, "cannot open for writing: " + path);
    }

    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        require(s.size() <= 0xFFFF, ErrKind::contract, "name too long");
        u16(static_cast<std::uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }

private:
    template <typename T>
    void put_le(T v) {
        std::uint8_t buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
        bytes(buf, sizeof(T));
    }

    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path) {
        require(fs::exists(path), ErrKind::missing_artifact, "file not found: " + path);
        in_.open(path, std::ios::binary);
        require(in_.good(), ErrKind::missing_artifact, "cannot open: " + path);
    }

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        require(static_cast<std::size_t>(in_.gcount()) == n, ErrKind::io_truncated,
                "truncated file: " + path_);
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint16_t u16() { return get_le<std::uint16_t>(); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint16_t n = u16();
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    const std::string& path() const { return path_; }

private:
    template <typename T>
    T get_le() {
        std::uint8_t buf[sizeof(T)];
        bytes(buf, sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
        return v;
    }

    std::string path_;
    std::ifstream in_;
};

void check_magic(Reader& r, const char (&magic)[4], const char* what) {
    char got[4];
    r.bytes(got, 4);
    require(std::memcmp(got, magic, 4) == 0, ErrKind::io_magic,
            std::string("not a ") + what + " file (bad magic): " + r.path());
}

void check_version(std::uint16_t got, const std::string& path) {
    require(got == kCheckpointVersion, ErrKind::io_version,
            "unsupported format version " + std::to_string(got) + " (reader supports " +
                std::to_string(kCheckpointVersion) + "): " + path);
}

void write_mask_block(Writer& w, const PruneMask& mask) {
    w.u32(static_cast<std::uint32_t>(mask.region.size()));
    for (const auto& name : mask.region) w.str(name);
    w.u64(mask.bits.size());
    std::vector<std::uint8_t> packed((mask.bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < mask.bits.size(); ++i)
        if (mask.bits[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    w.bytes(packed.data(), packed.size());
}

PruneMask read_mask_block(Reader& r) {
    PruneMask mask;
    const std::uint32_t regions = r.u32();
    for (std::uint32_t i = 0; i < regions; ++i) mask.region.push_back(r.str());
    const std::uint64_t bits = r.u64();
    std::vector<std::uint8_t> packed((bits + 7) / 8);
    r.bytes(packed.data(), packed.size());
    mask.bits.resize(bits);
    for (std::size_t i = 0; i < bits; ++i)  // padding bits beyond `bits` are ignored
        mask.bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
    return mask;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamVector& params,
                     const PruneMask* mask, const CheckpointMeta& meta) {
    Writer w(path);
    w.bytes(kCkptMagic, 4);
    w.u16(kCheckpointVersion);
    w.u8(meta.scheme ? static_cast<std::uint8_t>(*meta.scheme) : kNoScheme);
    w.u8(static_cast<std::uint8_t>(meta.stage));
    w.u8(static_cast<std::uint8_t>(meta.group));
    w.u8(mask != nullptr ? 1 : 0);
    w.u16(0);
    w.u64(meta.seed);
    w.u64(meta.config_hash);
    w.u32(static_cast<std::uint32_t>(params.segments.size()));
    for (const auto& seg : params.segments) {
        w.str(seg.name);
        w.u32(static_cast<std::uint32_t>(seg.rows));
        w.u32(static_cast<std::uint32_t>(seg.cols));
        w.u64(seg.offset);
    }
    w.u64(params.data.size());
    for (double v : params.data) w.f64(v);
    if (mask != nullptr) write_mask_block(w, *mask);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    check_magic(r, kCkptMagic, "checkpoint");
    check_version(r.u16(), path);

    LoadedCheckpoint lc;
    const std::uint8_t scheme = r.u8();
    lc.meta.stage = static_cast<Stage>(r.u8());
    lc.meta.group = r.u8();
    const bool has_mask = r.u8() != 0;
    r.u16();  // reserved
    lc.meta.seed = r.u64();
    lc.meta.config_hash = r.u64();
    if (scheme != kNoScheme) {
        require(scheme <= static_cast<std::uint8_t>(Scheme::random_lt), ErrKind::io_truncated,
                "corrupt scheme byte in " + path);
        lc.meta.scheme = static_cast<Scheme>(scheme);
    }

    const std::uint32_t nseg = r.u32();
    for (std::uint32_t i = 0; i < nseg; ++i) {
        ParamSegment seg;
        seg.name = r.str();
        seg.rows = r.u32();
        seg.cols = r.u32();
        seg.offset = r.u64();
        lc.params.segments.push_back(seg);
    }
    const std::uint64_t count = r.u64();
    lc.params.data.resize(count);
    for (auto& v : lc.params.data) v = r.f64();
    if (has_mask) lc.mask = read_mask_block(r);
    return lc;
}

void save_member(const std::string& path, const MemberCheckpoint& member,
                 std::uint64_t config_hash) {
    CheckpointMeta meta;
    meta.seed = member.seed;
    meta.scheme = member.scheme;
    meta.stage = Stage::member;
    meta.group = member.group;
    meta.config_hash = config_hash;
    save_checkpoint(path, member.params, member.mask ? &*member.mask : nullptr, meta);
}

MemberCheckpoint load_member(const std::string& path) {
    LoadedCheckpoint lc = load_checkpoint(path);
    require(lc.meta.stage == Stage::member, ErrKind::contract,
            "not a member checkpoint: " + path);
    MemberCheckpoint m;
    m.params = std::move(lc.params);
    m.mask = std::move(lc.mask);
    m.seed = lc.meta.seed;
    m.scheme = lc.meta.scheme.value_or(Scheme::baseline);
    m.group = lc.meta.group;
    return m;
}

void save_mask(const std::string& path, const PruneMask& mask) {
    Writer w(path);
    w.bytes(kMaskMagic, 4);
    w.u16(kCheckpointVersion);
    w.u16(0);
    write_mask_block(w, mask);
}

PruneMask load_mask(const std::string& path) {
    Reader r(path);
    check_magic(r, kMaskMagic, "mask");
    check_version(r.u16(), path);
    r.u16();
    return read_mask_block(r);
}

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrKind::missing_artifact, "file not found: " + path);
    std::uint64_t h = 0xCBF29CE484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<std::uint8_t>(buf[i]);
            h *= 0x100000001B3ull;
        }
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::uint64_t hex_to_u64(const std::string& s) {
    return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

void save_manifest(const std::string& path, const RunManifest& m) {
    nlohmann::json j;
    j["format"] = "mte-manifest";
    j["version"] = 1;
    j["config_hash"] = hash_hex(m.config_hash);
    j["body"] = {{"path", m.body_path}, {"fnv64", hash_hex(m.body_fnv64)}};
    nlohmann::json schemes = nlohmann::json::object();
    for (const auto& [name, members] : m.schemes) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& mm : members) {
            nlohmann::json e;
            e["seed"] = mm.seed;
            e["group"] = mm.group;
            e["path"] = mm.path;
            e["fnv64"] = hash_hex(mm.fnv64);
            if (!mm.mask_path.empty()) {
                e["mask_path"] = mm.mask_path;
                e["mask_fnv64"] = hash_hex(mm.mask_fnv64);
            }
            arr.push_back(e);
        }
        schemes[name] = arr;
    }
    j["schemes"] = schemes;
    std::ofstream out(path);
    require(out.good(), ErrKind::missing_artifact, "cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

RunManifest load_manifest(const std::string& path) {
    require(fs::exists(path), ErrKind::missing_artifact, "manifest not found: " + path);
    std::ifstream in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrKind::config, "manifest parse error in " + path + ": " + e.what());
    }
    RunManifest m;
    try {
        require(j.at("format") == "mte-manifest", ErrKind::config, "not a manifest: " + path);
        m.config_hash = hex_to_u64(j.at("config_hash").get<std::string>());
        m.body_path = j.at("body").at("path").get<std::string>();
        m.body_fnv64 = hex_to_u64(j.at("body").at("fnv64").get<std::string>());
        for (const auto& [name, arr] : j.at("schemes").items()) {
            std::vector<ManifestMember> members;
            for (const auto& e : arr) {
                ManifestMember mm;
                mm.seed = e.at("seed").get<std::uint64_t>();
                mm.group = e.at("group").get<int>();
                mm.path = e.at("path").get<std::string>();
                mm.fnv64 = hex_to_u64(e.at("fnv64").get<std::string>());
                if (e.contains("mask_path")) {
                    mm.mask_path = e.at("mask_path").get<std::string>();
                    mm.mask_fnv64 = hex_to_u64(e.at("mask_fnv64").get<std::string>());
                }
                members.push_back(mm);
            }
            m.schemes[name] = std::move(members);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrKind::config, "manifest key error in " + path + ": " + e.what());
    }
    return m;
}

void verify_manifest(const RunManifest& m, const std::string& run_dir,
                     const std::vector<std::string>& schemes) {
    std::string missing;
    auto check_file = [&](const std::string& rel, std::uint64_t expect, const std::string& label) {
        const std::string full = run_dir + "/" + rel;
        if (!fs::exists(full)) {
            missing += (missing.empty() ? "" : ", ") + label;
            return;
        }
        require(fnv1a_file(full) == expect, ErrKind::contract,
                "manifest hash mismatch for " + label + " (" + full + ")");
    };

    check_file(m.body_path, m.body_fnv64, "body");
    for (const auto& name : schemes) {
        if (!m.has_scheme(name)) {
            missing += (missing.empty() ? "" : ", ") + name + " (untrained)";
            continue;
        }
        for (const auto& mm : m.schemes.at(name)) {
            const std::string label = name + "/seed" + std::to_string(mm.seed);
            check_file(mm.path, mm.fnv64, label);
            if (!mm.mask_path.empty()) check_file(mm.mask_path, mm.mask_fnv64, label + " mask");
        }
    }
    require(missing.empty(), ErrKind::missing_artifact, "missing run artifacts: " + missing);
}

}  // namespace mte
