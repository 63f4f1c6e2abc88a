#ifndef MTE_IO_HPP
#define MTE_IO_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mte/ensemble.hpp"

namespace mte {

// Checkpoint files are little-endian binary, magic "MTE1", format version 1:
//
//   magic[4] version:u16 scheme:u8 stage:u8 group:u8 has_mask:u8 reserved:u16
//   seed:u64 config_hash:u64
//   segment_count:u32 { name_len:u16 name rows:u32 cols:u32 offset:u64 }*
//   value_count:u64 real64*
//   if has_mask: region_count:u32 { name_len:u16 name }*
//                bit_count:u64 packed-bits (LSB-first, padding zeroed)
//
// Mask files share the mask block with magic "MTM1".
inline constexpr std::uint16_t kCheckpointVersion = 1;

enum class Stage : std::uint8_t { body = 0, member = 1 };

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::optional<Scheme> scheme;  // absent for the shared body
    Stage stage = Stage::member;
    int group = 0;  // 0 = none
    std::uint64_t config_hash = 0;
};

void save_checkpoint(const std::string& path, const ParamVector& params,
                     const PruneMask* mask, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    ParamVector params;
    std::optional<PruneMask> mask;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

void save_member(const std::string& path, const MemberCheckpoint& member,
                 std::uint64_t config_hash);
MemberCheckpoint load_member(const std::string& path);

void save_mask(const std::string& path, const PruneMask& mask);
PruneMask load_mask(const std::string& path);

// FNV-1a 64-bit over the file bytes; integrity check for manifests.
std::uint64_t fnv1a_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

// Run manifest: one JSON file per run directory tying the config hash, the
// dataset recipe, the body checkpoint, and every member file together.
struct ManifestMember {
    std::uint64_t seed = 0;
    int group = 1;
    std::string path;       // relative to the manifest's directory
    std::uint64_t fnv64 = 0;
    std::string mask_path;  // empty when the scheme has no masks
    std::uint64_t mask_fnv64 = 0;
};

struct RunManifest {
    std::uint64_t config_hash = 0;
    std::string body_path;
    std::uint64_t body_fnv64 = 0;
    std::map<std::string, std::vector<ManifestMember>> schemes;  // keyed by scheme name

    bool has_scheme(const std::string& name) const { return schemes.count(name) > 0; }
};

void save_manifest(const std::string& path, const RunManifest& m);
RunManifest load_manifest(const std::string& path);

// Checks that every referenced file exists and hash-verifies; errors name the
// offending scheme/seed pairs.
void verify_manifest(const RunManifest& m, const std::string& run_dir,
                     const std::vector<std::string>& schemes);

}  // namespace mte

#endif
