#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dialcoord/clustering.hpp"
#include "dialcoord/ranker.hpp"

namespace dialcoord {

inline constexpr std::uint32_t kStoreVersion = 1;

// Binary centroid file:
//   "DCCENT01" | u32 version | i32 aspect_id | u32 k | u32 n_d | f64 silhouette |
//   u64 seed | u64 corpus_hash | k*n_d f64
// all little-endian, plus a "<file>.json" manifest with the same header fields.
void save_centroids(const std::filesystem::path& file, const CentroidSet& centroids, std::uint64_t corpus_hash);

// Throws "corrupt_store" on truncation or a bad magic, "version_mismatch" on a
// format version or dimension mismatch and "hash_mismatch" when the expected
// corpus hash differs from the stored one.
CentroidSet load_centroids(const std::filesystem::path& file, std::optional<std::size_t> expected_dim = std::nullopt,
                           std::optional<std::uint64_t> expected_corpus_hash = std::nullopt);

struct CheckpointMeta {
    int epoch = 0;
    double validation_precision = 0.0;
    std::uint64_t corpus_hash = 0;
};

// "DCCKPT01" | u64 manifest length | manifest JSON | per tensor:
//   u32 name length | name | u32 rank | u64 dims... | f64 values
void save_checkpoint(const std::filesystem::path& file, const RankerModel& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    RankerModel model;
    CheckpointMeta meta;
};

// expected_config, when given, must match the stored shapes (else "version_mismatch").
LoadedCheckpoint load_checkpoint(const std::filesystem::path& file,
                                 const std::optional<RankerConfig>& expected_config = std::nullopt,
                                 std::optional<std::uint64_t> expected_corpus_hash = std::nullopt);

nlohmann::json checkpoint_manifest(const std::filesystem::path& file);

}  // namespace dialcoord
