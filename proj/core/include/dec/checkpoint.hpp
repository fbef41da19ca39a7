#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dec/autoencoder.hpp"
#include "dec/clustering.hpp"

namespace dec {

// Binary layout, all integers little-endian:
//   "DECKPT\0\0"  u32 version  u32 kind (1 autoencoder, 2 clustering model)
//   u32 encoder_layers, then per layer: u32 in, u32 out, u8 activation
//     (0 relu, 1 identity), out*in f64 weights (row-major), out f64 bias
//   kind 1: u32 decoder_layers + layers in the same encoding
//   kind 2: u32 k, u32 dim, f64 alpha, k*dim f64 centroids
//   u64 FNV-1a of every preceding byte
// Doubles are stored as their IEEE-754 bit patterns, so round trips are exact.

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { Autoencoder = 1, ClusteringModel = 2 };

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::Autoencoder;
  std::optional<StackedAutoencoder> autoencoder;
  std::optional<DecModel> model;

  const std::vector<DenseLayer>& encoder() const;
};

std::vector<std::uint8_t> serialize(const StackedAutoencoder& sae);
std::vector<std::uint8_t> serialize(const DecModel& model);
Checkpoint deserialize(std::span<const std::uint8_t> bytes, const std::string& source);

void save_checkpoint(const std::filesystem::path& path, const StackedAutoencoder& sae);
void save_checkpoint(const std::filesystem::path& path, const DecModel& model);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;
std::uint64_t file_checksum(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace dec
