#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bevcv/index.hpp"
#include "bevcv/weights.hpp"

namespace bevcv {

inline constexpr std::uint16_t kEmbeddingFormatVersion = 1;
inline constexpr std::uint16_t kWeightsFormatVersion = 1;

// "BEVC" | u16 version | u32 dim | u64 count | count x u64 id |
// count x dim x f32. Everything little-endian.
std::vector<std::uint8_t> encode_embeddings(const EmbeddingSet& set);
EmbeddingSet decode_embeddings(std::span<const std::uint8_t> bytes);

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);
EmbeddingSet read_embeddings(const std::filesystem::path& path);

// "BVWT" | u16 version | u32 count | per tensor: u16 name length, UTF-8 name,
// u8 rank, rank x u32 dims, f32 data. Little-endian.
std::vector<std::uint8_t> encode_weights(std::span<const NamedTensor> tensors);
LayerWeights decode_weights(std::span<const std::uint8_t> bytes);

// Throws DuplicateTensorName when a name repeats.
void write_weights(const std::filesystem::path& path,
                   std::span<const NamedTensor> tensors);
void write_weights(const std::filesystem::path& path, const LayerWeights& w);
LayerWeights read_weights(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);

}  // namespace bevcv
