#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace acdf {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, used to derive per-asset RNG streams from string ids.
std::uint64_t fnv1a64(const std::string& text);

/// SplitMix64 finaliser; mixes a base seed with a stream index.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace acdf
