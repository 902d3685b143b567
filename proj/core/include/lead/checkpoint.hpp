// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "lead/model.hpp"

namespace lead::ckpt {

// LEADW archive:
//   magic "LEADW" | u16 version | u32 meta_len | meta (JSON model config)
//   u32 n_entries | n x (u16 name_len | name | u8 dtype | u8 ndim | ndim x u32 dim | u64 offset)
//   payload: little-endian float32 tensors, offsets relative to payload start

inline constexpr std::string_view kMagic = "LEADW";
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

struct EntryInfo {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::uint64_t offset = 0;
};

struct Archive {
  model::ModelConfig config;
  model::ParamStore params;
};

void save(const model::ModelConfig& cfg, const model::ParamStore& params,
          const std::filesystem::path& path);
void save(const model::Model& m, const std::filesystem::path& path);

Archive read(const std::filesystem::path& path);
std::vector<EntryInfo> read_index(const std::filesystem::path& path);
/// Reads the archive and validates it against the configuration's layout.
model::Model load(const std::filesystem::path& path);

/// Serialized bytes (the file content) for in-memory comparison.
std::vector<char> serialize(const model::ModelConfig& cfg, const model::ParamStore& params);

}  // namespace lead::ckpt
