#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "amn/model.hpp"

namespace amn {

// On-disk layout (little-endian):
//   "AMN1"                         4 bytes magic
//   u16 version                    currently 1
//   u32 n, n bytes                 config as UTF-8 "key=value\n" lines
//   u32 array count
//   per array: u16 name length, name bytes, u8 rank, rank x u32 dims,
//              float32 payload in row-major order
// The vocabulary travels in the config block as "vocab=" followed by the
// space-separated tokens in id order.
struct Checkpoint {
  ModelConfig config;
  ModelParams<float> params;
  std::vector<std::string> vocab;
  std::map<std::string, std::string> meta;  // free-form extras (task id, ...)
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Serialized bytes, as written by save_checkpoint.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

template <typename T>
Checkpoint make_checkpoint(const AmnModel<T>& model, std::vector<std::string> vocab,
                           std::map<std::string, std::string> meta = {}) {
  return Checkpoint{model.config(), model.params().template cast<float>(), std::move(vocab),
                    std::move(meta)};
}

}  // namespace amn
