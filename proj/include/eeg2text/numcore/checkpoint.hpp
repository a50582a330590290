#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "eeg2text/numcore/parameter.hpp"
#include "eeg2text/numcore/tensor.hpp"

// Binary parameter checkpoint. Layout (all integers and floats little-endian):
//
//   magic      8 bytes  "E2TCKPT\0"
//   version    u32      kCheckpointVersion
//   seed       u64
//   n_meta     u32      then n_meta x (string key, string value)
//   n_params   u32      then n_params x entry
//   entry:     string name, u8 trainable, u32 rank, rank x u64 dim,
//              prod(dim) x f32 values
//
// A string is a u32 byte length followed by the bytes.

namespace eeg2text::numcore {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointEntry {
  std::string name;
  Tensor<float> value;
  bool trainable = true;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> meta;
  std::vector<CheckpointEntry> entries;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <class T>
Checkpoint snapshot(const ParamStore<T>& params, std::uint64_t seed,
                    std::map<std::string, std::string> meta = {}) {
  Checkpoint ckpt;
  ckpt.seed = seed;
  ckpt.meta = std::move(meta);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    ckpt.entries.push_back({p.name, p.value.template cast<float>(), p.trainable});
  }
  return ckpt;
}

// Copies checkpoint values into an already-constructed store. Every parameter
// must be present with an identical shape.
template <class T>
void restore(ParamStore<T>& params, const Checkpoint& ckpt) {
  std::map<std::string_view, const CheckpointEntry*> by_name;
  for (const auto& e : ckpt.entries) by_name.emplace(e.name, &e);
  if (by_name.size() != params.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(by_name.size()) +
                          " parameters, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw CheckpointError("checkpoint lacks parameter " + p.name);
    const auto& v = it->second->value;
    if (v.shape() != p.value.shape()) {
      throw CheckpointError("parameter " + p.name + " has shape " + shape_to_string(v.shape()) +
                            " in checkpoint, model expects " + shape_to_string(p.value.shape()));
    }
    for (std::size_t j = 0; j < v.size(); ++j) p.value[j] = static_cast<T>(v[j]);
    p.trainable = it->second->trainable;
  }
}

}  // namespace eeg2text::numcore
