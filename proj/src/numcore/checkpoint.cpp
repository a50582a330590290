#include "eeg2text/numcore/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "eeg2text/numcore/bytes.hpp"

namespace eeg2text::numcore {

namespace {
constexpr std::string_view kMagic{"E2TCKPT\0", 8};
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u64(ckpt.seed);
  w.u32(static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [k, v] : ckpt.meta) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    w.str(e.name);
    w.u8(e.trainable ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) w.u64(d);
    for (float f : e.value.values()) w.f32(f);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  Checkpoint ckpt;
  try {
    if (r.take(kMagic.size()) != kMagic) throw CheckpointError("not a checkpoint file (bad magic)");
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                            " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    ckpt.seed = r.u64();
    const auto n_meta = r.u32();
    for (std::uint32_t i = 0; i < n_meta; ++i) {
      auto k = r.str();
      ckpt.meta[std::move(k)] = r.str();
    }
    const auto n_params = r.u32();
    for (std::uint32_t i = 0; i < n_params; ++i) {
      CheckpointEntry e;
      e.name = r.str();
      e.trainable = r.u8() != 0;
      const auto rank = r.u32();
      if (rank == 0 || rank > 8) throw CheckpointError("parameter " + e.name + " has invalid rank");
      Shape shape(rank);
      for (auto& d : shape) d = r.u64();
      const std::size_t volume = shape_volume(shape);
      if (volume == 0 || volume * 4 > r.remaining()) {
        throw CheckpointError("parameter " + e.name + " payload is truncated");
      }
      std::vector<float> data(volume);
      for (auto& f : data) f = r.f32();
      e.value = Tensor<float>(std::move(shape), std::move(data));
      ckpt.entries.push_back(std::move(e));
    }
  } catch (const TruncatedError& err) {
    throw CheckpointError(std::string("truncated checkpoint: ") + err.what());
  }
  if (r.remaining() != 0) throw CheckpointError("trailing bytes after checkpoint payload");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  const auto bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace eeg2text::numcore
