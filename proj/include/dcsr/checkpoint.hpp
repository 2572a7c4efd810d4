#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "dcsr/network.hpp"

namespace dcsr {

// Checkpoint file layout:
//   8 bytes   magic "DCSRCKPT"
//   8 bytes   little-endian u64 header length L
//   L bytes   JSON header {arch, sched: {sigma_max_base}, kind, seed, iteration,
//                          param_count, frequency_count}
//   f64le[param_count] trainable parameters, then f64le[frequency_count]
//   fixed Fourier embedding frequencies.

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
};

void save_checkpoint(const std::filesystem::path& file, const ScoreNet& net, const CheckpointInfo& info);

/// Throws ConfigError on a missing file, bad magic or truncated payload.
std::shared_ptr<const ScoreNet> load_checkpoint(const std::filesystem::path& file, CheckpointInfo* info = nullptr);

}  // namespace dcsr
