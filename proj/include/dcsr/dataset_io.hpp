#pragma once

#include <filesystem>
#include <string>

#include "dcsr/grid.hpp"

namespace dcsr {

// On-disk dataset container: a directory holding
//   manifest.json  {resolution, count, domain_length, provenance, seed, dtype: "f64le"}
//   data.bin       count x resolution little-endian f64, sample-major.

void write_dataset(const std::filesystem::path& dir, const Dataset& d);

/// Throws ConfigError on a missing/malformed manifest or a size mismatch in data.bin.
Dataset read_dataset(const std::filesystem::path& dir);

/// One row per sample, header "x0,x1,...".
void export_csv(const std::filesystem::path& file, const Dataset& d);

/// Git blob hash (SHA-1 over "blob <size>\0" + payload) of the data.bin payload.
std::string content_hash(const Dataset& d);

/// Same hash computed from a file's bytes.
std::string file_content_hash(const std::filesystem::path& file);

}  // namespace dcsr
