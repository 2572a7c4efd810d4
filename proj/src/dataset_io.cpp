#include "dcsr/dataset_io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dcsr/error.hpp"

namespace dcsr {

namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little, "f64le container assumes a little-endian host");

std::string payload_bytes(const Dataset& d) {
  std::string bytes;
  bytes.resize(d.size() * d.resolution() * sizeof(double));
  char* dst = bytes.data();
  for (const auto& f : d) {
    std::memcpy(dst, f.data().data(), f.resolution() * sizeof(double));
    dst += f.resolution() * sizeof(double);
  }
  return bytes;
}

std::string git_blob_sha1(const std::string& payload) {
  const std::string header = "blob " + std::to_string(payload.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, payload.data(), payload.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& d) {
  fs::create_directories(dir);
  nlohmann::json manifest{
      {"resolution", d.resolution()},
      {"count", d.size()},
      {"domain_length", d.domain_length()},
      {"provenance", d.tag()},
      {"seed", d.tag().seed},
      {"dtype", "f64le"},
  };
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw ConfigError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
  }
  const std::string bytes = payload_bytes(d);
  std::ofstream out(dir / "data.bin", std::ios::binary);
  if (!out) throw ConfigError("cannot write " + (dir / "data.bin").string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Dataset read_dataset(const fs::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw ConfigError("dataset manifest not found: " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    min >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest " + (dir / "manifest.json").string() + ": " + e.what());
  }
  if (manifest.value("dtype", "") != "f64le")
    throw ConfigError("unsupported dataset dtype in " + dir.string());
  const auto n = manifest.at("resolution").get<std::size_t>();
  const auto count = manifest.at("count").get<std::size_t>();
  const double length = manifest.value("domain_length", 1.0);
  Provenance tag = manifest.value("provenance", Provenance{});

  std::ifstream in(dir / "data.bin", std::ios::binary);
  if (!in) throw ConfigError("dataset payload not found: " + (dir / "data.bin").string());
  std::vector<Field> fields;
  fields.reserve(count);
  std::vector<double> buf(n);
  for (std::size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ConfigError("dataset payload truncated: " + (dir / "data.bin").string());
    fields.emplace_back(buf, length);
  }
  in.peek();
  if (!in.eof()) throw ConfigError("dataset payload larger than manifest count: " + dir.string());
  return Dataset(std::move(fields), std::move(tag));
}

void export_csv(const fs::path& file, const Dataset& d) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  for (std::size_t j = 0; j < d.resolution(); ++j) out << (j ? "," : "") << 'x' << j;
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& f : d) {
    for (std::size_t j = 0; j < f.resolution(); ++j) out << (j ? "," : "") << f[j];
    out << '\n';
  }
}

std::string content_hash(const Dataset& d) { return git_blob_sha1(payload_bytes(d)); }

std::string file_content_hash(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return git_blob_sha1(ss.str());
}

}  // namespace dcsr
