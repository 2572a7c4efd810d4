#include "dcsr/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "dcsr/error.hpp"

namespace dcsr {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");
constexpr std::array<char, 8> kMagic{'D', 'C', 'S', 'R', 'C', 'K', 'P', 'T'};

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const ScoreNet& net, const CheckpointInfo& info) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  const nlohmann::json header{
      {"arch", net.arch()},
      {"sched", {{"sigma_max_base", net.schedule().base()}}},
      {"kind", net.arch().conditional() ? "conditional_network" : "network"},
      {"seed", info.seed},
      {"iteration", info.iteration},
      {"param_count", net.parameter_count()},
      {"frequency_count", static_cast<std::size_t>(net.frequencies().size())},
  };
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + file.string());
  out.write(kMagic.data(), kMagic.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(net.parameters().data()),
            static_cast<std::streamsize>(net.parameters().size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(net.frequencies().data()),
            static_cast<std::streamsize>(net.frequencies().size() * sizeof(double)));
}

std::shared_ptr<const ScoreNet> load_checkpoint(const std::filesystem::path& file, CheckpointInfo* info) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("checkpoint not found: " + file.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ConfigError("not a checkpoint file: " + file.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 24)) throw ConfigError("corrupt checkpoint header: " + file.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ConfigError("truncated checkpoint header: " + file.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("corrupt checkpoint header: " + std::string(e.what()));
  }
  const NetArch arch = header.at("arch").get<NetArch>();
  const NoiseSchedule sched(header.at("sched").at("sigma_max_base").get<double>());
  const auto pc = header.at("param_count").get<std::size_t>();
  const auto fc = header.at("frequency_count").get<std::size_t>();
  Eigen::VectorXd params(static_cast<Eigen::Index>(pc)), freqs(static_cast<Eigen::Index>(fc));
  in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(pc * sizeof(double)));
  in.read(reinterpret_cast<char*>(freqs.data()), static_cast<std::streamsize>(fc * sizeof(double)));
  if (!in) throw ConfigError("truncated checkpoint payload: " + file.string());
  if (info) {
    info->seed = header.value("seed", std::uint64_t{0});
    info->iteration = header.value("iteration", std::size_t{0});
  }
  return std::make_shared<const ScoreNet>(arch, sched, std::move(params), std::move(freqs));
}

}  // namespace dcsr
