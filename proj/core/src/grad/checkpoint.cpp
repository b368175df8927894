#include "tamplan/grad/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "tamplan/common/errors.hpp"

namespace tamplan::grad {

namespace {

constexpr std::array<char, 8> kMagic{'T', 'A', 'M', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("checkpoint: truncated header");
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const nlohmann::json& metadata) {
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["metadata"] = metadata;
  auto& list = manifest["parameters"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : store.params()) {
    list.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}});
    offset += p.value.numel();
  }
  const std::string header = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& p : store.params()) {
    const auto v = p.value.values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("checkpoint: bad magic in " + path.string());
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = read_le<std::uint64_t>(in);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError("checkpoint: truncated manifest");

  Checkpoint ck;
  const auto manifest = nlohmann::json::parse(header);
  ck.metadata = manifest.value("metadata", nlohmann::json::object());
  for (const auto& entry : manifest.at("parameters")) {
    Shape shape = entry.at("shape").get<Shape>();
    std::vector<double> vals(shape_numel(shape));
    in.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint: truncated payload for " + entry.at("name").get<std::string>());
    ck.store.add(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(vals)));
  }
  return ck;
}

void assign_parameters(ParameterStore& target, const ParameterStore& source) {
  if (target.size() != source.size()) {
    throw ProvenanceError("checkpoint: expected " + std::to_string(target.size()) + " parameters, found " +
                          std::to_string(source.size()));
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    auto& t = target[i];
    const auto& s = source[i];
    if (t.name != s.name || t.value.shape() != s.value.shape()) {
      throw ProvenanceError("checkpoint: parameter mismatch at " + t.name + " " + shape_str(t.value.shape()) +
                            " vs " + s.name + " " + shape_str(s.value.shape()));
    }
    t.value = s.value;
    t.zero_grad();
  }
}

}  // namespace tamplan::grad
