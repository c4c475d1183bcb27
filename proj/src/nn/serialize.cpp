#include "eager/nn/serialize.hpp"

#include <cstring>
#include <fstream>

#include "eager/util/errors.hpp"

namespace eager::nn {

namespace {

constexpr char kMagic[8] = {'E', 'A', 'G', 'R', 'C', 'K', 'P', '\0'};
constexpr uint32_t kVersion = 1;

struct Header {
  nlohmann::json json;
};

nlohmann::json read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  uint32_t version = 0;
  uint64_t hlen = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a checkpoint file: " + path);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version) + " in " + path);
  std::string hdr(hlen, '\0');
  in.read(hdr.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError("truncated checkpoint header: " + path);
  nlohmann::json parsed = nlohmann::json::parse(hdr, nullptr, false);
  if (parsed.is_discarded())
    throw DataError("corrupt checkpoint header: " + path);
  return parsed;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const nlohmann::json& meta) {
  nlohmann::json hdr;
  hdr["meta"] = meta;
  auto arrays = nlohmann::json::array();
  for (const auto& p : params.all())
    arrays.push_back({{"name", p->name}, {"shape", p->v.shape}});
  hdr["arrays"] = arrays;
  const std::string hs = hdr.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& p : params.all())
    out.write(reinterpret_cast<const char*>(p->v.d.data()),
              static_cast<std::streamsize>(p->v.numel() * sizeof(double)));
  if (!out) throw DataError("write failed: " + path);
}

nlohmann::json load_checkpoint(const std::string& path, ParamSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  nlohmann::json hdr = read_header(in, path);
  for (const auto& arr : hdr.at("arrays")) {
    const std::string name = arr.at("name");
    const std::vector<int> shape = arr.at("shape");
    Parameter* p = params.find(name);
    if (!p) throw DataError("checkpoint has unknown parameter: " + name);
    if (p->v.shape != shape)
      throw DataError("checkpoint shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(p->v.d.data()),
            static_cast<std::streamsize>(p->v.numel() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint data: " + path);
  }
  return hdr.at("meta");
}

nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return read_header(in, path).at("meta");
}

}  // namespace eager::nn
