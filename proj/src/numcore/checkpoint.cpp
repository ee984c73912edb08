#include "radseq/numcore/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace radseq::num {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw CheckpointError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

nlohmann::json read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError("not a checkpoint: " + path.string());
  }
  const std::uint64_t n = get_u64(in);
  if (n > (1ull << 30)) throw CheckpointError("implausible checkpoint header length");
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  if (!in) throw CheckpointError("truncated checkpoint header");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
}

std::vector<std::size_t> shape_dims(const Shape& s) {
  std::vector<std::size_t> d;
  for (std::size_t i = 0; i < s.rank(); ++i) d.push_back(s[i]);
  return d;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const nlohmann::json& meta) {
  nlohmann::json header = meta;
  header["format"] = "radseq-checkpoint";
  header["version"] = 1;
  header["dtype"] = "float64";
  header["tensors"] = nlohmann::json::array();
  for (const auto& p : params) {
    header["tensors"].push_back({{"name", p->name}, {"shape", shape_dims(p->value.shape())}});
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, 8);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params) {
    const Real* d = p->value.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(d[i]));
  }
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_header(in, path);
}

nlohmann::json load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  nlohmann::json header = read_header(in, path);
  if (header.value("dtype", "") != "float64") throw CheckpointError("unsupported checkpoint dtype");
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    const auto& entry = tensors[i];
    if (entry.at("name").get<std::string>() != p.name) {
      throw CheckpointError("tensor " + std::to_string(i) + " is '" +
                            entry.at("name").get<std::string>() + "', expected '" + p.name + "'");
    }
    if (entry.at("shape").get<std::vector<std::size_t>>() != shape_dims(p.value.shape())) {
      throw CheckpointError("shape mismatch for " + p.name);
    }
  }
  for (auto& p : params) {
    Real* d = p->value.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) d[i] = std::bit_cast<Real>(get_u64(in));
  }
  return header;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace radseq::num
