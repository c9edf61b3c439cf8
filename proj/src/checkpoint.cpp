#include "advrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>
#include <zlib.h>

#include "advrl/serialize.hpp"

namespace advrl {
namespace {

using json = nlohmann::json;
using Kind = CheckpointError::Kind;

constexpr std::size_t kMagicSize = 8;
constexpr std::size_t kPrefixSize = kMagicSize + 8;

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{p[i]} << (8 * i);
  return v;
}

std::uint32_t crc_of(const unsigned char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

struct Layout {
  json header;
  std::size_t header_size = 0;
  std::size_t payload_bytes = 0;
};

// Reads the header without trusting the checksum; throws Malformed on failure.
Layout read_layout(const std::vector<unsigned char>& bytes) {
  Layout l;
  l.header_size = get_u64(bytes.data() + kMagicSize);
  if (l.header_size > bytes.size() - kPrefixSize)
    throw CheckpointError(Kind::Truncated, "checkpoint truncated: header needs " +
                                               std::to_string(l.header_size) + " bytes");
  try {
    l.header = json::parse(bytes.begin() + kPrefixSize,
                           bytes.begin() + static_cast<std::ptrdiff_t>(kPrefixSize + l.header_size));
    l.payload_bytes = l.header.at("payload_bytes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::Malformed, std::string("checkpoint header unreadable: ") + e.what());
  }
  return l;
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Model& model) {
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& np : model.parameters()) {
    tensors.push_back({{"name", np.name}, {"shape", np.value.shape()}, {"offset", offset}});
    offset += np.value.size() * sizeof(double);
  }
  const json header = {{"format", kCheckpointMagic},
                       {"architecture", to_json(model.architecture())},
                       {"metadata", to_json(model.metadata())},
                       {"tensors", tensors},
                       {"payload_bytes", offset}};
  const std::string text = header.dump();

  std::vector<unsigned char> out(kCheckpointMagic, kCheckpointMagic + kMagicSize);
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset + 4);
  for (const auto& np : model.parameters())
    for (double v : np.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  put_u32(out, crc_of(out.data(), out.size()));
  return out;
}

Model decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kMagicSize)
    throw CheckpointError(Kind::Truncated, "checkpoint truncated: no magic bytes");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 6) != 0)
    throw CheckpointError(Kind::BadMagic, "not a checkpoint file (bad magic)");
  if (std::memcmp(bytes.data(), kCheckpointMagic, kMagicSize) != 0)
    throw CheckpointError(Kind::Version,
                          "unsupported checkpoint version '" +
                              std::string(bytes.begin() + 6, bytes.begin() + 8) + "', expected '" +
                              std::string(kCheckpointMagic + 6, 2) + "'");
  if (bytes.size() < kPrefixSize + 4)
    throw CheckpointError(Kind::Truncated, "checkpoint truncated: missing header length");

  const std::size_t body = bytes.size() - 4;
  if (crc_of(bytes.data(), body) != get_u32(bytes.data() + body)) {
    // Distinguish a short file from corrupted content when the header allows it.
    Layout l;
    try {
      l = read_layout(bytes);
    } catch (const CheckpointError& e) {
      if (e.kind() == Kind::Truncated) throw;
      throw CheckpointError(Kind::Checksum, "checkpoint checksum mismatch");
    }
    if (kPrefixSize + l.header_size + l.payload_bytes + 4 > bytes.size())
      throw CheckpointError(Kind::Truncated, "checkpoint truncated: expected " +
                                                 std::to_string(kPrefixSize + l.header_size +
                                                                l.payload_bytes + 4) +
                                                 " bytes, found " + std::to_string(bytes.size()));
    throw CheckpointError(Kind::Checksum, "checkpoint checksum mismatch");
  }

  const Layout l = read_layout(bytes);
  if (kPrefixSize + l.header_size + l.payload_bytes + 4 != bytes.size())
    throw CheckpointError(Kind::Malformed, "checkpoint payload size disagrees with header");
  const unsigned char* payload = bytes.data() + kPrefixSize + l.header_size;

  try {
    Architecture arch = architecture_from_json(l.header.at("architecture"));
    TrainingMetadata meta = metadata_from_json(l.header.at("metadata"));
    std::vector<NamedTensor> params;
    for (const auto& t : l.header.at("tensors")) {
      Shape shape = t.at("shape").get<Shape>();
      const std::size_t offset = t.at("offset").get<std::size_t>();
      const std::size_t count = element_count(shape);
      if (offset % 8 != 0 || offset + count * 8 > l.payload_bytes)
        throw CheckpointError(Kind::Malformed, "tensor extends past payload");
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i)
        values[i] = std::bit_cast<double>(get_u64(payload + offset + 8 * i));
      params.push_back({t.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values))});
    }
    return Model(std::move(arch), std::move(params), std::move(meta));
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::Malformed, std::string("checkpoint header invalid: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Kind::Malformed, std::string("checkpoint inconsistent: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::Io, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::Io, "short write to checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::Io, "cannot open checkpoint " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

}  // namespace advrl
