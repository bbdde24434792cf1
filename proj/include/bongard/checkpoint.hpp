#pragma once

// Checkpoint container (little-endian):
//
//   offset 0   8 bytes   magic "BGCKPT01"
//   offset 8   u64       header length L
//   offset 16  L bytes   UTF-8 JSON header:
//                          {"kind": "svm_mimic" | "prototype_mimic" | "encoder",
//                           "config": {...},                      // model config echo
//                           "tensors": [{"name", "rows", "cols", "offset"}, ...],
//                           "count": N,                           // number of doubles
//                           "fnv1a64": "<hex digest of payload bytes>"}
//   16 + L     N × 8     IEEE-754 binary64 payload, each tensor column-major at its offset

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bongard/serialize.hpp"

namespace bongard {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class CheckpointError : public Error {
 public:
  using Error::Error;
};

struct Checkpoint {
  std::string kind;
  nlohmann::json config;
  std::vector<TensorSlot> tensors;
  std::vector<double> data;
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'B', 'G', 'C', 'K', 'P', 'T', '0', '1'};

inline std::string fnv1a64_hex(const void* bytes, std::size_t n) {
  std::uint64_t h = 14695981039346656037ull;
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

inline void save_checkpoint(const ParamStore& store, const std::string& kind, const nlohmann::json& config,
                            const std::filesystem::path& path) {
  nlohmann::json header;
  header["kind"] = kind;
  header["config"] = config;
  header["tensors"] = nlohmann::json::array();
  for (const auto& s : store.slots())
    header["tensors"].push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}, {"offset", s.offset}});
  header["count"] = store.size();
  header["fnv1a64"] = detail::fnv1a64_hex(store.data().data(), store.size() * sizeof(double));
  const std::string h = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  const std::uint64_t len = h.size();
  out.write(detail::kCheckpointMagic, 8);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(store.data().data()), static_cast<std::streamsize>(store.size() * sizeof(double)));
  if (!out) throw CheckpointError("short write to checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  auto corrupt = [&](const std::string& why) { return CheckpointError("corrupt checkpoint " + path.string() + ": " + why); };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), detail::kCheckpointMagic, 8) != 0) throw corrupt("bad magic");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (len > bytes.size() - 16) throw corrupt("truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(std::string("bad header: ") + e.what());
  }
  Checkpoint ck;
  try {
    ck.kind = header.at("kind").get<std::string>();
    ck.config = header.at("config");
    for (const auto& t : header.at("tensors"))
      ck.tensors.push_back({t.at("name").get<std::string>(), t.at("rows").get<Index>(), t.at("cols").get<Index>(),
                            t.at("offset").get<std::size_t>()});
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(std::string("bad header: ") + e.what());
  }
  const auto count = header.value("count", std::size_t{0});
  const std::size_t payload = bytes.size() - 16 - len;
  if (payload != count * sizeof(double)) throw corrupt("payload is " + std::to_string(payload) + " bytes, expected " +
                                                       std::to_string(count * sizeof(double)));
  ck.data.resize(count);
  std::memcpy(ck.data.data(), bytes.data() + 16 + len, payload);
  if (header.value("fnv1a64", std::string{}) != detail::fnv1a64_hex(ck.data.data(), payload)) throw corrupt("checksum mismatch");
  return ck;
}

// Copies checkpoint values into `store`; the tensor table must match exactly.
inline void restore_into(const Checkpoint& ck, ParamStore& store) {
  const auto& slots = store.slots();
  bool ok = ck.tensors.size() == slots.size() && ck.data.size() == store.size();
  for (std::size_t i = 0; ok && i < slots.size(); ++i)
    ok = ck.tensors[i].name == slots[i].name && ck.tensors[i].rows == slots[i].rows && ck.tensors[i].cols == slots[i].cols &&
         ck.tensors[i].offset == slots[i].offset;
  if (!ok) throw CheckpointError("checkpoint shape table does not match the model");
  store.data() = ck.data;
}

inline void save_mimic(const MimicModel& m, const std::filesystem::path& path) {
  save_checkpoint(m.params(), std::string(mode_name(m.config().mode)), to_json(m.config()), path);
}

inline MimicModel load_mimic(const std::filesystem::path& path) {
  const auto ck = load_checkpoint(path);
  if (ck.kind != "svm_mimic" && ck.kind != "prototype_mimic") throw CheckpointError("checkpoint kind '" + ck.kind + "' is not a mimic model");
  MimicModel m(mimic_config_from_json(ck.config));
  restore_into(ck, m.params());
  return m;
}

// Loads into a model built from `expected`; fails if the stored shapes differ.
inline MimicModel load_mimic(const std::filesystem::path& path, const MimicConfig& expected) {
  const auto ck = load_checkpoint(path);
  MimicModel m(expected);
  restore_into(ck, m.params());
  return m;
}

inline void save_encoder(const Encoder& e, const std::filesystem::path& path) {
  save_checkpoint(e.params(), "encoder", to_json(e.config()), path);
}

inline Encoder load_encoder(const std::filesystem::path& path) {
  const auto ck = load_checkpoint(path);
  if (ck.kind != "encoder") throw CheckpointError("checkpoint kind '" + ck.kind + "' is not an encoder");
  Encoder e(encoder_config_from_json(ck.config));
  restore_into(ck, e.params());
  return e;
}

}  // namespace bongard
