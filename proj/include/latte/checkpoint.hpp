#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "latte/io.hpp"
#include "latte/model.hpp"

namespace latte {

// Checkpoint layout (all integers little-endian):
//   magic "LATTE1"
//   u64 config length, config JSON (canonical: sorted keys, compact)
//   u64 tensor count, then per tensor:
//     u64 name length, name bytes, u32 rank, u64 dims..., f64 values (raw LE)
// Scaler statistics and the step counter travel as named tensors so a
// checkpoint alone reproduces forecasts bit-for-bit.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw ParseError("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

inline void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
  put_u64(out, name.size());
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape) put_u64(out, static_cast<std::uint64_t>(d));
  for (double v : t.data) put_f64(out, v);
}

}  // namespace detail

inline std::string checkpoint_bytes(LatteModel& m) {
  std::string out = "LATTE1";
  const std::string cfg = m.cfg.to_json().dump();
  detail::put_u64(out, cfg.size());
  out.append(cfg);
  auto params = m.parameters();
  detail::put_u64(out, params.size() + 3);
  for (Parameter* p : params) detail::put_tensor(out, p->name, p->value);
  detail::put_tensor(out, "scaler.offset", Tensor::row(std::vector<double>(m.scaler.offset)));
  detail::put_tensor(out, "scaler.scale", Tensor::row(std::vector<double>(m.scaler.scale)));
  detail::put_tensor(out, "train.steps", Tensor::scalar(static_cast<double>(m.train_steps)));
  return out;
}

inline void save_checkpoint(const std::string& path, LatteModel& m) {
  write_file_atomic(path, checkpoint_bytes(m));
}

inline LatteModel checkpoint_from_bytes(const std::string& buf) {
  detail::Reader rd{buf};
  if (rd.bytes(6) != "LATTE1") throw ParseError("not a checkpoint: bad magic");
  const std::uint64_t cfg_len = rd.u64();
  nlohmann::json cfg_json;
  try {
    cfg_json = nlohmann::json::parse(rd.bytes(cfg_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint config is not valid JSON: ") + e.what());
  }
  LatteModel m = make_model(ModelConfig::from_json(cfg_json));
  m.scaler.kind = m.cfg.scaler;

  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : m.parameters()) by_name.emplace(p->name, p);
  std::set<std::string> seen;
  const std::uint64_t count = rd.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t name_len = rd.u64();
    const std::string name = rd.bytes(name_len);
    const std::uint32_t rank = rd.u32();
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(rd.u64()));
    Tensor t = Tensor::zeros(shape);
    for (auto& v : t.data) v = rd.f64();
    if (!seen.insert(name).second) throw ParseError("checkpoint has duplicate tensor '" + name + "'");
    if (name == "scaler.offset") {
      m.scaler.offset = t.data;
    } else if (name == "scaler.scale") {
      m.scaler.scale = t.data;
    } else if (name == "train.steps") {
      m.train_steps = static_cast<long long>(t.value());
    } else {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw ParseError("checkpoint has unknown tensor '" + name + "'");
      if (it->second->value.shape != shape)
        throw DimensionError("checkpoint tensor '" + name + "' has shape " + shape_to_string(shape) +
                             ", model expects " + shape_to_string(it->second->value.shape));
      it->second->value = std::move(t);
    }
  }
  for (const auto& [name, p] : by_name)
    if (!seen.count(name)) throw ParseError("checkpoint is missing tensor '" + name + "'");
  if (static_cast<int>(m.scaler.offset.size()) != m.cfg.n_series ||
      static_cast<int>(m.scaler.scale.size()) != m.cfg.n_series)
    throw ParseError("checkpoint scaler statistics do not match n_series");
  return m;
}

inline LatteModel load_checkpoint(const std::string& path) {
  return checkpoint_from_bytes(read_file(path));
}

}  // namespace latte
