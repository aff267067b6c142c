#pragma once

#include <cstring>
#include <string>

#include "drn/config_json.hpp"
#include "drn/training.hpp"

namespace drn {

// Self-describing binary checkpoint: magic, version, step counter, embedded
// config JSON, then named tensors (dtype, extents, raw row-major payload).
// Byte layout is little-endian. Loading under the training precision restores
// parameters bit-identically; loading f32 checkpoints in f64 mode widens
// exactly; narrowing loads are refused.

namespace ckpt_detail {

inline constexpr char kMagic[8] = {'D', 'R', 'N', 'C', 'K', 'P', 'T', '1'};

template <class T>
void put(std::string& buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <class T>
T take(const std::string& buf, std::size_t& at) {
  if (at + sizeof(T) > buf.size()) throw ValueError("checkpoint truncated");
  T value;
  std::memcpy(&value, buf.data() + at, sizeof(T));
  at += sizeof(T);
  return value;
}

inline std::string take_bytes(const std::string& buf, std::size_t& at, std::size_t n) {
  if (at + n > buf.size()) throw ValueError("checkpoint truncated");
  std::string out = buf.substr(at, n);
  at += n;
  return out;
}

}  // namespace ckpt_detail

template <class Scalar>
std::string encode_checkpoint(const Checkpoint<Scalar>& ckpt) {
  using namespace ckpt_detail;
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put<std::uint32_t>(buf, 1);
  put<std::int64_t>(buf, ckpt.step);
  const std::string config = to_json(ckpt.config).dump();
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(config.size()));
  buf += config;
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, tensor] : ckpt.params) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(sizeof(Scalar)));
    put<std::uint64_t>(buf, static_cast<std::uint64_t>(tensor.rows()));
    put<std::uint64_t>(buf, static_cast<std::uint64_t>(tensor.cols()));
    buf.append(reinterpret_cast<const char*>(tensor.data()),
               static_cast<std::size_t>(tensor.size()) * sizeof(Scalar));
  }
  return buf;
}

template <class Scalar>
Checkpoint<Scalar> decode_checkpoint(const std::string& buf) {
  using namespace ckpt_detail;
  std::size_t at = 0;
  if (take_bytes(buf, at, sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw ValueError("not a checkpoint file (bad magic)");
  }
  const auto version = take<std::uint32_t>(buf, at);
  if (version != 1) throw ValueError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint<Scalar> ckpt;
  ckpt.step = take<std::int64_t>(buf, at);
  const auto config_len = take<std::uint32_t>(buf, at);
  const std::string config_text = take_bytes(buf, at, config_len);
  ckpt.config = experiment_config_from_json(json::parse(config_text));
  const auto n_tensors = take<std::uint32_t>(buf, at);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const auto name_len = take<std::uint32_t>(buf, at);
    const std::string name = take_bytes(buf, at, name_len);
    const auto dtype = take<std::uint8_t>(buf, at);
    const auto rows = static_cast<Index>(take<std::uint64_t>(buf, at));
    const auto cols = static_cast<Index>(take<std::uint64_t>(buf, at));
    if (dtype != 4 && dtype != 8) throw ValueError("checkpoint tensor has unknown dtype");
    if (dtype > sizeof(Scalar)) {
      throw ValueError("checkpoint stores f64 tensors; refusing narrowing load in f32 mode");
    }
    Mat<Scalar> tensor(rows, cols);
    if (dtype == sizeof(Scalar)) {
      const std::string payload =
          take_bytes(buf, at, static_cast<std::size_t>(rows * cols) * dtype);
      std::memcpy(tensor.data(), payload.data(), payload.size());
    } else {
      // widening f32 -> f64
      const std::string payload =
          take_bytes(buf, at, static_cast<std::size_t>(rows * cols) * dtype);
      Mat<float> narrow(rows, cols);
      std::memcpy(narrow.data(), payload.data(), payload.size());
      tensor = narrow.template cast<Scalar>();
    }
    ckpt.params[name] = std::move(tensor);
  }
  if (at != buf.size()) throw ValueError("checkpoint has trailing bytes");
  return ckpt;
}

template <class Scalar>
void save_checkpoint(const std::string& path, const Checkpoint<Scalar>& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

template <class Scalar>
Checkpoint<Scalar> load_checkpoint(const std::string& path) {
  return decode_checkpoint<Scalar>(read_file(path));
}

}  // namespace drn
