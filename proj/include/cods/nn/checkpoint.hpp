#pragma once

#include <fstream>

#include "json.hpp"

#include "cods/nn/tensor.hpp"

namespace cods::nn {

// Single-file checkpoint: magic, json meta, then the named parameter blobs in
// store order. Load requires an already-built store with matching shapes.

inline void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                            const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  const std::string magic = "CODSCKPT";
  out.write(magic.data(), magic.size());
  const std::string meta_str = meta.dump();
  const uint64_t meta_len = meta_str.size();
  out.write(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
  out.write(meta_str.data(), meta_len);
  const uint64_t count = params.entries().size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& [name, t] : params.entries()) {
    const uint64_t name_len = name.size();
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(name.data(), name_len);
    const uint64_t ndims = t->shape.size();
    out.write(reinterpret_cast<const char*>(&ndims), sizeof(ndims));
    for (int d : t->shape) {
      const int64_t dd = d;
      out.write(reinterpret_cast<const char*>(&dd), sizeof(dd));
    }
    out.write(reinterpret_cast<const char*>(t->v.data()), t->size() * sizeof(float));
  }
}

inline nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::string(magic, 8) != "CODSCKPT") throw std::runtime_error("bad checkpoint magic");
  uint64_t meta_len = 0;
  in.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), meta_len);
  return nlohmann::json::parse(meta_str);
}

inline void load_checkpoint_params(const std::string& path, ParamStore& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  uint64_t meta_len = 0;
  in.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
  in.seekg(static_cast<std::streamoff>(meta_len), std::ios::cur);
  uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  for (uint64_t i = 0; i < count; ++i) {
    uint64_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint64_t ndims = 0;
    in.read(reinterpret_cast<char*>(&ndims), sizeof(ndims));
    std::vector<int> shape(ndims);
    for (auto& d : shape) {
      int64_t dd = 0;
      in.read(reinterpret_cast<char*>(&dd), sizeof(dd));
      d = static_cast<int>(dd);
    }
    TensorPtr t = params.find(name);
    if (!t) throw std::runtime_error("checkpoint param not in store: " + name);
    if (t->shape != shape) throw std::runtime_error("checkpoint shape mismatch: " + name);
    in.read(reinterpret_cast<char*>(t->v.data()), t->size() * sizeof(float));
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
}

}  // namespace cods::nn
