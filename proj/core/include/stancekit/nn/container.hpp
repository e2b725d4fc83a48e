#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stancekit/nn/tensor.hpp"

namespace stancekit::nn {

enum class DType { kF32, kF64 };

// One stored 2-D tensor. Data is kept in its on-disk dtype so a save/load
// round trip is bit-exact.
struct StoredTensor {
  DType dtype = DType::kF32;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<unsigned char> bytes;

  template <typename T>
  Matrix<T> to_matrix() const;
  template <typename T>
  static StoredTensor from_matrix(const Matrix<T>& m);
};

// Weights file (".skt"): the magic "SKT1", a uint32 format version, a
// uint64 metadata length, UTF-8 JSON metadata, then the raw little-endian
// tensor data at the offsets listed in the metadata's "tensors" index.
struct Archive {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, StoredTensor> tensors;

  // Missing names and shape mismatches raise kModelLoad.
  template <typename T>
  void load_into(Param<T>& param) const;
  template <typename T>
  void store(const Param<T>& param);
};

template <typename T>
void load_params(const ParamRefs<T>& params, const Archive& archive) {
  for (Param<T>* p : params) archive.load_into(*p);
}

template <typename T>
void store_params(const ParamRefs<T>& params, Archive& archive) {
  for (const Param<T>* p : params) archive.store(*p);
}

inline constexpr std::uint32_t kArchiveVersion = 1;

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

}  // namespace stancekit::nn
