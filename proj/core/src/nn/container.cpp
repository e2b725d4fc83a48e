#include "stancekit/nn/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "stancekit/error.hpp"

namespace stancekit::nn {
namespace {

// Tensors and lengths are copied byte-for-byte.
static_assert(std::endian::native == std::endian::little, ".skt I/O assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'K', 'T', '1'};

std::size_t element_size(DType dtype) { return dtype == DType::kF32 ? 4 : 8; }

std::string dtype_name(DType dtype) { return dtype == DType::kF32 ? "f32" : "f64"; }

DType parse_dtype(const std::string& name) {
  if (name == "f32") return DType::kF32;
  if (name == "f64") return DType::kF64;
  fail(ErrorCode::kModelLoad, "unsupported tensor dtype " + name);
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) fail(ErrorCode::kModelLoad, "truncated " + what);
  return value;
}

}  // namespace

template <typename T>
Matrix<T> StoredTensor::to_matrix() const {
  Matrix<T> m(rows, cols);
  const auto n = static_cast<std::size_t>(rows * cols);
  if (dtype == DType::kF32) {
    for (std::size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, bytes.data() + 4 * i, 4);
      m.data()[i] = static_cast<T>(v);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double v;
      std::memcpy(&v, bytes.data() + 8 * i, 8);
      m.data()[i] = static_cast<T>(v);
    }
  }
  return m;
}

template <typename T>
StoredTensor StoredTensor::from_matrix(const Matrix<T>& m) {
  StoredTensor t;
  t.dtype = std::is_same_v<T, float> ? DType::kF32 : DType::kF64;
  t.rows = m.rows();
  t.cols = m.cols();
  t.bytes.resize(static_cast<std::size_t>(m.size()) * sizeof(T));
  std::memcpy(t.bytes.data(), m.data(), t.bytes.size());
  return t;
}

template <typename T>
void Archive::load_into(Param<T>& param) const {
  auto it = tensors.find(param.name);
  if (it == tensors.end()) fail(ErrorCode::kModelLoad, "weights lack tensor " + param.name);
  const StoredTensor& t = it->second;
  if (t.rows != param.value.rows() || t.cols != param.value.cols()) {
    fail(ErrorCode::kModelLoad, "tensor " + param.name + " has shape [" + std::to_string(t.rows) + ", " +
                                    std::to_string(t.cols) + "], expected [" + std::to_string(param.value.rows()) +
                                    ", " + std::to_string(param.value.cols()) + "]");
  }
  param.value = t.to_matrix<T>();
}

template <typename T>
void Archive::store(const Param<T>& param) {
  tensors[param.name] = StoredTensor::from_matrix(param.value);
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  nlohmann::json meta = archive.meta;
  nlohmann::json index = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : archive.tensors) {
    index[name] = {{"dtype", dtype_name(t.dtype)}, {"shape", {t.rows, t.cols}}, {"offset", offset}};
    offset += t.bytes.size();
  }
  meta["tensors"] = std::move(index);
  const std::string text = meta.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kArchiveVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : archive.tensors) {
      out.write(reinterpret_cast<const char*>(t.bytes.data()), static_cast<std::streamsize>(t.bytes.size()));
    }
    if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kModelLoad, "cannot open weights file " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    fail(ErrorCode::kModelLoad, path.string() + " is not a stancekit weights file");
  }
  const auto version = get<std::uint32_t>(in, "header");
  if (version != kArchiveVersion) {
    fail(ErrorCode::kModelLoad, "unsupported weights format version " + std::to_string(version));
  }
  const auto meta_len = get<std::uint64_t>(in, "header");
  std::string text(meta_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(meta_len))) fail(ErrorCode::kModelLoad, "truncated metadata");
  Archive archive;
  try {
    archive.meta = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kModelLoad, std::string("bad weights metadata: ") + e.what());
  }
  const auto data_start = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::end);
  const auto data_len = static_cast<std::uint64_t>(in.tellg()) - data_start;
  try {
    for (const auto& [name, entry] : archive.meta.at("tensors").items()) {
      StoredTensor t;
      t.dtype = parse_dtype(entry.at("dtype").get<std::string>());
      const auto& shape = entry.at("shape");
      t.rows = shape.at(0).get<std::int64_t>();
      t.cols = shape.at(1).get<std::int64_t>();
      if (t.rows < 0 || t.cols < 0) fail(ErrorCode::kModelLoad, "negative shape for " + name);
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto size = static_cast<std::uint64_t>(t.rows * t.cols) * element_size(t.dtype);
      if (offset + size > data_len) fail(ErrorCode::kModelLoad, "tensor " + name + " extends past end of file");
      t.bytes.resize(size);
      in.seekg(static_cast<std::streamoff>(data_start + offset));
      in.read(reinterpret_cast<char*>(t.bytes.data()), static_cast<std::streamsize>(size));
      archive.tensors.emplace(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kModelLoad, std::string("bad tensor index: ") + e.what());
  }
  archive.meta.erase("tensors");
  return archive;
}

template Matrix<float> StoredTensor::to_matrix<float>() const;
template Matrix<double> StoredTensor::to_matrix<double>() const;
template StoredTensor StoredTensor::from_matrix<float>(const Matrix<float>&);
template StoredTensor StoredTensor::from_matrix<double>(const Matrix<double>&);
template void Archive::load_into<float>(Param<float>&) const;
template void Archive::load_into<double>(Param<double>&) const;
template void Archive::store<float>(const Param<float>&);
template void Archive::store<double>(const Param<double>&);

}  // namespace stancekit::nn
