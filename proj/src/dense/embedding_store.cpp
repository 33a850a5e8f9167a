#include "coldbench/dense/embedding_store.hpp"

#include <bit>
#include <mutex>
#include <nlohmann/json.hpp>

#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"

namespace coldbench::dense {

namespace fs = std::filesystem;

namespace {

constexpr const char* kBinName = "embeddings.bin";
constexpr const char* kIdxName = "embeddings.idx.jsonl";

void append_le_f32(std::string& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float read_le_f32(const unsigned char* p) {
  std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                       (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace

EmbeddingStore::EmbeddingStore(const fs::path& dir) : dir_(dir) {
  fs::create_directories(dir_);
  const fs::path bin_path = dir_ / kBinName;
  const fs::path idx_path = dir_ / kIdxName;
  std::string bin;
  if (fs::exists(bin_path)) bin = read_file(bin_path);
  if (fs::exists(idx_path)) {
    for_each_line(idx_path, [&](std::string_view line, std::size_t) {
      if (line.empty()) return;
      auto row = nlohmann::json::parse(line, nullptr, false);
      if (row.is_discarded()) return;
      const auto offset = row.value("offset", std::uint64_t{0});
      const auto dim = row.value("dim", std::size_t{0});
      if (dim == 0 || offset + dim * 4 > bin.size()) return;
      Vector v(dim);
      const auto* p = reinterpret_cast<const unsigned char*>(bin.data()) + offset;
      for (std::size_t i = 0; i < dim; ++i) v[i] = read_le_f32(p + 4 * i);
      const std::string model = row.value("model", "");
      model_dims_.emplace(model, dim);
      vectors_.emplace(key(model, row.value("hash", "")), std::move(v));
    });
  }
  bin_size_ = bin.size();
  bin_.open(bin_path, std::ios::binary | std::ios::app);
  idx_.open(idx_path, std::ios::binary | std::ios::app);
  if (!bin_ || !idx_) throw Error("cannot open embedding store in " + dir_.string());
}

std::optional<Vector> EmbeddingStore::get(const std::string& model,
                                          const std::string& hash) const {
  std::shared_lock lock(mutex_);
  auto it = vectors_.find(key(model, hash));
  if (it == vectors_.end()) return std::nullopt;
  return it->second;
}

bool EmbeddingStore::contains(const std::string& model, const std::string& hash) const {
  std::shared_lock lock(mutex_);
  return vectors_.count(key(model, hash)) != 0;
}

void EmbeddingStore::put(const std::string& model, const std::string& hash, const Vector& vec) {
  std::unique_lock lock(mutex_);
  auto [dim_it, fresh_model] = model_dims_.emplace(model, vec.size());
  if (!fresh_model && dim_it->second != vec.size()) {
    throw DataError("embedding store: model " + model + " holds " +
                    std::to_string(dim_it->second) + "-dim vectors, got " +
                    std::to_string(vec.size()));
  }
  auto [it, inserted] = vectors_.emplace(key(model, hash), vec);
  if (!inserted || dir_.empty()) return;

  std::string bytes;
  bytes.reserve(vec.size() * 4);
  for (float f : vec) append_le_f32(bytes, f);
  bin_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  bin_.flush();
  nlohmann::json row = {{"hash", hash}, {"model", model}, {"offset", bin_size_}, {"dim", vec.size()}};
  idx_ << row.dump() << '\n';
  idx_.flush();
  bin_size_ += bytes.size();
  if (!bin_ || !idx_) throw Error("embedding store write failed in " + dir_.string());
}

std::size_t EmbeddingStore::size() const {
  std::shared_lock lock(mutex_);
  return vectors_.size();
}

}  // namespace coldbench::dense
