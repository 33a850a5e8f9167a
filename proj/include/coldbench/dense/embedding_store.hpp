#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace coldbench::dense {

using Vector = std::vector<float>;

/// Append-only cache of embeddings keyed by (model name, content hash).
///
/// When opened on a directory, vectors live in embeddings.bin as
/// little-endian float32 and embeddings.idx.jsonl maps each key to its byte
/// offset and dimension:
///   {"hash": "<sha256>", "model": "<name>", "offset": <bytes>, "dim": <n>}
/// A torn final record (index line without its bytes) is ignored on reopen.
/// One writer, many readers.
class EmbeddingStore {
 public:
  /// In-memory store; nothing is persisted.
  EmbeddingStore() = default;
  /// Opens or creates a persistent store in dir.
  explicit EmbeddingStore(const std::filesystem::path& dir);

  EmbeddingStore(const EmbeddingStore&) = delete;
  EmbeddingStore& operator=(const EmbeddingStore&) = delete;

  std::optional<Vector> get(const std::string& model, const std::string& hash) const;
  bool contains(const std::string& model, const std::string& hash) const;

  /// Adds a vector unless the key already exists (first write wins).
  /// Throws DataError if the model already holds vectors of another dimension.
  void put(const std::string& model, const std::string& hash, const Vector& vec);

  std::size_t size() const;
  bool persistent() const { return !dir_.empty(); }
  const std::filesystem::path& directory() const { return dir_; }

 private:
  static std::string key(const std::string& model, const std::string& hash) {
    return model + '\n' + hash;
  }

  std::filesystem::path dir_;
  std::unordered_map<std::string, Vector> vectors_;
  std::map<std::string, std::size_t> model_dims_;
  std::ofstream bin_;
  std::ofstream idx_;
  std::uint64_t bin_size_ = 0;
  mutable std::shared_mutex mutex_;
};

}  // namespace coldbench::dense
