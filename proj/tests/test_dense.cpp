#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "coldbench/dense/dense.hpp"
#include "coldbench/util/error.hpp"
#include "coldbench/util/rng.hpp"
#include "fixtures.hpp"

using namespace coldbench;
using namespace coldbench::dense;
using testing_support::TempDir;

namespace {

// Records every input and returns a deterministic vector per text.
class CountingProvider : public EmbeddingProvider {
 public:
  CountingProvider(std::size_t dim, std::size_t batch = 64) : dim_(dim), batch_(batch) {}
  std::vector<std::vector<double>> embed(const std::string&,
                                         const std::vector<std::string>& inputs) override {
    std::lock_guard lock(mutex_);
    ++calls;
    std::vector<std::vector<double>> out;
    for (const auto& text : inputs) {
      seen.push_back(text);
      std::vector<double> v(dim_);
      for (std::size_t i = 0; i < dim_; ++i) v[i] = static_cast<double>((text.size() * 31 + i * 7) % 13) - 6;
      v[0] = static_cast<double>(text.size());
      out.push_back(std::move(v));
    }
    return out;
  }
  std::size_t max_batch() const override { return batch_; }

  std::size_t calls = 0;
  std::vector<std::string> seen;

 private:
  std::size_t dim_, batch_;
  std::mutex mutex_;
};

EmbeddingProfile profile(std::size_t dim, std::string qp = "", std::string pp = "") {
  return {"test-model", dim, std::move(qp), std::move(pp), ""};
}

}  // namespace

TEST(Store, PersistsAcrossReopen) {
  TempDir dir("store");
  {
    EmbeddingStore store(dir.path());
    store.put("m", "h1", {1.5f, -2.0f, 0.25f});
    store.put("m", "h2", {0.0f, 1.0f, 3.0f});
    store.put("other", "h1", {9.0f});
  }
  EmbeddingStore reopened(dir.path());
  EXPECT_EQ(reopened.size(), 3u);
  EXPECT_EQ(*reopened.get("m", "h1"), (Vector{1.5f, -2.0f, 0.25f}));
  EXPECT_EQ(*reopened.get("other", "h1"), (Vector{9.0f}));
  EXPECT_FALSE(reopened.get("m", "h3").has_value());
}

TEST(Store, FirstWriteWins) {
  TempDir dir("store");
  {
    EmbeddingStore store(dir.path());
    store.put("m", "h", {1.0f, 2.0f});
    store.put("m", "h", {3.0f, 4.0f});
    EXPECT_EQ(*store.get("m", "h"), (Vector{1.0f, 2.0f}));
  }
  EmbeddingStore reopened(dir.path());
  EXPECT_EQ(*reopened.get("m", "h"), (Vector{1.0f, 2.0f}));
  EXPECT_EQ(reopened.size(), 1u);
}

TEST(Store, RejectsMixedDimensionsPerModel) {
  EmbeddingStore store;
  store.put("m", "a", {1.0f, 2.0f});
  EXPECT_THROW(store.put("m", "b", {1.0f}), DataError);
  EXPECT_NO_THROW(store.put("n", "b", {1.0f}));
}

TEST(Store, TornFinalRecordIgnored) {
  TempDir dir("store");
  {
    EmbeddingStore store(dir.path());
    store.put("m", "good", {1.0f, 2.0f});
  }
  {
    // index line written, vector bytes never flushed
    std::ofstream idx(dir.path() / "embeddings.idx.jsonl", std::ios::app);
    idx << nlohmann::json{{"hash", "torn"}, {"model", "m"}, {"offset", 8}, {"dim", 2}}.dump() << "\n";
    idx << "{\"hash\": \"half";
  }
  EmbeddingStore reopened(dir.path());
  EXPECT_TRUE(reopened.contains("m", "good"));
  EXPECT_FALSE(reopened.contains("m", "torn"));
  EXPECT_EQ(reopened.size(), 1u);
}

TEST(Embedder, CacheHitsSkipProvider) {
  TempDir dir("emb");
  CountingProvider provider(4);
  {
    EmbeddingStore store(dir.path());
    Embedder e(profile(4), store, &provider);
    e.embed_texts({"a", "bb", "a"}, Role::Passage);
  }
  EXPECT_EQ(provider.seen, (std::vector<std::string>{"a", "bb"}));
  const auto calls = provider.calls;
  EmbeddingStore store(dir.path());
  Embedder e(profile(4), store, &provider);
  e.embed_texts({"bb", "a"}, Role::Passage);
  EXPECT_EQ(provider.calls, calls);
  Embedder offline(profile(4), store, nullptr);
  EXPECT_NO_THROW(offline.embed_texts({"a"}, Role::Passage));
  EXPECT_THROW(offline.embed_texts({"never seen"}, Role::Passage), OfflineError);
}

TEST(Embedder, PrefixAppliedOncePerRole) {
  EmbeddingStore store;
  CountingProvider provider(3);
  Embedder e(profile(3, "query: ", "passage: "), store, &provider);
  e.embed_one("abc", Role::Query);
  e.embed_one("abc", Role::Passage);
  EXPECT_EQ(provider.seen, (std::vector<std::string>{"query: abc", "passage: abc"}));
  EXPECT_TRUE(store.contains("test-model", content_hash("query: abc")));
}

TEST(Embedder, OrderPreservedAcrossBatches) {
  EmbeddingStore store;
  CountingProvider provider(3, 4);
  Embedder e(profile(3), store, &provider, 3);
  std::vector<std::string> texts;
  for (int i = 0; i < 37; ++i) texts.push_back(std::string(static_cast<std::size_t>(i + 1), 'x'));
  const auto out = e.embed_texts(texts, Role::Passage);
  ASSERT_EQ(out.size(), texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(out[i][0], static_cast<float>(i + 1));
  EXPECT_EQ(provider.calls, 10u);
}

TEST(Embedder, DimensionMismatchIsDataError) {
  EmbeddingStore store;
  CountingProvider provider(1023);
  Embedder e(profile(1024), store, &provider);
  EXPECT_THROW(e.embed_one("t", Role::Query), DataError);
}

TEST(Embedder, HttpProviderWireFormat) {
  testing_support::MockServer server;
  std::vector<nlohmann::json> bodies;
  std::mutex mutex;
  server.on_post("/v1/embeddings", [&](const std::string& body) {
    auto req = nlohmann::json::parse(body);
    {
      std::lock_guard lock(mutex);
      bodies.push_back(req);
    }
    nlohmann::json data = nlohmann::json::array();
    const auto& input = req["input"];
    // answer in reverse order; the client must sort by index
    for (std::size_t i = input.size(); i-- > 0;) {
      const double len = static_cast<double>(input[i].get<std::string>().size());
      data.push_back({{"index", i}, {"embedding", {len, 1.0}}});
    }
    return std::pair{200, nlohmann::json{{"data", data}}.dump()};
  });
  server.start();
  HttpEmbeddingProvider provider(server.endpoint(), "", {.max_attempts = 1}, 2);
  EmbeddingStore store;
  Embedder e(profile(2, "query: ", ""), store, &provider);
  const auto out = e.embed_texts({"abc", "a", "abcdefg"}, Role::Query);
  ASSERT_EQ(bodies.size(), 2u);
  EXPECT_EQ(bodies[0]["model"], "test-model");
  EXPECT_EQ(bodies[0]["input"], (nlohmann::json{"query: abc", "query: a"}));
  EXPECT_EQ(out[0][0], 10.0f);
  EXPECT_EQ(out[1][0], 8.0f);
  EXPECT_EQ(out[2][0], 14.0f);
}

TEST(Cosine, KnownValues) {
  const std::vector<double> a{1, 1}, b{1, 0}, c{-1, -1}, z{0, 0};
  EXPECT_NEAR(cosine(std::span<const double>(a), std::span<const double>(b)), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(cosine(std::span<const double>(a), std::span<const double>(c)), -1.0, 1e-15);
  EXPECT_THROW(cosine(std::span<const double>(a), std::span<const double>(z)), DataError);
  const std::vector<double> three{1, 2, 3};
  EXPECT_THROW(cosine(std::span<const double>(a), std::span<const double>(three)), DataError);
}

TEST(Cosine, ScaleInvariantAndBounded) {
  Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> x(8), y(8);
    for (auto& v : x) v = rng.uniform() * 2 - 1;
    for (auto& v : y) v = rng.uniform() * 2 - 1;
    const double c = cosine(std::span<const double>(x), std::span<const double>(y));
    EXPECT_LE(std::abs(c), 1 + 1e-12);
    const double s = 0.1 + 10 * rng.uniform();
    auto xs = x;
    for (auto& v : xs) v *= s;
    EXPECT_NEAR(cosine(std::span<const double>(xs), std::span<const double>(y)), c, 1e-12);
  }
}

TEST(UserScore, MeanOfCosines) {
  const Vector item{1, 0};
  EXPECT_NEAR(dense_user_score({{1, 0}, {0, 1}}, item), 0.5, 1e-15);
  EXPECT_NEAR(dense_user_score({{1, 1}}, item), 1 / std::sqrt(2.0), 1e-7);
  EXPECT_THROW(dense_user_score({}, item), DataError);
}

TEST(Rank, OrdersByMeanCosineWithIdTieBreak) {
  const auto ds = coldbench::corpus::Dataset::create(
      "d",
      {{"a", {{"title", "zebra"}}}, {"b", {{"title", "apple pie"}}}, {"c", {{"title", "zebra"}}}},
      {{"u", {{"p", "apple"}}, {{"a", 1}, {"b", 2}, {"c", 3}}}});
  const coldbench::corpus::ItemCatalog catalog(ds);
  EmbeddingStore store;
  HashedBowProvider provider(256);
  Embedder e(profile(256), store, &provider);
  bench::Task t;
  t.user_id = "u";
  t.evidence = bench::ProfileEvidence{"apple"};
  t.candidate_ids = {"c", "b", "a"};
  const auto r = rank_dense(t, catalog, e, "dense");
  EXPECT_EQ(r.item_ids, (std::vector<std::string>{"b", "a", "c"}));
  EXPECT_EQ(r.method, "dense");
}

TEST(HashedBow, DeterministicAndNormalizable) {
  HashedBowProvider p(64);
  const auto a = p.embed("m", {"Red fish", "red FISH", ""});
  EXPECT_EQ(a[0], a[1]);
  EXPECT_EQ(a[0].size(), 64u);
}
