#include <gtest/gtest.h>
#include <zlib.h>

#include <fstream>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "coldbench/util/error.hpp"
#include "coldbench/util/files.hpp"
#include "coldbench/util/hash.hpp"
#include "coldbench/util/rng.hpp"
#include "fixtures.hpp"

using namespace coldbench;
using testing_support::TempDir;

TEST(Hash, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, BelowStaysInRangeAndIsRoughlyUniform) {
  Rng rng(7);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(6);
    ASSERT_LT(v, 6u);
    ++counts[v];
  }
  const double p = 1.0 / 6, sd = std::sqrt(n * p * (1 - p));
  for (int c : counts) EXPECT_NEAR(c, n * p, 4 * sd);
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(3);
  double sum = 0;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 10000, 0.5, 0.02);
}

TEST(Rng, ShuffleIsPermutationAndSampleIsSubset) {
  Rng rng(11);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto s = v;
  rng.shuffle(s);
  EXPECT_NE(s, v);
  auto sorted = s;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, v);

  auto pick = rng.sample(v, 10);
  ASSERT_EQ(pick.size(), 10u);
  std::set<int> uniq(pick.begin(), pick.end());
  EXPECT_EQ(uniq.size(), 10u);
  EXPECT_EQ(rng.sample(v, 99).size(), 50u);
}

TEST(Rng, ShuffleOfThreeHitsEveryOrderEvenly) {
  Rng rng(5);
  std::map<std::vector<int>, int> counts;
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    std::vector<int> v{0, 1, 2};
    rng.shuffle(v);
    ++counts[v];
  }
  ASSERT_EQ(counts.size(), 6u);
  const double p = 1.0 / 6, sd = std::sqrt(n * p * (1 - p));
  for (const auto& [_, c] : counts) EXPECT_NEAR(c, n * p, 4 * sd);
}

TEST(Rng, DerivedSeedsDependOnName) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
}

TEST(Files, AtomicWriteThenRead) {
  TempDir dir("files");
  write_file_atomic(dir / "x" / "out.txt", "hello\n");
  EXPECT_EQ(read_file(dir / "x" / "out.txt"), "hello\n");
  write_file_atomic(dir / "x" / "out.txt", "again");
  EXPECT_EQ(read_file(dir / "x" / "out.txt"), "again");
  EXPECT_FALSE(std::filesystem::exists(dir / "x" / "out.txt.tmp"));
}

TEST(Files, ReadMissingFileThrows) {
  EXPECT_THROW(read_file("/nonexistent/coldbench/file"), DataError);
}

TEST(Files, LinesStripCarriageReturnsAndCountFromOne) {
  TempDir dir("lines");
  write_file_atomic(dir / "a.txt", "one\r\ntwo\nthree");
  std::vector<std::pair<std::string, std::size_t>> got;
  for_each_line(dir / "a.txt", [&](std::string_view l, std::size_t n) { got.emplace_back(l, n); });
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0], (std::pair<std::string, std::size_t>{"one", 1}));
  EXPECT_EQ(got[2], (std::pair<std::string, std::size_t>{"three", 3}));
}

TEST(Files, GzipInputIsDecompressed) {
  TempDir dir("gz");
  const auto path = (dir / "a.jsonl.gz").string();
  gzFile f = gzopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  const std::string body = "{\"a\":1}\n{\"a\":2}\n";
  gzwrite(f, body.data(), static_cast<unsigned>(body.size()));
  gzclose(f);
  std::vector<std::string> lines;
  for_each_line(path, [&](std::string_view l, std::size_t) { lines.emplace_back(l); });
  EXPECT_EQ(lines, (std::vector<std::string>{"{\"a\":1}", "{\"a\":2}"}));
}
