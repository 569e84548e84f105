#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "bevcv/benchmark.hpp"
#include "bevcv/error.hpp"
#include "bevcv/formats.hpp"
#include "test_util.hpp"

using namespace bevcv;

namespace {

const std::filesystem::path kData = BEVCV_TEST_DATA_DIR;

void put_u16(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t v) {
  b[at] = v & 0xff;
  b[at + 1] = v >> 8;
}

}  // namespace

TEST(EmbeddingFormat, GoldenFileDecodes) {
  const auto bytes = read_file_bytes(kData / "golden_embeddings.bevc");
  const auto set = decode_embeddings(bytes);
  EXPECT_EQ(set.dim, 3u);
  EXPECT_EQ(set.ids, (std::vector<std::uint64_t>{5, 2}));
  EXPECT_EQ(set.values, (std::vector<float>{1, 0, 0, 0, 0.6f, 0.8f}));
  EXPECT_EQ(encode_embeddings(set), bytes);
}

TEST(EmbeddingFormat, RandomRoundTrip) {
  Rng rng(1);
  for (std::size_t n : {0, 1, 17})
    for (std::size_t dim : {1, 8, 512}) {
      auto set = random_unit_set(n, dim, rng);
      for (auto& id : set.ids) id = rng.next_u64();
      const auto bytes = encode_embeddings(set);
      ASSERT_EQ(bytes.size(), 18 + n * 8 + n * dim * 4);
      ASSERT_EQ(decode_embeddings(bytes), set);
    }
}

TEST(EmbeddingFormat, FileRoundTrip) {
  Rng rng(2);
  const auto set = random_unit_set(10, 4, rng);
  const auto path = test::scratch_dir("emb_file") / "e.bevc";
  write_embeddings(path, set);
  EXPECT_EQ(read_embeddings(path), set);
  EXPECT_THROW(read_embeddings(path.parent_path() / "missing.bevc"), IoError);
}

TEST(EmbeddingFormat, RejectsCorruption) {
  auto bytes = read_file_bytes(kData / "golden_embeddings.bevc");
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_embeddings(bad), MalformedFile);
  bad = bytes;
  put_u16(bad, 4, 2);
  try {
    decode_embeddings(bad);
    FAIL() << "expected MalformedFile";
  } catch (const MalformedFile& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
  }
  bad = bytes;
  bad.pop_back();
  EXPECT_THROW(decode_embeddings(bad), MalformedFile);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(decode_embeddings(bad), MalformedFile);
  EXPECT_THROW(decode_embeddings(std::span<const std::uint8_t>(bytes.data(), 3)), MalformedFile);
}

TEST(WeightsFormat, GoldenFileDecodes) {
  const auto bytes = read_file_bytes(kData / "golden_weights.bvwt");
  const auto w = decode_weights(bytes);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w.entries()[0].name, "head.bias");
  EXPECT_EQ(w.get("head.bias").values()[1], -1.25f);
  EXPECT_EQ(w.get("head.weight").dims(), (Dims{2, 3}));
  EXPECT_EQ(w.get("head.weight").values()[3], -4.0f);
  EXPECT_EQ(encode_weights(w.entries()), bytes);
}

TEST(WeightsFormat, RandomRoundTrip) {
  Rng rng(3);
  std::vector<NamedTensor> ts;
  ts.push_back({"a", test::random_tensor({5}, rng)});
  ts.push_back({"b.weight", test::random_tensor({2, 3, 4, 5}, rng)});
  ts.push_back({"\xc3\xa9t\xc3\xa9", test::random_tensor({1, 7}, rng)});
  const auto w = decode_weights(encode_weights(ts));
  EXPECT_EQ(std::vector<NamedTensor>(w.entries().begin(), w.entries().end()), ts);
  const auto path = test::scratch_dir("w_file") / "w.bvwt";
  write_weights(path, w);
  EXPECT_EQ(read_weights(path), w);
  EXPECT_EQ(decode_weights(encode_weights(std::span<const NamedTensor>{})).size(), 0u);
}

TEST(WeightsFormat, RejectsDuplicatesAndCorruption) {
  std::vector<NamedTensor> ts{{"x", Tensor({2})}, {"x", Tensor({3})}};
  EXPECT_THROW(encode_weights(ts), DuplicateTensorName);

  // Golden file with the count bumped to 3 and the first tensor appended.
  auto bytes = read_file_bytes(kData / "golden_weights.bvwt");
  auto dup = bytes;
  dup[6] = 3;
  const std::size_t first_len = 2 + 9 + 1 + 4 + 8;
  dup.insert(dup.end(), bytes.begin() + 10, bytes.begin() + 10 + first_len);
  EXPECT_THROW(decode_weights(dup), DuplicateTensorName);

  auto bad = bytes;
  put_u16(bad, 4, 7);
  EXPECT_THROW(decode_weights(bad), MalformedFile);
  bad = bytes;
  bad[1] = 'X';
  EXPECT_THROW(decode_weights(bad), MalformedFile);
  bad = bytes;
  bad.resize(bad.size() - 2);
  EXPECT_THROW(decode_weights(bad), MalformedFile);
  bad = bytes;
  bad.push_back(1);
  EXPECT_THROW(decode_weights(bad), MalformedFile);
  // Rank 0 for the first tensor.
  bad = bytes;
  bad[10 + 2 + 9] = 0;
  EXPECT_THROW(decode_weights(bad), MalformedFile);
}
