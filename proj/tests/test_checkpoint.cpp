#include "hvslu/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace hvslu;

namespace {

Checkpoint sample() {
  Checkpoint c;
  c.manifest = {{"format", kCheckpointMagic}, {"kind", "test"}, {"seed", 4}};
  Tensor a({2, 3}, (Matrix(2, 3) << 1.5, -0.0, 1e-300, std::numeric_limits<double>::max(), -7.25, 3.0).finished());
  Tensor b = Tensor::row((RowVector(4) << 0.1, 0.2, 0.3, 0.4).finished());
  c.add({{"layer.a", a}, {"layer.b", b}});
  return c;
}

}  // namespace

TEST(Checkpoint, ByteRoundTrip) {
  const Checkpoint c = sample();
  const std::string bytes = serialize_checkpoint(c);
  EXPECT_EQ(bytes.substr(0, 7), "HVSLU1\n");
  const Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(back.manifest, c.manifest);
  EXPECT_EQ(back.records, c.records);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_TRUE(std::signbit(back.find("layer.a").values[1]));
}

TEST(Checkpoint, LittleEndianLayout) {
  Checkpoint c;
  c.manifest = nlohmann::json::object();
  c.add({{"x", Tensor::row((RowVector(1) << 1.0).finished())}});
  const std::string bytes = serialize_checkpoint(c);
  // magic, u64 manifest length, "{}", u64 count
  std::size_t pos = 7;
  EXPECT_EQ(static_cast<unsigned char>(bytes[pos]), 2);
  for (int i = 1; i < 8; ++i) EXPECT_EQ(bytes[pos + static_cast<std::size_t>(i)], 0);
  pos += 8 + 2;
  EXPECT_EQ(static_cast<unsigned char>(bytes[pos]), 1);
  // trailing value 1.0 = 0x3ff0000000000000 little-endian
  const std::string tail = bytes.substr(bytes.size() - 8);
  EXPECT_EQ(static_cast<unsigned char>(tail[7]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(tail[6]), 0xf0);
}

TEST(Checkpoint, RejectsDamage) {
  const std::string bytes = serialize_checkpoint(sample());
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 1)), CheckpointError);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, 20)), CheckpointError);
  EXPECT_THROW(parse_checkpoint(bytes + "x"), CheckpointError);
  EXPECT_THROW(parse_checkpoint("HVSLU2\n" + bytes.substr(7)), CheckpointError);
  EXPECT_THROW(parse_checkpoint(""), CheckpointError);
}

TEST(Checkpoint, RestoreChecksNamesAndShapes) {
  const Checkpoint c = sample();
  Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({4});
  c.restore({{"layer.a", a}, {"layer.b", b}});
  EXPECT_EQ(a.value()(1, 1), -7.25);
  EXPECT_EQ(b.value()(0, 2), 0.3);
  Tensor wrong = Tensor::zeros({3, 2});
  EXPECT_THROW(c.restore({{"layer.a", wrong}}), CheckpointError);
  EXPECT_THROW(c.restore({{"layer.c", b}}), CheckpointError);
  EXPECT_THROW(c.find("nope"), CheckpointError);
  EXPECT_TRUE(c.contains("layer.b"));
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "hvslu_test_ckpt.bin";
  save_checkpoint(sample(), path);
  EXPECT_EQ(serialize_checkpoint(load_checkpoint(path)), serialize_checkpoint(sample()));
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
}
