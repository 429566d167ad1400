#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include "bdtrack/errors.hpp"
#include "bdtrack/param_store.hpp"

using namespace bdtrack;

TEST(ParamStore, InitKinds) {
  ParamStore p(3);
  const Tensor& z = p.add("z", {2, 3}, Init::Zeros);
  const Tensor& o = p.add("o", {4}, Init::Ones);
  const Tensor& n = p.add("n", {1000}, Init::TruncNormal, 0.02);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
  for (double v : o.data()) EXPECT_EQ(v, 1.0);
  double mean = 0;
  for (double v : n.data()) {
    EXPECT_LE(std::abs(v), 0.04);
    mean += v / 1000;
  }
  EXPECT_NEAR(mean, 0.0, 0.003);
  EXPECT_TRUE(z.requires_grad());
  EXPECT_EQ(p.total_values(), 1010u);
}

TEST(ParamStore, DuplicateAndUnknownNames) {
  ParamStore p;
  p.add("a", {1}, Init::Zeros);
  EXPECT_THROW(p.add("a", {2}, Init::Zeros), std::invalid_argument);
  EXPECT_THROW(p.get("b"), std::out_of_range);
}

TEST(ParamStore, SeedDeterminesValues) {
  ParamStore a(9), b(9), c(10);
  EXPECT_EQ(a.add("w", {50}, Init::TruncNormal).data()[7], b.add("w", {50}, Init::TruncNormal).data()[7]);
  EXPECT_NE(a.get("w").data()[7], c.add("w", {50}, Init::TruncNormal).data()[7]);
}

TEST(ParamStore, StreamRoundTripMatchesF32Rounding) {
  ParamStore p(4);
  p.add("layer.w", {3, 2}, Init::TruncNormal, 0.5);
  p.add("b", {2}, Init::Ones);
  p.get("b").mutable_data()[1] = 1.0 / 3;
  std::stringstream ss;
  p.write(ss);
  const ParamStore q = ParamStore::read(ss);
  ParamStore r = p.clone();
  r.round_to_f32();
  ASSERT_EQ(q.size(), 2u);
  for (const auto& [name, t] : r) {
    EXPECT_EQ(q.get(name).shape(), t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) EXPECT_EQ(q.get(name).data()[i], t.data()[i]);
  }
  EXPECT_EQ(q.get("b").data()[1], static_cast<double>(1.0f / 3));
}

TEST(ParamStore, ByteLayout) {
  ParamStore p;
  p.add("ab", {2}, Init::Ones);
  std::stringstream ss;
  p.write(ss);
  const std::string bytes = ss.str();
  // magic 4 + version 4 + count 4 + name_len 4 + name 2 + rank 4 + extent 8 + 2 floats.
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 4 + 2 + 4 + 8 + 8);
  EXPECT_EQ(bytes.substr(0, 4), "BDTK");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  EXPECT_EQ(version, ParamStore::kFormatVersion);
  float one;
  std::memcpy(&one, bytes.data() + 30, 4);
  EXPECT_EQ(one, 1.0f);
}

TEST(ParamStore, RejectsBadStreams) {
  std::stringstream bad("XXXX");
  EXPECT_THROW(ParamStore::read(bad), std::runtime_error);
  ParamStore p;
  p.add("w", {8}, Init::Ones);
  std::stringstream ss;
  p.write(ss);
  std::stringstream cut(ss.str().substr(0, ss.str().size() - 3));
  EXPECT_THROW(ParamStore::read(cut), std::runtime_error);
}

TEST(ParamStore, FileRoundTripAndAssign) {
  const auto path = std::filesystem::temp_directory_path() / "bdtrack_params_test.bin";
  ParamStore p(5);
  p.add("w", {4, 4}, Init::TruncNormal);
  p.save(path);
  ParamStore q = ParamStore::load(path);
  std::filesystem::remove(path);
  ParamStore target(6);
  target.add("w", {4, 4}, Init::Zeros);
  target.assign_from(q);
  EXPECT_EQ(target.get("w").data()[5], q.get("w").data()[5]);
  ParamStore wrong;
  wrong.add("w", {16}, Init::Zeros);
  EXPECT_THROW(wrong.assign_from(q), DimensionError);
}

TEST(ParamStore, CloneIsDeep) {
  ParamStore p;
  p.add("w", {2}, Init::Ones);
  ParamStore c = p.clone();
  c.get("w").mutable_data()[0] = 5;
  EXPECT_EQ(p.get("w").data()[0], 1.0);
}
