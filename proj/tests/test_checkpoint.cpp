#include <gtest/gtest.h>

#include <filesystem>

#include "noov/checkpoint.hpp"
#include "test_util.hpp"

using namespace noov;

namespace {

ModelCheckpoint small_checkpoint() {
  ParallelCorpus c;
  c.add({"el", "gato"}, {"the", "cat"});
  c.add({"la", "casa", "roja"}, {"the", "red", "house"});
  c.add({"un", "perro"}, {"a", "dog"});
  ModelConfig cfg;
  cfg.hidden_size = 6;
  cfg.embedding_size = 5;
  cfg.layers = 2;
  cfg.batch_size = 2;
  cfg.max_epochs = 2;
  cfg.seed = 3;
  return train(c, c, cfg);
}

std::string with_header(const std::string& bytes, const std::function<void(nlohmann::json&)>& edit) {
  const std::uint32_t len = detail::get_u32(bytes, 8);
  auto header = nlohmann::json::parse(bytes.substr(12, len));
  edit(header);
  const std::string hdr = header.dump();
  std::string out = bytes.substr(0, 8);
  detail::put_u32(out, static_cast<std::uint32_t>(hdr.size()));
  return out + hdr + bytes.substr(12 + len);
}

template <class Fn>
std::string format_error(Fn&& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Checkpoint, StartsWithMagicVersionAndHeaderLength) {
  const auto bytes = serialize_checkpoint(small_checkpoint());
  EXPECT_EQ(bytes.substr(0, 4), "NOOV");
  EXPECT_EQ(detail::get_u32(bytes, 4), 1u);
  const auto header = nlohmann::json::parse(bytes.substr(12, detail::get_u32(bytes, 8)));
  EXPECT_EQ(header.at("format"), "noov-checkpoint");
  EXPECT_EQ(bytes.size(), 12 + detail::get_u32(bytes, 8) + header.at("data_bytes").get<std::size_t>());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  tests::TempDir dir;
  const auto ck = small_checkpoint();
  save_checkpoint(ck, dir.file("m.noov"));
  const auto back = load_checkpoint(dir.file("m.noov"));
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.source_vocab.tokens(), ck.source_vocab.tokens());
  EXPECT_EQ(back.target_vocab.tokens(), ck.target_vocab.tokens());
  EXPECT_EQ(back.target_vocab.counts(), ck.target_vocab.counts());
  EXPECT_EQ(back.meta.epoch, ck.meta.epoch);
  EXPECT_EQ(back.meta.dev_loss, ck.meta.dev_loss);
  ASSERT_EQ(back.meta.history.size(), ck.meta.history.size());
  auto p1 = ck.params;
  auto p2 = back.params;
  const auto t1 = p1.tensors(), t2 = p2.tensors();
  for (std::size_t k = 0; k < t1.size(); ++k) EXPECT_EQ(*t1[k].value, *t2[k].value) << t1[k].name;
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ck));
}

TEST(Checkpoint, ReloadedModelGivesIdenticalDistributions) {
  const auto ck = small_checkpoint();
  const auto back = deserialize_checkpoint(serialize_checkpoint(ck));
  const std::vector<int> src{4, 5, 6};
  const auto e1 = encode(ck, src), e2 = encode(back, src);
  auto s1 = initial_state(ck, e1), s2 = initial_state(back, e2);
  int prev = Vocabulary::kBos;
  for (int step = 0; step < 3; ++step) {
    auto r1 = decode_step(ck, s1, prev, e1);
    auto r2 = decode_step(back, s2, prev, e2);
    EXPECT_EQ(r1.distribution, r2.distribution);
    EXPECT_EQ(r1.attention, r2.attention);
    prev = 4 + step;
    s1 = r1.state;
    s2 = r2.state;
  }
}

TEST(Checkpoint, InfiniteDevLossSurvives) {
  auto ck = small_checkpoint();
  ck.meta.dev_loss = std::numeric_limits<double>::infinity();
  EXPECT_TRUE(std::isinf(deserialize_checkpoint(serialize_checkpoint(ck)).meta.dev_loss));
}

TEST(Checkpoint, TruncatedFilesAreRejected) {
  const auto bytes = serialize_checkpoint(small_checkpoint());
  EXPECT_NE(format_error([&] { deserialize_checkpoint(bytes.substr(0, 7)); }).find("truncated"), std::string::npos);
  EXPECT_NE(format_error([&] { deserialize_checkpoint(bytes.substr(0, 40)); }).find("truncated"), std::string::npos);
  EXPECT_NE(format_error([&] { deserialize_checkpoint(bytes.substr(0, bytes.size() - 1)); }).find("truncated"),
            std::string::npos);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), FormatError);
}

TEST(Checkpoint, BadMagicIsRejected) {
  auto bytes = serialize_checkpoint(small_checkpoint());
  bytes[0] = 'X';
  EXPECT_NE(format_error([&] { deserialize_checkpoint(bytes); }).find("magic"), std::string::npos);
}

TEST(Checkpoint, UnknownVersionIsRejected) {
  auto bytes = serialize_checkpoint(small_checkpoint());
  std::string v;
  detail::put_u32(v, 2);
  bytes.replace(4, 4, v);
  EXPECT_NE(format_error([&] { deserialize_checkpoint(bytes); }).find("version 2"), std::string::npos);
}

TEST(Checkpoint, MalformedHeaderIsRejected) {
  auto bytes = serialize_checkpoint(small_checkpoint());
  bytes[12] = '!';
  EXPECT_NE(format_error([&] { deserialize_checkpoint(bytes); }).find("malformed header"), std::string::npos);
  const auto good = serialize_checkpoint(small_checkpoint());
  EXPECT_THROW(deserialize_checkpoint(with_header(good, [](auto& h) { h.erase("meta"); })), FormatError);
  EXPECT_THROW(deserialize_checkpoint(with_header(good, [](auto& h) { h["architecture"]["hidden"] = 7; })),
               FormatError);
  EXPECT_THROW(deserialize_checkpoint(with_header(good, [](auto& h) { h["architecture"]["target_vocab"] = 3; })),
               FormatError);
  EXPECT_THROW(deserialize_checkpoint(with_header(good, [](auto& h) { h["tensors"][0]["offset"] = 1u << 30; })),
               FormatError);
  EXPECT_NO_THROW(deserialize_checkpoint(with_header(good, [](auto&) {})));
}

TEST(Checkpoint, MissingFileIsAnIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.noov"), IoError);
}
