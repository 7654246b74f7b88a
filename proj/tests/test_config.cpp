#include <gtest/gtest.h>

#include "noov/config.hpp"
#include "test_util.hpp"

using namespace noov;

namespace {

std::string validation_error(const nlohmann::json& j) {
  try {
    run_config_from_json(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(RunConfig, DefaultsMatchTheReferenceSetup) {
  const RunConfig c = run_config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.model.hidden_size, 128);
  EXPECT_EQ(c.model.layers, 2);
  EXPECT_EQ(c.model.batch_size, 32);
  EXPECT_DOUBLE_EQ(c.model.dropout, 0.2);
  EXPECT_DOUBLE_EQ(c.model.grad_clip, 5.0);
  EXPECT_DOUBLE_EQ(c.model.lr, 0.001);
  EXPECT_EQ(c.decode.beam_size, 8);
  EXPECT_DOUBLE_EQ(c.decode.alpha, 0.2);
  EXPECT_EQ(c.decode.lexicon_mode, LexiconMode::context_backoff_global);
  EXPECT_EQ(c.decode.renormalize, Renormalize::softmax);
  EXPECT_TRUE(c.decode.repetition_fix);
  EXPECT_DOUBLE_EQ(c.corpus.test_fraction, 0.2);
  EXPECT_DOUBLE_EQ(c.corpus.dev_fraction, 0.1);
  EXPECT_EQ(c.align.em.iterations, 20);
  EXPECT_EQ(c.align.max_pairs, 5000u);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  c.model.hidden_size = 64;
  c.model.seed = 123456789012345ull;
  c.decode.alpha = 0.4;
  c.decode.lexicon_mode = LexiconMode::context;
  c.decode.renormalize = Renormalize::none;
  c.decode.trigger = RepetitionTrigger::attention_argmax;
  c.align.top_k = 10;
  c.corpus.split_punct = true;
  c.paths.lexicon = "lex.tsv";
  const auto back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.paths.lexicon, "lex.tsv");
}

TEST(RunConfig, PartialSectionsKeepDefaults) {
  const auto c = run_config_from_json(nlohmann::json::parse(R"({"model": {"layers": 1}})"));
  EXPECT_EQ(c.model.layers, 1);
  EXPECT_EQ(c.model.hidden_size, 128);
}

TEST(RunConfig, UnknownKeysAreRejected) {
  EXPECT_NE(validation_error(nlohmann::json::parse(R"({"model": {"hiden_size": 4}})")).find("model.hiden_size"),
            std::string::npos);
  EXPECT_NE(validation_error(nlohmann::json::parse(R"({"optimizer": {}})")).find("optimizer"), std::string::npos);
}

TEST(RunConfig, WrongTypesAndValuesAreRejected) {
  EXPECT_NE(validation_error(nlohmann::json::parse(R"({"model": {"layers": "two"}})")).find("model.layers"),
            std::string::npos);
  EXPECT_FALSE(validation_error(nlohmann::json::parse(R"({"model": {"layers": 1.5}})")).empty());
  EXPECT_FALSE(validation_error(nlohmann::json::parse(R"({"model": {"seed": -1}})")).empty());
  EXPECT_FALSE(validation_error(nlohmann::json::parse(R"({"decode": {"alpha": 2}})")).empty());
  EXPECT_FALSE(validation_error(nlohmann::json::parse(R"({"decode": {"lexicon_mode": "local"}})")).empty());
  EXPECT_FALSE(validation_error(nlohmann::json::parse(R"({"decode": {"repetition_fix": 1}})")).empty());
  EXPECT_FALSE(validation_error(nlohmann::json::parse(R"({"corpus": {"test_fraction": 1.0}})")).empty());
  EXPECT_FALSE(validation_error(nlohmann::json::parse(R"({"model": 3})")).empty());
  EXPECT_FALSE(validation_error(nlohmann::json::parse(R"([1, 2])")).empty());
}

TEST(RunConfig, FileRoundTripAndErrors) {
  tests::TempDir dir;
  RunConfig c;
  c.decode.beam_size = 3;
  save_run_config(c, dir.file("c.json"));
  EXPECT_EQ(load_run_config(dir.file("c.json")).decode.beam_size, 3);
  text::write_file(dir.file("bad.json"), "{ not json");
  EXPECT_THROW(load_run_config(dir.file("bad.json")), FormatError);
  text::write_file(dir.file("unknown.json"), R"({"paths": {"out": "x"}})");
  try {
    load_run_config(dir.file("unknown.json"));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown.json"), std::string::npos);
  }
  EXPECT_THROW(load_run_config(dir.file("missing.json")), IoError);
}
